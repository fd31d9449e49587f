//! Lightness order error.
//!
//! For every ordered pixel pair `(x, y)` the relation `L(x) >= L(y)` is
//! compared between the original and the enhanced lightness; LOE is the number
//! of disagreeing pairs divided by the pixel count. Both images are first
//! reduced with nearest-neighbour sampling so the shorter side is at most
//! `grid` pixels.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::image::{ensure_same_shape, lightness, resize_nearest, FloatMap, Image, Raster};

pub const DEFAULT_LOE_GRID: usize = 50;
pub const BRUTE_FORCE_MAX_PIXELS: usize = 128 * 128;

/// Target size for the LOE reduction; identity when the short side already fits.
pub fn loe_sample_dims(height: usize, width: usize, grid: usize) -> (usize, usize) {
    let short = height.min(width);
    if short <= grid {
        (height, width)
    } else {
        (
            (height * grid / short).max(1),
            (width * grid / short).max(1),
        )
    }
}

/// Sampled LOE with the shorter side reduced to `grid`.
pub fn loe(original: &Image, enhanced: &Image, grid: usize) -> Result<f64> {
    ensure_same_shape(original, enhanced)?;
    if grid == 0 {
        return Err(Error::arg("LOE grid must be positive"));
    }
    let (h, w) = loe_sample_dims(original.height(), original.width(), grid);
    let a = resize_nearest(&lightness(original), h, w)?;
    let b = resize_nearest(&lightness(enhanced), h, w)?;
    Ok(order_error(&a, &b))
}

fn order_error(a: &FloatMap, b: &FloatMap) -> f64 {
    let la = a.samples();
    let lb = b.samples();
    let disagreements: u64 = la
        .par_iter()
        .zip(lb.par_iter())
        .map(|(&ax, &bx)| {
            la.iter()
                .zip(lb)
                .filter(|&(&ay, &by)| (ax >= ay) != (bx >= by))
                .count() as u64
        })
        .sum();
    disagreements as f64 / la.len() as f64
}

/// Unsampled reference: all pairs of the full-resolution lightness maps.
pub fn loe_bruteforce(original: &Image, enhanced: &Image) -> Result<f64> {
    ensure_same_shape(original, enhanced)?;
    let n = original.pixel_count();
    if n > BRUTE_FORCE_MAX_PIXELS {
        return Err(Error::arg(format!(
            "{n} pixels exceed the {BRUTE_FORCE_MAX_PIXELS}-pixel brute-force limit"
        )));
    }
    let a = lightness(original);
    let b = lightness(enhanced);
    let (la, lb) = (a.samples(), b.samples());
    let mut count = 0u64;
    for x in 0..n {
        for y in 0..n {
            let u_orig = la[x] >= la[y];
            let u_enh = lb[x] >= lb[y];
            if u_orig ^ u_enh {
                count += 1;
            }
        }
    }
    Ok(count as f64 / n as f64)
}
