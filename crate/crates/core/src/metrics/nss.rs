//! Natural scene statistics shared by NIQE and BRISQUE: MSCN coefficients and
//! (asymmetric) generalized Gaussian moment-matching fits.

use std::sync::OnceLock;

use serde::{Deserialize, Serialize};
use statrs::function::gamma::{gamma, ln_gamma};

use crate::error::{Error, Result};
use crate::image::{FloatMap, Image, Raster};

pub const MIN_FIT_SAMPLES: usize = 16;
const SHAPE_MIN: f64 = 0.2;
const SHAPE_MAX: f64 = 10.0;
const SHAPE_STEP_PER_UNIT: f64 = 1000.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MscnParams {
    /// Side of the Gaussian window; must be odd.
    pub window: usize,
    pub sigma: f64,
    /// Stabilizer added to the local deviation, on the 0..255 scale.
    pub c: f64,
}

impl Default for MscnParams {
    fn default() -> Self {
        MscnParams {
            window: 7,
            sigma: 7.0 / 6.0,
            c: 1.0,
        }
    }
}

/// Rec.601 luma on the 0..255 scale. Gray images are just rescaled.
pub fn luminance_255(image: &Image) -> FloatMap {
    let data = match image.channels() {
        1 => image.samples().iter().map(|v| v * 255.0).collect(),
        _ => image
            .samples()
            .chunks_exact(3)
            .map(|p| 255.0 * (0.299 * p[0] + 0.587 * p[1] + 0.114 * p[2]))
            .collect(),
    };
    FloatMap::from_parts_unchecked(image.height(), image.width(), 1, data)
}

/// 2x2 box average, dropping an odd trailing row/column.
pub fn downsample_half(map: &FloatMap) -> Result<FloatMap> {
    let (h, w) = (map.height() / 2, map.width() / 2);
    if h == 0 || w == 0 || map.channels() != 1 {
        return Err(Error::arg("cannot halve a map this small"));
    }
    let mut data = Vec::with_capacity(h * w);
    for y in 0..h {
        for x in 0..w {
            let s = map.at(2 * y, 2 * x, 0)
                + map.at(2 * y, 2 * x + 1, 0)
                + map.at(2 * y + 1, 2 * x, 0)
                + map.at(2 * y + 1, 2 * x + 1, 0);
            data.push(s * 0.25);
        }
    }
    Ok(FloatMap::from_parts_unchecked(h, w, 1, data))
}

/// Normalized 1-D Gaussian taps; the 2-D window is their outer product.
pub fn gaussian_taps(window: usize, sigma: f64) -> Vec<f64> {
    let half = (window / 2) as f64;
    let raw: Vec<f64> = (0..window)
        .map(|i| {
            let d = i as f64 - half;
            (-d * d / (2.0 * sigma * sigma)).exp()
        })
        .collect();
    let total: f64 = raw.iter().sum();
    raw.into_iter().map(|v| v / total).collect()
}

/// Separable filtering with replicate padding.
fn blur(data: &[f64], h: usize, w: usize, taps: &[f64]) -> Vec<f64> {
    let r = taps.len() / 2;
    let mut tmp = vec![0.0; h * w];
    for y in 0..h {
        let row = &data[y * w..(y + 1) * w];
        for x in 0..w {
            let mut acc = 0.0;
            for (k, t) in taps.iter().enumerate() {
                let xx = (x + k).saturating_sub(r).min(w - 1);
                acc += t * row[xx];
            }
            tmp[y * w + x] = acc;
        }
    }
    let mut out = vec![0.0; h * w];
    for y in 0..h {
        for x in 0..w {
            let mut acc = 0.0;
            for (k, t) in taps.iter().enumerate() {
                let yy = (y + k).saturating_sub(r).min(h - 1);
                acc += t * tmp[yy * w + x];
            }
            out[y * w + x] = acc;
        }
    }
    out
}

/// MSCN coefficients together with the local deviation field they were
/// normalized by.
#[derive(Debug, Clone)]
pub struct Mscn {
    pub coefficients: FloatMap,
    pub deviation: FloatMap,
}

pub fn mscn_with_deviation(luminance: &FloatMap, params: &MscnParams) -> Result<Mscn> {
    if luminance.channels() != 1 {
        return Err(Error::ChannelCount {
            expected: 1,
            found: luminance.channels(),
        });
    }
    let positive = |v: f64| v > 0.0 && v.is_finite();
    if params.window.is_multiple_of(2) || !positive(params.c) || !positive(params.sigma) {
        return Err(Error::arg("MSCN window must be odd, sigma and C positive"));
    }
    let (h, w) = (luminance.height(), luminance.width());
    let taps = gaussian_taps(params.window, params.sigma);
    let src = luminance.samples();
    let mu = blur(src, h, w, &taps);
    let sq: Vec<f64> = src.iter().map(|v| v * v).collect();
    let mu_sq = blur(&sq, h, w, &taps);
    let sigma: Vec<f64> = mu_sq
        .iter()
        .zip(&mu)
        .map(|(s, m)| (s - m * m).max(0.0).sqrt())
        .collect();
    let coeffs = src
        .iter()
        .zip(&mu)
        .zip(&sigma)
        .map(|((v, m), s)| (v - m) / (s + params.c))
        .collect();
    Ok(Mscn {
        coefficients: FloatMap::from_parts_unchecked(h, w, 1, coeffs),
        deviation: FloatMap::from_parts_unchecked(h, w, 1, sigma),
    })
}

/// `(I - μ) / (σ + C)` with Gaussian-weighted local statistics.
pub fn mscn(luminance: &FloatMap, params: &MscnParams) -> Result<FloatMap> {
    Ok(mscn_with_deviation(luminance, params)?.coefficients)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GgdFit {
    pub alpha: f64,
    pub sigma: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AggdFit {
    pub alpha: f64,
    pub sigma_l: f64,
    pub sigma_r: f64,
    pub eta: f64,
}

struct ShapeTable {
    shapes: Vec<f64>,
    ratios: Vec<f64>,
}

/// `Γ(2/γ)² / (Γ(1/γ) Γ(3/γ))` for γ in [0.2, 10] at 0.001 spacing.
fn shape_table() -> &'static ShapeTable {
    static TABLE: OnceLock<ShapeTable> = OnceLock::new();
    TABLE.get_or_init(|| {
        let steps = ((SHAPE_MAX - SHAPE_MIN) * SHAPE_STEP_PER_UNIT).round() as usize;
        let shapes: Vec<f64> = (0..=steps)
            .map(|i| ((SHAPE_MIN * SHAPE_STEP_PER_UNIT).round() + i as f64) / SHAPE_STEP_PER_UNIT)
            .collect();
        let ratios = shapes
            .iter()
            .map(|&g| generalized_gaussian_ratio(g))
            .collect();
        ShapeTable { shapes, ratios }
    })
}

pub fn generalized_gaussian_ratio(shape: f64) -> f64 {
    (2.0 * ln_gamma(2.0 / shape) - ln_gamma(1.0 / shape) - ln_gamma(3.0 / shape)).exp()
}

/// Table shape whose ratio is nearest to `rho`; ties go to the smaller shape.
pub fn shape_from_ratio(rho: f64) -> f64 {
    let t = shape_table();
    // ratio increases with shape
    let idx = t.ratios.partition_point(|&r| r < rho);
    if idx == 0 {
        return t.shapes[0];
    }
    if idx == t.ratios.len() {
        return t.shapes[idx - 1];
    }
    let below = rho - t.ratios[idx - 1];
    let above = t.ratios[idx] - rho;
    if above < below {
        t.shapes[idx]
    } else {
        t.shapes[idx - 1]
    }
}

fn check_samples(samples: &[f64]) -> Result<()> {
    if samples.len() < MIN_FIT_SAMPLES {
        return Err(Error::Fit(format!(
            "{} samples, need at least {MIN_FIT_SAMPLES}",
            samples.len()
        )));
    }
    if samples.iter().any(|v| !v.is_finite()) {
        return Err(Error::Fit("non-finite sample".into()));
    }
    Ok(())
}

/// Moment-matching GGD fit: shape from `(E|x|)² / E[x²]`, scale `sqrt(E[x²])`.
pub fn fit_ggd(samples: &[f64]) -> Result<GgdFit> {
    check_samples(samples)?;
    let n = samples.len() as f64;
    let (abs_sum, sq_sum) = samples
        .iter()
        .fold((0.0, 0.0), |(a, s), &v| (a + v.abs(), s + v * v));
    let mean_sq = sq_sum / n;
    if mean_sq <= 0.0 {
        return Err(Error::Fit("all samples are zero".into()));
    }
    let mean_abs = abs_sum / n;
    Ok(GgdFit {
        alpha: shape_from_ratio(mean_abs * mean_abs / mean_sq),
        sigma: mean_sq.sqrt(),
    })
}

/// Moment-matching AGGD fit with separate left/right scales.
pub fn fit_aggd(samples: &[f64]) -> Result<AggdFit> {
    check_samples(samples)?;
    let (mut left_sq, mut left_n, mut right_sq, mut right_n) = (0.0, 0usize, 0.0, 0usize);
    let (mut abs_sum, mut sq_sum) = (0.0, 0.0);
    for &v in samples {
        if v < 0.0 {
            left_sq += v * v;
            left_n += 1;
        } else if v > 0.0 {
            right_sq += v * v;
            right_n += 1;
        }
        abs_sum += v.abs();
        sq_sum += v * v;
    }
    if left_n == 0 || right_n == 0 {
        return Err(Error::Fit("samples must take both signs".into()));
    }
    let sigma_l = (left_sq / left_n as f64).sqrt();
    let sigma_r = (right_sq / right_n as f64).sqrt();
    let n = samples.len() as f64;
    let mean_abs = abs_sum / n;
    let rho = mean_abs * mean_abs / (sq_sum / n);
    let g = sigma_l / sigma_r;
    let adjusted = rho * (g.powi(3) + 1.0) * (g + 1.0) / (g * g + 1.0).powi(2);
    let alpha = shape_from_ratio(adjusted);
    let spread = (gamma(1.0 / alpha) / gamma(3.0 / alpha)).sqrt();
    let eta = (sigma_r - sigma_l) * spread * gamma(2.0 / alpha) / gamma(1.0 / alpha);
    Ok(AggdFit {
        alpha,
        sigma_l,
        sigma_r,
        eta,
    })
}

/// Pairwise neighbour products of a coefficient window: horizontal, vertical,
/// main diagonal, anti-diagonal.
pub fn neighbour_products(map: &FloatMap) -> [Vec<f64>; 4] {
    let (h, w) = (map.height(), map.width());
    let s = map.samples();
    let mut out: [Vec<f64>; 4] = Default::default();
    for y in 0..h {
        for x in 0..w {
            let v = s[y * w + x];
            if x + 1 < w {
                out[0].push(v * s[y * w + x + 1]);
            }
            if y + 1 < h {
                out[1].push(v * s[(y + 1) * w + x]);
                if x + 1 < w {
                    out[2].push(v * s[(y + 1) * w + x + 1]);
                }
                if x > 0 {
                    out[3].push(v * s[(y + 1) * w + x - 1]);
                }
            }
        }
    }
    out
}

/// 18 features of one coefficient window: GGD `(α, σ²)` followed by AGGD
/// `(α, η, σ_l², σ_r²)` for each of the four products.
pub fn nss_features(coefficients: &FloatMap) -> Result<[f64; 18]> {
    let mut f = [0.0; 18];
    let g = fit_ggd(coefficients.samples())?;
    f[0] = g.alpha;
    f[1] = g.sigma * g.sigma;
    for (i, prod) in neighbour_products(coefficients).iter().enumerate() {
        let a = fit_aggd(prod)?;
        let base = 2 + 4 * i;
        f[base] = a.alpha;
        f[base + 1] = a.eta;
        f[base + 2] = a.sigma_l * a.sigma_l;
        f[base + 3] = a.sigma_r * a.sigma_r;
    }
    Ok(f)
}
