use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::Rect;
use crate::error::{Error, Result};

pub const DEFAULT_MAX_DEPTH: u32 = 3;
pub const DEFAULT_SPLIT_PROB: f64 = 0.7;

// split decisions read a stream no region id will ever use
const SPLIT_STREAM: u64 = 1 << 63;

/// Random quad-tree partition of an `height × width` frame.
///
/// Nodes split into four quadrants with probability `split_prob` until
/// `max_depth`; nodes thinner than two pixels stay leaves. Leaves are numbered
/// in depth-first order (top-left, top-right, bottom-left, bottom-right).
pub fn quadtree_leaves(
    height: usize,
    width: usize,
    seed: u64,
    max_depth: u32,
    split_prob: f64,
) -> Result<Vec<Rect>> {
    if !(0.0..=1.0).contains(&split_prob) {
        return Err(Error::arg(format!(
            "split probability {split_prob} outside [0, 1]"
        )));
    }
    if height == 0 || width == 0 {
        return Err(Error::arg("empty frame"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(SPLIT_STREAM);
    let mut leaves = Vec::new();
    split(
        &mut rng,
        (0, 0, height, width),
        0,
        max_depth,
        split_prob,
        &mut leaves,
    );
    Ok(leaves)
}

fn split(
    rng: &mut ChaCha8Rng,
    (top, left, h, w): (usize, usize, usize, usize),
    depth: u32,
    max_depth: u32,
    split_prob: f64,
    leaves: &mut Vec<Rect>,
) {
    let divisible = h >= 2 && w >= 2;
    if depth < max_depth && divisible && rng.random_bool(split_prob) {
        let (h0, w0) = (h / 2, w / 2);
        let quads = [
            (top, left, h0, w0),
            (top, left + w0, h0, w - w0),
            (top + h0, left, h - h0, w0),
            (top + h0, left + w0, h - h0, w - w0),
        ];
        for q in quads {
            split(rng, q, depth + 1, max_depth, split_prob, leaves);
        }
    } else {
        leaves.push(Rect {
            id: leaves.len() as u32,
            top,
            left,
            height: h,
            width: w,
        });
    }
}
