//! SLIC superpixels: localized k-means over CIELAB color and pixel position.

use std::collections::VecDeque;

use png::ColorType;
use serde::{Deserialize, Serialize};

use crate::color::{rgb_to_lab, LabImage};
use crate::error::{Error, Result};
use crate::image::{Image, Raster};
use crate::png_io::{write_png_raw, BitDepth};

const UNASSIGNED: u32 = u32::MAX;
const CONVERGENCE: f64 = 0.25;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SlicParams {
    /// Target number of superpixels.
    pub k: usize,
    /// Compactness `m`; larger values favour square, grid-like regions.
    pub compactness: f64,
    pub max_iters: usize,
    /// Components smaller than `min_region_frac * S²` are merged into a neighbour.
    pub min_region_frac: f64,
}

impl Default for SlicParams {
    fn default() -> Self {
        SlicParams {
            k: 256,
            compactness: 10.0,
            max_iters: 10,
            min_region_frac: 0.25,
        }
    }
}

impl SlicParams {
    pub fn validate(&self, pixel_count: usize) -> Result<()> {
        if self.k == 0 || self.k > pixel_count {
            return Err(Error::arg(format!(
                "superpixel count {} must be in [1, {pixel_count}]",
                self.k
            )));
        }
        if !(self.compactness > 0.0 && self.compactness.is_finite()) {
            return Err(Error::arg("compactness must be positive"));
        }
        if self.max_iters == 0 {
            return Err(Error::arg("max_iters must be at least 1"));
        }
        if !(self.min_region_frac > 0.0 && self.min_region_frac <= 1.0) {
            return Err(Error::arg("min_region_frac must be in (0, 1]"));
        }
        Ok(())
    }
}

/// Dense per-pixel region ids in `[0, count)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SuperpixelLabels {
    height: usize,
    width: usize,
    labels: Vec<u32>,
    count: usize,
}

impl SuperpixelLabels {
    /// Wraps a label map after checking that ids are dense.
    pub fn from_raw(height: usize, width: usize, labels: Vec<u32>) -> Result<Self> {
        if height == 0 || width == 0 || labels.len() != height * width {
            return Err(Error::arg("label map does not match its dimensions"));
        }
        let count = labels.iter().map(|&l| l as usize + 1).max().unwrap_or(0);
        let mut seen = vec![false; count];
        for &l in &labels {
            seen[l as usize] = true;
        }
        if seen.iter().any(|s| !s) {
            return Err(Error::arg("label ids are not dense"));
        }
        Ok(SuperpixelLabels {
            height,
            width,
            labels,
            count,
        })
    }

    /// One region covering the whole frame.
    pub fn single(height: usize, width: usize) -> Self {
        SuperpixelLabels {
            height,
            width,
            labels: vec![0; height * width],
            count: 1,
        }
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn labels(&self) -> &[u32] {
        &self.labels
    }

    #[inline]
    pub fn label(&self, row: usize, col: usize) -> u32 {
        self.labels[row * self.width + col]
    }

    pub fn region_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.count];
        for &l in &self.labels {
            sizes[l as usize] += 1;
        }
        sizes
    }

    /// True when every region forms a single 4-connected component.
    pub fn regions_are_connected(&self) -> bool {
        let (components, _) = connected_components(self.height, self.width, &self.labels);
        components.len() == self.count
    }

    /// Region ids as raw 16-bit gray samples.
    pub fn encode_png(&self) -> Result<Vec<u8>> {
        if self.count > 65535 {
            return Err(Error::arg(format!(
                "{} regions do not fit in 16-bit label ids",
                self.count
            )));
        }
        let raw: Vec<u8> = self
            .labels
            .iter()
            .flat_map(|&l| (l as u16).to_be_bytes())
            .collect();
        write_png_raw(
            self.height,
            self.width,
            ColorType::Grayscale,
            BitDepth::Sixteen,
            &raw,
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionSummary {
    pub id: u32,
    pub size: usize,
    pub mean_lab: [f64; 3],
}

pub fn region_summaries(labels: &SuperpixelLabels, lab: &LabImage) -> Result<Vec<RegionSummary>> {
    if (lab.height(), lab.width()) != (labels.height, labels.width) {
        return Err(Error::DimensionMismatch {
            left: (labels.height, labels.width, 1),
            right: (lab.height(), lab.width(), 3),
        });
    }
    let mut sums = vec![[0.0f64; 3]; labels.count];
    let mut sizes = vec![0usize; labels.count];
    for (&l, px) in labels.labels.iter().zip(lab.pixels()) {
        let s = &mut sums[l as usize];
        for i in 0..3 {
            s[i] += px[i];
        }
        sizes[l as usize] += 1;
    }
    Ok(sums
        .into_iter()
        .zip(sizes)
        .enumerate()
        .map(|(id, (sum, size))| RegionSummary {
            id: id as u32,
            size,
            mean_lab: sum.map(|v| v / size as f64),
        })
        .collect())
}

#[derive(Debug, Clone, Copy)]
struct Center {
    lab: [f64; 3],
    y: f64,
    x: f64,
}

#[inline]
fn lab_dist2(a: [f64; 3], b: [f64; 3]) -> f64 {
    let d0 = a[0] - b[0];
    let d1 = a[1] - b[1];
    let d2 = a[2] - b[2];
    d0 * d0 + d1 * d1 + d2 * d2
}

fn gradient(lab: &LabImage, y: usize, x: usize) -> f64 {
    let (h, w) = (lab.height(), lab.width());
    let dx = lab_dist2(
        lab.at(y, (x + 1).min(w - 1)),
        lab.at(y, x.saturating_sub(1)),
    );
    let dy = lab_dist2(
        lab.at((y + 1).min(h - 1), x),
        lab.at(y.saturating_sub(1), x),
    );
    dx + dy
}

/// Grid of `rows × cols` seeds whose product is close to `k` and whose
/// aspect follows the image.
pub(crate) fn seed_grid(height: usize, width: usize, k: usize) -> (usize, usize) {
    let rows = ((k as f64 * height as f64 / width as f64).sqrt().round() as usize).clamp(1, height);
    let cols = ((k as f64 / rows as f64).round() as usize).clamp(1, width);
    (rows, cols)
}

fn initial_centers(lab: &LabImage, k: usize) -> Vec<Center> {
    let (h, w) = (lab.height(), lab.width());
    let (rows, cols) = seed_grid(h, w, k);
    let mut centers = Vec::with_capacity(rows * cols);
    for r in 0..rows {
        for c in 0..cols {
            let y = (r as f64 + 0.5) * h as f64 / rows as f64 - 0.5;
            let x = (c as f64 + 0.5) * w as f64 / cols as f64 - 0.5;
            let (iy, ix) = (
                (y.round() as usize).min(h - 1),
                (x.round() as usize).min(w - 1),
            );
            let mut best = (gradient(lab, iy, ix), iy, ix);
            for ny in iy.saturating_sub(1)..=(iy + 1).min(h - 1) {
                for nx in ix.saturating_sub(1)..=(ix + 1).min(w - 1) {
                    let g = gradient(lab, ny, nx);
                    if g < best.0 {
                        best = (g, ny, nx);
                    }
                }
            }
            let (cy, cx) = if (best.1, best.2) == (iy, ix) {
                (y, x)
            } else {
                (best.1 as f64, best.2 as f64)
            };
            centers.push(Center {
                lab: lab.at(best.1, best.2),
                y: cy,
                x: cx,
            });
        }
    }
    centers
}

/// Runs SLIC on a 3-channel image.
pub fn slic(image: &Image, params: &SlicParams) -> Result<SuperpixelLabels> {
    if image.channels() != 3 {
        return Err(Error::ChannelCount {
            expected: 3,
            found: image.channels(),
        });
    }
    params.validate(image.pixel_count())?;
    let lab = rgb_to_lab(image)?;
    let (h, w) = (image.height(), image.width());
    let n = h * w;
    let step = (n as f64 / params.k as f64).sqrt().round().max(1.0);
    let spatial_weight = (params.compactness / step).powi(2);

    let mut centers = initial_centers(&lab, params.k);
    let mut labels = vec![UNASSIGNED; n];
    let mut dist = vec![f64::INFINITY; n];
    let pixels = lab.pixels();

    for _ in 0..params.max_iters {
        labels.fill(UNASSIGNED);
        dist.fill(f64::INFINITY);
        for (ci, c) in centers.iter().enumerate() {
            let y0 = (c.y - step).floor().max(0.0) as usize;
            let y1 = ((c.y + step).ceil() as usize).min(h - 1);
            let x0 = (c.x - step).floor().max(0.0) as usize;
            let x1 = ((c.x + step).ceil() as usize).min(w - 1);
            for y in y0..=y1 {
                let dy = y as f64 - c.y;
                let row = y * w;
                for x in x0..=x1 {
                    let dx = x as f64 - c.x;
                    let p = row + x;
                    // squared distance; strict `<` keeps the lowest center index on ties
                    let d = lab_dist2(pixels[p], c.lab) + (dy * dy + dx * dx) * spatial_weight;
                    if d < dist[p] {
                        dist[p] = d;
                        labels[p] = ci as u32;
                    }
                }
            }
        }

        let mut sums = vec![[0.0f64; 5]; centers.len()];
        let mut counts = vec![0usize; centers.len()];
        for (p, &l) in labels.iter().enumerate() {
            if l == UNASSIGNED {
                continue;
            }
            let s = &mut sums[l as usize];
            let px = pixels[p];
            s[0] += px[0];
            s[1] += px[1];
            s[2] += px[2];
            s[3] += (p / w) as f64;
            s[4] += (p % w) as f64;
            counts[l as usize] += 1;
        }
        let mut movement = 0.0f64;
        for ((c, s), &count) in centers.iter_mut().zip(&sums).zip(&counts) {
            if count == 0 {
                continue;
            }
            let inv = 1.0 / count as f64;
            let next = Center {
                lab: [s[0] * inv, s[1] * inv, s[2] * inv],
                y: s[3] * inv,
                x: s[4] * inv,
            };
            let (dy, dx) = (next.y - c.y, next.x - c.x);
            let moved = (lab_dist2(next.lab, c.lab) + (dy * dy + dx * dx) * spatial_weight).sqrt();
            movement = movement.max(moved);
            *c = next;
        }
        if movement < CONVERGENCE {
            break;
        }
    }

    let min_size = params.min_region_frac * step * step;
    let labels = enforce_connectivity(h, w, &labels, min_size);
    let count = labels.iter().map(|&l| l as usize + 1).max().unwrap_or(0);
    Ok(SuperpixelLabels {
        height: h,
        width: w,
        labels,
        count,
    })
}

/// Component id per pixel, plus per-component pixel lists in discovery order.
fn connected_components(h: usize, w: usize, labels: &[u32]) -> (Vec<Vec<usize>>, Vec<usize>) {
    let n = h * w;
    let mut comp = vec![usize::MAX; n];
    let mut members: Vec<Vec<usize>> = Vec::new();
    let mut queue = VecDeque::new();
    for start in 0..n {
        if comp[start] != usize::MAX {
            continue;
        }
        let id = members.len();
        let target = labels[start];
        let mut list = vec![start];
        comp[start] = id;
        queue.push_back(start);
        while let Some(p) = queue.pop_front() {
            let (y, x) = (p / w, p % w);
            let mut visit = |q: usize| {
                if comp[q] == usize::MAX && labels[q] == target {
                    comp[q] = id;
                    list.push(q);
                    queue.push_back(q);
                }
            };
            if x > 0 {
                visit(p - 1);
            }
            if x + 1 < w {
                visit(p + 1);
            }
            if y > 0 {
                visit(p - w);
            }
            if y + 1 < h {
                visit(p + w);
            }
        }
        members.push(list);
    }
    (members, comp)
}

fn find(parent: &mut [usize], mut i: usize) -> usize {
    while parent[i] != i {
        parent[i] = parent[parent[i]];
        i = parent[i];
    }
    i
}

/// Splits labels into 4-connected components, merges components below
/// `min_size` (and unassigned pixels) into their largest neighbour, and
/// re-indexes densely in raster order.
fn enforce_connectivity(h: usize, w: usize, labels: &[u32], min_size: f64) -> Vec<u32> {
    let (members, comp) = connected_components(h, w, labels);
    let mut parent: Vec<usize> = (0..members.len()).collect();
    let mut size: Vec<usize> = members.iter().map(Vec::len).collect();

    for i in 0..members.len() {
        let unassigned = labels[members[i][0]] == UNASSIGNED;
        let root = find(&mut parent, i);
        if !unassigned && size[root] as f64 >= min_size {
            continue;
        }
        let mut best: Option<(usize, usize)> = None;
        for &p in &members[i] {
            let (y, x) = (p / w, p % w);
            let neighbours = [
                (x > 0).then(|| p - 1),
                (x + 1 < w).then(|| p + 1),
                (y > 0).then(|| p - w),
                (y + 1 < h).then(|| p + w),
            ];
            for q in neighbours.into_iter().flatten() {
                let r = find(&mut parent, comp[q]);
                if r == root {
                    continue;
                }
                let better = match best {
                    None => true,
                    Some((bs, br)) => size[r] > bs || (size[r] == bs && r < br),
                };
                if better {
                    best = Some((size[r], r));
                }
            }
        }
        if let Some((_, target)) = best {
            parent[root] = target;
            size[target] += size[root];
        }
    }

    let mut dense = vec![u32::MAX; members.len()];
    let mut next = 0u32;
    let mut out = vec![0u32; h * w];
    for p in 0..h * w {
        let r = find(&mut parent, comp[p]);
        if dense[r] == u32::MAX {
            dense[r] = next;
            next += 1;
        }
        out[p] = dense[r];
    }
    out
}

/// Copy of `image` with pixels bordering a different label painted red
/// (white for gray images).
pub fn boundary_overlay(image: &Image, labels: &SuperpixelLabels) -> Result<Image> {
    if (image.height(), image.width()) != (labels.height, labels.width) {
        return Err(Error::DimensionMismatch {
            left: image.shape(),
            right: (labels.height, labels.width, 1),
        });
    }
    let (h, w, c) = image.shape();
    let marker: &[f64] = if c == 3 { &[1.0, 0.0, 0.0] } else { &[1.0] };
    let mut data = image.samples().to_vec();
    for y in 0..h {
        for x in 0..w {
            let l = labels.label(y, x);
            let edge = (x > 0 && labels.label(y, x - 1) != l)
                || (x + 1 < w && labels.label(y, x + 1) != l)
                || (y > 0 && labels.label(y - 1, x) != l)
                || (y + 1 < h && labels.label(y + 1, x) != l);
            if edge {
                let start = (y * w + x) * c;
                data[start..start + c].copy_from_slice(marker);
            }
        }
    }
    Image::new(h, w, c, data)
}
