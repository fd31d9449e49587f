//! Local-illumination synthesis of low-light training pairs.
//!
//! Every region of a partition (superpixels, quad-tree leaves, or the whole
//! frame) is darkened by a weight drawn from `{0.1, 0.2, …, 1.0}`. The
//! attention target is the residual between the original and the darkened
//! image, so `low_light + attention == ground_truth` by construction.

mod dataset;
mod quadtree;

use std::collections::{BTreeMap, BTreeSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

pub use dataset::{write_sample, ManifestEntry};
pub use quadtree::{quadtree_leaves, DEFAULT_MAX_DEPTH, DEFAULT_SPLIT_PROB};

use crate::error::{Error, Result};
use crate::image::{clamp_unit, ensure_same_shape, FloatMap, Image, Raster};
use crate::png_io::{quantize, BitDepth};
use crate::superpixel::SuperpixelLabels;

// window draws use their own stream so they never replay a region's level draw
const CROP_STREAM: u64 = (1 << 63) + 1;

/// One of the ten darkening weights `k / 10` for `k` in `1..=10`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Level(u8);

impl Level {
    pub const FULL: Level = Level(10);
    pub const ALL: [Level; 10] = [
        Level(1),
        Level(2),
        Level(3),
        Level(4),
        Level(5),
        Level(6),
        Level(7),
        Level(8),
        Level(9),
        Level(10),
    ];

    pub fn from_tenths(tenths: u8) -> Result<Self> {
        if (1..=10).contains(&tenths) {
            Ok(Level(tenths))
        } else {
            Err(Error::arg(format!(
                "illumination level {tenths}/10 outside 1..=10"
            )))
        }
    }

    /// Accepts only the ten discrete weights `0.1, …, 1.0`.
    pub fn from_weight(weight: f64) -> Result<Self> {
        let tenths = (weight * 10.0).round();
        if (1.0..=10.0).contains(&tenths) && (weight - tenths / 10.0).abs() < 1e-9 {
            Ok(Level(tenths as u8))
        } else {
            Err(Error::arg(format!(
                "illumination weight {weight} is not one of 0.1, 0.2, ..., 1.0"
            )))
        }
    }

    pub fn tenths(self) -> u8 {
        self.0
    }

    pub fn weight(self) -> f64 {
        self.0 as f64 / 10.0
    }
}

impl Serialize for Level {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_f64(self.weight())
    }
}

impl<'de> Deserialize<'de> for Level {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let w = f64::deserialize(d)?;
        Level::from_weight(w).map_err(serde::de::Error::custom)
    }
}

/// Draws the level of `region` under `seed`.
///
/// Each region reads its own ChaCha stream, so a draw depends only on
/// `(seed, region)` and never on iteration order.
pub fn draw_level(seed: u64, region: u64) -> Level {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(region);
    Level(rng.random_range(1..=10))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Superpixel,
    Quadtree,
    Global,
}

impl std::str::FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "superpixel" => Ok(Mode::Superpixel),
            "quadtree" => Ok(Mode::Quadtree),
            "global" => Ok(Mode::Global),
            other => Err(Error::arg(format!("unknown synthesis mode `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rect {
    pub id: u32,
    pub top: usize,
    pub left: usize,
    pub height: usize,
    pub width: usize,
}

/// Where each region lives, in the coordinates of the image it was applied to.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RegionGeometry {
    /// Per-pixel region ids, run-length encoded in raster order as `[id, run]`.
    Labels {
        height: usize,
        width: usize,
        #[serde(with = "rle")]
        labels: Vec<u32>,
    },
    Rects {
        height: usize,
        width: usize,
        rects: Vec<Rect>,
    },
    Frame {
        height: usize,
        width: usize,
    },
}

mod rle {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(labels: &[u32], s: S) -> Result<S::Ok, S::Error> {
        let mut runs: Vec<[u32; 2]> = Vec::new();
        for &l in labels {
            match runs.last_mut() {
                Some([id, n]) if *id == l => *n += 1,
                _ => runs.push([l, 1]),
            }
        }
        runs.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<u32>, D::Error> {
        let runs = Vec::<[u32; 2]>::deserialize(d)?;
        Ok(runs
            .into_iter()
            .flat_map(|[id, n]| std::iter::repeat_n(id, n as usize))
            .collect())
    }
}

impl RegionGeometry {
    pub fn dims(&self) -> (usize, usize) {
        match *self {
            RegionGeometry::Labels { height, width, .. }
            | RegionGeometry::Rects { height, width, .. }
            | RegionGeometry::Frame { height, width } => (height, width),
        }
    }

    /// Region id of every pixel.
    pub fn id_map(&self) -> Result<Vec<u32>> {
        let (h, w) = self.dims();
        match self {
            RegionGeometry::Labels { labels, .. } => {
                if labels.len() != h * w {
                    return Err(Error::arg("label run lengths do not cover the frame"));
                }
                Ok(labels.clone())
            }
            RegionGeometry::Rects { rects, .. } => {
                let mut ids = vec![u32::MAX; h * w];
                for r in rects {
                    if r.top + r.height > h || r.left + r.width > w {
                        return Err(Error::arg(format!("rect {r:?} outside {h}x{w}")));
                    }
                    for y in r.top..r.top + r.height {
                        ids[y * w + r.left..y * w + r.left + r.width].fill(r.id);
                    }
                }
                if ids.contains(&u32::MAX) {
                    return Err(Error::arg("rects do not cover the frame"));
                }
                Ok(ids)
            }
            RegionGeometry::Frame { .. } => Ok(vec![0; h * w]),
        }
    }

    fn crop(&self, top: usize, left: usize, ph: usize, pw: usize) -> RegionGeometry {
        match self {
            RegionGeometry::Labels { width, labels, .. } => {
                let mut out = Vec::with_capacity(ph * pw);
                for y in top..top + ph {
                    out.extend_from_slice(&labels[y * width + left..y * width + left + pw]);
                }
                RegionGeometry::Labels {
                    height: ph,
                    width: pw,
                    labels: out,
                }
            }
            RegionGeometry::Rects { rects, .. } => {
                let rects = rects
                    .iter()
                    .filter_map(|r| {
                        let y0 = r.top.max(top);
                        let y1 = (r.top + r.height).min(top + ph);
                        let x0 = r.left.max(left);
                        let x1 = (r.left + r.width).min(left + pw);
                        (y0 < y1 && x0 < x1).then(|| Rect {
                            id: r.id,
                            top: y0 - top,
                            left: x0 - left,
                            height: y1 - y0,
                            width: x1 - x0,
                        })
                    })
                    .collect();
                RegionGeometry::Rects {
                    height: ph,
                    width: pw,
                    rects,
                }
            }
            RegionGeometry::Frame { .. } => RegionGeometry::Frame {
                height: ph,
                width: pw,
            },
        }
    }
}

/// Placement of a patch inside the frame it was cut from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CropWindow {
    pub top: usize,
    pub left: usize,
    pub height: usize,
    pub width: usize,
    pub crop_seed: u64,
}

/// Reproducible record of the darkening applied to one image.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IlluminationSpec {
    pub mode: Mode,
    pub seed: u64,
    pub weights: BTreeMap<u32, Level>,
    pub regions: RegionGeometry,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub window: Option<CropWindow>,
}

impl IlluminationSpec {
    /// Replaces every weight with `level`.
    pub fn with_uniform_level(mut self, level: Level) -> Self {
        for w in self.weights.values_mut() {
            *w = level;
        }
        self
    }

    pub fn validate(&self) -> Result<Vec<u32>> {
        let ids = self.regions.id_map()?;
        let present: BTreeSet<u32> = ids.iter().copied().collect();
        if let Some(missing) = present.iter().find(|id| !self.weights.contains_key(id)) {
            return Err(Error::arg(format!("region {missing} has no weight")));
        }
        Ok(ids)
    }
}

/// A ground-truth image, its darkened version, and the attention target.
#[derive(Debug, Clone, PartialEq)]
pub struct SamplePair {
    pub ground_truth: Image,
    pub low_light: Image,
    pub attention: FloatMap,
    pub spec: IlluminationSpec,
}

impl SamplePair {
    /// Largest `|low_light + attention - ground_truth|` over all samples.
    pub fn round_trip_error(&self) -> f64 {
        self.low_light
            .samples()
            .iter()
            .zip(self.attention.samples())
            .zip(self.ground_truth.samples())
            .map(|((l, a), g)| (l + a - g).abs())
            .fold(0.0, f64::max)
    }

    /// Snaps both images to the grid of `depth` and recomputes the attention
    /// residual from the snapped values, as stored on disk.
    pub fn quantized(&self, depth: BitDepth) -> SamplePair {
        let max = depth.max_value();
        let snap = |img: &Image| {
            let data = img
                .samples()
                .iter()
                .map(|&v| quantize(v, depth) as f64 / max)
                .collect();
            Image::from_parts_unchecked(img.height(), img.width(), img.channels(), data)
        };
        let ground_truth = snap(&self.ground_truth);
        let low_light = snap(&self.low_light);
        let attention = residual(&ground_truth, &low_light);
        SamplePair {
            ground_truth,
            low_light,
            attention,
            spec: self.spec.clone(),
        }
    }
}

fn residual(original: &Image, low: &Image) -> FloatMap {
    let data = original
        .samples()
        .iter()
        .zip(low.samples())
        .map(|(o, l)| o - l)
        .collect();
    FloatMap::from_parts_unchecked(
        original.height(),
        original.width(),
        original.channels(),
        data,
    )
}

/// Applies a recorded spec to `image`. All synthesis modes funnel through here.
pub fn synthesize_from_spec(image: &Image, spec: &IlluminationSpec) -> Result<SamplePair> {
    let (h, w, c) = image.shape();
    if spec.regions.dims() != (h, w) {
        let (sh, sw) = spec.regions.dims();
        return Err(Error::DimensionMismatch {
            left: (h, w, c),
            right: (sh, sw, c),
        });
    }
    let ids = spec.validate()?;
    let mut data = Vec::with_capacity(h * w * c);
    for (px, id) in image.samples().chunks_exact(c).zip(&ids) {
        let weight = spec.weights[id].weight();
        data.extend(px.iter().map(|v| v * weight));
    }
    let low_light = Image::from_parts_unchecked(h, w, c, data);
    let attention = residual(image, &low_light);
    Ok(SamplePair {
        ground_truth: image.clone(),
        low_light,
        attention,
        spec: spec.clone(),
    })
}

/// Darkens every superpixel by its own random level.
pub fn synthesize_local(image: &Image, labels: &SuperpixelLabels, seed: u64) -> Result<SamplePair> {
    if (labels.height(), labels.width()) != (image.height(), image.width()) {
        return Err(Error::DimensionMismatch {
            left: image.shape(),
            right: (labels.height(), labels.width(), image.channels()),
        });
    }
    let weights = (0..labels.count() as u32)
        .map(|r| (r, draw_level(seed, r as u64)))
        .collect();
    let spec = IlluminationSpec {
        mode: Mode::Superpixel,
        seed,
        weights,
        regions: RegionGeometry::Labels {
            height: labels.height(),
            width: labels.width(),
            labels: labels.labels().to_vec(),
        },
        window: None,
    };
    synthesize_from_spec(image, &spec)
}

/// Scales the whole frame by `weight`, which must be one of the ten levels.
pub fn synthesize_global(image: &Image, weight: f64) -> Result<SamplePair> {
    global_with_level(image, Level::from_weight(weight)?, 0)
}

/// Whole-frame darkening with the level drawn for region 0 under `seed`.
pub fn synthesize_global_random(image: &Image, seed: u64) -> Result<SamplePair> {
    global_with_level(image, draw_level(seed, 0), seed)
}

fn global_with_level(image: &Image, level: Level, seed: u64) -> Result<SamplePair> {
    let spec = IlluminationSpec {
        mode: Mode::Global,
        seed,
        weights: BTreeMap::from([(0, level)]),
        regions: RegionGeometry::Frame {
            height: image.height(),
            width: image.width(),
        },
        window: None,
    };
    synthesize_from_spec(image, &spec)
}

/// Random quad-tree partition with one level per leaf.
pub fn synthesize_quadtree(
    image: &Image,
    seed: u64,
    max_depth: u32,
    split_prob: f64,
) -> Result<SamplePair> {
    let rects = quadtree_leaves(image.height(), image.width(), seed, max_depth, split_prob)?;
    let weights = rects
        .iter()
        .map(|r| (r.id, draw_level(seed, r.id as u64)))
        .collect();
    let spec = IlluminationSpec {
        mode: Mode::Quadtree,
        seed,
        weights,
        regions: RegionGeometry::Rects {
            height: image.height(),
            width: image.width(),
            rects,
        },
        window: None,
    };
    synthesize_from_spec(image, &spec)
}

/// `low_light + attention`, clamped to `[0, 1]`.
pub fn reconstruct(low_light: &Image, attention: &FloatMap) -> Result<Image> {
    ensure_same_shape(low_light, attention)?;
    let data = low_light
        .samples()
        .iter()
        .zip(attention.samples())
        .map(|(l, a)| clamp_unit(l + a))
        .collect();
    Ok(Image::from_parts_unchecked(
        low_light.height(),
        low_light.width(),
        low_light.channels(),
        data,
    ))
}

/// Cuts `count` aligned random `patch × patch` windows out of a pair.
pub fn crop_pairs(
    pair: &SamplePair,
    patch: usize,
    count: usize,
    seed: u64,
) -> Result<Vec<SamplePair>> {
    let (h, w, _) = pair.ground_truth.shape();
    if patch == 0 || h < patch || w < patch {
        return Err(Error::arg(format!(
            "{h}x{w} image cannot hold a {patch}x{patch} patch"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(CROP_STREAM);
    (0..count)
        .map(|_| {
            let top = rng.random_range(0..=h - patch);
            let left = rng.random_range(0..=w - patch);
            let regions = pair.spec.regions.crop(top, left, patch, patch);
            let present: BTreeSet<u32> = regions.id_map()?.into_iter().collect();
            let weights = pair
                .spec
                .weights
                .iter()
                .filter(|(id, _)| present.contains(id))
                .map(|(&id, &l)| (id, l))
                .collect();
            Ok(SamplePair {
                ground_truth: pair.ground_truth.crop(top, left, patch, patch)?,
                low_light: pair.low_light.crop(top, left, patch, patch)?,
                attention: pair.attention.crop(top, left, patch, patch)?,
                spec: IlluminationSpec {
                    mode: pair.spec.mode,
                    seed: pair.spec.seed,
                    weights,
                    regions,
                    window: Some(CropWindow {
                        top,
                        left,
                        height: patch,
                        width: patch,
                        crop_seed: seed,
                    }),
                },
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::superpixel::{slic, SlicParams};

    fn textured(h: usize, w: usize) -> Image {
        Image::from_fn(h, w, 3, |r, c, ch| {
            0.5 + 0.45 * ((r as f64 * 0.37 + c as f64 * 0.21 + ch as f64).sin())
        })
        .unwrap()
    }

    #[test]
    fn level_parsing() {
        assert_eq!(Level::from_weight(0.1).unwrap().tenths(), 1);
        assert_eq!(Level::from_weight(1.0).unwrap(), Level::FULL);
        assert_eq!(Level::from_weight(0.7).unwrap().weight(), 0.7);
        assert!(Level::from_weight(0.0).is_err());
        assert!(Level::from_weight(0.55).is_err());
        assert!(Level::from_weight(1.1).is_err());
        assert!(Level::from_tenths(11).is_err());
    }

    #[test]
    fn forcing_full_level_is_identity() {
        let img = textured(24, 24);
        let labels = slic(
            &img,
            &SlicParams {
                k: 9,
                ..Default::default()
            },
        )
        .unwrap();
        let pair = synthesize_local(&img, &labels, 5).unwrap();
        let spec = pair.spec.clone().with_uniform_level(Level::FULL);
        let forced = synthesize_from_spec(&img, &spec).unwrap();
        assert_eq!(forced.low_light, img);
        assert!(forced.attention.samples().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn half_level_on_constant_image() {
        let img = Image::filled(4, 4, 3, 0.8).unwrap();
        let labels =
            SuperpixelLabels::from_raw(4, 4, (0..16).map(|p| (p % 4 >= 2) as u32).collect())
                .unwrap();
        let mut spec = synthesize_local(&img, &labels, 1).unwrap().spec;
        spec.weights.insert(0, Level::from_weight(0.5).unwrap());
        spec.weights.insert(1, Level::from_weight(0.3).unwrap());
        let pair = synthesize_from_spec(&img, &spec).unwrap();
        for r in 0..4 {
            for c in 0..4 {
                let (low, att) = if c < 2 {
                    (0.4, 0.4)
                } else {
                    (0.8 * 0.3, 0.8 - 0.8 * 0.3)
                };
                for ch in 0..3 {
                    assert!((pair.low_light.at(r, c, ch) - low).abs() < 1e-12);
                    assert!((pair.attention.at(r, c, ch) - att).abs() < 1e-12);
                }
            }
        }
        assert!(pair.round_trip_error() <= 1e-6);
    }

    #[test]
    fn global_cases() {
        let img = textured(8, 8);
        let same = synthesize_global(&img, 1.0).unwrap();
        assert_eq!(same.low_light, img);
        assert!(same.attention.samples().iter().all(|&v| v == 0.0));

        let dark = synthesize_global(&img, 0.1).unwrap();
        for ((l, a), g) in dark
            .low_light
            .samples()
            .iter()
            .zip(dark.attention.samples())
            .zip(img.samples())
        {
            assert!((l - 0.1 * g).abs() < 1e-15);
            assert!((a - 0.9 * g).abs() < 1e-12);
        }
        assert!(synthesize_global(&img, 0.25).is_err());
        assert!(synthesize_global(&img, 0.0).is_err());
    }

    #[test]
    fn quadtree_depth_zero_is_global() {
        let img = textured(16, 16);
        let q = synthesize_quadtree(&img, 77, 0, 0.9).unwrap();
        let level = q.spec.weights[&0];
        let g = synthesize_global(&img, level.weight()).unwrap();
        assert_eq!(q.low_light, g.low_light);
        assert_eq!(q.attention, g.attention);
    }

    #[test]
    fn quadtree_full_split_counts_leaves() {
        let img = textured(64, 64);
        let q = synthesize_quadtree(&img, 3, 2, 1.0).unwrap();
        let RegionGeometry::Rects { rects, .. } = &q.spec.regions else {
            panic!("expected rect geometry");
        };
        assert_eq!(rects.len(), 16);
        assert!(rects.iter().all(|r| r.height == 16 && r.width == 16));
        assert!(q.round_trip_error() <= 1e-6);
        assert!(synthesize_quadtree(&img, 3, 2, 1.5).is_err());
    }

    #[test]
    fn reconstruct_cases() {
        let img = textured(6, 6);
        let pair = synthesize_global(&img, 0.4).unwrap();
        let back = reconstruct(&pair.low_light, &pair.attention).unwrap();
        for (a, b) in back.samples().iter().zip(img.samples()) {
            assert!((a - b).abs() <= 1e-6);
        }
        let zero = FloatMap::zeros(6, 6, 3).unwrap();
        assert_eq!(reconstruct(&img, &zero).unwrap(), img);

        let px = Image::filled(1, 1, 1, 0.9).unwrap();
        let push = FloatMap::new(1, 1, 1, vec![0.3]).unwrap();
        assert_eq!(reconstruct(&px, &push).unwrap().samples(), &[1.0]);
        assert!(reconstruct(&img, &push).is_err());
    }

    #[test]
    fn cropping() {
        let img = textured(40, 50);
        let labels = slic(
            &img,
            &SlicParams {
                k: 12,
                ..Default::default()
            },
        )
        .unwrap();
        let pair = synthesize_local(&img, &labels, 9).unwrap();
        assert!(crop_pairs(&pair, 16, 0, 1).unwrap().is_empty());
        assert!(crop_pairs(&pair, 41, 1, 1).is_err());

        let a = crop_pairs(&pair, 16, 5, 42).unwrap();
        let b = crop_pairs(&pair, 16, 5, 42).unwrap();
        assert_eq!(a, b);
        for p in &a {
            assert!(p.round_trip_error() <= 1e-6);
            let again = synthesize_from_spec(&p.ground_truth, &p.spec).unwrap();
            assert_eq!(again.low_light, p.low_light);
        }
    }

    #[test]
    fn dimension_mismatch() {
        let img = textured(8, 8);
        let labels = SuperpixelLabels::single(8, 9);
        assert!(matches!(
            synthesize_local(&img, &labels, 0),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn spec_json_round_trip() {
        let img = textured(20, 20);
        let labels = slic(
            &img,
            &SlicParams {
                k: 4,
                ..Default::default()
            },
        )
        .unwrap();
        let pair = synthesize_local(&img, &labels, 11).unwrap();
        let json = serde_json::to_string(&pair.spec).unwrap();
        let back: IlluminationSpec = serde_json::from_str(&json).unwrap();
        assert_eq!(back, pair.spec);

        let bad = json.replacen(":0.", ":0.05", 1);
        assert!(serde_json::from_str::<IlluminationSpec>(&bad).is_err());
    }
}
