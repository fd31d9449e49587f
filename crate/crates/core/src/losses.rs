//! Training objectives evaluated as plain functionals (no gradients).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::{ensure_same_shape, FloatMap, Image, Raster};

/// A `channels × height × width` stack of feature activations.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMap {
    channels: usize,
    height: usize,
    width: usize,
    data: Vec<f64>,
}

impl FeatureMap {
    pub fn new(channels: usize, height: usize, width: usize, data: Vec<f64>) -> Result<Self> {
        if channels == 0 || height == 0 || width == 0 || data.len() != channels * height * width {
            return Err(Error::arg(format!(
                "feature map {channels}x{height}x{width} does not match {} samples",
                data.len()
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidData(
                "feature map has non-finite samples".into(),
            ));
        }
        Ok(FeatureMap {
            channels,
            height,
            width,
            data,
        })
    }

    pub fn shape(&self) -> (usize, usize, usize) {
        (self.channels, self.height, self.width)
    }

    pub fn samples(&self) -> &[f64] {
        &self.data
    }
}

impl From<&FloatMap> for FeatureMap {
    /// Reorders an interleaved map into planar channel-major layout.
    fn from(map: &FloatMap) -> Self {
        let (h, w, c) = map.shape();
        let src = map.samples();
        let data = (0..c)
            .flat_map(|ch| (0..h * w).map(move |p| src[p * c + ch]))
            .collect();
        FeatureMap {
            channels: c,
            height: h,
            width: w,
            data,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VanLossWeights {
    pub attention: f64,
    pub perceptual: f64,
}

impl Default for VanLossWeights {
    fn default() -> Self {
        VanLossWeights {
            attention: 0.5,
            perceptual: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnLossWeights {
    pub reconstruction: f64,
    pub perceptual: f64,
    pub total_variation: f64,
}

impl Default for EnLossWeights {
    fn default() -> Self {
        EnLossWeights {
            reconstruction: 1.0,
            perceptual: 5.0,
            total_variation: 1.0,
        }
    }
}

/// Mean squared difference.
pub fn l2_loss<R: Raster>(a: &R, b: &R) -> Result<f64> {
    ensure_same_shape(a, b)?;
    let sum: f64 = a
        .samples()
        .iter()
        .zip(b.samples())
        .map(|(x, y)| (x - y) * (x - y))
        .sum();
    Ok(sum / a.samples().len() as f64)
}

/// Mean absolute difference between two feature stacks.
pub fn l1_feature_loss(fa: &FeatureMap, fb: &FeatureMap) -> Result<f64> {
    if fa.shape() != fb.shape() {
        return Err(Error::DimensionMismatch {
            left: fa.shape(),
            right: fb.shape(),
        });
    }
    let sum: f64 = fa
        .data
        .iter()
        .zip(&fb.data)
        .map(|(x, y)| (x - y).abs())
        .sum();
    Ok(sum / fa.data.len() as f64)
}

/// `(1 / CHW) Σ (Δx² + Δy²)` with forward differences; the difference past
/// the last row/column is zero.
pub fn tv_loss<R: Raster>(image: &R) -> f64 {
    let (h, w, c) = image.shape();
    let s = image.samples();
    let mut sum = 0.0;
    for y in 0..h {
        for x in 0..w {
            let p = (y * w + x) * c;
            for ch in 0..c {
                let v = s[p + ch];
                if x + 1 < w {
                    let d = s[p + c + ch] - v;
                    sum += d * d;
                }
                if y + 1 < h {
                    let d = s[p + w * c + ch] - v;
                    sum += d * d;
                }
            }
        }
    }
    sum / (c * h * w) as f64
}

pub fn van_total_loss(attention: f64, perceptual: f64, w: &VanLossWeights) -> f64 {
    w.attention * attention + w.perceptual * perceptual
}

pub fn en_total_loss(reconstruction: f64, perceptual: f64, tv: f64, w: &EnLossWeights) -> f64 {
    w.reconstruction * reconstruction + w.perceptual * perceptual + w.total_variation * tv
}

/// Convenience wrapper used by the CLI report: losses of `output` against `target`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LossReport {
    pub l2: f64,
    pub tv: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub perceptual: Option<f64>,
    pub van_total: f64,
    pub en_total: f64,
    pub van_weights: VanLossWeights,
    pub en_weights: EnLossWeights,
}

pub fn loss_report(
    output: &Image,
    target: &Image,
    features: Option<(&FeatureMap, &FeatureMap)>,
    van: VanLossWeights,
    en: EnLossWeights,
) -> Result<LossReport> {
    let l2 = l2_loss(output, target)?;
    let tv = tv_loss(output);
    let perceptual = features.map(|(a, b)| l1_feature_loss(a, b)).transpose()?;
    let p = perceptual.unwrap_or(0.0);
    Ok(LossReport {
        l2,
        tv,
        perceptual,
        van_total: van_total_loss(l2, p, &van),
        en_total: en_total_loss(l2, p, tv, &en),
        van_weights: van,
        en_weights: en,
    })
}
