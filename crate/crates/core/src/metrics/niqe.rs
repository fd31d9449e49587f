//! NIQE: distance between a test image's patch-feature Gaussian and a
//! pristine-corpus Gaussian.

use std::fmt::Write as _;
use std::path::Path;

use nalgebra::{DMatrix, DVector};

use super::nss::{downsample_half, luminance_255, mscn_with_deviation, nss_features, MscnParams};
use crate::error::{Error, Result};
use crate::image::{crop, FloatMap, Image, Raster};

pub const NIQE_DIM: usize = 36;
pub const PATCH_SIZE: usize = 96;
pub const MIN_SIDE: usize = 2 * PATCH_SIZE;
pub const SHARPNESS_FRACTION: f64 = 0.75;
const MODEL_HEADER: &str = "niqe-model v1 dim=36";

/// Model bundled with the library, fitted on a small pristine photo set.
pub const DEFAULT_MODEL_TEXT: &str = include_str!("../../data/niqe_pristine.model");

pub type NiqeVector = [f64; NIQE_DIM];

#[derive(Debug, Clone, PartialEq)]
pub struct NiqeModel {
    pub mean: DVector<f64>,
    pub covariance: DMatrix<f64>,
}

impl NiqeModel {
    pub fn new(mean: DVector<f64>, covariance: DMatrix<f64>) -> Result<Self> {
        if mean.len() != NIQE_DIM || covariance.shape() != (NIQE_DIM, NIQE_DIM) {
            return Err(Error::arg("NIQE model must be 36-dimensional"));
        }
        if mean.iter().chain(covariance.iter()).any(|v| !v.is_finite()) {
            return Err(Error::InvalidData(
                "NIQE model has non-finite entries".into(),
            ));
        }
        for i in 0..NIQE_DIM {
            for j in 0..i {
                if (covariance[(i, j)] - covariance[(j, i)]).abs() > 1e-9 {
                    return Err(Error::InvalidData(format!(
                        "covariance not symmetric at ({i}, {j})"
                    )));
                }
            }
        }
        Ok(NiqeModel { mean, covariance })
    }

    pub fn bundled() -> Self {
        NiqeModel::parse(DEFAULT_MODEL_TEXT).expect("bundled NIQE model is well-formed")
    }

    /// Fits a model from pristine images: mean and unbiased covariance of all
    /// selected patch features.
    pub fn fit(images: &[Image]) -> Result<Self> {
        let mut patches = Vec::new();
        for img in images {
            patches.extend(niqe_patch_features(img)?);
        }
        let (mean, cov) = mean_and_covariance(&patches);
        NiqeModel::new(mean, cov)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        match lines.next().map(str::trim) {
            Some(MODEL_HEADER) => {}
            other => {
                return Err(Error::Format(format!(
                    "expected `{MODEL_HEADER}`, found {other:?}"
                )))
            }
        }
        let values: Vec<f64> = lines
            .filter(|l| !l.trim_start().starts_with('#'))
            .flat_map(str::split_whitespace)
            .map(|t| {
                t.parse::<f64>()
                    .map_err(|_| Error::Format(format!("bad number `{t}` in NIQE model")))
            })
            .collect::<Result<_>>()?;
        let expected = NIQE_DIM + NIQE_DIM * NIQE_DIM;
        if values.len() != expected {
            return Err(Error::Format(format!(
                "NIQE model holds {} numbers, expected {expected}",
                values.len()
            )));
        }
        let mean = DVector::from_column_slice(&values[..NIQE_DIM]);
        let covariance = DMatrix::from_row_slice(NIQE_DIM, NIQE_DIM, &values[NIQE_DIM..]);
        NiqeModel::new(mean, covariance)
    }

    /// Serializes with optional `#` provenance lines after the header.
    pub fn to_text(&self, provenance: &[&str]) -> String {
        let mut out = format!("{MODEL_HEADER}\n");
        for line in provenance {
            let _ = writeln!(out, "# {line}");
        }
        let row = |vals: &mut dyn Iterator<Item = f64>| {
            vals.map(|v| format!("{v:e}")).collect::<Vec<_>>().join(" ")
        };
        let _ = writeln!(out, "{}", row(&mut self.mean.iter().copied()));
        for i in 0..NIQE_DIM {
            let _ = writeln!(out, "{}", row(&mut self.covariance.row(i).iter().copied()));
        }
        out
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        NiqeModel::parse(&std::fs::read_to_string(path)?)
    }
}

fn mean_and_covariance(rows: &[NiqeVector]) -> (DVector<f64>, DMatrix<f64>) {
    let n = rows.len();
    let mut mean = DVector::zeros(NIQE_DIM);
    for r in rows {
        mean += DVector::from_column_slice(r);
    }
    mean /= n.max(1) as f64;
    let mut cov = DMatrix::zeros(NIQE_DIM, NIQE_DIM);
    if n > 1 {
        for r in rows {
            let d = DVector::from_column_slice(r) - &mean;
            cov += &d * d.transpose();
        }
        cov /= (n - 1) as f64;
    }
    (mean, cov)
}

/// Per-patch 36-vectors (18 at full resolution, 18 at half) of the patches
/// passing the sharpness selection.
pub fn niqe_patch_features(image: &Image) -> Result<Vec<NiqeVector>> {
    if image.height().min(image.width()) < MIN_SIDE {
        return Err(Error::arg(format!(
            "NIQE needs both sides >= {MIN_SIDE}, got {}x{}",
            image.height(),
            image.width()
        )));
    }
    let params = MscnParams::default();
    let lum = luminance_255(image);
    let fine = mscn_with_deviation(&lum, &params)?;
    let coarse = mscn_with_deviation(&downsample_half(&lum)?, &params)?;

    let rows = image.height() / PATCH_SIZE;
    let cols = image.width() / PATCH_SIZE;
    let half = PATCH_SIZE / 2;
    let mut candidates = Vec::with_capacity(rows * cols);
    for r in 0..rows {
        for c in 0..cols {
            let (top, left) = (r * PATCH_SIZE, c * PATCH_SIZE);
            let sharpness = mean(&crop(&fine.deviation, top, left, PATCH_SIZE, PATCH_SIZE)?);
            let f1 = nss_features(&crop(
                &fine.coefficients,
                top,
                left,
                PATCH_SIZE,
                PATCH_SIZE,
            )?);
            let f2 = nss_features(&crop(&coarse.coefficients, r * half, c * half, half, half)?);
            candidates.push((sharpness, f1, f2));
        }
    }
    let max_sharpness = candidates.iter().map(|c| c.0).fold(0.0, f64::max);
    let threshold = SHARPNESS_FRACTION * max_sharpness;
    let mut out = Vec::new();
    for (sharpness, f1, f2) in candidates {
        if sharpness < threshold {
            continue;
        }
        // flat patches have no distribution to fit
        let (Ok(f1), Ok(f2)) = (f1, f2) else { continue };
        let mut v = [0.0; NIQE_DIM];
        v[..18].copy_from_slice(&f1);
        v[18..].copy_from_slice(&f2);
        out.push(v);
    }
    if out.is_empty() {
        return Err(Error::Fit("no patch with fittable statistics".into()));
    }
    Ok(out)
}

fn mean(map: &FloatMap) -> f64 {
    map.samples().iter().sum::<f64>() / map.samples().len() as f64
}

/// Mean patch feature vector.
pub fn niqe_features(image: &Image) -> Result<NiqeVector> {
    let patches = niqe_patch_features(image)?;
    let (m, _) = mean_and_covariance(&patches);
    let mut out = [0.0; NIQE_DIM];
    out.copy_from_slice(m.as_slice());
    Ok(out)
}

/// Mean and unbiased covariance of the selected patch features. A single patch
/// yields a zero covariance.
pub fn niqe_feature_stats(image: &Image) -> Result<(NiqeVector, DMatrix<f64>)> {
    let patches = niqe_patch_features(image)?;
    let (m, cov) = mean_and_covariance(&patches);
    let mut out = [0.0; NIQE_DIM];
    out.copy_from_slice(m.as_slice());
    Ok((out, cov))
}

/// `sqrt((a - b)ᵀ ((Σa + Σb) / 2)⁺ (a - b))` in any dimension. The pooled
/// covariance is pseudo-inverted, so singular pools are accepted.
pub fn gaussian_distance(
    mean_a: &DVector<f64>,
    cov_a: &DMatrix<f64>,
    mean_b: &DVector<f64>,
    cov_b: &DMatrix<f64>,
) -> Result<f64> {
    let d = mean_a.len();
    if mean_b.len() != d || cov_a.shape() != (d, d) || cov_b.shape() != (d, d) {
        return Err(Error::DimensionMismatch {
            left: (d, cov_a.nrows(), cov_a.ncols()),
            right: (mean_b.len(), cov_b.nrows(), cov_b.ncols()),
        });
    }
    let diff = mean_a - mean_b;
    if diff.iter().all(|&v| v == 0.0) {
        return Ok(0.0);
    }
    let pooled = (cov_a + cov_b) * 0.5;
    let svd = pooled.svd(true, true);
    let largest = svd.singular_values.max();
    let tol = largest * d as f64 * f64::EPSILON;
    let inv = svd
        .pseudo_inverse(tol)
        .map_err(|e| Error::Fit(format!("pseudo-inverse failed: {e}")))?;
    let q = (diff.transpose() * inv * &diff)[(0, 0)];
    Ok(q.max(0.0).sqrt())
}

pub fn niqe_score(
    features: &NiqeVector,
    feature_cov: &DMatrix<f64>,
    model: &NiqeModel,
) -> Result<f64> {
    gaussian_distance(
        &model.mean,
        &model.covariance,
        &DVector::from_column_slice(features),
        feature_cov,
    )
}

/// NIQE of one image against `model`.
pub fn niqe(image: &Image, model: &NiqeModel) -> Result<f64> {
    let (features, cov) = niqe_feature_stats(image)?;
    niqe_score(&features, &cov, model)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scalar_analogue() {
        let one = DMatrix::from_element(1, 1, 1.0);
        let d = gaussian_distance(
            &DVector::from_element(1, 0.0),
            &one,
            &DVector::from_element(1, 2.0),
            &one,
        )
        .unwrap();
        assert!((d - 2.0).abs() < 1e-12);
    }

    #[test]
    fn model_mean_scores_zero() {
        let model = NiqeModel::bundled();
        let mut f = [0.0; NIQE_DIM];
        f.copy_from_slice(model.mean.as_slice());
        assert_eq!(
            niqe_score(&f, &DMatrix::zeros(36, 36), &model).unwrap(),
            0.0
        );
        assert_eq!(
            niqe_score(&f, &DMatrix::identity(36, 36), &model).unwrap(),
            0.0
        );
    }

    #[test]
    fn singular_pool_uses_pseudo_inverse() {
        let zero = DMatrix::zeros(2, 2);
        let cov = DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 0.0]);
        let d = gaussian_distance(
            &DVector::from_column_slice(&[0.0, 0.0]),
            &cov,
            &DVector::from_column_slice(&[1.0, 5.0]),
            &zero,
        )
        .unwrap();
        // pooled = diag(1, 0); only the first axis contributes
        assert!((d - 1.0).abs() < 1e-12);
    }

    #[test]
    fn model_text_round_trip() {
        let model = NiqeModel::bundled();
        let text = model.to_text(&["test"]);
        assert_eq!(NiqeModel::parse(&text).unwrap(), model);
        assert!(NiqeModel::parse("niqe-model v2 dim=36\n").is_err());
        assert!(NiqeModel::parse("niqe-model v1 dim=36\n1 2 3\n").is_err());
    }

    #[test]
    fn asymmetric_covariance_rejected() {
        let mut cov = DMatrix::identity(36, 36);
        cov[(0, 1)] = 1e-3;
        assert!(NiqeModel::new(DVector::zeros(36), cov).is_err());
    }

    #[test]
    fn small_images_rejected() {
        let img = Image::filled(191, 400, 3, 0.5).unwrap();
        assert!(matches!(niqe_features(&img), Err(Error::Argument(_))));
    }
}
