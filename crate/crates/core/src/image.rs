//! Raster containers shared by every stage of the pipeline.
//!
//! [`Image`] holds display intensities in `[0, 1]`; [`FloatMap`] holds
//! arbitrary finite samples (residuals, feature planes, lightness maps).
//! Both are row-major with interleaved channels.

use crate::error::{Error, Result};

/// Common read access to row-major interleaved rasters.
pub trait Raster: Sized {
    fn height(&self) -> usize;
    fn width(&self) -> usize;
    fn channels(&self) -> usize;
    fn samples(&self) -> &[f64];

    /// Rebuilds a raster of the same kind from samples that are already known
    /// to satisfy the kind's invariants.
    #[doc(hidden)]
    fn from_parts_unchecked(height: usize, width: usize, channels: usize, data: Vec<f64>) -> Self;

    fn shape(&self) -> (usize, usize, usize) {
        (self.height(), self.width(), self.channels())
    }

    fn pixel_count(&self) -> usize {
        self.height() * self.width()
    }

    #[inline]
    fn at(&self, row: usize, col: usize, channel: usize) -> f64 {
        self.samples()[(row * self.width() + col) * self.channels() + channel]
    }

    #[inline]
    fn pixel(&self, row: usize, col: usize) -> &[f64] {
        let c = self.channels();
        let start = (row * self.width() + col) * c;
        &self.samples()[start..start + c]
    }
}

pub(crate) fn ensure_same_shape<A: Raster, B: Raster>(a: &A, b: &B) -> Result<()> {
    if a.shape() != b.shape() {
        return Err(Error::DimensionMismatch {
            left: a.shape(),
            right: b.shape(),
        });
    }
    Ok(())
}

fn check_layout(height: usize, width: usize, channels: usize, len: usize) -> Result<()> {
    if height == 0 || width == 0 {
        return Err(Error::arg(format!("empty raster {height}x{width}")));
    }
    if channels != 1 && channels != 3 {
        return Err(Error::arg(format!("unsupported channel count {channels}")));
    }
    if len != height * width * channels {
        return Err(Error::arg(format!(
            "sample count {len} does not match {height}x{width}x{channels}"
        )));
    }
    Ok(())
}

/// An H×W×C image with every sample in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    height: usize,
    width: usize,
    channels: usize,
    data: Vec<f64>,
}

impl Image {
    pub fn new(height: usize, width: usize, channels: usize, data: Vec<f64>) -> Result<Self> {
        check_layout(height, width, channels, data.len())?;
        if let Some(i) = data.iter().position(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::InvalidData(format!(
                "sample {i} = {} outside [0, 1]",
                data[i]
            )));
        }
        Ok(Image {
            height,
            width,
            channels,
            data,
        })
    }

    pub fn filled(height: usize, width: usize, channels: usize, value: f64) -> Result<Self> {
        Image::new(
            height,
            width,
            channels,
            vec![value; height * width * channels],
        )
    }

    /// Builds an image by evaluating `f(row, col, channel)`, clamping into `[0, 1]`.
    pub fn from_fn(
        height: usize,
        width: usize,
        channels: usize,
        mut f: impl FnMut(usize, usize, usize) -> f64,
    ) -> Result<Self> {
        check_layout(height, width, channels, height * width * channels)?;
        let mut data = Vec::with_capacity(height * width * channels);
        for r in 0..height {
            for c in 0..width {
                for ch in 0..channels {
                    data.push(clamp_unit(f(r, c, ch)));
                }
            }
        }
        Ok(Image {
            height,
            width,
            channels,
            data,
        })
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn to_float_map(&self) -> FloatMap {
        FloatMap {
            height: self.height,
            width: self.width,
            channels: self.channels,
            data: self.data.clone(),
        }
    }

    pub fn crop(&self, top: usize, left: usize, h: usize, w: usize) -> Result<Image> {
        crop(self, top, left, h, w)
    }
}

impl Raster for Image {
    fn height(&self) -> usize {
        self.height
    }
    fn width(&self) -> usize {
        self.width
    }
    fn channels(&self) -> usize {
        self.channels
    }
    fn samples(&self) -> &[f64] {
        &self.data
    }
    fn from_parts_unchecked(height: usize, width: usize, channels: usize, data: Vec<f64>) -> Self {
        debug_assert_eq!(data.len(), height * width * channels);
        Image {
            height,
            width,
            channels,
            data,
        }
    }
}

/// An H×W×C raster of finite, unbounded samples.
#[derive(Debug, Clone, PartialEq)]
pub struct FloatMap {
    height: usize,
    width: usize,
    channels: usize,
    data: Vec<f64>,
}

impl FloatMap {
    pub fn new(height: usize, width: usize, channels: usize, data: Vec<f64>) -> Result<Self> {
        check_layout(height, width, channels, data.len())?;
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidData(format!("sample {i} is not finite")));
        }
        Ok(FloatMap {
            height,
            width,
            channels,
            data,
        })
    }

    pub fn zeros(height: usize, width: usize, channels: usize) -> Result<Self> {
        FloatMap::new(
            height,
            width,
            channels,
            vec![0.0; height * width * channels],
        )
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    /// Converts to an [`Image`], failing if any sample leaves `[0, 1]`.
    pub fn to_image(&self) -> Result<Image> {
        Image::new(self.height, self.width, self.channels, self.data.clone())
    }

    pub fn crop(&self, top: usize, left: usize, h: usize, w: usize) -> Result<FloatMap> {
        crop(self, top, left, h, w)
    }
}

impl Raster for FloatMap {
    fn height(&self) -> usize {
        self.height
    }
    fn width(&self) -> usize {
        self.width
    }
    fn channels(&self) -> usize {
        self.channels
    }
    fn samples(&self) -> &[f64] {
        &self.data
    }
    fn from_parts_unchecked(height: usize, width: usize, channels: usize, data: Vec<f64>) -> Self {
        debug_assert_eq!(data.len(), height * width * channels);
        FloatMap {
            height,
            width,
            channels,
            data,
        }
    }
}

#[inline]
pub(crate) fn clamp_unit(v: f64) -> f64 {
    if v.is_nan() {
        0.0
    } else {
        v.clamp(0.0, 1.0)
    }
}

/// Per-pixel maximum across channels. Single-channel input is returned as-is.
pub fn lightness<R: Raster>(image: &R) -> FloatMap {
    let c = image.channels();
    let data = if c == 1 {
        image.samples().to_vec()
    } else {
        image
            .samples()
            .chunks_exact(c)
            .map(|px| px.iter().copied().fold(f64::NEG_INFINITY, f64::max))
            .collect()
    };
    FloatMap::from_parts_unchecked(image.height(), image.width(), 1, data)
}

/// Nearest-neighbour resampling; source index is `floor((i + 0.5) * old / new)`.
pub fn resize_nearest<R: Raster>(image: &R, new_h: usize, new_w: usize) -> Result<R> {
    if new_h == 0 || new_w == 0 {
        return Err(Error::arg(format!("zero target size {new_h}x{new_w}")));
    }
    let (h, w, c) = image.shape();
    let rows: Vec<usize> = (0..new_h).map(|i| nearest_source(i, h, new_h)).collect();
    let cols: Vec<usize> = (0..new_w).map(|j| nearest_source(j, w, new_w)).collect();
    let src = image.samples();
    let mut data = Vec::with_capacity(new_h * new_w * c);
    for &r in &rows {
        for &col in &cols {
            let start = (r * w + col) * c;
            data.extend_from_slice(&src[start..start + c]);
        }
    }
    Ok(R::from_parts_unchecked(new_h, new_w, c, data))
}

#[inline]
fn nearest_source(i: usize, old: usize, new: usize) -> usize {
    // (2i + 1) * old / (2 * new) in integers avoids float rounding at cell edges
    (((2 * i + 1) * old) / (2 * new)).min(old - 1)
}

/// Sample-exact sub-rectangle.
pub fn crop<R: Raster>(image: &R, top: usize, left: usize, h: usize, w: usize) -> Result<R> {
    if h == 0 || w == 0 || top + h > image.height() || left + w > image.width() {
        return Err(Error::arg(format!(
            "crop window {h}x{w} at ({top}, {left}) outside {}x{}",
            image.height(),
            image.width()
        )));
    }
    let c = image.channels();
    let stride = image.width() * c;
    let src = image.samples();
    let mut data = Vec::with_capacity(h * w * c);
    for r in top..top + h {
        let start = r * stride + left * c;
        data.extend_from_slice(&src[start..start + w * c]);
    }
    Ok(R::from_parts_unchecked(h, w, c, data))
}
