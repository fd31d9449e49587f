//! sRGB (D65) to CIELAB conversion.

use crate::error::{Error, Result};
use crate::image::{Image, Raster};

// linear sRGB -> XYZ, D65
const SRGB_TO_XYZ: [[f64; 3]; 3] = [
    [0.412_456_4, 0.357_576_1, 0.180_437_5],
    [0.212_672_9, 0.715_152_2, 0.072_175_0],
    [0.019_333_9, 0.119_192_0, 0.950_304_1],
];

// Reference white is the image of linear (1, 1, 1) so that neutral inputs map to a* = b* = 0.
const WHITE: [f64; 3] = [
    SRGB_TO_XYZ[0][0] + SRGB_TO_XYZ[0][1] + SRGB_TO_XYZ[0][2],
    SRGB_TO_XYZ[1][0] + SRGB_TO_XYZ[1][1] + SRGB_TO_XYZ[1][2],
    SRGB_TO_XYZ[2][0] + SRGB_TO_XYZ[2][1] + SRGB_TO_XYZ[2][2],
];

const EPSILON: f64 = 216.0 / 24389.0;
const KAPPA: f64 = 24389.0 / 27.0;

/// Per-pixel `[L*, a*, b*]` triples, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct LabImage {
    height: usize,
    width: usize,
    data: Vec<[f64; 3]>,
}

impl LabImage {
    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn pixels(&self) -> &[[f64; 3]] {
        &self.data
    }

    #[inline]
    pub fn at(&self, row: usize, col: usize) -> [f64; 3] {
        self.data[row * self.width + col]
    }
}

#[inline]
fn srgb_to_linear(v: f64) -> f64 {
    if v <= 0.040_45 {
        v / 12.92
    } else {
        ((v + 0.055) / 1.055).powf(2.4)
    }
}

#[inline]
fn lab_f(t: f64) -> f64 {
    if t > EPSILON {
        t.cbrt()
    } else {
        (KAPPA * t + 16.0) / 116.0
    }
}

pub fn srgb_pixel_to_lab(rgb: [f64; 3]) -> [f64; 3] {
    let lin = rgb.map(srgb_to_linear);
    let xyz: [f64; 3] = std::array::from_fn(|i| {
        SRGB_TO_XYZ[i][0] * lin[0] + SRGB_TO_XYZ[i][1] * lin[1] + SRGB_TO_XYZ[i][2] * lin[2]
    });
    let fx = lab_f(xyz[0] / WHITE[0]);
    let fy = lab_f(xyz[1] / WHITE[1]);
    let fz = lab_f(xyz[2] / WHITE[2]);
    let l = (116.0 * fy - 16.0).clamp(0.0, 100.0);
    [l, 500.0 * (fx - fy), 200.0 * (fy - fz)]
}

pub fn rgb_to_lab(image: &Image) -> Result<LabImage> {
    if image.channels() != 3 {
        return Err(Error::ChannelCount {
            expected: 3,
            found: image.channels(),
        });
    }
    let data = image
        .samples()
        .chunks_exact(3)
        .map(|px| srgb_pixel_to_lab([px[0], px[1], px[2]]))
        .collect();
    Ok(LabImage {
        height: image.height(),
        width: image.width(),
        data,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn white_black_and_mid_gray() {
        let white = srgb_pixel_to_lab([1.0; 3]);
        assert!((white[0] - 100.0).abs() < 1e-9);
        assert!(white[1].abs() < 1e-3 && white[2].abs() < 1e-3);

        assert_eq!(srgb_pixel_to_lab([0.0; 3]), [0.0, 0.0, 0.0]);

        // Independent evaluation: Y = ((0.5 + 0.055) / 1.055)^2.4 = 0.214041...,
        // L* = 116 * cbrt(Y) - 16 = 53.3890...
        let y: f64 = ((0.5f64 + 0.055) / 1.055).powf(2.4);
        let expect = 116.0 * y.cbrt() - 16.0;
        let gray = srgb_pixel_to_lab([0.5; 3]);
        assert!((gray[0] - expect).abs() < 1e-9);
        assert!((gray[0] - 53.39).abs() < 0.01);
        assert!(gray[1].abs() < 1e-3 && gray[2].abs() < 1e-3);
    }

    #[test]
    fn rejects_gray_images() {
        let img = Image::filled(2, 2, 1, 0.3).unwrap();
        assert!(matches!(
            rgb_to_lab(&img),
            Err(Error::ChannelCount {
                expected: 3,
                found: 1
            })
        ));
    }

    #[test]
    fn neutral_pixels_have_no_chroma() {
        for i in 0..=255 {
            let v = i as f64 / 255.0;
            let lab = srgb_pixel_to_lab([v; 3]);
            assert!(
                lab[1].abs() < 1e-3 && lab[2].abs() < 1e-3,
                "gray {i}: {lab:?}"
            );
            assert!((0.0..=100.0).contains(&lab[0]));
        }
    }
}
