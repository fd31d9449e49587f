//! BRISQUE feature extraction (no opinion-score regression).

use super::nss::{downsample_half, luminance_255, mscn, nss_features, MscnParams};
use crate::error::{Error, Result};
use crate::image::{Image, Raster};

pub const BRISQUE_DIM: usize = 36;
pub const MIN_SIDE: usize = 64;

/// Whole-image NSS features at full and half resolution.
///
/// Each scale contributes the MSCN GGD `(α, σ²)` followed by
/// `(α, η, σ_l², σ_r²)` for the horizontal, vertical, main-diagonal and
/// anti-diagonal products.
pub fn brisque_features(image: &Image) -> Result<[f64; BRISQUE_DIM]> {
    if image.height().min(image.width()) < MIN_SIDE {
        return Err(Error::arg(format!(
            "BRISQUE needs both sides >= {MIN_SIDE}, got {}x{}",
            image.height(),
            image.width()
        )));
    }
    let params = MscnParams::default();
    let lum = luminance_255(image);
    let fine = nss_features(&mscn(&lum, &params)?)?;
    let coarse = nss_features(&mscn(&downsample_half(&lum)?, &params)?)?;
    let mut out = [0.0; BRISQUE_DIM];
    out[..18].copy_from_slice(&fine);
    out[18..].copy_from_slice(&coarse);
    Ok(out)
}
