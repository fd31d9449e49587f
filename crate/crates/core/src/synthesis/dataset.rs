//! On-disk layout of one training sample:
//! `{id}_gt.png`, `{id}_low.png`, `{id}_va.pfm` and `{id}_spec.json`.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Mode, SamplePair};
use crate::error::Result;
use crate::image::Raster;
use crate::pfm::encode_pfm;
use crate::png_io::{encode_png, BitDepth};

/// One line of `manifest.jsonl`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub id: String,
    pub source: String,
    pub mode: Mode,
    pub seed: u64,
    pub height: usize,
    pub width: usize,
    pub gt: String,
    pub low: String,
    pub va: String,
    pub spec: String,
}

/// Writes the sample quartet into `dir`.
///
/// Images are stored as 8-bit PNG; the attention map is recomputed from the
/// quantized pair so that `low + va` reproduces the stored ground truth.
pub fn write_sample(
    dir: &Path,
    id: &str,
    source: &str,
    pair: &SamplePair,
) -> Result<ManifestEntry> {
    let stored = pair.quantized(BitDepth::Eight);
    let entry = ManifestEntry {
        id: id.to_string(),
        source: source.to_string(),
        mode: pair.spec.mode,
        seed: pair.spec.seed,
        height: stored.ground_truth.height(),
        width: stored.ground_truth.width(),
        gt: format!("{id}_gt.png"),
        low: format!("{id}_low.png"),
        va: format!("{id}_va.pfm"),
        spec: format!("{id}_spec.json"),
    };
    std::fs::write(
        dir.join(&entry.gt),
        encode_png(&stored.ground_truth, BitDepth::Eight)?,
    )?;
    std::fs::write(
        dir.join(&entry.low),
        encode_png(&stored.low_light, BitDepth::Eight)?,
    )?;
    std::fs::write(dir.join(&entry.va), encode_pfm(&stored.attention))?;
    let mut json = serde_json::to_vec(&pair.spec)?;
    json.push(b'\n');
    std::fs::write(dir.join(&entry.spec), json)?;
    Ok(entry)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::image::Image;
    use crate::pfm::read_pfm;
    use crate::png_io::read_png;
    use crate::synthesis::{synthesize_from_spec, synthesize_quadtree, IlluminationSpec};

    #[test]
    fn quartet_round_trips_from_disk() {
        let img = Image::from_fn(32, 32, 3, |r, c, ch| {
            ((r * 13 + c * 7 + ch * 5) % 256) as f64 / 255.0
        })
        .unwrap();
        let pair = synthesize_quadtree(&img, 21, 2, 0.8).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let entry = write_sample(dir.path(), "s0", "in.png", &pair).unwrap();

        let gt = read_png(dir.path().join(&entry.gt)).unwrap();
        let low = read_png(dir.path().join(&entry.low)).unwrap();
        let va = read_pfm(dir.path().join(&entry.va)).unwrap();
        assert_eq!(gt, img);
        let err = gt
            .samples()
            .iter()
            .zip(low.samples())
            .zip(va.samples())
            .map(|((g, l), a)| (l + a - g).abs())
            .fold(0.0, f64::max);
        assert!(err <= 1e-6, "{err}");
        assert!(va.samples().iter().all(|&v| v >= 0.0));

        let spec: IlluminationSpec =
            serde_json::from_slice(&std::fs::read(dir.path().join(&entry.spec)).unwrap()).unwrap();
        let again = synthesize_from_spec(&gt, &spec)
            .unwrap()
            .quantized(BitDepth::Eight);
        assert_eq!(again.low_light, low);
    }
}
