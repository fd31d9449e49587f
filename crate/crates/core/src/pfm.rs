//! Portable Float Map (PFM) reader/writer.
//!
//! Writing always produces little-endian data (scale `-1.0`) with rows stored
//! bottom-to-top. Reading accepts either byte order.

use std::path::Path;

use crate::error::{Error, Result};
use crate::image::{FloatMap, Raster};

pub fn encode_pfm(map: &FloatMap) -> Vec<u8> {
    let (h, w, c) = map.shape();
    let magic = if c == 3 { "PF" } else { "Pf" };
    let mut out = format!("{magic}\n{w} {h}\n-1.0\n").into_bytes();
    out.reserve(h * w * c * 4);
    let row_len = w * c;
    for row in map.samples().chunks_exact(row_len).rev() {
        for &v in row {
            out.extend_from_slice(&(v as f32).to_le_bytes());
        }
    }
    out
}

/// Splits off one whitespace-delimited header token.
fn next_token<'a>(bytes: &'a [u8], pos: &mut usize) -> Result<&'a [u8]> {
    while *pos < bytes.len() && bytes[*pos].is_ascii_whitespace() {
        *pos += 1;
    }
    let start = *pos;
    while *pos < bytes.len() && !bytes[*pos].is_ascii_whitespace() {
        *pos += 1;
    }
    if start == *pos {
        return Err(Error::Format("truncated header".into()));
    }
    Ok(&bytes[start..*pos])
}

fn parse_token<T: std::str::FromStr>(tok: &[u8], what: &str) -> Result<T> {
    std::str::from_utf8(tok)
        .ok()
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| Error::Format(format!("bad {what} `{}`", String::from_utf8_lossy(tok))))
}

pub fn decode_pfm(bytes: &[u8]) -> Result<FloatMap> {
    let mut pos = 0;
    let channels = match next_token(bytes, &mut pos)? {
        b"PF" => 3,
        b"Pf" => 1,
        other => {
            return Err(Error::Format(format!(
                "bad magic `{}`",
                String::from_utf8_lossy(other)
            )))
        }
    };
    let width: usize = parse_token(next_token(bytes, &mut pos)?, "width")?;
    let height: usize = parse_token(next_token(bytes, &mut pos)?, "height")?;
    let scale: f64 = parse_token(next_token(bytes, &mut pos)?, "scale")?;
    if scale == 0.0 || !scale.is_finite() {
        return Err(Error::Format(format!("bad scale {scale}")));
    }
    // exactly one whitespace byte separates the scale from the raster
    if pos >= bytes.len() || !bytes[pos].is_ascii_whitespace() {
        return Err(Error::Format("missing raster".into()));
    }
    pos += 1;

    let little_endian = scale < 0.0;
    let count = width
        .checked_mul(height)
        .and_then(|n| n.checked_mul(channels))
        .ok_or_else(|| Error::Format("dimensions overflow".into()))?;
    let payload = &bytes[pos..];
    if payload.len() < count * 4 {
        return Err(Error::Format(format!(
            "truncated payload: {} of {} bytes",
            payload.len(),
            count * 4
        )));
    }
    let row_len = width * channels;
    let mut data = vec![0.0f64; count];
    for (i, chunk) in payload[..count * 4].chunks_exact(4).enumerate() {
        let raw = [chunk[0], chunk[1], chunk[2], chunk[3]];
        let v = if little_endian {
            f32::from_le_bytes(raw)
        } else {
            f32::from_be_bytes(raw)
        };
        let (file_row, col) = (i / row_len, i % row_len);
        data[(height - 1 - file_row) * row_len + col] = v as f64;
    }
    FloatMap::new(height, width, channels, data).map_err(|e| Error::Format(e.to_string()))
}

pub fn write_pfm(map: &FloatMap, path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, encode_pfm(map))?;
    Ok(())
}

pub fn read_pfm(path: impl AsRef<Path>) -> Result<FloatMap> {
    decode_pfm(&std::fs::read(path)?)
}
