//! PNG decode/encode for 8- and 16-bit gray or RGB images.

use std::cell::Cell;
use std::io::{self, BufRead, Cursor, Read, Seek, SeekFrom};
use std::rc::Rc;

use png::{BitDepth as PngDepth, ColorType, Transformations};

use crate::error::{Error, Result};
use crate::image::{Image, Raster};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BitDepth {
    Eight,
    Sixteen,
}

impl BitDepth {
    pub fn max_value(self) -> f64 {
        match self {
            BitDepth::Eight => 255.0,
            BitDepth::Sixteen => 65535.0,
        }
    }

    pub fn from_bits(bits: u8) -> Result<Self> {
        match bits {
            8 => Ok(BitDepth::Eight),
            16 => Ok(BitDepth::Sixteen),
            other => Err(Error::arg(format!(
                "bit depth must be 8 or 16, got {other}"
            ))),
        }
    }
}

/// Reader wrapper that publishes how far the decoder has consumed the stream.
struct Tracked<'a> {
    inner: Cursor<&'a [u8]>,
    position: Rc<Cell<u64>>,
}

impl Tracked<'_> {
    fn sync(&self) {
        self.position.set(self.inner.position());
    }
}

impl Read for Tracked<'_> {
    fn read(&mut self, buf: &mut [u8]) -> io::Result<usize> {
        let n = self.inner.read(buf)?;
        self.sync();
        Ok(n)
    }
}

impl BufRead for Tracked<'_> {
    fn fill_buf(&mut self) -> io::Result<&[u8]> {
        self.inner.fill_buf()
    }

    fn consume(&mut self, amt: usize) {
        self.inner.consume(amt);
        self.sync();
    }
}

impl Seek for Tracked<'_> {
    fn seek(&mut self, pos: SeekFrom) -> io::Result<u64> {
        let p = self.inner.seek(pos)?;
        self.sync();
        Ok(p)
    }
}

/// Decodes a PNG into unit-interval samples. Alpha is dropped.
pub fn decode_png(bytes: &[u8]) -> Result<Image> {
    let position = Rc::new(Cell::new(0));
    let decode_err = |e: png::DecodingError, pos: &Rc<Cell<u64>>| Error::Decode {
        offset: pos.get(),
        message: e.to_string(),
    };
    let mut decoder = png::Decoder::new(Tracked {
        inner: Cursor::new(bytes),
        position: Rc::clone(&position),
    });
    decoder.set_transformations(Transformations::IDENTITY);
    let mut reader = decoder.read_info().map_err(|e| decode_err(e, &position))?;

    let info = reader.info();
    let (color, depth) = (info.color_type, info.bit_depth);
    let src_channels = match color {
        ColorType::Grayscale => 1,
        ColorType::GrayscaleAlpha => 2,
        ColorType::Rgb => 3,
        ColorType::Rgba => 4,
        ColorType::Indexed => {
            return Err(Error::UnsupportedFormat("indexed-color PNG".into()));
        }
    };
    let max = match depth {
        PngDepth::Eight => 255.0,
        PngDepth::Sixteen => 65535.0,
        other => {
            return Err(Error::UnsupportedFormat(format!(
                "{other:?} bit depth (only 8 and 16 are accepted)"
            )));
        }
    };

    let size = reader
        .output_buffer_size()
        .ok_or_else(|| Error::UnsupportedFormat("image too large".into()))?;
    let mut buf = vec![0u8; size];
    let frame = reader
        .next_frame(&mut buf)
        .map_err(|e| decode_err(e, &position))?;
    let (width, height) = (frame.width as usize, frame.height as usize);
    let line = frame.line_size;

    let out_channels = if src_channels <= 2 { 1 } else { 3 };
    let bytes_per_sample = if depth == PngDepth::Sixteen { 2 } else { 1 };
    let mut data = Vec::with_capacity(height * width * out_channels);
    for row in buf.chunks_exact(line).take(height) {
        for px in row[..width * src_channels * bytes_per_sample]
            .chunks_exact(src_channels * bytes_per_sample)
        {
            for ch in 0..out_channels {
                let raw = if bytes_per_sample == 2 {
                    u16::from_be_bytes([px[2 * ch], px[2 * ch + 1]]) as f64
                } else {
                    px[ch] as f64
                };
                data.push(raw / max);
            }
        }
    }
    Image::new(height, width, out_channels, data)
}

/// Quantizes with round-half-up: `floor(v * max + 0.5)`.
#[inline]
pub fn quantize(v: f64, depth: BitDepth) -> u16 {
    let max = depth.max_value();
    (v * max + 0.5).floor().clamp(0.0, max) as u16
}

pub fn encode_png(image: &Image, depth: BitDepth) -> Result<Vec<u8>> {
    let color = match image.channels() {
        1 => ColorType::Grayscale,
        3 => ColorType::Rgb,
        other => {
            return Err(Error::ChannelCount {
                expected: 3,
                found: other,
            })
        }
    };
    let raw: Vec<u8> = match depth {
        BitDepth::Eight => image
            .samples()
            .iter()
            .map(|&v| quantize(v, depth) as u8)
            .collect(),
        BitDepth::Sixteen => image
            .samples()
            .iter()
            .flat_map(|&v| quantize(v, depth).to_be_bytes())
            .collect(),
    };
    write_png_raw(image.height(), image.width(), color, depth, &raw)
}

pub(crate) fn write_png_raw(
    height: usize,
    width: usize,
    color: ColorType,
    depth: BitDepth,
    raw: &[u8],
) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    {
        let mut encoder = png::Encoder::new(&mut out, width as u32, height as u32);
        encoder.set_color(color);
        encoder.set_depth(match depth {
            BitDepth::Eight => PngDepth::Eight,
            BitDepth::Sixteen => PngDepth::Sixteen,
        });
        let mut writer = encoder.write_header().map_err(io::Error::other)?;
        writer.write_image_data(raw).map_err(io::Error::other)?;
        writer.finish().map_err(io::Error::other)?;
    }
    Ok(out)
}

pub fn read_png(path: impl AsRef<std::path::Path>) -> Result<Image> {
    decode_png(&std::fs::read(path)?)
}

pub fn write_png(image: &Image, depth: BitDepth, path: impl AsRef<std::path::Path>) -> Result<()> {
    std::fs::write(path, encode_png(image, depth)?)?;
    Ok(())
}
