//! Local-illumination synthesis of low-light training data, the matching
//! loss functionals, and no-reference quality metrics (LOE, NIQE, BRISQUE
//! features).
//!
//! Everything operates on [`Image`] (unit-interval samples) and
//! [`FloatMap`] (unbounded samples). Attention maps are kept as float maps
//! and stored as PFM so residuals are never quantized.

pub mod color;
pub mod error;
pub mod image;
pub mod losses;
pub mod metrics;
pub mod pfm;
pub mod png_io;
pub mod superpixel;
pub mod synthesis;

pub use color::{rgb_to_lab, LabImage};
pub use error::{Error, Result};
pub use image::{crop, lightness, resize_nearest, FloatMap, Image, Raster};
pub use pfm::{decode_pfm, encode_pfm, read_pfm, write_pfm};
pub use png_io::{decode_png, encode_png, read_png, write_png, BitDepth};
pub use superpixel::{boundary_overlay, slic, SlicParams, SuperpixelLabels};
