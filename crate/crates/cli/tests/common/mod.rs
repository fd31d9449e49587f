#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use lowlight_core::{write_png, BitDepth, Image};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn lowlight(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lowlight"))
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .expect("binary runs")
}

pub fn path_arg(p: &Path) -> &str {
    p.to_str().expect("utf-8 temp path")
}

/// Smooth colour gradients with blobs and noise, so SLIC has structure to find.
pub fn scene(h: usize, w: usize, seed: u64) -> Image {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let blobs: Vec<(f64, f64, f64, [f64; 3])> = (0..12)
        .map(|_| {
            (
                rng.random_range(0.0..h as f64),
                rng.random_range(0.0..w as f64),
                rng.random_range(0.05..0.25) * h.min(w) as f64,
                [rng.random(), rng.random(), rng.random()],
            )
        })
        .collect();
    Image::from_fn(h, w, 3, |r, c, ch| {
        let mut v = 0.3 * (r + c) as f64 / (h + w) as f64;
        for &(y, x, rad, col) in &blobs {
            let d2 = ((r as f64 - y).powi(2) + (c as f64 - x).powi(2)) / (rad * rad);
            v += 0.6 * col[ch] * (-d2).exp();
        }
        v + rng.random_range(-0.03..0.03)
    })
    .unwrap()
}

pub fn write_scene(dir: &Path, name: &str, h: usize, w: usize, seed: u64) -> PathBuf {
    let path = dir.join(name);
    write_png(&scene(h, w, seed), BitDepth::Eight, &path).unwrap();
    path
}

/// Every file under `dir` (relative path, bytes), sorted by path.
pub fn snapshot(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<(String, Vec<u8>)> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.is_file())
        .map(|p| {
            (
                p.file_name().unwrap().to_string_lossy().into_owned(),
                std::fs::read(&p).unwrap(),
            )
        })
        .collect();
    files.sort();
    files
}
