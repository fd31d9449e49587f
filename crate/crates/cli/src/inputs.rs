use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};
use walkdir::WalkDir;

/// An input image and its path relative to the argument it was found under.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InputFile {
    pub path: PathBuf,
    /// `/`-separated; a file given directly contributes its file name.
    pub rel: String,
}

impl InputFile {
    /// Relative path with separators flattened and the extension dropped.
    pub fn sample_id(&self) -> String {
        let stem = match self.rel.rsplit_once('.') {
            Some((stem, _)) if !stem.is_empty() => stem,
            _ => self.rel.as_str(),
        };
        stem.replace('/', "_")
    }
}

fn is_png(path: &Path) -> bool {
    path.extension()
        .and_then(|e| e.to_str())
        .is_some_and(|e| e.eq_ignore_ascii_case("png"))
}

/// Expands files and directories (walked recursively for `*.png`) into a
/// list sorted by relative path, then by argument order.
pub fn collect_inputs(args: &[PathBuf]) -> std::io::Result<Vec<InputFile>> {
    let mut out = Vec::new();
    for arg in args {
        if arg.is_dir() {
            let mut found = Vec::new();
            for entry in WalkDir::new(arg).follow_links(true) {
                let entry = entry.map_err(std::io::Error::other)?;
                if entry.file_type().is_file() && is_png(entry.path()) {
                    let rel = entry
                        .path()
                        .strip_prefix(arg)
                        .expect("walked path lies under its root")
                        .components()
                        .map(|c| c.as_os_str().to_string_lossy())
                        .collect::<Vec<_>>()
                        .join("/");
                    found.push(InputFile {
                        path: entry.path().to_path_buf(),
                        rel,
                    });
                }
            }
            found.sort_by(|a, b| a.rel.cmp(&b.rel));
            out.extend(found);
        } else if arg.is_file() {
            let rel = arg
                .file_name()
                .map(|n| n.to_string_lossy().into_owned())
                .unwrap_or_default();
            out.push(InputFile {
                path: arg.clone(),
                rel,
            });
        } else {
            return Err(std::io::Error::new(
                std::io::ErrorKind::NotFound,
                format!("input {} does not exist", arg.display()),
            ));
        }
    }
    Ok(out)
}

/// First eight bytes of the SHA-256 of the relative path, big-endian.
pub fn path_hash(rel: &str) -> u64 {
    let digest = Sha256::digest(rel.as_bytes());
    let mut bytes = [0u8; 8];
    bytes.copy_from_slice(&digest[..8]);
    u64::from_be_bytes(bytes)
}

pub fn image_seed(run_seed: u64, rel: &str) -> u64 {
    run_seed ^ path_hash(rel)
}
