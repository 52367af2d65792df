//! Output directories that record every file they produce, with SHA-256
//! hashes, in `manifest.json`.

use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};
use thermoacoustic::grid::ScalarField;
use thermoacoustic::io;
use thermoacoustic::wave::BoundaryTrace;

use crate::error::Result;

/// Environment variable naming the default output root.
pub const OUTPUT_ROOT_ENV: &str = "TAT_OUTPUT_ROOT";
/// Output root used when the variable is unset.
pub const DEFAULT_OUTPUT_ROOT: &str = "tat-out";
pub const MANIFEST_NAME: &str = "manifest.json";

pub fn output_root() -> PathBuf {
    std::env::var_os(OUTPUT_ROOT_ENV).map(PathBuf::from).unwrap_or_else(|| PathBuf::from(DEFAULT_OUTPUT_ROOT))
}

/// `explicit` if given (relative paths sit under the output root), else
/// `<root>/<name>`.
pub fn output_dir(explicit: Option<&Path>, name: &str) -> PathBuf {
    match explicit {
        Some(p) if p.is_absolute() => p.to_path_buf(),
        Some(p) => output_root().join(p),
        None => output_root().join(name),
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ManifestEntry {
    pub path: String,
    pub bytes: u64,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Manifest {
    pub files: Vec<ManifestEntry>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

pub struct Outputs {
    dir: PathBuf,
    written: Vec<String>,
}

impl Outputs {
    pub fn create(dir: &Path) -> Result<Self> {
        std::fs::create_dir_all(dir)?;
        Ok(Self { dir: dir.to_path_buf(), written: Vec::new() })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    fn record(&mut self, name: &str) {
        if !self.written.iter().any(|w| w == name) {
            self.written.push(name.to_string());
        }
    }

    pub fn bytes(&mut self, name: &str, data: &[u8]) -> Result<PathBuf> {
        let p = self.path(name);
        std::fs::write(&p, data)?;
        self.record(name);
        Ok(p)
    }

    pub fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<PathBuf> {
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        self.bytes(name, text.as_bytes())
    }

    /// `<stem>.bin` with its `<stem>.json` sidecar.
    pub fn field(&mut self, stem: &str, f: &ScalarField) -> Result<PathBuf> {
        let bin = format!("{stem}.bin");
        io::write_field(&self.path(&bin), f)?;
        self.record(&bin);
        self.record(&format!("{stem}.json"));
        Ok(self.path(&bin))
    }

    pub fn pgm(&mut self, name: &str, f: &ScalarField, region: &thermoacoustic::grid::Region) -> Result<PathBuf> {
        self.bytes(name, &io::field_to_pgm(f, region).encode())
    }

    pub fn trace(&mut self, name: &str, t: &BoundaryTrace) -> Result<PathBuf> {
        io::write_trace(&self.path(name), t)?;
        self.record(name);
        Ok(self.path(name))
    }

    /// Hash everything written and store `manifest.json`.
    pub fn finish(self) -> Result<Manifest> {
        let mut names = self.written;
        names.sort();
        let mut files = Vec::with_capacity(names.len());
        for name in names {
            let data = std::fs::read(self.dir.join(&name))?;
            files.push(ManifestEntry { path: name, bytes: data.len() as u64, sha256: sha256_hex(&data) });
        }
        let manifest = Manifest { files };
        let mut text = serde_json::to_string_pretty(&manifest)?;
        text.push('\n');
        std::fs::write(self.dir.join(MANIFEST_NAME), text)?;
        Ok(manifest)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sha256_known_vector() {
        assert_eq!(sha256_hex(b"abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    }

    #[test]
    fn manifest_lists_every_file_once() {
        let dir = tempfile::tempdir().unwrap();
        let mut out = Outputs::create(dir.path()).unwrap();
        out.bytes("b.txt", b"bee").unwrap();
        out.bytes("a.txt", b"abc").unwrap();
        out.bytes("a.txt", b"abc").unwrap();
        let g = thermoacoustic::grid::Grid2D::default_box(11);
        out.field("f", &ScalarField::zeros(g)).unwrap();
        let m = out.finish().unwrap();
        let names: Vec<&str> = m.files.iter().map(|e| e.path.as_str()).collect();
        assert_eq!(names, ["a.txt", "b.txt", "f.bin", "f.json"]);
        assert_eq!(m.files[0].sha256, sha256_hex(b"abc"));
        assert_eq!(m.files[2].bytes, 11 * 11 * 8);
        assert!(dir.path().join(MANIFEST_NAME).exists());
    }
}
