//! Output directories whose files are hashed as they are written.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::config::sha256_hex;

/// Number formatting shared by every CSV: shortest round-trip decimal, or
/// scientific notation outside `[1e-4, 1e15)`.
pub fn num(x: f64) -> String {
    let a = x.abs();
    if x == 0.0 || (1e-4..1e15).contains(&a) || !x.is_finite() {
        format!("{x}")
    } else {
        format!("{x:e}")
    }
}

#[derive(Debug)]
pub struct OutputDir {
    root: PathBuf,
    files: BTreeMap<String, String>,
}

impl OutputDir {
    pub fn create(root: &Path) -> std::io::Result<Self> {
        fs::create_dir_all(root)?;
        Ok(Self {
            root: root.to_path_buf(),
            files: BTreeMap::new(),
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    /// `sha256` of every file written so far, by name.
    pub fn files(&self) -> &BTreeMap<String, String> {
        &self.files
    }

    pub fn write_bytes(&mut self, name: &str, bytes: &[u8]) -> std::io::Result<()> {
        let path = self.root.join(name);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent)?;
        }
        fs::write(&path, bytes)?;
        self.files.insert(name.to_string(), sha256_hex(bytes));
        Ok(())
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> std::io::Result<()> {
        let mut bytes = serde_json::to_vec_pretty(value)?;
        bytes.push(b'\n');
        self.write_bytes(name, &bytes)
    }

    pub fn write_csv<I>(&mut self, name: &str, header: &[&str], rows: I) -> std::io::Result<()>
    where
        I: IntoIterator<Item = Vec<String>>,
    {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(header)?;
        for row in rows {
            w.write_record(&row)?;
        }
        let bytes = w.into_inner().map_err(|e| e.into_error())?;
        self.write_bytes(name, &bytes)
    }

    /// One JSON document per line.
    pub fn write_ndjson<T: Serialize>(&mut self, name: &str, items: &[T]) -> std::io::Result<()> {
        let mut bytes = Vec::new();
        for item in items {
            serde_json::to_writer(&mut bytes, item)?;
            bytes.push(b'\n');
        }
        self.write_bytes(name, &bytes)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn formats() {
        assert_eq!(num(0.5), "0.5");
        assert_eq!(num(0.0), "0");
        assert_eq!(num(1.25e-7), "1.25e-7");
        assert_eq!(num(f64::INFINITY), "inf");
    }

    #[test]
    fn hashes_what_it_writes() {
        let dir = tempfile::tempdir().unwrap();
        let mut out = OutputDir::create(dir.path()).unwrap();
        out.write_csv("a.csv", &["x"], [vec![num(1.0)]]).unwrap();
        let bytes = fs::read(dir.path().join("a.csv")).unwrap();
        assert_eq!(bytes, b"x\n1\n");
        assert_eq!(out.files()["a.csv"], sha256_hex(&bytes));
    }
}
