//! File helpers: checksums, JSON and CSV writers.

use std::fs;
use std::io::Read;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{CliError, CliResult};

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn file_sha256(path: &Path) -> CliResult<(u64, String)> {
    let mut f = fs::File::open(path).map_err(|e| CliError::io(format!("cannot open {}", path.display()), e))?;
    let mut h = Sha256::new();
    let mut buf = vec![0u8; 1 << 16];
    let mut size = 0u64;
    loop {
        let n = f.read(&mut buf).map_err(|e| CliError::io(format!("cannot read {}", path.display()), e))?;
        if n == 0 {
            break;
        }
        size += n as u64;
        h.update(&buf[..n]);
    }
    Ok((size, hex::encode(h.finalize())))
}

/// Inventory entry; `path` is relative to the output root.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileEntry {
    pub path: PathBuf,
    pub size: u64,
    pub sha256: String,
}

impl FileEntry {
    pub fn of(root: &Path, rel: &Path) -> CliResult<Self> {
        let (size, sha256) = file_sha256(&root.join(rel))?;
        Ok(Self { path: rel.to_path_buf(), size, sha256 })
    }

    /// `Ok(false)` when the file is missing, an integrity error when it
    /// exists with different content.
    pub fn verify(&self, root: &Path) -> CliResult<bool> {
        let full = root.join(&self.path);
        if !full.exists() {
            return Ok(false);
        }
        let (size, sha) = file_sha256(&full)?;
        if size != self.size || sha != self.sha256 {
            return Err(CliError::Integrity {
                path: full,
                detail: format!("checksum mismatch (recorded {}, found {sha})", self.sha256),
            });
        }
        Ok(true)
    }
}

pub fn ensure_dir(dir: &Path) -> CliResult<()> {
    fs::create_dir_all(dir).map_err(|e| CliError::io(format!("cannot create {}", dir.display()), e))
}

pub fn write_bytes(path: &Path, bytes: &[u8]) -> CliResult<()> {
    if let Some(parent) = path.parent() {
        ensure_dir(parent)?;
    }
    fs::write(path, bytes).map_err(|e| CliError::io(format!("cannot write {}", path.display()), e))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult<()> {
    let mut text = serde_json::to_vec_pretty(value).expect("value serializes");
    text.push(b'\n');
    write_bytes(path, &text)
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> CliResult<T> {
    let text = fs::read(path).map_err(|e| CliError::io(format!("cannot read {}", path.display()), e))?;
    serde_json::from_slice(&text).map_err(|e| CliError::Integrity { path: path.to_path_buf(), detail: e.to_string() })
}

/// Writes rows of already formatted fields under a header.
pub fn write_csv<I, R>(path: &Path, header: &[&str], rows: I) -> CliResult<()>
where
    I: IntoIterator<Item = R>,
    R: IntoIterator<Item = String>,
{
    let mut w = csv::Writer::from_writer(Vec::new());
    let err = |e: csv::Error| CliError::Stage { stage: "csv".into(), message: e.to_string() };
    w.write_record(header).map_err(err)?;
    for row in rows {
        w.write_record(row).map_err(err)?;
    }
    let bytes = w.into_inner().map_err(|e| CliError::Stage { stage: "csv".into(), message: e.to_string() })?;
    write_bytes(path, &bytes)
}

/// Matrix with a header row of column coordinates and a leading column of
/// row coordinates.
pub fn write_matrix_csv(path: &Path, corner: &str, cols: &[f64], rows: &[f64], values: &[Vec<String>]) -> CliResult<()> {
    let mut header = vec![corner.to_string()];
    header.extend(cols.iter().map(|c| num(*c)));
    let header_refs: Vec<&str> = header.iter().map(String::as_str).collect();
    write_csv(
        path,
        &header_refs,
        rows.iter().zip(values).map(|(r, v)| std::iter::once(num(*r)).chain(v.iter().cloned()).collect::<Vec<_>>()),
    )
}

/// Shortest round-trip decimal form.
pub fn num(x: f64) -> String {
    format!("{x}")
}

pub fn opt(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tampering_is_detected() {
        let dir = tempfile::tempdir().unwrap();
        write_bytes(&dir.path().join("a/b.txt"), b"hello").unwrap();
        let e = FileEntry::of(dir.path(), Path::new("a/b.txt")).unwrap();
        assert_eq!(e.size, 5);
        assert!(e.verify(dir.path()).unwrap());
        fs::write(dir.path().join("a/b.txt"), b"hellO").unwrap();
        let err = e.verify(dir.path()).unwrap_err();
        assert_eq!(err.exit_code(), 4);
        assert!(err.to_string().contains("b.txt"));
        fs::remove_file(dir.path().join("a/b.txt")).unwrap();
        assert!(!e.verify(dir.path()).unwrap());
    }

    #[test]
    fn csv_round_trip_of_numbers() {
        for x in [0.1, 1.0 / 3.0, -2.5e-300, 6.02e23] {
            assert_eq!(num(x).parse::<f64>().unwrap(), x);
        }
    }
}
