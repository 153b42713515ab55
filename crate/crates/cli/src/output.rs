//! Atomic output files and the run manifest.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::Context;
use serde::Serialize;
use sha2::{Digest, Sha256};

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

#[derive(Debug, Serialize)]
pub struct OutputRecord {
    pub file: String,
    pub bytes: usize,
    pub sha256: String,
}

#[derive(Debug, Serialize)]
pub struct Manifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub subcommand: String,
    pub config_sha256: String,
    pub seed: u64,
    pub outputs: Vec<OutputRecord>,
}

/// Collects the files of one run in a single output directory.
pub struct OutputDir {
    dir: PathBuf,
    records: Vec<OutputRecord>,
}

impl OutputDir {
    pub fn create(dir: &Path) -> anyhow::Result<Self> {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        Ok(Self {
            dir: dir.to_path_buf(),
            records: Vec::new(),
        })
    }

    /// Writes to a temporary sibling, syncs it and renames it into place.
    fn write_atomic(&self, name: &str, bytes: &[u8]) -> anyhow::Result<()> {
        let target = self.dir.join(name);
        let tmp = self.dir.join(format!(".{name}.tmp"));
        let mut f = fs::File::create(&tmp).with_context(|| format!("creating {}", tmp.display()))?;
        f.write_all(bytes)?;
        f.sync_all()?;
        drop(f);
        fs::rename(&tmp, &target).with_context(|| format!("renaming to {}", target.display()))?;
        Ok(())
    }

    /// Writes an output file and records its hash.
    pub fn put(&mut self, name: &str, bytes: Vec<u8>) -> anyhow::Result<()> {
        self.write_atomic(name, &bytes)?;
        self.records.retain(|r| r.file != name);
        self.records.push(OutputRecord {
            file: name.to_string(),
            bytes: bytes.len(),
            sha256: sha256_hex(&bytes),
        });
        Ok(())
    }

    pub fn put_json<T: Serialize>(&mut self, name: &str, value: &T) -> anyhow::Result<()> {
        let mut bytes = serde_json::to_vec_pretty(value)?;
        bytes.push(b'\n');
        self.put(name, bytes)
    }

    /// Writes manifest.json last and returns its text.
    pub fn finish(self, subcommand: &str, config: &[u8], seed: u64) -> anyhow::Result<String> {
        let manifest = Manifest {
            tool: env!("CARGO_PKG_NAME"),
            version: env!("CARGO_PKG_VERSION"),
            subcommand: subcommand.to_string(),
            config_sha256: sha256_hex(config),
            seed,
            outputs: self.records,
        };
        let mut text = serde_json::to_string_pretty(&manifest)?;
        text.push('\n');
        let dir = OutputDir {
            dir: self.dir,
            records: Vec::new(),
        };
        dir.write_atomic("manifest.json", text.as_bytes())?;
        Ok(text)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn known_digest() {
        assert_eq!(
            sha256_hex(b"abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }

    #[test]
    fn files_are_replaced_and_hashed() {
        let tmp = tempfile::tempdir().unwrap();
        let mut out = OutputDir::create(&tmp.path().join("run")).unwrap();
        out.put("a.csv", b"x\n1\n".to_vec()).unwrap();
        out.put("a.csv", b"x\n2\n".to_vec()).unwrap();
        let text = out.finish("variation", b"{}", 3).unwrap();
        assert_eq!(fs::read(tmp.path().join("run/a.csv")).unwrap(), b"x\n2\n");
        assert!(text.contains(&sha256_hex(b"x\n2\n")));
        let names: Vec<_> = fs::read_dir(tmp.path().join("run"))
            .unwrap()
            .map(|e| e.unwrap().file_name())
            .collect();
        assert_eq!(names.len(), 2);
    }
}
