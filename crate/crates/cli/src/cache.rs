//! Stage caching: a stage is skipped when the SHA-256 of its inputs and
//! settings matches the stamp left by the last run and every output exists.

use std::fs;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use crate::error::CliError;

pub struct Stamp {
    hasher: Sha256,
}

impl Stamp {
    pub fn new(stage: &str) -> Self {
        let mut hasher = Sha256::new();
        hasher.update(format!("segment-purify/{}/{stage}\n", env!("CARGO_PKG_VERSION")));
        Stamp { hasher }
    }

    pub fn text(&mut self, label: &str, value: impl std::fmt::Display) {
        let s = format!("{label}={value}");
        self.hasher.update((s.len() as u64).to_le_bytes());
        self.hasher.update(s.as_bytes());
    }

    pub fn file(&mut self, path: &Path) -> Result<(), CliError> {
        let bytes = fs::read(path).map_err(|e| CliError::Runtime(format!("{}: {e}", path.display())))?;
        self.hasher.update((bytes.len() as u64).to_le_bytes());
        self.hasher.update(&bytes);
        Ok(())
    }

    pub fn finish(self) -> String {
        hex::encode(self.hasher.finalize())
    }
}

/// Location of a stage's stamp inside the models directory.
pub fn stamp_path(models: &Path, stage: &str) -> PathBuf {
    models.join(".cache").join(format!("{stage}.sha256"))
}

pub fn is_fresh(stamp: &Path, digest: &str, outputs: &[PathBuf]) -> bool {
    fs::read_to_string(stamp).is_ok_and(|s| s.trim() == digest) && outputs.iter().all(|p| p.is_file())
}

pub fn record(stamp: &Path, digest: &str) -> Result<(), CliError> {
    if let Some(dir) = stamp.parent() {
        fs::create_dir_all(dir)?;
    }
    fs::write(stamp, format!("{digest}\n"))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn digest_depends_on_every_input() {
        let digest = |v: &str| {
            let mut s = Stamp::new("t");
            s.text("k", v);
            s.finish()
        };
        assert_eq!(digest("1"), digest("1"));
        assert_ne!(digest("1"), digest("2"));
    }

    #[test]
    fn freshness_needs_stamp_and_outputs() {
        let dir = tempfile::tempdir().unwrap();
        let stamp = stamp_path(dir.path(), "s");
        let out = dir.path().join("o");
        assert!(!is_fresh(&stamp, "abc", &[out.clone()]));
        record(&stamp, "abc").unwrap();
        assert!(!is_fresh(&stamp, "abc", &[out.clone()]));
        fs::write(&out, b"x").unwrap();
        assert!(is_fresh(&stamp, "abc", &[out.clone()]));
        assert!(!is_fresh(&stamp, "abd", &[out]));
    }
}
