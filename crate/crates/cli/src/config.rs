//! JSON pipeline configuration. Every field is optional; command-line flags win.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub paths: Paths,
    pub encoding: EncodingConfig,
    pub pooling: PoolingConfig,
    pub training: TrainingConfig,
    /// Non-action training mode: `generic`, `specific=<class>` or `loo=<class>`.
    pub mode: Option<String>,
    pub seed: Option<u64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Paths {
    pub manifest: Option<PathBuf>,
    pub models: Option<PathBuf>,
    pub output: Option<PathBuf>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EncodingConfig {
    pub k: Option<usize>,
    pub dim: Option<usize>,
    pub sample: Option<usize>,
    pub whiten: Option<bool>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PoolingConfig {
    pub alpha: Option<f64>,
    pub window: Option<u32>,
    pub stride: Option<u32>,
    pub fuse_dense: Option<bool>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainingConfig {
    pub gamma: Option<f64>,
    pub lambda: Option<f64>,
    pub tune: Option<bool>,
    pub tune_alpha: Option<bool>,
}

impl PipelineConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::Validation(format!("cannot read config {}: {e}", path.display())))?;
        let config: PipelineConfig = serde_json::from_str(&text)
            .map_err(|e| CliError::Validation(format!("config {}: {e}", path.display())))?;
        config.validate()?;
        Ok(config)
    }

    fn validate(&self) -> Result<(), CliError> {
        let e = &self.encoding;
        if e.k == Some(0) || e.dim == Some(0) || e.sample == Some(0) {
            return Err(invalid("encoding.k, encoding.dim and encoding.sample must be positive"));
        }
        let p = &self.pooling;
        if p.window == Some(0) || p.stride == Some(0) {
            return Err(invalid("pooling.window and pooling.stride must be positive"));
        }
        if let Some(a) = p.alpha {
            check_alpha(a)?;
        }
        for (name, v) in [("training.gamma", self.training.gamma), ("training.lambda", self.training.lambda)] {
            if let Some(v) = v {
                check_positive(name, v)?;
            }
        }
        if let Some(m) = &self.paths.manifest {
            if !m.is_file() {
                return Err(invalid(&format!("paths.manifest {} does not exist", m.display())));
            }
        }
        Ok(())
    }
}

fn invalid(message: &str) -> CliError {
    CliError::Validation(message.to_string())
}

pub fn check_alpha(alpha: f64) -> Result<(), CliError> {
    if alpha.is_nan() || alpha < 0.0 {
        return Err(invalid(&format!("alpha must be non-negative, got {alpha}")));
    }
    Ok(())
}

pub fn check_positive(name: &str, v: f64) -> Result<(), CliError> {
    if !(v > 0.0 && v.is_finite()) {
        return Err(invalid(&format!("{name} must be positive, got {v}")));
    }
    Ok(())
}
