//! TOML run configuration. Command-line flags override every key.

use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::UsageError;

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub dataset: Option<PathBuf>,
    pub format: Option<String>,
    pub types: Option<String>,
    pub source: Option<String>,
    pub name_bank: Option<PathBuf>,
    pub annotations: Option<PathBuf>,
    pub n_seeds: Option<usize>,
    pub base_seed: Option<u64>,
    pub output_dir: Option<PathBuf>,
    pub stem: Option<String>,
    pub failure_budget: Option<f64>,
    pub emit_oracle: Option<bool>,
    #[serde(default)]
    pub mask: MaskSection,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MaskSection {
    pub input: Option<PathBuf>,
    pub output: Option<PathBuf>,
    pub policy: Option<String>,
    pub rate: Option<f64>,
    pub seed: Option<u64>,
    pub geometric_p: Option<f64>,
    pub max_span: Option<usize>,
    pub entity_prob: Option<f64>,
    pub per_sequence: Option<bool>,
}

impl ConfigFile {
    /// Reads `path`; relative paths inside it resolve against its directory.
    pub fn load(path: &Path) -> Result<Self, UsageError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| UsageError(format!("cannot read config {}: {e}", path.display())))?;
        let mut cfg: ConfigFile = toml::from_str(&text)
            .map_err(|e| UsageError(format!("invalid config {}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new(""));
        for p in [
            &mut cfg.dataset,
            &mut cfg.name_bank,
            &mut cfg.annotations,
            &mut cfg.output_dir,
            &mut cfg.mask.input,
            &mut cfg.mask.output,
        ]
        .into_iter()
        .flatten()
        {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(cfg)
    }

    pub fn load_opt(path: Option<&Path>) -> Result<Self, UsageError> {
        path.map_or_else(|| Ok(Self::default()), Self::load)
    }
}
