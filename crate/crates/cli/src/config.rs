use std::path::{Path, PathBuf};

use serde::Deserialize;

/// Environment variable naming the default configuration file.
pub const CONFIG_ENV: &str = "NANOFIBER_CONFIG";

/// Defaults read from a TOML file; command-line flags take precedence.
#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Defaults {
    pub n1: Option<f64>,
    pub wavelength_nm: Option<f64>,
    pub na: Option<f64>,
    pub propagation: Option<String>,
    pub m_max: Option<u32>,
    pub tolerance: Option<f64>,
    pub seed: Option<u64>,
    pub histogram_bin: Option<f64>,
}

impl Defaults {
    pub fn load(path: &Path) -> Result<Self, String> {
        let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
        toml::from_str(&text).map_err(|e| format!("{}: {e}", path.display()))
    }

    /// `--config` if given, else the file named by the environment, else
    /// nothing.
    pub fn resolve(flag: Option<&Path>) -> Result<Self, String> {
        let path: Option<PathBuf> = flag
            .map(Path::to_path_buf)
            .or_else(|| std::env::var_os(CONFIG_ENV).filter(|v| !v.is_empty()).map(PathBuf::from));
        match path {
            Some(p) => Self::load(&p),
            None => Ok(Self::default()),
        }
    }
}
