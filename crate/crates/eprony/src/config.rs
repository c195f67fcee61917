//! TOML configuration files.

use std::path::{Path, PathBuf};

use eprony_core::{QuadraticField, QuadraticTerm};
use nalgebra::DMatrix;
use serde::Deserialize;

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Read {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("cannot parse {path}: {source}")]
    Parse {
        path: PathBuf,
        source: toml::de::Error,
    },
    #[error("{0}")]
    Invalid(String),
}

fn read<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
        path: path.to_path_buf(),
        source,
    })?;
    toml::from_str(&text).map_err(|source| ConfigError::Parse {
        path: path.to_path_buf(),
        source,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Prony,
    Extended,
}

/// Analysis settings. Every field is optional; command-line flags win.
#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalysisConfig {
    pub method: Option<Method>,
    /// Channel analysed for modes; defaults to the first one.
    pub channel: Option<String>,
    /// Channels used for mode shapes; defaults to all.
    pub shape_channels: Option<Vec<String>>,
    /// Reference channel for mode shapes.
    pub reference_channel: Option<String>,
    pub window: Option<[f64; 2]>,
    /// Explicit split time in seconds.
    pub split: Option<f64>,
    /// Envelope fraction for automatic splitting.
    pub auto_split: Option<f64>,
    pub order: Option<usize>,
    pub eps_freq: Option<f64>,
    pub eps_damp: Option<f64>,
    pub prune_ratio: Option<f64>,
    pub report: Option<PathBuf>,
    pub reconstruction: Option<PathBuf>,
}

impl AnalysisConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        read(path)
    }
}

/// A monomial `coefficient · x_i · x_j` in `equation`.
#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TermConfig {
    pub equation: usize,
    pub i: usize,
    pub j: usize,
    pub coefficient: f64,
}

/// Declarative quadratic vector field with an initial state.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemConfig {
    /// State names used as CSV column headers.
    pub states: Option<Vec<String>>,
    pub constant: Option<Vec<f64>>,
    /// Rows of the linear part.
    pub linear: Vec<Vec<f64>>,
    #[serde(default)]
    pub quadratic: Vec<TermConfig>,
    /// Defaults to the origin.
    pub equilibrium: Option<Vec<f64>>,
    pub initial: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
struct SystemFile {
    system: SystemConfig,
}

impl SystemConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        read::<SystemFile>(path).map(|f| f.system)
    }

    pub fn dim(&self) -> usize {
        self.linear.len()
    }

    pub fn state_names(&self) -> Vec<String> {
        match &self.states {
            Some(names) => names.clone(),
            None => (0..self.dim()).map(|i| format!("x{i}")).collect(),
        }
    }

    pub fn equilibrium(&self) -> Vec<f64> {
        self.equilibrium
            .clone()
            .unwrap_or_else(|| vec![0.0; self.dim()])
    }

    pub fn field(&self) -> Result<QuadraticField, ConfigError> {
        let n = self.dim();
        let bad = |msg: &str| ConfigError::Invalid(msg.to_string());
        if self.linear.iter().any(|row| row.len() != n) {
            return Err(bad("`linear` must be a square matrix"));
        }
        if self.initial.len() != n {
            return Err(bad("`initial` must have one entry per state"));
        }
        if self.states.as_ref().is_some_and(|s| s.len() != n) {
            return Err(bad("`states` must have one name per state"));
        }
        if self.equilibrium.as_ref().is_some_and(|e| e.len() != n) {
            return Err(bad("`equilibrium` must have one entry per state"));
        }
        let constant = self.constant.clone().unwrap_or_else(|| vec![0.0; n]);
        let linear = DMatrix::from_row_iterator(n, n, self.linear.iter().flatten().copied());
        let terms = self
            .quadratic
            .iter()
            .map(|t| QuadraticTerm {
                equation: t.equation,
                i: t.i,
                j: t.j,
                coefficient: t.coefficient,
            })
            .collect();
        QuadraticField::new(constant, linear, terms)
            .map_err(|e| ConfigError::Invalid(e.to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn system_file_parses() {
        let f: SystemFile = toml::from_str(
            r#"
            [system]
            states = ["a", "b"]
            linear = [[0.0, 1.0], [-5.0, -0.6]]
            initial = [0.1, 0.0]
            [[system.quadratic]]
            equation = 1
            i = 0
            j = 0
            coefficient = 1.0
            "#,
        )
        .unwrap();
        let field = f.system.field().unwrap();
        assert_eq!(field.eval(&[1.0, 0.0]), vec![0.0, -4.0]);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(toml::from_str::<AnalysisConfig>("ordr = 3").is_err());
        let c: AnalysisConfig =
            toml::from_str("order = 7\nwindow = [2.0, 25.0]\nmethod = \"extended\"").unwrap();
        assert_eq!(c.order, Some(7));
        assert_eq!(c.method, Some(Method::Extended));
    }
}
