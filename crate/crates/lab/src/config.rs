//! Experiment configuration: a small JSON document naming the experiment
//! kind, the parameter grid, the trial count and the base seed.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::LabError;

pub const DEFAULT_TRIALS: u64 = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ExperimentKind {
    StabSweep,
    RegretSweep,
    LemmaSuite,
    BoundTable,
}

/// Parameter lists. A list left out of the JSON takes the default for the
/// experiment kind; an explicit empty list stays empty.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Grid {
    pub n: Vec<usize>,
    pub mu: Vec<f64>,
    #[serde(rename = "N")]
    pub samples: Vec<usize>,
    #[serde(rename = "T")]
    pub horizon: Vec<usize>,
    pub delta: Vec<f64>,
    pub sigma_u2: Vec<f64>,
    pub rho: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    pub grid: Grid,
    pub trials: u64,
    pub base_seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out_path: Option<String>,
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct RawGrid {
    n: Option<Vec<usize>>,
    mu: Option<Vec<f64>>,
    #[serde(rename = "N")]
    samples: Option<Vec<usize>>,
    #[serde(rename = "T")]
    horizon: Option<Vec<usize>>,
    delta: Option<Vec<f64>>,
    sigma_u2: Option<Vec<f64>>,
    rho: Option<Vec<f64>>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields, rename_all = "camelCase")]
struct RawConfig {
    kind: ExperimentKind,
    #[serde(default)]
    grid: RawGrid,
    trials: Option<i64>,
    base_seed: Option<u64>,
    out_path: Option<String>,
}

impl Grid {
    pub fn default_for(kind: ExperimentKind) -> Self {
        let empty = Grid {
            n: vec![],
            mu: vec![],
            samples: vec![],
            horizon: vec![],
            delta: vec![],
            sigma_u2: vec![],
            rho: vec![],
        };
        match kind {
            ExperimentKind::StabSweep => Grid {
                n: vec![2, 3, 4],
                mu: vec![0.5],
                samples: vec![16, 64, 256, 1024, 4096],
                delta: vec![0.1],
                sigma_u2: vec![1.0],
                ..empty
            },
            ExperimentKind::RegretSweep => Grid {
                n: vec![3, 4, 5, 6],
                horizon: vec![1 << 10, 1 << 12, 1 << 14],
                ..empty
            },
            ExperimentKind::LemmaSuite => Grid {
                n: vec![3, 4, 5, 6, 7, 8],
                mu: vec![0.5],
                rho: vec![0.5],
                ..empty
            },
            ExperimentKind::BoundTable => Grid {
                n: vec![3, 4, 5, 6],
                mu: vec![0.5],
                delta: vec![0.1],
                sigma_u2: vec![1.0],
                rho: vec![0.5],
                ..empty
            },
        }
    }

    fn resolve(raw: RawGrid, kind: ExperimentKind) -> Self {
        let d = Grid::default_for(kind);
        Grid {
            n: raw.n.unwrap_or(d.n),
            mu: raw.mu.unwrap_or(d.mu),
            samples: raw.samples.unwrap_or(d.samples),
            horizon: raw.horizon.unwrap_or(d.horizon),
            delta: raw.delta.unwrap_or(d.delta),
            sigma_u2: raw.sigma_u2.unwrap_or(d.sigma_u2),
            rho: raw.rho.unwrap_or(d.rho),
        }
    }
}

fn bad(path: impl Into<String>, message: impl Into<String>) -> LabError {
    LabError::Config {
        path: path.into(),
        message: message.into(),
    }
}

fn check_each<T: Copy + std::fmt::Display>(
    name: &str,
    values: &[T],
    ok: impl Fn(T) -> bool,
    rule: &str,
) -> Result<(), LabError> {
    for (i, &v) in values.iter().enumerate() {
        if !ok(v) {
            return Err(bad(format!("grid.{name}[{i}]"), format!("{rule}, got {v}")));
        }
    }
    Ok(())
}

impl ExperimentConfig {
    fn validate(&self) -> Result<(), LabError> {
        let g = &self.grid;
        let unit = |v: f64| v > 0.0 && v < 1.0;
        match self.kind {
            ExperimentKind::StabSweep => {
                check_each("n", &g.n, |v| v >= 2, "must be at least 2")?;
                check_each("mu", &g.mu, unit, "must lie in (0, 1)")?;
                check_each("N", &g.samples, |v| v >= 1, "must be at least 1")?;
                check_each("delta", &g.delta, |v| v > 0.0 && v < 0.5, "must lie in (0, 1/2)")?;
                check_each("sigma_u2", &g.sigma_u2, |v| v > 0.0 && v.is_finite(), "must be positive")?;
            }
            ExperimentKind::RegretSweep => {
                check_each("n", &g.n, |v| v >= 3, "must be at least 3")?;
                check_each("T", &g.horizon, |v| v >= 1, "must be at least 1")?;
            }
            ExperimentKind::LemmaSuite => {
                check_each("n", &g.n, |v| v >= 2, "must be at least 2")?;
                check_each("mu", &g.mu, unit, "must lie in (0, 1)")?;
                check_each("N", &g.samples, |v| v >= 1, "must be at least 1")?;
                check_each("rho", &g.rho, unit, "must lie in (0, 1)")?;
            }
            ExperimentKind::BoundTable => {
                check_each("n", &g.n, |v| v >= 2, "must be at least 2")?;
                check_each("mu", &g.mu, unit, "must lie in (0, 1)")?;
                check_each("delta", &g.delta, |v| v > 0.0 && v < 0.5, "must lie in (0, 1/2)")?;
                check_each("sigma_u2", &g.sigma_u2, |v| v > 0.0 && v.is_finite(), "must be positive")?;
                check_each("rho", &g.rho, unit, "must lie in (0, 1)")?;
            }
        }
        Ok(())
    }

    /// Canonical JSON text: every field present, fixed key order, compact.
    pub fn to_canonical_json(&self) -> String {
        serde_json::to_string(self).expect("config serializes")
    }

    /// Hex SHA-256 of the canonical JSON.
    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(self.to_canonical_json().as_bytes()))
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.base_seed = seed;
        self
    }
}

/// Parse and validate a configuration; errors name the offending field.
pub fn parse_config(text: &str) -> Result<ExperimentConfig, LabError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let raw: RawConfig = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        bad(if path == "." { String::from("<root>") } else { path }, e.inner().to_string())
    })?;
    let trials = match raw.trials {
        None => DEFAULT_TRIALS,
        Some(t) if t >= 1 => t as u64,
        Some(t) => return Err(bad("trials", format!("must be at least 1, got {t}"))),
    };
    let cfg = ExperimentConfig {
        kind: raw.kind,
        grid: Grid::resolve(raw.grid, raw.kind),
        trials,
        base_seed: raw.base_seed.unwrap_or(0),
        out_path: raw.out_path,
    };
    cfg.validate()?;
    Ok(cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_takes_defaults() {
        let cfg = parse_config(r#"{"kind": "StabSweep"}"#).unwrap();
        assert_eq!(cfg.trials, 100);
        assert_eq!(cfg.base_seed, 0);
        assert_eq!(cfg.grid, Grid::default_for(ExperimentKind::StabSweep));
    }

    #[test]
    fn negative_trials_named() {
        let err = parse_config(r#"{"kind": "StabSweep", "trials": -3}"#).unwrap_err();
        assert!(err.to_string().contains("trials"), "{err}");
        let err = parse_config(r#"{"kind": "StabSweep", "trials": "many"}"#).unwrap_err();
        assert!(err.to_string().contains("trials"), "{err}");
    }

    #[test]
    fn grid_errors_carry_index() {
        let err = parse_config(r#"{"kind": "StabSweep", "grid": {"mu": [0.5, 1.5]}}"#).unwrap_err();
        assert!(err.to_string().contains("grid.mu[1]"), "{err}");
        let err = parse_config(r#"{"kind": "StabSweep", "grid": {"nu": [1]}}"#).unwrap_err();
        assert!(err.to_string().contains("grid"), "{err}");
    }

    #[test]
    fn empty_list_is_kept() {
        let cfg = parse_config(r#"{"kind": "LemmaSuite", "grid": {"n": []}}"#).unwrap();
        assert!(cfg.grid.n.is_empty());
        assert_eq!(cfg.grid.mu, vec![0.5]);
    }

    #[test]
    fn hash_tracks_seed() {
        let cfg = parse_config(r#"{"kind": "BoundTable"}"#).unwrap();
        assert_ne!(cfg.hash(), cfg.clone().with_seed(1).hash());
        assert_eq!(cfg.hash().len(), 64);
    }
}
