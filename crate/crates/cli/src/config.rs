//! Run configuration read from JSON.

use std::path::{Path, PathBuf};

use peakref::sim::PathConfig;
use peakref::ModelParams;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

/// Reference and wealth grids. Reference levels are spaced geometrically,
/// wealth levels linearly.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Grid {
    pub h_min: f64,
    pub h_max: f64,
    pub h_points: usize,
    pub x_min: f64,
    pub x_max: f64,
    pub x_points: usize,
}

impl Default for Grid {
    fn default() -> Self {
        Grid {
            h_min: 0.1,
            h_max: 10.0,
            h_points: 200,
            x_min: 0.1,
            x_max: 30.0,
            x_points: 100,
        }
    }
}

impl Grid {
    pub fn validate(&self) -> CliResult<()> {
        let ok = self.h_min > 0.0
            && self.h_max > self.h_min
            && self.h_points >= 2
            && self.x_min > 0.0
            && self.x_max > self.x_min
            && self.x_points >= 2
            && self.h_max.is_finite()
            && self.x_max.is_finite();
        if ok {
            Ok(())
        } else {
            Err(CliError::Config(format!(
                "grid must be positive and increasing with at least two points per axis: {self:?}"
            )))
        }
    }

    pub fn hs(&self) -> Vec<f64> {
        geometric(self.h_min, self.h_max, self.h_points)
    }

    pub fn xs(&self) -> Vec<f64> {
        linear(self.x_min, self.x_max, self.x_points)
    }
}

pub fn geometric(a: f64, b: f64, n: usize) -> Vec<f64> {
    let r = (b / a).ln();
    (0..n)
        .map(|i| if i + 1 == n { b } else { a * (r * i as f64 / (n - 1) as f64).exp() })
        .collect()
}

pub fn linear(a: f64, b: f64, n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| if i + 1 == n { b } else { a + (b - a) * i as f64 / (n - 1) as f64 })
        .collect()
}

/// Parameter scan for the sensitivity command.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sweep {
    pub param: String,
    pub values: Vec<f64>,
}

impl Default for Sweep {
    fn default() -> Self {
        Sweep {
            param: "lambda".into(),
            values: vec![0.1, 0.3, 0.5, 0.7, 0.9],
        }
    }
}

/// Starting state of simulation commands.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Start {
    pub x: f64,
    pub h: f64,
}

impl Default for Start {
    fn default() -> Self {
        Start { x: 2.0, h: 1.0 }
    }
}

/// Sample sizes of the Monte Carlo checks other than the value/budget run,
/// which uses `sim`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VerifySizes {
    pub hitting_paths: usize,
    pub hitting_horizon: f64,
    pub occupancy_paths: usize,
    pub occupancy_horizon: f64,
    pub occupancy_dt: f64,
    pub occupancy_burn_in: f64,
}

impl Default for VerifySizes {
    fn default() -> Self {
        VerifySizes {
            hitting_paths: 20_000,
            hitting_horizon: 3000.0,
            occupancy_paths: 1000,
            occupancy_horizon: 1000.0,
            occupancy_dt: 1e-2,
            occupancy_burn_in: 200.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub params: ModelParams,
    pub grid: Grid,
    pub sim: PathConfig,
    pub start: Start,
    pub sweep: Sweep,
    pub verify: VerifySizes,
    pub output_path: Option<PathBuf>,
    pub format: Option<Format>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            params: ModelParams::baseline(),
            grid: Grid::default(),
            sim: PathConfig::default(),
            start: Start::default(),
            sweep: Sweep::default(),
            verify: VerifySizes::default(),
            output_path: None,
            format: None,
        }
    }
}

impl RunConfig {
    pub fn from_json(text: &str) -> CliResult<Self> {
        serde_json::from_str(text).map_err(|e| CliError::Parse(e.to_string()))
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_document_gives_defaults() {
        assert_eq!(RunConfig::from_json("{}").unwrap(), RunConfig::default());
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(RunConfig::from_json(r#"{"bogus": 1}"#).is_err());
        assert!(RunConfig::from_json(r#"{"grid": {"h_min": 1}}"#).is_err());
    }

    #[test]
    fn grids_hit_endpoints() {
        let g = Grid::default();
        let hs = g.hs();
        assert_eq!(hs.len(), 200);
        assert_eq!(hs[0], 0.1);
        assert_eq!(hs[199], 10.0);
        assert!(hs.windows(2).all(|w| w[1] > w[0]));
        let bad = Grid { h_min: 2.0, ..g };
        assert!(bad.validate().is_ok());
        let bad = Grid { h_max: 0.05, ..g };
        assert!(bad.validate().is_err());
    }
}
