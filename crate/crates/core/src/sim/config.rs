use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Discretization and sampling settings for a Monte Carlo run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PathConfig {
    pub dt: f64,
    pub horizon: f64,
    /// Number of simulated paths. With `antithetic` they are drawn as mirrored
    /// pairs and each pair is one sample, so the count must be even.
    pub n_paths: usize,
    pub seed: u64,
    #[serde(default)]
    pub antithetic: bool,
    /// Sample the running minimum between grid points from the Brownian bridge.
    #[serde(default)]
    pub bridge: bool,
}

impl PathConfig {
    pub fn new(dt: f64, horizon: f64, n_paths: usize, seed: u64) -> Self {
        PathConfig {
            dt,
            horizon,
            n_paths,
            seed,
            antithetic: false,
            bridge: false,
        }
    }

    pub fn antithetic(mut self, on: bool) -> Self {
        self.antithetic = on;
        self
    }

    pub fn bridge(mut self, on: bool) -> Self {
        self.bridge = on;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::Config(format!("dt = {} must be positive", self.dt)));
        }
        if !(self.horizon >= 100.0 * self.dt && self.horizon.is_finite()) {
            return Err(Error::Config(format!(
                "horizon = {} must be at least 100 dt = {}",
                self.horizon,
                100.0 * self.dt
            )));
        }
        if self.n_paths == 0 {
            return Err(Error::Config("n_paths must be at least 1".into()));
        }
        if self.antithetic && self.n_paths % 2 == 1 {
            return Err(Error::Config(format!(
                "n_paths = {} must be even with antithetic pairs",
                self.n_paths
            )));
        }
        Ok(())
    }

    /// Independent samples: pairs with antithetic sampling, paths otherwise.
    pub fn samples(&self) -> usize {
        if self.antithetic {
            self.n_paths / 2
        } else {
            self.n_paths
        }
    }

    pub fn steps(&self) -> usize {
        (self.horizon / self.dt).round() as usize
    }
}

impl Default for PathConfig {
    fn default() -> Self {
        PathConfig::new(1e-3, 200.0, 20_000, 2024).antithetic(true)
    }
}
