//! Euler simulation of optimal wealth under the feedback controls.

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::policy::{Policy, PolicySlice, Region};

use super::config::PathConfig;
use super::paths::{path_rng, Dynamics};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PrimalState {
    pub t: f64,
    pub x: f64,
    pub h: f64,
    pub c: f64,
    pub pi: f64,
    pub region: Region,
    pub absorbed: bool,
}

struct Walker<'a> {
    policy: &'a Policy,
    slice: PolicySlice,
    f: Option<f64>,
    x: f64,
    absorbed: bool,
}

impl<'a> Walker<'a> {
    fn new(policy: &'a Policy, x0: f64, h0: f64) -> Result<Self> {
        let (slice, _) = policy.effective(x0, h0)?;
        Ok(Walker {
            policy,
            slice,
            f: None,
            x: if x0 > slice.bounds.x_lavs { slice.bounds.x_lavs } else { x0 },
            absorbed: x0 == 0.0,
        })
    }

    fn controls(&mut self) -> Result<(f64, f64, Region)> {
        if self.absorbed {
            return Ok((0.0, 0.0, Region::ZeroConsumption));
        }
        let pt = self.slice.controls_from(self.x, self.f)?;
        self.f = Some(pt.f);
        Ok((pt.c_star, pt.pi_star, pt.region))
    }

    fn step(&mut self, c: f64, pi: f64, dt: f64, dw: f64) -> Result<()> {
        if self.absorbed {
            return Ok(());
        }
        let p = self.policy.dual().params();
        let x = self.x + (p.r * self.x + pi * (p.mu - p.r) - c) * dt + pi * p.sigma * dw;
        if x <= 0.0 {
            self.x = 0.0;
            self.absorbed = true;
            return Ok(());
        }
        if x > self.slice.bounds.x_lavs {
            let h = self.policy.ratchet_inverse_from(x, self.slice.h())?;
            self.slice = self.policy.at(h.max(self.slice.h()))?;
            self.f = None;
            self.x = x.min(self.slice.bounds.x_lavs);
        } else {
            self.x = x;
        }
        Ok(())
    }
}

/// Euler-Maruyama paths of (X, H) from (x0, h0), recording every `stride`-th step.
pub fn simulate_primal(
    policy: &Policy,
    x0: f64,
    h0: f64,
    cfg: &PathConfig,
    stride: usize,
) -> Result<Vec<Vec<PrimalState>>> {
    cfg.validate()?;
    if !(x0 >= 0.0 && x0.is_finite()) {
        return Err(Error::Domain(format!("x0 = {x0} must be nonnegative")));
    }
    let stride = stride.max(1);
    let n = cfg.steps();
    let sq = cfg.dt.sqrt();
    (0..cfg.n_paths as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = path_rng(cfg.seed, i);
            let mut w = Walker::new(policy, x0, h0)?;
            let mut out = Vec::with_capacity(n / stride + 2);
            for step in 0..=n {
                let (c, pi, region) = w.controls()?;
                if step % stride == 0 || step == n {
                    out.push(PrimalState {
                        t: step as f64 * cfg.dt,
                        x: w.x,
                        h: w.slice.h(),
                        c,
                        pi,
                        region,
                        absorbed: w.absorbed,
                    });
                }
                if step == n {
                    break;
                }
                let z: f64 = rng.sample(StandardNormal);
                w.step(c, pi, cfg.dt, sq * z)?;
            }
            Ok(out)
        })
        .collect()
}

/// Mean over paths of sup_t |X_t - g(Y_t, H_t)|, where X follows the Euler
/// scheme and Y the exact dual dynamics driven by the same Brownian increments.
pub fn coupled_error(
    policy: &Policy,
    x0: f64,
    h0: f64,
    cfg: &PathConfig,
) -> Result<f64> {
    cfg.validate()?;
    let sol = policy.dual();
    let dy = Dynamics::new(sol, cfg.dt);
    let n = cfg.steps();
    let sq = cfg.dt.sqrt();
    let start = policy.feedback_controls(x0, h0)?;
    let errs: Vec<f64> = (0..cfg.n_paths as u64)
        .into_par_iter()
        .map(|i| -> Result<f64> {
            let mut rng = path_rng(cfg.seed, i);
            let mut w = Walker::new(policy, x0, start.h)?;
            let mut dual = policy.at(start.h)?;
            let ln_y3_start = dual.dual.levels.y3.ln();
            let mut ln_y = start.f.ln();
            let mut ln_min = ln_y;
            let mut sup = 0.0f64;
            for _ in 0..n {
                let (c, pi, _) = w.controls()?;
                let z: f64 = rng.sample(StandardNormal);
                w.step(c, pi, cfg.dt, sq * z)?;
                ln_y += dy.drift - dy.vol * z;
                if ln_y < ln_min {
                    ln_min = ln_y;
                    if ln_min < ln_y3_start {
                        dual = policy.at(dy.peak_of_min(ln_min))?;
                    }
                }
                let y = ln_y.exp().max(dual.dual.levels.y3);
                let g = dual.wealth_of(y)?;
                sup = sup.max((w.x - g).abs());
            }
            Ok(sup)
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(errs.iter().sum::<f64>() / errs.len() as f64)
}
