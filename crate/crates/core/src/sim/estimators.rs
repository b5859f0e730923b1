//! Monte Carlo estimators built on the dual path kernel.

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;

use crate::dual::DualSolution;
use crate::error::{Error, Result};
use crate::policy::Policy;

use super::config::PathConfig;
use super::paths::{path_rng, run_samples, KernelOptions, LaneOutput};
use super::stats::{Accumulator, Estimate};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ValueReport {
    pub estimate: f64,
    pub std_error: f64,
    /// Half-width of the truncation bracket beyond the horizon (mean over samples).
    pub tail_halfwidth: f64,
    pub analytic: f64,
    pub n_paths: usize,
    pub dt: f64,
    pub horizon: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BudgetReport {
    pub x: f64,
    pub estimate: f64,
    pub std_error: f64,
    pub tail_halfwidth: f64,
    /// |estimate - x| / x.
    pub relative_residual: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CalibrationReport {
    /// y* = f(x, h) from the closed form.
    pub analytic: f64,
    /// Root of the Monte Carlo budget curve.
    pub mc_root: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    /// d budget / d y estimated with common random numbers.
    pub slope: f64,
    pub analytic_inside_ci: bool,
    pub budget: BudgetReport,
}

/// Relative shift of the auxiliary starting points used for the budget slope.
const SLOPE_SHIFT: f64 = 0.05;
/// Samples that also run the shifted starting points.
const SLOPE_SAMPLES: usize = 2000;

fn resolve(policy: &Policy, x: f64, h: f64) -> Result<(f64, f64)> {
    let pt = policy.feedback_controls(x, h)?;
    Ok((pt.f, pt.h))
}

fn value_report(policy: &Policy, x: f64, h: f64, cfg: &PathConfig, outs: &[Vec<LaneOutput>]) -> Result<ValueReport> {
    let acc: Accumulator = outs.iter().map(|o| o[0].value + o[0].value_tail_mid).collect();
    let hw = outs.iter().map(|o| o[0].value_tail_hw).sum::<f64>() / outs.len() as f64;
    Ok(ValueReport {
        estimate: acc.mean(),
        std_error: acc.std_error(),
        tail_halfwidth: hw,
        analytic: policy.value_function(x, h)?,
        n_paths: cfg.n_paths,
        dt: cfg.dt,
        horizon: cfg.horizon,
        seed: cfg.seed,
    })
}

/// Expected discounted utility of the optimal policy from (x, h), with U or
/// with the concave envelope in the integrand.
pub fn estimate_value_with(
    policy: &Policy,
    x: f64,
    h: f64,
    cfg: &PathConfig,
    use_envelope: bool,
) -> Result<ValueReport> {
    cfg.validate()?;
    if x == 0.0 {
        return Ok(ValueReport {
            estimate: policy.value_function(0.0, h)?,
            std_error: 0.0,
            tail_halfwidth: 0.0,
            analytic: policy.value_function(0.0, h)?,
            n_paths: cfg.n_paths,
            dt: cfg.dt,
            horizon: cfg.horizon,
            seed: cfg.seed,
        });
    }
    let (f, he) = resolve(policy, x, h)?;
    let opts = KernelOptions {
        use_envelope,
        ..KernelOptions::default()
    };
    let outs = run_samples(policy.dual(), he, &[f], cfg, &opts)?;
    value_report(policy, x, h, cfg, &outs)
}

pub fn estimate_value(policy: &Policy, x: f64, h: f64, cfg: &PathConfig) -> Result<ValueReport> {
    estimate_value_with(policy, x, h, cfg, false)
}

/// One run producing the value estimate and both budget-calibration routes.
pub fn value_and_calibration(
    policy: &Policy,
    x: f64,
    h: f64,
    cfg: &PathConfig,
) -> Result<(ValueReport, CalibrationReport)> {
    cfg.validate()?;
    if !(x > 0.0) {
        return Err(Error::Domain(format!("calibration needs x > 0, got {x}")));
    }
    let (f, he) = resolve(policy, x, h)?;
    let y0s = [f, f * (1.0 - SLOPE_SHIFT), f * (1.0 + SLOPE_SHIFT)];
    let opts = KernelOptions {
        aux_samples: SLOPE_SAMPLES,
        ..KernelOptions::default()
    };
    let outs = run_samples(policy.dual(), he, &y0s, cfg, &opts)?;
    let value = value_report(policy, x, h, cfg, &outs)?;

    let budget = |o: &LaneOutput| o.budget + o.budget_tail_mid;
    let b: Accumulator = outs.iter().map(|o| budget(&o[0])).collect();
    let slope: Accumulator = outs
        .iter()
        .filter(|o| o.len() == 3)
        .map(|o| (budget(&o[2]) - budget(&o[1])) / (2.0 * SLOPE_SHIFT * f))
        .collect();
    let hw = outs.iter().map(|o| o[0].budget_tail_hw).sum::<f64>() / outs.len() as f64;
    let s = slope.mean();
    let mc_root = f - (b.mean() - x) / s;
    let half = (3.0 * b.std_error() + hw) / s.abs();
    let report = CalibrationReport {
        analytic: f,
        mc_root,
        ci_low: mc_root - half,
        ci_high: mc_root + half,
        slope: s,
        analytic_inside_ci: (mc_root - half..=mc_root + half).contains(&f),
        budget: BudgetReport {
            x,
            estimate: b.mean(),
            std_error: b.std_error(),
            tail_halfwidth: hw,
            relative_residual: (b.mean() - x).abs() / x,
        },
    };
    Ok((value, report))
}

/// Budget calibration of y*; fails with `CiConflict` when the closed-form
/// y* = f(x, h) lies outside the Monte Carlo confidence interval.
pub fn calibrate_y_star(policy: &Policy, x: f64, h: f64, cfg: &PathConfig) -> Result<CalibrationReport> {
    let (_, c) = value_and_calibration(policy, x, h, cfg)?;
    if !c.analytic_inside_ci {
        return Err(Error::CiConflict(format!(
            "closed-form y* = {} outside [{}, {}]",
            c.analytic, c.ci_low, c.ci_high
        )));
    }
    Ok(c)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HitSample {
    pub time: f64,
    pub censored: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OccupancyReport {
    pub frac_zero: Estimate,
    pub frac_peak: Estimate,
    pub frac_interior: Estimate,
    pub burn_in: f64,
    pub horizon: f64,
    pub tau_zero: Vec<HitSample>,
    pub tau_lavs: Vec<HitSample>,
}

/// Summary of right-censored hitting samples.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HitSummary {
    /// Mean over all samples with censored ones counted at the horizon (a lower bound).
    pub mean_lower_bound: f64,
    pub std_error: f64,
    pub censored_fraction: f64,
    pub n: usize,
}

pub fn summarize_hits(samples: &[HitSample]) -> HitSummary {
    let acc: Accumulator = samples.iter().map(|s| s.time).collect();
    let censored = samples.iter().filter(|s| s.censored).count();
    HitSummary {
        mean_lower_bound: acc.mean(),
        std_error: acc.std_error(),
        censored_fraction: censored as f64 / samples.len().max(1) as f64,
        n: samples.len(),
    }
}

/// Long-run occupancy of the zero-consumption and peak regions over
/// [burn_in, horizon], plus first hitting times of both boundaries.
pub fn occupancy_and_hitting(
    policy: &Policy,
    x: f64,
    h: f64,
    cfg: &PathConfig,
    burn_in: f64,
) -> Result<OccupancyReport> {
    cfg.validate()?;
    if !(burn_in >= 0.0 && burn_in < cfg.horizon) {
        return Err(Error::Config(format!("burn-in {burn_in} outside [0, horizon)")));
    }
    if !(x > 0.0) {
        return Err(Error::Domain(format!("occupancy needs x > 0, got {x}")));
    }
    let (f, he) = resolve(policy, x, h)?;
    let opts = KernelOptions {
        burn_in,
        ..KernelOptions::default()
    };
    let outs = run_samples(policy.dual(), he, &[f], cfg, &opts)?;
    let window = cfg.steps() as f64 * cfg.dt - burn_in;
    let fz: Accumulator = outs.iter().map(|o| o[0].time_zero / window).collect();
    let fp: Accumulator = outs.iter().map(|o| o[0].time_peak / window).collect();
    let fi: Accumulator = outs
        .iter()
        .map(|o| 1.0 - (o[0].time_zero + o[0].time_peak) / window)
        .collect();
    let hit = |t: Option<f64>| match t {
        Some(time) => HitSample { time, censored: false },
        None => HitSample {
            time: cfg.horizon,
            censored: true,
        },
    };
    Ok(OccupancyReport {
        frac_zero: fz.estimate(),
        frac_peak: fp.estimate(),
        frac_interior: fi.estimate(),
        burn_in,
        horizon: cfg.horizon,
        tau_zero: outs.iter().map(|o| hit(o[0].tau_zero)).collect(),
        tau_lavs: outs.iter().map(|o| hit(o[0].tau_lavs)).collect(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HittingStudyRow {
    pub x: f64,
    pub f: f64,
    pub analytic: f64,
    pub fine: Estimate,
    pub coarse: Estimate,
    /// Per-path extrapolation to dt -> 0, linear in sqrt(dt).
    pub extrapolated: Estimate,
    pub censored: usize,
}

/// First time Y, started at each `f`, reaches y3(h), sampled on a fine grid and
/// on a grid `factor` times coarser along the same Brownian paths.
pub fn lavs_hitting_study(
    sol: &DualSolution,
    h: f64,
    starts: &[(f64, f64)],
    dt_fine: f64,
    factor: usize,
    horizon: f64,
    n_paths: usize,
    seed: u64,
) -> Result<Vec<HittingStudyRow>> {
    let cfg = PathConfig::new(dt_fine, horizon, n_paths, seed);
    cfg.validate()?;
    if factor < 2 {
        return Err(Error::Config("coarse factor must be at least 2".into()));
    }
    let y3 = sol.boundary_levels(h)?.y3;
    let kappa = sol.constants().kappa;
    let barriers: Vec<f64> = starts.iter().map(|&(_, f)| (y3 / f).ln()).collect();
    if barriers.iter().any(|b| *b > 0.0) {
        return Err(Error::Domain("starting marginal value below y3(h)".into()));
    }
    let drift = -0.5 * kappa * kappa * dt_fine;
    let vol = kappa * dt_fine.sqrt();
    let n = cfg.steps();
    let per_path: Vec<Vec<(f64, f64, bool)>> = (0..n_paths as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = path_rng(seed, i);
            let m = barriers.len();
            let mut fine = vec![None; m];
            let mut coarse = vec![None; m];
            let mut l = 0.0f64;
            for j in 0..m {
                if barriers[j] >= 0.0 {
                    fine[j] = Some(0.0);
                    coarse[j] = Some(0.0);
                }
            }
            let mut step = 0usize;
            while step < n && coarse.iter().any(|c| c.is_none()) {
                let z: f64 = rng.sample(StandardNormal);
                l += drift - vol * z;
                step += 1;
                let t = step as f64 * dt_fine;
                let on_coarse = step % factor == 0;
                for j in 0..m {
                    if l <= barriers[j] {
                        if fine[j].is_none() {
                            fine[j] = Some(t);
                        }
                        if on_coarse && coarse[j].is_none() {
                            coarse[j] = Some(t);
                        }
                    }
                }
            }
            (0..m)
                .map(|j| match (fine[j], coarse[j]) {
                    (Some(a), Some(b)) => (a, b, false),
                    (a, _) => (a.unwrap_or(horizon), horizon, true),
                })
                .collect()
        })
        .collect();
    let sf = dt_fine.sqrt();
    let sc = (dt_fine * factor as f64).sqrt();
    let two_over_k2 = 2.0 / (kappa * kappa);
    Ok(starts
        .iter()
        .enumerate()
        .map(|(j, &(x, f))| {
            let fine: Accumulator = per_path.iter().map(|p| p[j].0).collect();
            let coarse: Accumulator = per_path.iter().map(|p| p[j].1).collect();
            let ext: Accumulator = per_path
                .iter()
                .map(|p| (p[j].0 * sc - p[j].1 * sf) / (sc - sf))
                .collect();
            HittingStudyRow {
                x,
                f,
                analytic: two_over_k2 * (f / y3).ln(),
                fine: fine.estimate(),
                coarse: coarse.estimate(),
                extrapolated: ext.estimate(),
                censored: per_path.iter().filter(|p| p[j].2).count(),
            }
        })
        .collect())
}
