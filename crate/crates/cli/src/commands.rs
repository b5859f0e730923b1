//! Subcommand implementations. Each builds a [`Table`] or report; rendering
//! and writing happen in the caller.

use peakref::analytics::{asymptotic_ratios, lavs_ratios, long_run_fractions};
use peakref::dual::DualSolution;
use peakref::policy::Policy;
use peakref::sim::value_and_calibration;
use peakref::{validate, ModelParams};

use crate::config::RunConfig;
use crate::error::{CliError, CliResult};
use crate::output::{Cell, Meta, Table};
use crate::verify::{self, BoundaryRegime};

fn policy(p: &ModelParams) -> CliResult<Policy> {
    Ok(Policy::new(DualSolution::new(p)?))
}

/// Derived constants and the curvature bound status.
pub fn validate_cmd(cfg: &RunConfig) -> CliResult<Table> {
    let d = validate(&cfg.params)?;
    cfg.grid.validate()?;
    cfg.sim.validate()?;
    let p = &cfg.params;
    let bound = d.beta_bound();
    let mut t = Table::new(Meta::new("validate", p), &["quantity", "value"]);
    for (k, v) in [
        ("kappa", d.kappa),
        ("r1", d.r1),
        ("r2", d.r2),
        ("gamma1", d.gamma1),
        ("gamma2", d.gamma2),
        ("merton_c", d.merton_c),
        ("merton_pi", d.merton_pi),
        ("beta_bound", bound),
    ] {
        t.push(vec![k.into(), v.into()]);
    }
    t.push(vec!["a1_holds".into(), (p.beta1 < bound && p.beta2 < bound).into()]);
    Ok(t)
}

/// Boundary sweep with the grid-wide regime repeated on every row.
pub fn boundaries(cfg: &RunConfig) -> CliResult<Table> {
    cfg.grid.validate()?;
    let pol = policy(&cfg.params)?;
    let hs = cfg.grid.hs();
    let bs = hs
        .iter()
        .map(|&h| pol.wealth_boundaries(h))
        .collect::<peakref::Result<Vec<_>>>()?;
    let flags: Vec<bool> = bs.iter().map(|b| b.coincident()).collect();
    let regime = BoundaryRegime::classify(&flags);
    let mut t = Table::new(
        Meta::new("boundaries", &cfg.params),
        &["h", "x_zero", "x_aggr", "x_lavs", "coincident", "regime"],
    );
    for b in &bs {
        t.push(vec![
            b.h.into(),
            b.x_zero.into(),
            b.x_aggr.into(),
            b.x_lavs.into(),
            b.coincident().into(),
            regime.name().into(),
        ]);
    }
    Ok(t)
}

/// Controls and value over the (h, x) grid. Wealth above x_lavs(h) is
/// reported after the immediate ratchet, with `h_eff` the new peak.
pub fn policy_table(cfg: &RunConfig) -> CliResult<Table> {
    cfg.grid.validate()?;
    let pol = policy(&cfg.params)?;
    let mut t = Table::new(
        Meta::new("policy-table", &cfg.params),
        &["x", "h", "region", "f", "c_star", "pi_star", "value", "h_eff"],
    );
    for h in cfg.grid.hs() {
        for x in cfg.grid.xs() {
            let pt = pol.feedback_controls(x, h)?;
            t.push(vec![
                x.into(),
                h.into(),
                pt.region.name().into(),
                pt.f.into(),
                pt.c_star.into(),
                pt.pi_star.into(),
                pt.value.into(),
                pt.h.into(),
            ]);
        }
    }
    Ok(t)
}

pub const SENSITIVITY_H: f64 = 1.0;

/// Value, controls and boundaries at h = 1 for each swept parameter value.
pub fn sensitivity(cfg: &RunConfig) -> CliResult<Table> {
    cfg.grid.validate()?;
    let name = cfg.sweep.param.as_str();
    if !matches!(name, "lambda" | "mu") {
        return Err(CliError::Config(format!("sweep parameter must be lambda or mu, got `{name}`")));
    }
    let mut t = Table::new(
        Meta::new("sensitivity", &cfg.params).note("sweep", name),
        &["sweep_value", "x", "value", "c_star", "pi_star", "x_zero", "x_aggr", "x_lavs"],
    );
    for &s in &cfg.sweep.values {
        let mut p = cfg.params;
        p.set(name, s)?;
        let pol = policy(&p)?;
        let b = pol.wealth_boundaries(SENSITIVITY_H)?;
        for x in cfg.grid.xs() {
            let pt = pol.feedback_controls(x, SENSITIVITY_H)?;
            t.push(vec![
                s.into(),
                x.into(),
                pt.value.into(),
                pt.c_star.into(),
                pt.pi_star.into(),
                b.x_zero.into(),
                b.x_aggr.into(),
                b.x_lavs.into(),
            ]);
        }
    }
    Ok(t)
}

/// Monte Carlo value and budget calibration from the configured start.
pub fn simulate(cfg: &RunConfig) -> CliResult<Table> {
    let pol = policy(&cfg.params)?;
    let (x, h) = (cfg.start.x, cfg.start.h);
    let (v, c) = value_and_calibration(&pol, x, h, &cfg.sim)?;
    let meta = Meta::new("simulate", &cfg.params)
        .seed(cfg.sim.seed)
        .note("start", format!("x={x} h={h}"))
        .note(
            "sim",
            format!(
                "dt={} horizon={} n_paths={} antithetic={} bridge={}",
                cfg.sim.dt, cfg.sim.horizon, cfg.sim.n_paths, cfg.sim.antithetic, cfg.sim.bridge
            ),
        );
    let mut t = Table::new(meta, &["quantity", "estimate", "std_error", "reference"]);
    let rows: [(&str, f64, f64, f64); 4] = [
        ("value", v.estimate, v.std_error, v.analytic),
        ("value_truncation_halfwidth", v.tail_halfwidth, f64::NAN, 0.0),
        ("budget", c.budget.estimate, c.budget.std_error, x),
        ("y_star", c.mc_root, 0.5 * (c.ci_high - c.ci_low), c.analytic),
    ];
    for (k, e, se, r) in rows {
        t.push(vec![k.into(), e.into(), se.into(), r.into()]);
    }
    Ok(t)
}

/// New-peak hitting times at the standard starting points, plus the
/// zero-consumption comparison with its normalization status.
pub fn hitting_times(cfg: &RunConfig) -> CliResult<Table> {
    let sol = DualSolution::new(&cfg.params)?;
    let pol = Policy::new(sol.clone());
    let h = cfg.start.h;
    let sl = pol.at(h)?;
    let y3 = sl.dual.levels.y3;
    let starts = verify::HITTING_STARTS
        .iter()
        .map(|m| Ok((sl.wealth_of(m * y3)?, m * y3)))
        .collect::<peakref::Result<Vec<_>>>()?;
    let v = &cfg.verify;
    let rows = peakref::sim::lavs_hitting_study(
        &sol,
        h,
        &starts,
        verify::HITTING_DT,
        verify::HITTING_FACTOR,
        v.hitting_horizon,
        v.hitting_paths,
        cfg.sim.seed,
    )?;
    let z = verify::zero_hitting(cfg, &pol)?;
    let meta = Meta::new("hitting-times", &cfg.params)
        .seed(cfg.sim.seed)
        .note("h", h.to_string())
        .note("tau_zero_status", z.status.clone());
    let mut t = Table::new(
        meta,
        &["boundary", "x", "f", "analytic", "mc_mean", "mc_std_error", "mc_fine", "mc_coarse", "censored"],
    );
    for r in rows {
        t.push(vec![
            "lavs".into(),
            r.x.into(),
            r.f.into(),
            r.analytic.into(),
            r.extrapolated.mean.into(),
            r.extrapolated.std_error.into(),
            r.fine.mean.into(),
            r.coarse.mean.into(),
            r.censored.into(),
        ]);
    }
    let f = sl.inverse(z.x)?;
    t.push(vec![
        "zero".into(),
        z.x.into(),
        f.into(),
        z.analytic.unwrap_or(f64::NAN).into(),
        z.mc_mean_lower_bound.into(),
        z.mc_std_error.into(),
        Cell::Num(f64::NAN),
        Cell::Num(f64::NAN),
        ((z.censored_fraction * v.occupancy_paths as f64).round() as usize).into(),
    ]);
    Ok(t)
}

/// Large-h ratios, the ratios on the new-peak boundary at finite h, and the
/// candidate long-run fractions.
pub fn asymptotics(cfg: &RunConfig) -> CliResult<Table> {
    let a = asymptotic_ratios(&cfg.params)?;
    let sol = DualSolution::new(&cfg.params)?;
    let fr = long_run_fractions(&sol)?;
    let pol = Policy::new(sol);
    let meta = Meta::new("asymptotics", &cfg.params)
        .note("case", a.case_tag.name())
        .note("w0", a.w0.to_string());
    let mut t = Table::new(meta, &["quantity", "h", "value"]);
    let inf = f64::INFINITY;
    for (k, v) in [
        ("L1", a.l1),
        ("L2", a.l2),
        ("merton_c", a.merton_c),
        ("merton_pi", a.merton_pi),
        ("frac_peak_statement", fr.frac_peak.statement),
        ("frac_peak_proof", fr.frac_peak.proof),
        ("frac_zero_statement", fr.frac_zero.statement),
        ("frac_zero_proof", fr.frac_zero.proof),
    ] {
        t.push(vec![k.into(), Cell::Num(inf), v.into()]);
    }
    for r in lavs_ratios(&pol, &[1e1, 1e2, 1e3, 1e4])? {
        t.push(vec!["c_over_x_lavs".into(), r.h.into(), r.c_over_x.into()]);
        t.push(vec!["pi_over_x_lavs".into(), r.h.into(), r.pi_over_x.into()]);
    }
    Ok(t)
}
