//! Exact simulation of the marginal-utility process Y and its running peak.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Open01, StandardNormal};
use rayon::prelude::*;
use serde::Serialize;

use crate::dual::DualSolution;
use crate::envelope::{Envelope, EnvelopePoint};
use crate::error::{Error, Result};

use super::config::PathConfig;

/// Independent generator for path `stream` of a run seeded with `seed`.
pub fn path_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DualState {
    pub y: f64,
    pub ymin: f64,
    pub h_dag: f64,
    pub t: f64,
}

/// Boundary levels at the current peak, refreshed whenever the peak moves.
#[derive(Debug, Clone)]
pub(crate) struct PeakLevels<'a> {
    sol: &'a DualSolution,
    env: Envelope,
    point: EnvelopePoint,
    pub h: f64,
    pub y1: f64,
    pub y2: f64,
    pub ln_y1: f64,
    pub ln_y2: f64,
    pub ln_y3: f64,
    /// Utility of zero consumption, U(-lambda h).
    pub u_zero: f64,
    /// Utility of consuming at the peak, U((1-lambda) h).
    pub u_peak: f64,
}

impl<'a> PeakLevels<'a> {
    pub fn new(sol: &'a DualSolution, h: f64) -> Result<Self> {
        let env = *sol.envelope();
        let point = env.tangent_point(h)?;
        let mut lv = PeakLevels {
            sol,
            env,
            point,
            h,
            y1: 0.0,
            y2: 0.0,
            ln_y1: 0.0,
            ln_y2: 0.0,
            ln_y3: 0.0,
            u_zero: 0.0,
            u_peak: 0.0,
        };
        lv.fill();
        Ok(lv)
    }

    fn fill(&mut self) {
        let l = self.sol.levels_from(&self.point);
        let p = self.env.params();
        self.h = l.h;
        self.y1 = l.y1;
        self.y2 = l.y2;
        self.ln_y1 = l.y1.ln();
        self.ln_y2 = l.y2.ln();
        self.ln_y3 = l.y3.ln();
        self.u_zero = self.env.u2_zero(l.h);
        self.u_peak = ((1.0 - p.lambda) * l.h).powf(p.beta1) / p.beta1;
    }

    pub fn set(&mut self, h: f64) -> Result<()> {
        let guess = self.point.w / self.point.h;
        self.point = self.env.tangent_point_from(h, Some(guess))?;
        self.fill();
        Ok(())
    }
}

/// Per-run constants of the Y dynamics.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Dynamics {
    pub drift: f64,
    pub vol: f64,
    pub var: f64,
    pub disc: f64,
    /// (1-lambda)^(-beta1/(beta1-1)): maps a running minimum of Y to a peak.
    pub peak_scale: f64,
    pub inv_b1m1: f64,
    pub gamma1: f64,
    pub beta1: f64,
    pub lambda: f64,
    pub r: f64,
}

impl Dynamics {
    pub fn new(sol: &DualSolution, dt: f64) -> Self {
        let p = sol.params();
        let d = sol.constants();
        let k2 = d.kappa * d.kappa;
        Dynamics {
            drift: -0.5 * k2 * dt,
            vol: d.kappa * dt.sqrt(),
            var: k2 * dt,
            disc: (-p.r * dt).exp(),
            peak_scale: (1.0 - p.lambda).powf(-p.beta1 / (p.beta1 - 1.0)),
            inv_b1m1: 1.0 / (p.beta1 - 1.0),
            gamma1: d.gamma1,
            beta1: p.beta1,
            lambda: p.lambda,
            r: p.r,
        }
    }

    /// Peak implied by a running minimum, before flooring at the initial level.
    pub fn peak_of_min(&self, ln_min: f64) -> f64 {
        self.peak_scale * (ln_min * self.inv_b1m1).exp()
    }

    /// Minimum of the log path over one step, drawn from the Brownian bridge.
    pub fn bridge_min(&self, a: f64, b: f64, u: f64) -> f64 {
        let d = b - a;
        0.5 * (a + b - (d * d - 2.0 * self.var * u.ln()).sqrt())
    }
}

/// Simulates `cfg.n_paths` trajectories of (Y, min Y, H) started at (y0, h0),
/// recording every `stride`-th step.
pub fn simulate_dual(
    sol: &DualSolution,
    y0: f64,
    h0: f64,
    cfg: &PathConfig,
    stride: usize,
) -> Result<Vec<Vec<DualState>>> {
    cfg.validate()?;
    let y3 = sol.boundary_levels(h0)?.y3;
    if !(y0 >= y3) {
        return Err(Error::Domain(format!("y0 = {y0} below y3(h0) = {y3}")));
    }
    let dy = Dynamics::new(sol, cfg.dt);
    let stride = stride.max(1);
    let n = cfg.steps();
    let ln_y3 = y3.ln();
    Ok((0..cfg.n_paths as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = path_rng(cfg.seed, i);
            let mut ln_y = y0.ln();
            let mut ln_min = ln_y;
            let mut h = h0;
            let mut out = Vec::with_capacity(n / stride + 2);
            for step in 0..=n {
                if step % stride == 0 || step == n {
                    out.push(DualState {
                        y: ln_y.exp(),
                        ymin: ln_min.exp(),
                        h_dag: h,
                        t: step as f64 * cfg.dt,
                    });
                }
                if step == n {
                    break;
                }
                let z: f64 = rng.sample(StandardNormal);
                let next = ln_y + dy.drift - dy.vol * z;
                let low = if cfg.bridge {
                    let u: f64 = rng.sample(Open01);
                    dy.bridge_min(ln_y, next, u)
                } else {
                    next
                };
                ln_y = next;
                if low < ln_min {
                    ln_min = low;
                    if ln_min < ln_y3 {
                        h = h.max(dy.peak_of_min(ln_min));
                    }
                }
            }
            out
        })
        .collect())
}

/// What the path kernel records for one starting marginal value.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub(crate) struct LaneOutput {
    pub value: f64,
    pub value_tail_mid: f64,
    pub value_tail_hw: f64,
    pub budget: f64,
    pub budget_tail_mid: f64,
    pub budget_tail_hw: f64,
    pub time_zero: f64,
    pub time_peak: f64,
    pub tau_zero: Option<f64>,
    pub tau_lavs: Option<f64>,
    pub y_end: f64,
    pub h_end: f64,
}

/// Options of the path kernel.
#[derive(Debug, Clone, Copy)]
pub(crate) struct KernelOptions {
    /// Occupancy is accumulated on [burn_in, horizon].
    pub burn_in: f64,
    /// Stop a path once both hitting times are known.
    pub stop_after_hits: bool,
    /// Evaluate the utility through the concave envelope instead of U.
    pub use_envelope: bool,
    /// Lanes after the first run only for samples with index below this.
    pub aux_samples: usize,
}

impl Default for KernelOptions {
    fn default() -> Self {
        KernelOptions {
            burn_in: 0.0,
            stop_after_hits: false,
            use_envelope: false,
            aux_samples: usize::MAX,
        }
    }
}

struct Lane<'a> {
    ln_y0: f64,
    ln_y: f64,
    ln_min: f64,
    ln_y3_start: f64,
    lv: PeakLevels<'a>,
    disc: f64,
    out: LaneOutput,
}

impl<'a> Lane<'a> {
    fn new(sol: &'a DualSolution, y0: f64, h0: f64) -> Result<Self> {
        let lv = PeakLevels::new(sol, h0)?;
        let ln_y0 = y0.ln();
        if ln_y0 < lv.ln_y3 {
            return Err(Error::Domain(format!("y0 = {y0} below y3(h0)")));
        }
        Ok(Lane {
            ln_y0,
            ln_y: ln_y0,
            ln_min: ln_y0,
            ln_y3_start: lv.ln_y3,
            lv,
            disc: 1.0,
            out: LaneOutput::default(),
        })
    }
}

/// Runs one sample: the lanes share a Brownian path; with antithetic sampling a
/// mirrored set of lanes runs alongside and the two are averaged.
pub(crate) fn run_sample(
    sol: &DualSolution,
    h0: f64,
    y0s: &[f64],
    cfg: &PathConfig,
    opts: &KernelOptions,
    index: u64,
) -> Result<Vec<LaneOutput>> {
    let dy = Dynamics::new(sol, cfg.dt);
    let env = *sol.envelope();
    let n = cfg.steps();
    let y0s = if (index as usize) < opts.aux_samples {
        y0s
    } else {
        &y0s[..1]
    };
    let dt = cfg.dt;
    let signs: &[f64] = if cfg.antithetic { &[1.0, -1.0] } else { &[1.0] };
    let mut lanes = Vec::with_capacity(y0s.len() * signs.len());
    for _ in signs {
        for &y0 in y0s {
            lanes.push(Lane::new(sol, y0, h0)?);
        }
    }
    let per_sign = y0s.len();
    let mut rng = path_rng(cfg.seed, index);
    for step in 0..n {
        let t = step as f64 * dt;
        let measuring = t >= opts.burn_in;
        let mut all_hit = opts.stop_after_hits;
        for lane in lanes.iter_mut() {
            let lv = &lane.lv;
            let ln_y = lane.ln_y;
            let (c, u) = if ln_y > lv.ln_y1 {
                if measuring {
                    lane.out.time_zero += dt;
                }
                (0.0, lv.u_zero)
            } else if ln_y >= lv.ln_y2 {
                let gap = (ln_y * dy.inv_b1m1).exp();
                let c = (dy.lambda * lv.h + gap).min(lv.h);
                (c, (ln_y * dy.gamma1).exp() / dy.beta1)
            } else {
                if measuring {
                    lane.out.time_peak += dt;
                }
                (lv.h, lv.u_peak)
            };
            let u = if opts.use_envelope {
                env.envelope_at(&lv.point, c)
            } else {
                u
            };
            lane.out.value += lane.disc * u * dt;
            if c > 0.0 {
                lane.out.budget += lane.disc * (ln_y - lane.ln_y0).exp() * c * dt;
            }
            if lane.out.tau_zero.is_none() && ln_y >= lv.ln_y1 {
                lane.out.tau_zero = Some(t);
            }
            if lane.out.tau_lavs.is_none() && ln_y <= lv.ln_y3 {
                lane.out.tau_lavs = Some(t);
            }
            all_hit &= lane.out.tau_zero.is_some() && lane.out.tau_lavs.is_some();
        }
        if all_hit {
            break;
        }
        let z: f64 = rng.sample(StandardNormal);
        let u: f64 = if cfg.bridge { rng.sample(Open01) } else { 0.5 };
        for (j, lane) in lanes.iter_mut().enumerate() {
            let sign = signs[j / per_sign];
            let next = lane.ln_y + dy.drift - sign * dy.vol * z;
            let low = if cfg.bridge {
                dy.bridge_min(lane.ln_y, next, u)
            } else {
                next
            };
            lane.ln_y = next;
            lane.disc *= dy.disc;
            if low < lane.ln_min {
                lane.ln_min = low;
                if low < lane.ln_y3_start {
                    lane.lv.set(dy.peak_of_min(low))?;
                    lane.lv.ln_y3 = low;
                }
            }
        }
    }
    let mut outs: Vec<LaneOutput> = lanes
        .iter()
        .map(|lane| {
            let mut o = lane.out;
            let lv = &lane.lv;
            let lo = lane.disc * lv.u_zero / dy.r;
            let hi = lane.disc * lv.u_peak / dy.r;
            o.value_tail_mid = 0.5 * (lo + hi);
            o.value_tail_hw = 0.5 * (hi - lo);
            let y_rel = (lane.ln_y - lane.ln_y0).exp();
            let b_hi = lane.disc * y_rel * lv.h / dy.r;
            o.budget_tail_mid = 0.5 * b_hi;
            o.budget_tail_hw = 0.5 * b_hi;
            o.y_end = lane.ln_y.exp();
            o.h_end = lv.h;
            o
        })
        .collect();
    if signs.len() == 2 {
        let (a, b) = outs.split_at(per_sign);
        let merged: Vec<LaneOutput> = a.iter().zip(b).map(|(a, b)| average(a, b)).collect();
        outs = merged;
    }
    Ok(outs)
}

fn average(a: &LaneOutput, b: &LaneOutput) -> LaneOutput {
    let m = |x: f64, y: f64| 0.5 * (x + y);
    LaneOutput {
        value: m(a.value, b.value),
        value_tail_mid: m(a.value_tail_mid, b.value_tail_mid),
        value_tail_hw: m(a.value_tail_hw, b.value_tail_hw),
        budget: m(a.budget, b.budget),
        budget_tail_mid: m(a.budget_tail_mid, b.budget_tail_mid),
        budget_tail_hw: m(a.budget_tail_hw, b.budget_tail_hw),
        time_zero: m(a.time_zero, b.time_zero),
        time_peak: m(a.time_peak, b.time_peak),
        tau_zero: a.tau_zero,
        tau_lavs: a.tau_lavs,
        y_end: a.y_end,
        h_end: a.h_end,
    }
}

/// Runs all samples in parallel and returns them in index order.
pub(crate) fn run_samples(
    sol: &DualSolution,
    h0: f64,
    y0s: &[f64],
    cfg: &PathConfig,
    opts: &KernelOptions,
) -> Result<Vec<Vec<LaneOutput>>> {
    cfg.validate()?;
    (0..cfg.samples() as u64)
        .into_par_iter()
        .map(|i| run_sample(sol, h0, y0s, cfg, opts, i))
        .collect()
}
