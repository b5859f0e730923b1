//! Closed-form solution of the dual problem: boundary levels, coefficient
//! functions C2..C6, the dual value v(y, h) and the running conjugate V(q, h).

use std::collections::HashMap;
use std::sync::RwLock;

use serde::Serialize;

use crate::envelope::{Envelope, EnvelopePoint, Subcase};
use crate::error::{Error, Result};
use crate::params::{validate, DerivedConstants, ModelParams};
use crate::quad;

/// Default smallest supported reference level.
pub const DEFAULT_MIN_H: f64 = 1e-6;
/// Cache nodes per decade of h.
const NODES_PER_DECADE: f64 = 16.0;
/// Length, in units of ln s, of the numerically integrated part of C6.
const C6_LOG_SPAN: f64 = 40.0;
const C6_RTOL: f64 = 1e-11;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundaryLevels {
    pub h: f64,
    pub y1: f64,
    pub y2: f64,
    pub y3: f64,
}

/// h-derivatives of the boundary levels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LevelSlopes {
    pub y1: f64,
    pub y2: f64,
    pub y3: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DualCoefficients {
    pub h: f64,
    pub c2: f64,
    pub c3: f64,
    pub c4: f64,
    pub c5: f64,
    pub c6: f64,
}

/// Dual region of a marginal value y at fixed h.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum DualRegion {
    /// y > y1: no consumption.
    Zero,
    /// y2 <= y <= y1: consumption strictly between z(h) and h.
    Interior,
    /// y3 <= y < y2: consumption at the running peak.
    Peak,
}

/// Scalar constants shared by every slice.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Consts {
    pub r: f64,
    pub r1: f64,
    pub r2: f64,
    pub g1: f64,
    pub kappa: f64,
    pub b1: f64,
    pub b2: f64,
    pub k: f64,
    pub lam: f64,
    /// r (r1 - r2)
    pub dd: f64,
    /// Coefficient of y^gamma1 in the interior region.
    pub bb: f64,
    pub k1: f64,
    pub k2: f64,
}

impl Consts {
    fn new(p: &ModelParams, d: &DerivedConstants) -> Self {
        let (r1, r2, g1) = (d.r1, d.r2, d.gamma1);
        Consts {
            r: p.r,
            r1,
            r2,
            g1,
            kappa: d.kappa,
            b1: p.beta1,
            b2: p.beta2,
            k: p.k,
            lam: p.lambda,
            dd: p.r * (r1 - r2),
            bb: 2.0 / (d.kappa * d.kappa * g1 * (g1 - r1) * (g1 - r2)),
            k1: r1 * r2 / (g1 * (g1 - r1)),
            k2: r1 * r2 / (g1 * (g1 - r2)),
        }
    }

    fn y3(&self, h: f64) -> f64 {
        (1.0 - self.lam).powf(self.b1) * h.powf(self.b1 - 1.0)
    }

    /// C3 as a function of (h, y1) and its partials.
    fn c3_parts(&self, h: f64, y: f64) -> (f64, f64, f64) {
        let lh = self.lam * h;
        let ypow = y.powf(-self.r1) / self.dd;
        let bracket = self.k * self.r2 / self.b2 * lh.powf(self.b2)
            + self.k1 * y.powf(self.g1)
            + lh * self.r1 * y;
        let val = ypow * bracket;
        let dh = ypow * (self.k * self.r2 * self.lam * lh.powf(self.b2 - 1.0) + self.lam * self.r1 * y);
        let dy = -self.r1 / y * val
            + ypow * (self.k1 * self.g1 * y.powf(self.g1 - 1.0) + lh * self.r1);
        (val, dh, dy)
    }

    /// C5 - C3 as a function of (h, y2) and its partials.
    fn c53_parts(&self, h: f64, y: f64) -> (f64, f64, f64) {
        let m = 1.0 - self.lam;
        let mh = m * h;
        let ypow = y.powf(-self.r1) / self.dd;
        let bracket =
            self.r2 / self.b1 * mh.powf(self.b1) - self.k1 * y.powf(self.g1) + mh * self.r1 * y;
        let val = ypow * bracket;
        let dh = ypow * (self.r2 * m * mh.powf(self.b1 - 1.0) + m * self.r1 * y);
        let dy = -self.r1 / y * val
            + ypow * (-self.k1 * self.g1 * y.powf(self.g1 - 1.0) + mh * self.r1);
        (val, dh, dy)
    }

    fn c46(&self, h: f64, y2: f64) -> f64 {
        let mh = (1.0 - self.lam) * h;
        y2.powf(-self.r2) / self.dd
            * (self.r1 / self.b1 * mh.powf(self.b1) - self.k2 * y2.powf(self.g1)
                + mh * self.r2 * y2)
    }

    fn c24(&self, h: f64, y1: f64) -> f64 {
        let lh = self.lam * h;
        y1.powf(-self.r2) / self.dd
            * (self.k * self.r1 / self.b2 * lh.powf(self.b2)
                + self.k2 * y1.powf(self.g1)
                + lh * self.r2 * y1)
    }
}

/// Everything needed to evaluate the dual solution at one reference level.
#[derive(Debug, Clone, Copy)]
pub struct Slice {
    pub envelope: EnvelopePoint,
    pub levels: BoundaryLevels,
    pub coef: DualCoefficients,
    c: Consts,
}

impl Slice {
    pub fn h(&self) -> f64 {
        self.levels.h
    }

    fn check(&self, y: f64) -> Result<()> {
        if y >= self.levels.y3 && y.is_finite() {
            Ok(())
        } else {
            Err(Error::Domain(format!(
                "y = {y} below the free boundary y3 = {} at h = {}",
                self.levels.y3, self.levels.h
            )))
        }
    }

    pub fn region(&self, y: f64) -> DualRegion {
        if y > self.levels.y1 {
            DualRegion::Zero
        } else if y >= self.levels.y2 {
            DualRegion::Interior
        } else {
            DualRegion::Peak
        }
    }

    /// (v, v_y, v_yy) at y >= y3.
    pub fn eval(&self, y: f64) -> Result<(f64, f64, f64)> {
        self.check(y)?;
        Ok(self.eval_unchecked(y))
    }

    /// Piece selected by [`Slice::region`], without the domain check.
    pub fn eval_unchecked(&self, y: f64) -> (f64, f64, f64) {
        let c = &self.c;
        let h = self.levels.h;
        let (r1, r2, g1) = (c.r1, c.r2, c.g1);
        let e = &self.coef;
        match self.region(y) {
            DualRegion::Zero => {
                let a = e.c2 * y.powf(r2);
                let v = a - c.k * (c.lam * h).powf(c.b2) / (c.r * c.b2);
                (v, r2 * a / y, r2 * (r2 - 1.0) * a / (y * y))
            }
            DualRegion::Interior => {
                let a = e.c3 * y.powf(r1);
                let b = e.c4 * y.powf(r2);
                let g = c.bb * y.powf(g1);
                let v = a + b + g - c.lam * h / c.r * y;
                let vy = (r1 * a + r2 * b + g1 * g) / y - c.lam * h / c.r;
                let vyy = (r1 * (r1 - 1.0) * a + r2 * (r2 - 1.0) * b + g1 * (g1 - 1.0) * g) / (y * y);
                (v, vy, vyy)
            }
            DualRegion::Peak => self.peak_piece(y),
        }
    }

    /// The peak-region formula, evaluated regardless of y's region.
    pub fn peak_piece(&self, y: f64) -> (f64, f64, f64) {
        let c = &self.c;
        let h = self.levels.h;
        let e = &self.coef;
        let a = e.c5 * y.powf(c.r1);
        let b = e.c6 * y.powf(c.r2);
        let v = a + b + ((1.0 - c.lam) * h).powf(c.b1) / (c.r * c.b1) - h / c.r * y;
        let vy = (c.r1 * a + c.r2 * b) / y - h / c.r;
        let vyy = (c.r1 * (c.r1 - 1.0) * a + c.r2 * (c.r2 - 1.0) * b) / (y * y);
        (v, vy, vyy)
    }

    /// Interior formula, evaluated regardless of y's region.
    pub fn interior_piece(&self, y: f64) -> (f64, f64, f64) {
        let c = &self.c;
        let h = self.levels.h;
        let e = &self.coef;
        let a = e.c3 * y.powf(c.r1);
        let b = e.c4 * y.powf(c.r2);
        let g = c.bb * y.powf(c.g1);
        let v = a + b + g - c.lam * h / c.r * y;
        let vy = (c.r1 * a + c.r2 * b + c.g1 * g) / y - c.lam * h / c.r;
        let vyy = (c.r1 * (c.r1 - 1.0) * a + c.r2 * (c.r2 - 1.0) * b + c.g1 * (c.g1 - 1.0) * g)
            / (y * y);
        (v, vy, vyy)
    }

    /// Zero-consumption formula, evaluated regardless of y's region.
    pub fn zero_piece(&self, y: f64) -> (f64, f64, f64) {
        let c = &self.c;
        let a = self.coef.c2 * y.powf(c.r2);
        let v = a - c.k * (c.lam * self.levels.h).powf(c.b2) / (c.r * c.b2);
        (v, c.r2 * a / y, c.r2 * (c.r2 - 1.0) * a / (y * y))
    }

    /// Value of never consuming again, -k (lambda h)^beta2 / (r beta2).
    pub fn perpetuity(&self) -> f64 {
        let c = &self.c;
        -c.k * (c.lam * self.levels.h).powf(c.b2) / (c.r * c.b2)
    }

    /// Closed-form inverse of -v_y on the zero-consumption piece.
    pub fn zero_region_inverse(&self, x: f64) -> f64 {
        let r2 = self.c.r2;
        (-x / (self.coef.c2 * r2)).powf(1.0 / (r2 - 1.0))
    }

    /// Running conjugate V(q, h) = sup over c in [0, h] of envelope(c) - c q.
    pub fn conjugate(&self, q: f64) -> Result<f64> {
        self.check(q)?;
        let c = &self.c;
        let h = self.levels.h;
        let l = &self.levels;
        Ok(if q > l.y1 {
            -c.k * (c.lam * h).powf(c.b2) / c.b2
        } else if q >= l.y2 && l.y1 > l.y2 {
            -q.powf(c.g1) / c.g1 - c.lam * h * q
        } else {
            ((1.0 - c.lam) * h).powf(c.b1) / c.b1 - h * q
        })
    }

    /// Feedback consumption c(y, h).
    pub fn consumption(&self, y: f64) -> f64 {
        let c = &self.c;
        let h = self.levels.h;
        if y > self.levels.y1 {
            0.0
        } else if y >= self.levels.y2 {
            (c.lam * h + y.powf(1.0 / (c.b1 - 1.0))).min(h)
        } else {
            h
        }
    }

    /// Residual of kappa^2/2 y^2 v_yy - r v + V and the sum of absolute term sizes.
    pub fn ode_residual(&self, y: f64) -> Result<(f64, f64)> {
        let (v, _, vyy) = self.eval(y)?;
        let big_v = self.conjugate(y)?;
        let a = 0.5 * self.c.kappa * self.c.kappa * y * y * vyy;
        let b = self.c.r * v;
        Ok((a - b + big_v, a.abs() + b.abs() + big_v.abs()))
    }
}

/// Dual solution for one parameter set, with a cache of C6 values on a
/// logarithmic h-grid.
#[derive(Debug)]
pub struct DualSolution {
    p: ModelParams,
    d: DerivedConstants,
    env: Envelope,
    c: Consts,
    h_min: f64,
    c6_bump: f64,
    nodes: RwLock<HashMap<i64, f64>>,
}

impl Clone for DualSolution {
    fn clone(&self) -> Self {
        DualSolution {
            p: self.p,
            d: self.d,
            env: self.env,
            c: self.c,
            h_min: self.h_min,
            c6_bump: self.c6_bump,
            nodes: RwLock::new(self.nodes.read().expect("cache lock").clone()),
        }
    }
}

impl DualSolution {
    pub fn new(p: &ModelParams) -> Result<Self> {
        let d = validate(p)?;
        Ok(DualSolution {
            p: *p,
            d,
            env: Envelope::new(p),
            c: Consts::new(p, &d),
            h_min: DEFAULT_MIN_H,
            c6_bump: 0.0,
            nodes: RwLock::new(HashMap::new()),
        })
    }

    pub fn with_min_h(mut self, h_min: f64) -> Self {
        self.h_min = h_min;
        self
    }

    /// Test hook: scales the stored C6 by (1 + rel) after C2 and C4 are assembled.
    pub fn with_c6_perturbation(mut self, rel: f64) -> Self {
        self.c6_bump = rel;
        self
    }

    pub fn params(&self) -> &ModelParams {
        &self.p
    }

    pub fn constants(&self) -> &DerivedConstants {
        &self.d
    }

    pub fn envelope(&self) -> &Envelope {
        &self.env
    }

    pub fn min_h(&self) -> f64 {
        self.h_min
    }

    /// Coefficient of y^gamma1 in the interior region.
    pub fn interior_power_coefficient(&self) -> f64 {
        self.c.bb
    }

    fn check_h(&self, h: f64) -> Result<()> {
        if h >= self.h_min && h.is_finite() {
            Ok(())
        } else {
            Err(Error::Domain(format!(
                "reference level h = {h} outside [{}, inf)",
                self.h_min
            )))
        }
    }

    /// Boundary levels from an already computed tangent point.
    pub fn levels_from(&self, e: &EnvelopePoint) -> BoundaryLevels {
        let c = &self.c;
        let h = e.h;
        let y1 = e.envelope_slope;
        let y2 = match e.subcase {
            Subcase::ChordToEndpoint => y1,
            Subcase::TangentInterior => ((1.0 - c.lam) * h).powf(c.b1 - 1.0),
        };
        BoundaryLevels { h, y1, y2, y3: c.y3(h) }
    }

    fn slopes_from(&self, e: &EnvelopePoint, l: &BoundaryLevels) -> LevelSlopes {
        let c = &self.c;
        let h = e.h;
        let m = 1.0 - c.lam;
        let y3 = (c.b1 - 1.0) * m.powf(c.b1) * h.powf(c.b1 - 2.0);
        match e.subcase {
            Subcase::TangentInterior => LevelSlopes {
                y1: (c.b1 - 1.0) * e.w.powf(c.b1 - 2.0) * e.wprime,
                y2: (c.b1 - 1.0) * m.powf(c.b1 - 1.0) * h.powf(c.b1 - 2.0),
                y3,
            },
            Subcase::ChordToEndpoint => {
                let np = m * (m * h).powf(c.b1 - 1.0) + c.k * c.lam * (c.lam * h).powf(c.b2 - 1.0);
                let y1 = (np - l.y1) / h;
                LevelSlopes { y1, y2: y1, y3 }
            }
        }
    }

    pub fn boundary_levels(&self, h: f64) -> Result<BoundaryLevels> {
        self.check_h(h)?;
        let e = self.env.tangent_point(h)?;
        Ok(self.levels_from(&e))
    }

    /// Boundary levels together with their h-derivatives.
    pub fn level_slopes(&self, h: f64) -> Result<(BoundaryLevels, LevelSlopes)> {
        self.check_h(h)?;
        let e = self.env.tangent_point(h)?;
        let l = self.levels_from(&e);
        Ok((l, self.slopes_from(&e, &l)))
    }

    /// C5(h) and its analytic derivative.
    pub fn c5_with_derivative(&self, h: f64) -> Result<(f64, f64)> {
        let e = self.env.tangent_point(h)?;
        Ok(self.c5_from(&e))
    }

    fn c5_from(&self, e: &EnvelopePoint) -> (f64, f64) {
        let l = self.levels_from(e);
        let s = self.slopes_from(e, &l);
        let (a, ah, ay) = self.c.c3_parts(e.h, l.y1);
        let (b, bh, by) = self.c.c53_parts(e.h, l.y2);
        (a + b, ah + ay * s.y1 + bh + by * s.y2)
    }

    fn c3_from(&self, e: &EnvelopePoint, l: &BoundaryLevels) -> f64 {
        self.c.c3_parts(e.h, l.y1).0
    }

    /// Integrand of C6: (1-lambda)^((r1-r2) beta1) C5'(s) s^((r1-r2)(beta1-1)).
    pub fn c6_integrand(&self, s: f64) -> Result<f64> {
        let e = self.env.tangent_point(s)?;
        Ok(self.integrand_from(&e))
    }

    fn integrand_from(&self, e: &EnvelopePoint) -> f64 {
        let c = &self.c;
        let (_, c5p) = self.c5_from(e);
        let q = c.r1 - c.r2;
        (1.0 - c.lam).powf(q * c.b1) * c5p * e.h.powf(q * (c.b1 - 1.0))
    }

    /// Integral of the C6 integrand over [a, b] in the variable t = ln s,
    /// split at the subcase switch when it falls inside.
    fn integrate_segment(&self, a: f64, b: f64) -> Result<f64> {
        if a == b {
            return Ok(0.0);
        }
        let (lo, hi, sign) = if a < b { (a, b, 1.0) } else { (b, a, -1.0) };
        let mut cuts = vec![lo.ln()];
        if let Some(hs) = self.env.switch_level() {
            if hs > lo && hs < hi {
                cuts.push(hs.ln());
            }
        }
        cuts.push(hi.ln());
        let mut total = 0.0;
        let mut failure = None;
        for win in cuts.windows(2) {
            let g = |t: f64| {
                let s = t.exp();
                match self.env.tangent_point(s) {
                    Ok(e) => self.integrand_from(&e) * s,
                    Err(err) => {
                        failure.get_or_insert(err);
                        f64::NAN
                    }
                }
            };
            let r = quad::integrate(g, win[0], win[1], C6_RTOL, 0.0, 4000);
            if let Some(err) = failure.take() {
                return Err(err);
            }
            total += r?.value;
        }
        Ok(sign * total)
    }

    /// C6(h) from a full integral to infinity, with a fitted power-law tail.
    pub fn c6_direct(&self, h: f64) -> Result<f64> {
        self.check_h(h)?;
        let mut span = C6_LOG_SPAN;
        loop {
            let top = h * span.exp();
            let f2 = self.c6_integrand(top / std::f64::consts::E.powi(2))?;
            let f1 = self.c6_integrand(top / std::f64::consts::E)?;
            let f0 = self.c6_integrand(top)?;
            let p_lo = (f1 / f2).ln();
            let p_hi = (f0 / f1).ln();
            let stable = (p_hi - p_lo).abs() <= 1e-3;
            if !(p_hi < -1.0) && stable {
                return Err(Error::Quadrature(format!(
                    "tail exponent {p_hi} is not below -1"
                )));
            }
            if stable || span >= 4.0 * C6_LOG_SPAN {
                if !(p_hi < -1.0) {
                    return Err(Error::Quadrature(format!(
                        "tail exponent {p_hi} is not below -1"
                    )));
                }
                let body = self.integrate_segment(h, top)?;
                let tail = -f0 * top / (p_hi + 1.0);
                return Ok(body + tail);
            }
            span += 20.0;
        }
    }

    fn node_index(&self, h: f64) -> i64 {
        (h.log10() * NODES_PER_DECADE).round() as i64
    }

    fn node_h(&self, idx: i64) -> f64 {
        10f64.powf(idx as f64 / NODES_PER_DECADE)
    }

    fn node_value(&self, idx: i64) -> Result<f64> {
        if let Some(v) = self.nodes.read().expect("cache lock").get(&idx) {
            return Ok(*v);
        }
        let v = self.c6_direct(self.node_h(idx))?;
        self.nodes.write().expect("cache lock").insert(idx, v);
        Ok(v)
    }

    /// C6(h), re-integrated from the nearest cache node.
    pub fn c6(&self, h: f64) -> Result<f64> {
        self.check_h(h)?;
        let idx = self.node_index(h);
        self.c6_anchored(h, idx)
    }

    fn c6_anchored(&self, h: f64, idx: i64) -> Result<f64> {
        let hn = self.node_h(idx);
        if hn < self.h_min {
            return self.c6_direct(h);
        }
        Ok(self.node_value(idx)? + self.integrate_segment(h, hn)?)
    }

    pub fn coefficients(&self, h: f64) -> Result<DualCoefficients> {
        Ok(self.slice(h)?.coef)
    }

    /// Full dual solution at reference level h.
    pub fn slice(&self, h: f64) -> Result<Slice> {
        self.check_h(h)?;
        self.slice_anchored(h, self.node_index(h))
    }

    /// Slice whose C6 is integrated from the same cache node as the slice at `anchor`.
    pub fn slice_near(&self, h: f64, anchor: f64) -> Result<Slice> {
        self.check_h(h)?;
        self.slice_anchored(h, self.node_index(anchor))
    }

    fn slice_anchored(&self, h: f64, idx: i64) -> Result<Slice> {
        let e = self.env.tangent_point(h)?;
        let l = self.levels_from(&e);
        let c3 = self.c3_from(&e, &l);
        let (c5, _) = self.c5_from(&e);
        let c6 = self.c6_anchored(h, idx)?;
        let c4 = c6 + self.c.c46(h, l.y2);
        let c2 = c4 + self.c.c24(h, l.y1);
        let c6 = c6 * (1.0 + self.c6_bump);
        Ok(Slice {
            envelope: e,
            levels: l,
            coef: DualCoefficients { h, c2, c3, c4, c5, c6 },
            c: self.c,
        })
    }

    pub fn dual_value(&self, y: f64, h: f64) -> Result<f64> {
        Ok(self.slice(h)?.eval(y)?.0)
    }

    pub fn dual_dy(&self, y: f64, h: f64) -> Result<f64> {
        Ok(self.slice(h)?.eval(y)?.1)
    }

    pub fn dual_dyy(&self, y: f64, h: f64) -> Result<f64> {
        Ok(self.slice(h)?.eval(y)?.2)
    }

    pub fn running_conjugate(&self, q: f64, h: f64) -> Result<f64> {
        self.slice(h)?.conjugate(q)
    }

    /// Partial v_h at the free boundary y = y3(h), from a central difference of
    /// v(y3(h), h) along the boundary minus the chain-rule term v_y y3'(h).
    /// Returns the value and the sum of absolute sizes of its parts.
    pub fn free_boundary_residual(&self, h: f64, rel_step: f64) -> Result<(f64, f64)> {
        let d = rel_step * h;
        let sp = self.slice_near(h + d, h)?;
        let sm = self.slice_near(h - d, h)?;
        let s0 = self.slice(h)?;
        let vp = sp.peak_piece(sp.levels.y3).0;
        let vm = sm.peak_piece(sm.levels.y3).0;
        let total = (vp - vm) / (2.0 * d);
        let (_, vy, _) = s0.peak_piece(s0.levels.y3);
        let (_, sl) = self.level_slopes(h)?;
        let chain = vy * sl.y3;
        let c = &self.c;
        let y3 = s0.levels.y3;
        let (_, c5p) = self.c5_with_derivative(h)?;
        let scale = (c5p * y3.powf(c.r1)).abs()
            + (c5p * y3.powf(c.r1)).abs()
            + ((1.0 - c.lam) * ((1.0 - c.lam) * h).powf(c.b1 - 1.0) / c.r).abs()
            + (y3 / c.r).abs()
            + total.abs()
            + chain.abs();
        Ok((total - chain, scale))
    }

    /// Cross partial v_yh at y = y3(h), by a central difference in h at fixed y.
    /// The closed form does not impose v_yh = 0 on the ratchet boundary, so this
    /// is generally nonzero; it measures how far -v_y is from the discounted cost
    /// of the consumption stream the dual process generates.
    pub fn boundary_cross_derivative(&self, h: f64, rel_step: f64) -> Result<f64> {
        let d = rel_step * h;
        let y3 = self.slice(h)?.levels.y3;
        let a = self.slice_near(h + d, h)?.peak_piece(y3).1;
        let b = self.slice_near(h - d, h)?.peak_piece(y3).1;
        Ok((a - b) / (2.0 * d))
    }
}
