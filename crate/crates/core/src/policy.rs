//! Primal policy: wealth boundaries, the inverse marginal value f(x, h), the
//! ratchet inverse, the value function and the feedback controls.

use serde::Serialize;

use crate::dual::{DualSolution, Slice};
use crate::error::{Error, Result};
use crate::roots;

const INVERSE_RTOL: f64 = 1e-14;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WealthBoundaries {
    pub h: f64,
    pub x_zero: f64,
    pub x_aggr: f64,
    pub x_lavs: f64,
}

impl WealthBoundaries {
    pub fn coincident(&self) -> bool {
        self.x_zero == self.x_aggr
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Region {
    /// x < x_zero: no consumption.
    ZeroConsumption,
    /// x_zero <= x <= x_aggr.
    Interior,
    /// x_aggr < x < x_lavs: consume at the peak.
    AtPeak,
    /// x == x_lavs: consumption pushes the peak up.
    NewPeakBoundary,
    /// x > x_lavs: the peak jumps to h~(x) at once.
    AboveBoundary,
}

impl Region {
    pub fn name(&self) -> &'static str {
        match self {
            Region::ZeroConsumption => "zero",
            Region::Interior => "interior",
            Region::AtPeak => "peak",
            Region::NewPeakBoundary => "new_peak",
            Region::AboveBoundary => "above",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PolicyPoint {
    pub x: f64,
    /// Reference level the controls refer to (h~(x) after a jump).
    pub h: f64,
    pub region: Region,
    pub f: f64,
    pub c_star: f64,
    pub pi_star: f64,
    pub value: f64,
}

/// Policy quantities at one fixed reference level.
#[derive(Debug, Clone, Copy)]
pub struct PolicySlice {
    pub dual: Slice,
    pub bounds: WealthBoundaries,
    sharpe_over_var: f64,
}

impl PolicySlice {
    fn new(dual: Slice, mu: f64, r: f64, sigma: f64) -> Self {
        let l = dual.levels;
        let x_zero = -dual.zero_piece(l.y1).1;
        let x_aggr = if l.y1 == l.y2 {
            x_zero
        } else {
            -dual.interior_piece(l.y2).1
        };
        let x_lavs = -dual.peak_piece(l.y3).1;
        PolicySlice {
            dual,
            bounds: WealthBoundaries {
                h: l.h,
                x_zero,
                x_aggr,
                x_lavs,
            },
            sharpe_over_var: (mu - r) / (sigma * sigma),
        }
    }

    pub fn h(&self) -> f64 {
        self.bounds.h
    }

    /// Marginal wealth g(y) = -v_y(y, h).
    pub fn wealth_of(&self, y: f64) -> Result<f64> {
        Ok(-self.dual.eval(y)?.1)
    }

    pub fn region(&self, x: f64) -> Region {
        let b = &self.bounds;
        if x < b.x_zero {
            Region::ZeroConsumption
        } else if x <= b.x_aggr {
            Region::Interior
        } else if x < b.x_lavs {
            Region::AtPeak
        } else if x == b.x_lavs {
            Region::NewPeakBoundary
        } else {
            Region::AboveBoundary
        }
    }

    /// f(x, h) for 0 < x <= x_lavs(h).
    pub fn inverse(&self, x: f64) -> Result<f64> {
        self.inverse_from(x, None)
    }

    /// As [`PolicySlice::inverse`], with a starting guess for the root finder.
    pub fn inverse_from(&self, x: f64, guess: Option<f64>) -> Result<f64> {
        let b = &self.bounds;
        let l = &self.dual.levels;
        if !(x > 0.0) || x > b.x_lavs {
            return Err(Error::Domain(format!(
                "wealth {x} outside (0, x_lavs = {}] at h = {}",
                b.x_lavs, b.h
            )));
        }
        if x == b.x_zero {
            return Ok(l.y1);
        }
        if x == b.x_lavs {
            return Ok(l.y3);
        }
        if x < b.x_zero {
            return Ok(self.dual.zero_region_inverse(x));
        }
        let (lo, hi, piece): (f64, f64, fn(&Slice, f64) -> (f64, f64, f64)) = if x <= b.x_aggr {
            (l.y2, l.y1, Slice::interior_piece)
        } else {
            (l.y3, l.y2, Slice::peak_piece)
        };
        let d = &self.dual;
        let guess = guess.unwrap_or(lo + (hi - lo) * 0.5);
        roots::newton_bracketed(
            |y| {
                let (_, vy, vyy) = piece(d, y);
                (-vy - x, -vyy)
            },
            lo,
            hi,
            guess,
            INVERSE_RTOL,
            200,
        )
    }

    /// Controls and value for 0 <= x <= x_lavs(h).
    pub fn controls(&self, x: f64) -> Result<PolicyPoint> {
        self.controls_from(x, None)
    }

    /// As [`PolicySlice::controls`], with a starting guess for f.
    pub fn controls_from(&self, x: f64, guess: Option<f64>) -> Result<PolicyPoint> {
        let h = self.h();
        if x == 0.0 {
            return Ok(PolicyPoint {
                x,
                h,
                region: Region::ZeroConsumption,
                f: f64::INFINITY,
                c_star: 0.0,
                pi_star: 0.0,
                value: self.dual.perpetuity(),
            });
        }
        let f = self.inverse_from(x, guess)?;
        let (v, _, vyy) = self.dual.eval(f)?;
        Ok(PolicyPoint {
            x,
            h,
            region: self.region(x),
            f,
            c_star: self.dual.consumption(f),
            pi_star: self.sharpe_over_var * f * vyy,
            value: v + x * f,
        })
    }
}

/// Primal solution built on a [`DualSolution`].
#[derive(Debug, Clone)]
pub struct Policy {
    dual: DualSolution,
}

impl Policy {
    pub fn new(dual: DualSolution) -> Self {
        Policy { dual }
    }

    pub fn dual(&self) -> &DualSolution {
        &self.dual
    }

    pub fn at(&self, h: f64) -> Result<PolicySlice> {
        let p = self.dual.params();
        Ok(PolicySlice::new(self.dual.slice(h)?, p.mu, p.r, p.sigma))
    }

    pub fn wealth_boundaries(&self, h: f64) -> Result<WealthBoundaries> {
        Ok(self.at(h)?.bounds)
    }

    pub fn dual_inverse(&self, x: f64, h: f64) -> Result<f64> {
        self.at(h)?.inverse(x)
    }

    /// The reference level h with x_lavs(h) = x.
    pub fn ratchet_inverse(&self, x: f64) -> Result<f64> {
        if !(x > 0.0 && x.is_finite()) {
            return Err(Error::Domain(format!("wealth {x} must be positive")));
        }
        let h_min = self.dual.min_h();
        let xl = |h: f64| -> Result<f64> { Ok(self.wealth_boundaries(h)?.x_lavs) };
        let r = self.dual.params().r;
        let mut lo = (r * x).max(h_min);
        let mut hi = lo;
        let mut n = 0;
        while xl(lo)? > x {
            if lo == h_min {
                return Err(Error::Domain(format!(
                    "wealth {x} below x_lavs at the smallest reference level {h_min}"
                )));
            }
            lo = (lo * 0.5).max(h_min);
            n += 1;
            if n > 200 {
                return Err(Error::Convergence("ratchet bracket (lower)".into()));
            }
        }
        while xl(hi)? < x {
            hi *= 2.0;
            n += 1;
            if n > 400 {
                return Err(Error::Convergence("ratchet bracket (upper)".into()));
            }
        }
        if lo == hi {
            return Ok(lo);
        }
        let mut failure = None;
        let t = roots::brent(
            |t| match xl(t.exp()) {
                Ok(v) => v - x,
                Err(e) => {
                    failure.get_or_insert(e);
                    f64::NAN
                }
            },
            lo.ln(),
            hi.ln(),
            1e-15,
            1e-15,
            200,
        );
        if let Some(e) = failure {
            return Err(e);
        }
        Ok(t?.exp())
    }

    /// h~(x) by secant steps in ln h from a level `h0` with x_lavs(h0) <= x;
    /// falls back to the bracketed solver.
    pub fn ratchet_inverse_from(&self, x: f64, h0: f64) -> Result<f64> {
        let xl = |h: f64| -> Result<f64> { Ok(self.wealth_boundaries(h)?.x_lavs - x) };
        let mut a = h0.ln();
        let mut fa = xl(h0)?;
        if fa > 0.0 {
            return self.ratchet_inverse(x);
        }
        if fa == 0.0 {
            return Ok(h0);
        }
        let mut b = (h0 * x / (fa + x)).ln();
        let mut fb = xl(b.exp())?;
        for _ in 0..60 {
            if fb.abs() <= 1e-13 * x {
                return Ok(b.exp());
            }
            let c = b - fb * (b - a) / (fb - fa);
            if !c.is_finite() {
                break;
            }
            a = b;
            fa = fb;
            b = c;
            fb = xl(b.exp())?;
        }
        self.ratchet_inverse(x)
    }

    /// Resolves (x, h) into the effective domain, jumping h to h~(x) if needed.
    pub fn effective(&self, x: f64, h: f64) -> Result<(PolicySlice, bool)> {
        let s = self.at(h)?;
        if x > s.bounds.x_lavs {
            let hn = self.ratchet_inverse(x)?;
            Ok((self.at(hn.max(h))?, true))
        } else {
            Ok((s, false))
        }
    }

    pub fn feedback_controls(&self, x: f64, h: f64) -> Result<PolicyPoint> {
        if !(x >= 0.0 && x.is_finite()) {
            return Err(Error::Domain(format!("wealth {x} must be nonnegative")));
        }
        let (s, jumped) = self.effective(x, h)?;
        if jumped {
            let l = s.dual.levels;
            let f = l.y3;
            let (v, _, vyy) = s.dual.peak_piece(f);
            return Ok(PolicyPoint {
                x,
                h: s.h(),
                region: Region::AboveBoundary,
                f,
                c_star: s.h(),
                pi_star: s.sharpe_over_var * f * vyy,
                value: v + x * f,
            });
        }
        s.controls(x)
    }

    pub fn value_function(&self, x: f64, h: f64) -> Result<f64> {
        Ok(self.feedback_controls(x, h)?.value)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::ModelParams;

    fn base() -> Policy {
        Policy::new(DualSolution::new(&ModelParams::baseline()).unwrap())
    }

    #[test]
    fn baseline_boundaries() {
        let b = base().wealth_boundaries(1.0).unwrap();
        assert!((b.x_zero - 4.14531).abs() < 1e-4, "{b:?}");
        assert!((b.x_aggr - 16.4931).abs() < 1e-4, "{b:?}");
        assert!((b.x_lavs - 20.7139).abs() < 1e-4, "{b:?}");
    }

    #[test]
    fn baseline_value_and_inverse() {
        let p = base();
        let pt = p.feedback_controls(2.0, 1.0).unwrap();
        assert_eq!(pt.region, Region::ZeroConsumption);
        assert!((pt.f - 17.3626).abs() < 1e-4);
        assert!((pt.value + 16.5208).abs() < 1e-4);
        assert_eq!(pt.c_star, 0.0);
        let zero = p.feedback_controls(0.0, 1.0).unwrap();
        assert!((zero.value + 81.2252).abs() < 1e-4);
    }

    #[test]
    fn boundary_inverses() {
        let s = base().at(1.0).unwrap();
        assert_eq!(s.inverse(s.bounds.x_zero).unwrap(), s.dual.levels.y1);
        assert_eq!(s.inverse(s.bounds.x_lavs).unwrap(), s.dual.levels.y3);
        for &x in &[0.5, 6.0, 12.0, 17.0, 20.0] {
            let f = s.inverse(x).unwrap();
            assert!((s.wealth_of(f).unwrap() - x).abs() < 1e-9 * x.max(1.0));
        }
        assert!(s.inverse(0.0).is_err());
        assert!(s.inverse(s.bounds.x_lavs * 1.01).is_err());
    }

    #[test]
    fn ratchet_round_trip() {
        let p = base();
        for &h in &[0.5, 1.0, 2.0] {
            let x = p.wealth_boundaries(h).unwrap().x_lavs;
            let ht = p.ratchet_inverse(x).unwrap();
            assert!((ht - h).abs() < 1e-9 * h, "{h} -> {ht}");
        }
    }

    #[test]
    fn jump_above_boundary() {
        let p = base();
        let pt = p.feedback_controls(30.0, 1.0).unwrap();
        assert_eq!(pt.region, Region::AboveBoundary);
        assert!(pt.h > 1.0);
        assert_eq!(pt.c_star, pt.h);
    }

    #[test]
    fn boundary_consumption_continuity() {
        let p = base();
        let s = p.at(1.0).unwrap();
        let a = s.controls(s.bounds.x_aggr).unwrap();
        assert!((a.c_star - 1.0).abs() < 1e-9);
        let l = s.controls(s.bounds.x_lavs).unwrap();
        assert_eq!(l.region, Region::NewPeakBoundary);
        assert_eq!(l.c_star, 1.0);
        let lam = 0.5f64;
        let b1 = 0.2f64;
        let c = (1.0 - lam).powf(-b1 / (b1 - 1.0)) * l.f.powf(1.0 / (b1 - 1.0));
        assert!((c - 1.0).abs() < 1e-12);
    }
}
