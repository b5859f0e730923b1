//! The S-shaped utility and its concave envelope on `[0, h]`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::params::ModelParams;
use crate::roots;

/// Lower end of the tangency bracket for `w / h`.
pub const TANGENCY_EPS: f64 = 1e-10;
const TANGENCY_RTOL: f64 = 1e-14;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Subcase {
    /// The chord from zero consumption touches the gain branch inside `(lambda h, h)`.
    TangentInterior,
    /// The chord runs straight to the endpoint `c = h`.
    ChordToEndpoint,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EnvelopePoint {
    pub h: f64,
    pub subcase: Subcase,
    /// Tangent point z(h).
    pub z: f64,
    /// Gap w(h) = z(h) - lambda h.
    pub w: f64,
    /// dw/dh.
    pub wprime: f64,
    /// Slope of the linear piece of the envelope.
    pub envelope_slope: f64,
}

/// Utility functions of one parameter set.
#[derive(Debug, Clone, Copy)]
pub struct Envelope {
    p: ModelParams,
}

impl Envelope {
    pub fn new(p: &ModelParams) -> Self {
        Envelope { p: *p }
    }

    pub fn params(&self) -> &ModelParams {
        &self.p
    }

    /// Two-part power utility of consumption relative to the reference.
    pub fn utility(&self, x: f64) -> f64 {
        let p = &self.p;
        if x >= 0.0 {
            x.powf(p.beta1) / p.beta1
        } else {
            -p.k * (-x).powf(p.beta2) / p.beta2
        }
    }

    /// Gain branch U1*(c, h).
    pub fn u1(&self, c: f64, h: f64) -> f64 {
        (c - self.p.lambda * h).powf(self.p.beta1) / self.p.beta1
    }

    /// Loss branch at zero consumption, U2*(0, h).
    pub fn u2_zero(&self, h: f64) -> f64 {
        -self.p.k * (self.p.lambda * h).powf(self.p.beta2) / self.p.beta2
    }

    /// k/beta2 lambda^beta2 h^(beta2 - beta1): the loss term after scaling by h^beta1.
    fn loss_scaled(&self, h: f64) -> f64 {
        let p = &self.p;
        p.k / p.beta2 * p.lambda.powf(p.beta2) * h.powf(p.beta2 - p.beta1)
    }

    /// U1*(h,h) - U2*(0,h) - h U1*'(h,h). The chord reaches the endpoint iff this is <= 0.
    pub fn chord_condition(&self, h: f64) -> f64 {
        self.chord_condition_scaled(h) * h.powf(self.p.beta1)
    }

    fn chord_condition_scaled(&self, h: f64) -> f64 {
        let p = &self.p;
        let m = 1.0 - p.lambda;
        m.powf(p.beta1) / p.beta1 + self.loss_scaled(h) - m.powf(p.beta1 - 1.0)
    }

    /// Subcase predicted from the closed-form parameter conditions instead of the direct sign.
    pub fn chord_by_parameter_rule(&self, h: f64) -> bool {
        let p = &self.p;
        let (b1, b2, lam) = (p.beta1, p.beta2, p.lambda);
        if b1 < 1.0 - lam {
            return false;
        }
        let theta = b2 * (1.0 - lam).powf(b1 - 1.0) * (b1 + lam - 1.0) / (b1 * p.k * lam.powf(b2));
        if b2 > b1 {
            h <= theta.powf(1.0 / (b2 - b1))
        } else if b2 < b1 {
            h >= theta.powf(1.0 / (b2 - b1))
        } else {
            theta >= 1.0
        }
    }

    /// Reference level where the subcase switches, when the switch happens at a finite h > 0.
    pub fn switch_level(&self) -> Option<f64> {
        let p = &self.p;
        let (b1, b2, lam) = (p.beta1, p.beta2, p.lambda);
        if b1 < 1.0 - lam || b1 == b2 {
            return None;
        }
        let theta = b2 * (1.0 - lam).powf(b1 - 1.0) * (b1 + lam - 1.0) / (b1 * p.k * lam.powf(b2));
        (theta > 0.0).then(|| theta.powf(1.0 / (b2 - b1)))
    }

    /// Tangency residual (1-beta1)/beta1 w^beta1 + k/beta2 (lambda h)^beta2 - lambda h w^(beta1-1),
    /// together with the sum of absolute term sizes.
    pub fn tangency_residual(&self, w: f64, h: f64) -> (f64, f64) {
        let p = &self.p;
        let t1 = (1.0 - p.beta1) / p.beta1 * w.powf(p.beta1);
        let t2 = p.k / p.beta2 * (p.lambda * h).powf(p.beta2);
        let t3 = p.lambda * h * w.powf(p.beta1 - 1.0);
        (t1 + t2 - t3, t1.abs() + t2.abs() + t3.abs())
    }

    pub fn tangent_point(&self, h: f64) -> Result<EnvelopePoint> {
        self.tangent_point_from(h, None)
    }

    /// As [`Envelope::tangent_point`], with an optional starting guess for w/h.
    pub fn tangent_point_from(&self, h: f64, guess: Option<f64>) -> Result<EnvelopePoint> {
        if !(h > 0.0 && h.is_finite()) {
            return Err(Error::Domain(format!("reference level h = {h} must be positive")));
        }
        let p = &self.p;
        let (b1, b2, lam, k) = (p.beta1, p.beta2, p.lambda, p.k);
        if self.chord_condition_scaled(h) <= 0.0 {
            let w = (1.0 - lam) * h;
            let num = ((1.0 - lam) * h).powf(b1) / b1 + k / b2 * (lam * h).powf(b2);
            return Ok(EnvelopePoint {
                h,
                subcase: Subcase::ChordToEndpoint,
                z: h,
                w,
                wprime: 1.0 - lam,
                envelope_slope: num / h,
            });
        }
        let a = self.loss_scaled(h);
        let phi = |t: f64| {
            let tb = t.powf(b1 - 1.0);
            let v = (1.0 - b1) / b1 * tb * t + a - lam * tb;
            let dv = (1.0 - b1) * tb / t * (t + lam);
            (v, dv)
        };
        let hi = 1.0 - lam;
        let t = roots::newton_bracketed(
            phi,
            TANGENCY_EPS,
            hi,
            guess.unwrap_or(0.5 * hi),
            TANGENCY_RTOL,
            400,
        )
        .map_err(|e| Error::Convergence(format!("tangency at h = {h}: {e}")))?;
        let w = t * h;
        let wb = t.powf(b1 - 1.0);
        let num = wb - k * lam.powf(b2 - 1.0) * h.powf(b2 - b1);
        let den = wb + lam * wb / t;
        Ok(EnvelopePoint {
            h,
            subcase: Subcase::TangentInterior,
            z: lam * h + w,
            w,
            wprime: lam / (1.0 - b1) * num / den,
            envelope_slope: w.powf(b1 - 1.0),
        })
    }

    /// Concave envelope of c -> U(c - lambda h) on `[0, h]`.
    pub fn concave_envelope(&self, c: f64, h: f64) -> Result<f64> {
        if !(h > 0.0) || !(0.0..=h).contains(&c) {
            return Err(Error::Domain(format!("consumption {c} outside [0, {h}]")));
        }
        let e = self.tangent_point(h)?;
        Ok(self.envelope_at(&e, c))
    }

    /// Envelope evaluated with a precomputed tangent point.
    pub fn envelope_at(&self, e: &EnvelopePoint, c: f64) -> f64 {
        if c < e.z {
            self.u2_zero(e.h) + (self.u1(e.z, e.h) - self.u2_zero(e.h)) / e.z * c
        } else {
            self.u1(c, e.h)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn env() -> Envelope {
        Envelope::new(&ModelParams::baseline())
    }

    /// Plain bisection on the unscaled tangency equation.
    fn bisection_w(e: &Envelope, h: f64) -> f64 {
        let lam = e.params().lambda;
        let (mut lo, mut hi) = (1e-10 * h, (1.0 - lam) * h);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if e.tangency_residual(mid, h).0 > 0.0 {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        0.5 * (lo + hi)
    }

    #[test]
    fn utility_values() {
        let e = env();
        assert_eq!(e.utility(0.0), 0.0);
        assert!((e.utility(1.0) - 5.0).abs() < 1e-15);
        assert!((e.utility(-1.0) + 5.0).abs() < 1e-15);
    }

    #[test]
    fn baseline_tangent_point() {
        let e = env();
        let pt = e.tangent_point(1.0).unwrap();
        assert_eq!(pt.subcase, Subcase::TangentInterior);
        let wb = bisection_w(&e, 1.0);
        assert!((pt.w - wb).abs() < 1e-12 * wb);
        assert!((pt.w - 0.0430327552396971).abs() < 1e-12);
        assert!((pt.z - 0.5430327552396972).abs() < 1e-12);
        let (res, scale) = e.tangency_residual(pt.w, 1.0);
        assert!(res.abs() < 1e-10 * scale);
    }

    #[test]
    fn wprime_matches_finite_difference() {
        let e = env();
        for &h in &[0.1, 1.0, 7.0, 300.0] {
            let d = 1e-6 * h;
            let wp = (e.tangent_point(h + d).unwrap().w - e.tangent_point(h - d).unwrap().w) / (2.0 * d);
            let pt = e.tangent_point(h).unwrap();
            assert!((pt.wprime - wp).abs() < 1e-7 * wp.abs(), "h={h}: {} vs {wp}", pt.wprime);
        }
    }

    #[test]
    fn chord_everywhere_regime() {
        let e = Envelope::new(&ModelParams::baseline().with_betas(0.2, 0.2).with_lambda(0.95));
        for &h in &[1e-3, 0.1, 1.0, 10.0, 1e4] {
            let pt = e.tangent_point(h).unwrap();
            assert_eq!(pt.subcase, Subcase::ChordToEndpoint);
            assert_eq!(pt.z, h);
        }
    }

    #[test]
    fn envelope_knot_and_endpoints() {
        let e = env();
        let pt = e.tangent_point(1.0).unwrap();
        let at_z = e.envelope_at(&pt, pt.z);
        let chord_at_z = e.u2_zero(1.0) + (e.u1(pt.z, 1.0) - e.u2_zero(1.0));
        assert!((at_z - chord_at_z).abs() < 1e-12);
        assert!((e.concave_envelope(0.0, 1.0).unwrap() + 5.0 * 0.5f64.powf(0.3)).abs() < 1e-12);
        assert!((e.concave_envelope(0.0, 1.0).unwrap() + 4.0613).abs() < 1e-4);
        let top = e.concave_envelope(1.0, 1.0).unwrap();
        assert!((top - 0.5f64.powf(0.2) / 0.2).abs() < 1e-12);
        // the straight line to the endpoint lies strictly below the envelope inside (0, h)
        let endpoint_line = e.u2_zero(1.0) + (top - e.u2_zero(1.0)) * pt.z;
        assert!(e.envelope_at(&pt, pt.z) > endpoint_line);
        assert!(e.concave_envelope(1.5, 1.0).is_err());
        assert!(e.tangent_point(0.0).is_err());
    }

    #[test]
    fn chord_slope_is_marginal_utility() {
        let e = env();
        for &h in &[0.2, 1.0, 50.0] {
            let pt = e.tangent_point(h).unwrap();
            let chord = (e.u1(pt.z, h) - e.u2_zero(h)) / pt.z;
            assert!((chord - pt.envelope_slope).abs() < 1e-10 * chord);
        }
    }
}
