//! Market and preference parameters and the constants derived from them.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Market and preference parameters.
///
/// `r`, `rho`, `mu` are rates per unit time, `sigma` is per square-root time and
/// the remaining fields are dimensionless.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelParams {
    pub r: f64,
    pub rho: f64,
    pub mu: f64,
    pub sigma: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub k: f64,
    pub lambda: f64,
}

impl ModelParams {
    /// The baseline parameter set used throughout the tests and the CLI defaults.
    pub const fn baseline() -> Self {
        ModelParams {
            r: 0.05,
            rho: 0.05,
            mu: 0.1,
            sigma: 0.25,
            beta1: 0.2,
            beta2: 0.3,
            k: 1.5,
            lambda: 0.5,
        }
    }

    pub fn with_lambda(mut self, lambda: f64) -> Self {
        self.lambda = lambda;
        self
    }

    pub fn with_mu(mut self, mu: f64) -> Self {
        self.mu = mu;
        self
    }

    pub fn with_betas(mut self, beta1: f64, beta2: f64) -> Self {
        self.beta1 = beta1;
        self.beta2 = beta2;
        self
    }

    pub fn with_k(mut self, k: f64) -> Self {
        self.k = k;
        self
    }

    /// Sets a parameter by its configuration key.
    pub fn set(&mut self, name: &str, value: f64) -> Result<()> {
        match name {
            "r" => self.r = value,
            "rho" => self.rho = value,
            "mu" => self.mu = value,
            "sigma" => self.sigma = value,
            "beta1" => self.beta1 = value,
            "beta2" => self.beta2 = value,
            "k" => self.k = value,
            "lambda" => self.lambda = value,
            other => return Err(Error::Config(format!("unknown parameter `{other}`"))),
        }
        Ok(())
    }
}

impl Default for ModelParams {
    fn default() -> Self {
        Self::baseline()
    }
}

/// Scalar constants of the market model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DerivedConstants {
    /// Sharpe ratio (mu - r) / sigma.
    pub kappa: f64,
    /// Positive root of eta^2 - eta - 2r/kappa^2.
    pub r1: f64,
    /// Negative root, r2 = 1 - r1.
    pub r2: f64,
    pub gamma1: f64,
    pub gamma2: f64,
    pub merton_c: f64,
    pub merton_pi: f64,
}

impl DerivedConstants {
    /// Upper bound -r2/r1 that both curvature parameters must stay below.
    pub fn beta_bound(&self) -> f64 {
        -self.r2 / self.r1
    }
}

fn check(field: &'static str, value: f64, ok: bool, rule: &'static str) -> Result<()> {
    if ok && value.is_finite() {
        Ok(())
    } else {
        Err(Error::Range { field, value, rule })
    }
}

/// Validates `p` and returns the derived constants.
pub fn validate(p: &ModelParams) -> Result<DerivedConstants> {
    check("r", p.r, p.r > 0.0, "r > 0")?;
    check("mu", p.mu, p.mu > p.r, "mu > r")?;
    check("sigma", p.sigma, p.sigma > 0.0, "sigma > 0")?;
    check("beta1", p.beta1, p.beta1 > 0.0 && p.beta1 < 1.0, "0 < beta1 < 1")?;
    check("beta2", p.beta2, p.beta2 > 0.0 && p.beta2 < 1.0, "0 < beta2 < 1")?;
    check("k", p.k, p.k > 0.0, "k > 0")?;
    check("lambda", p.lambda, p.lambda > 0.0 && p.lambda < 1.0, "0 < lambda < 1")?;
    check("rho", p.rho, p.rho.is_finite(), "finite")?;
    if p.rho != p.r {
        return Err(Error::Scope { rho: p.rho, r: p.r });
    }

    let kappa = (p.mu - p.r) / p.sigma;
    let c = 2.0 * p.r / (kappa * kappa);
    let r1 = 0.5 * (1.0 + (1.0 + 4.0 * c).sqrt());
    // 1 - r1 is exact for r1 >= 1, so r1 + r2 == 1 holds bitwise.
    let r2 = 1.0 - r1;
    let bound = -r2 / r1;
    for (index, beta) in [(1u8, p.beta1), (2u8, p.beta2)] {
        if beta >= bound {
            return Err(Error::AssumptionA1Violated { index, beta, bound });
        }
    }

    let gamma1 = p.beta1 / (p.beta1 - 1.0);
    let gamma2 = p.beta2 / (p.beta2 - 1.0);
    let merton_c = p.r * (gamma1 - r1) * (gamma1 - r2) / (r1 * r2);
    let merton_pi = (p.mu - p.r) / (p.sigma * p.sigma * (1.0 - p.beta1));
    Ok(DerivedConstants {
        kappa,
        r1,
        r2,
        gamma1,
        gamma2,
        merton_c,
        merton_pi,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Roots of a x^2 + b x + c by the textbook formula, kept independent of `validate`.
    fn quadratic_roots(a: f64, b: f64, c: f64) -> (f64, f64) {
        let d = (b * b - 4.0 * a * c).sqrt();
        ((-b + d) / (2.0 * a), (-b - d) / (2.0 * a))
    }

    #[test]
    fn baseline_roots() {
        let d = validate(&ModelParams::baseline()).unwrap();
        assert!((d.kappa - 0.2).abs() < 1e-15);
        let (a, b) = quadratic_roots(1.0, -1.0, -2.5);
        assert!((d.r1 - a).abs() < 1e-13);
        assert!((d.r2 - b).abs() < 1e-13);
        assert!((d.r1 - 2.158312).abs() < 1e-6);
        assert!((d.r2 + 1.158312).abs() < 1e-6);
        assert!((d.beta_bound() - 0.5366750419).abs() < 1e-9);
    }

    #[test]
    fn merton_targets() {
        let d = validate(&ModelParams::baseline()).unwrap();
        assert!((d.merton_c - 0.04375).abs() < 1e-12);
        assert!((d.merton_pi - 1.0).abs() < 1e-12);
    }

    #[test]
    fn beta2_above_bound_rejected() {
        let p = ModelParams::baseline().with_betas(0.2, 0.6);
        match validate(&p) {
            Err(Error::AssumptionA1Violated { index, bound, .. }) => {
                assert_eq!(index, 2);
                assert!((bound - 0.5367).abs() < 1e-4);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn range_and_scope_errors() {
        let p = ModelParams::baseline().with_lambda(1.0);
        assert!(matches!(validate(&p), Err(Error::Range { field: "lambda", .. })));
        let mut p = ModelParams::baseline();
        p.rho = 0.04;
        assert!(matches!(validate(&p), Err(Error::Scope { .. })));
        let mut p = ModelParams::baseline();
        p.mu = 0.05;
        assert!(matches!(validate(&p), Err(Error::Range { field: "mu", .. })));
        let mut p = ModelParams::baseline();
        p.sigma = f64::NAN;
        assert!(matches!(validate(&p), Err(Error::Range { field: "sigma", .. })));
    }

    #[test]
    fn json_rejects_unknown_keys() {
        let ok = r#"{"r":0.05,"rho":0.05,"mu":0.1,"sigma":0.25,"beta1":0.2,"beta2":0.3,"k":1.5,"lambda":0.5}"#;
        let p: ModelParams = serde_json::from_str(ok).unwrap();
        assert_eq!(p, ModelParams::baseline());
        let bad = r#"{"r":0.05,"rho":0.05,"mu":0.1,"sigma":0.25,"beta1":0.2,"beta2":0.3,"k":1.5,"lambda":0.5,"extra":1}"#;
        assert!(serde_json::from_str::<ModelParams>(bad).is_err());
    }
}
