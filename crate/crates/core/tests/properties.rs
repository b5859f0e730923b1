use peakref::dual::DualSolution;
use peakref::envelope::{Envelope, Subcase};
use peakref::policy::Policy;
use peakref::{validate, ModelParams};
use proptest::prelude::*;

/// Valid parameter sets: betas drawn as fractions of the (A1) bound.
fn params() -> impl Strategy<Value = ModelParams> {
    (
        0.02f64..0.08,
        0.02f64..0.1,
        0.15f64..0.4,
        0.05f64..0.95,
        0.05f64..0.95,
        0.5f64..3.0,
        0.05f64..0.95,
    )
        .prop_map(|(r, prem, sigma, u1, u2, k, lambda)| {
            let mut p = ModelParams {
                r,
                rho: r,
                mu: r + prem,
                sigma,
                beta1: 0.1,
                beta2: 0.1,
                k,
                lambda,
            };
            let bound = validate(&p).unwrap().beta_bound();
            p.beta1 = u1 * bound;
            p.beta2 = u2 * bound;
            p
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn root_identities(p in params()) {
        let d = validate(&p).unwrap();
        let c = 2.0 * p.r / (d.kappa * d.kappa);
        prop_assert!((d.r1 * d.r1 - d.r1 - c).abs() < 1e-12 * (1.0 + c));
        prop_assert!((d.r2 * d.r2 - d.r2 - c).abs() < 1e-12 * (1.0 + c));
        prop_assert_eq!(d.r1 + d.r2, 1.0);
        prop_assert!((d.r1 * d.r2 + c).abs() < 1e-12 * (1.0 + c));
        prop_assert!(d.r1 > 1.0 && d.r2 < 0.0);
        prop_assert!(d.merton_c > 0.0 && d.merton_pi > 0.0);
    }

    #[test]
    fn envelope_majorizes_and_is_concave(p in params(), lh in -2.0f64..2.0) {
        let h = lh.exp();
        let env = Envelope::new(&p);
        let pt = env.tangent_point(h).unwrap();
        let n = 200;
        let cs: Vec<f64> = (0..=n).map(|i| h * i as f64 / n as f64).collect();
        let vals: Vec<f64> = cs.iter().map(|&c| env.envelope_at(&pt, c)).collect();
        let scale = vals.iter().fold(1.0f64, |m, v| m.max(v.abs()));
        for (&c, &v) in cs.iter().zip(&vals) {
            let u = env.utility(c - p.lambda * h);
            prop_assert!(v >= u - 1e-12 * scale, "c = {c}: {v} < {u}");
            if c >= pt.z || c == 0.0 {
                prop_assert!((v - u).abs() <= 1e-12 * scale);
            }
        }
        for i in 0..n {
            for j in (i + 2..=n).step_by(7) {
                if (i + j) % 2 == 0 {
                    let mid = vals[(i + j) / 2];
                    prop_assert!(mid >= 0.5 * (vals[i] + vals[j]) - 1e-12 * scale);
                }
            }
        }
    }

    #[test]
    fn subcase_rule_cross_check(p in params(), lh in -3.0f64..3.0) {
        let h = lh.exp();
        let env = Envelope::new(&p);
        let direct = env.tangent_point(h).unwrap().subcase == Subcase::ChordToEndpoint;
        let cond = env.chord_condition(h);
        // Skip points within rounding of the switch.
        prop_assume!(cond.abs() > 1e-9 * h.powf(p.beta1));
        prop_assert_eq!(direct, env.chord_by_parameter_rule(h));
    }

    #[test]
    fn tangency_residual_small(p in params(), lh in -3.0f64..3.0) {
        let h = lh.exp();
        let env = Envelope::new(&p);
        let pt = env.tangent_point(h).unwrap();
        if pt.subcase == Subcase::TangentInterior {
            let (res, scale) = env.tangency_residual(pt.w, h);
            prop_assert!(res.abs() < 1e-10 * scale);
            prop_assert!(pt.w > 0.0 && pt.w < (1.0 - p.lambda) * h);
            prop_assert!(pt.wprime > 0.0);
        } else {
            prop_assert_eq!(pt.z, h);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn dual_convex_and_coefficients_positive(p in params(), lh in -1.5f64..1.5) {
        let h = lh.exp();
        let sol = DualSolution::new(&p).unwrap();
        let s = sol.slice(h).unwrap();
        let c = s.coef;
        prop_assert!(c.c2 > 0.0 && c.c3 > 0.0 && c.c5 > 0.0 && c.c6 > 0.0, "{c:?}");
        let l = s.levels;
        let mut last = f64::INFINITY;
        for i in 0..=300 {
            let y = l.y3 * (4.0 * l.y1 / l.y3).powf(i as f64 / 300.0);
            let (_, vy, vyy) = s.eval(y).unwrap();
            prop_assert!(vyy > 0.0, "v_yy = {vyy} at y = {y}");
            let g = -vy;
            prop_assert!(g < last);
            last = g;
        }
        let pol = Policy::new(sol.clone());
        let b = pol.wealth_boundaries(h).unwrap();
        prop_assert!((s.eval(l.y1).unwrap().1 + b.x_zero).abs() < 1e-12 * b.x_zero.max(1.0));
        prop_assert!((s.eval(l.y3).unwrap().1 + b.x_lavs).abs() < 1e-12 * b.x_lavs.max(1.0));
        prop_assert!(b.x_zero > 0.0 && b.x_zero <= b.x_aggr && b.x_aggr < b.x_lavs, "{b:?}");
    }

    #[test]
    fn c6_decreasing(p in params(), lh in -1.0f64..1.0) {
        let h = lh.exp();
        let sol = DualSolution::new(&p).unwrap();
        let a = sol.c6(h).unwrap();
        let b = sol.c6(h * 1.01).unwrap();
        prop_assert!(b < a, "C6({}) = {b} >= C6({h}) = {a}", 1.01 * h);
    }
}

#[test]
fn conjugate_matches_grid_search() {
    for p in [
        ModelParams::baseline(),
        ModelParams::baseline().with_lambda(0.92),
        ModelParams::baseline().with_betas(0.2, 0.2).with_lambda(0.95),
    ] {
        let sol = DualSolution::new(&p).unwrap();
        let env = *sol.envelope();
        for h in [0.5, 1.0, 3.0] {
            let s = sol.slice(h).unwrap();
            let l = s.levels;
            let n = 10_000;
            let grid: Vec<f64> = (0..=n)
                .map(|i| env.envelope_at(&s.envelope, h * i as f64 / n as f64))
                .collect();
            for j in 0..40 {
                let q = l.y3 * (3.0 * l.y1 / l.y3).powf(j as f64 / 39.0);
                let best = grid
                    .iter()
                    .enumerate()
                    .map(|(i, u)| u - h * i as f64 / n as f64 * q)
                    .fold(f64::NEG_INFINITY, f64::max);
                let v = s.conjugate(q).unwrap();
                assert!(v >= best - 1e-9, "q = {q}: {v} < grid {best}");
                assert!(v - best < 1e-6, "h = {h}, q = {q}: {v} vs grid {best}");
            }
        }
    }
}
