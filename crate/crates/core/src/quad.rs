//! Adaptive Gauss-Kronrod quadrature.

use crate::error::{Error, Result};

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_18,
    0.140_653_259_715_525_92,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_83,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadResult {
    pub value: f64,
    pub abs_err: f64,
    pub intervals: usize,
}

/// One 15-point Kronrod panel with its embedded 7-point Gauss estimate.
fn panel<F: FnMut(f64) -> f64>(f: &mut F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let hl = 0.5 * (b - a);
    let fc = f(c);
    let mut kron = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for j in 0..7 {
        let dx = hl * XGK[j];
        let s = f(c - dx) + f(c + dx);
        kron += WGK[j] * s;
        if j % 2 == 1 {
            gauss += WG[j / 2] * s;
        }
    }
    (kron * hl, ((kron - gauss) * hl).abs())
}

/// Integrates `f` over `[a, b]`, bisecting the panel with the largest error
/// estimate until the total estimate is below `max(atol, rtol * |I|)`.
pub fn integrate<F: FnMut(f64) -> f64>(
    mut f: F,
    a: f64,
    b: f64,
    rtol: f64,
    atol: f64,
    max_intervals: usize,
) -> Result<QuadResult> {
    if a == b {
        return Ok(QuadResult {
            value: 0.0,
            abs_err: 0.0,
            intervals: 0,
        });
    }
    let (v, e) = panel(&mut f, a, b);
    let mut panels = vec![(a, b, v, e)];
    loop {
        let value: f64 = panels.iter().map(|p| p.2).sum();
        let err: f64 = panels.iter().map(|p| p.3).sum();
        if !value.is_finite() {
            return Err(Error::Quadrature(format!(
                "non-finite integrand on [{a}, {b}]"
            )));
        }
        if err <= atol.max(rtol * value.abs()) {
            return Ok(QuadResult {
                value,
                abs_err: err,
                intervals: panels.len(),
            });
        }
        if panels.len() >= max_intervals {
            return Err(Error::Quadrature(format!(
                "error estimate {err:e} above tolerance after {max_intervals} panels"
            )));
        }
        let (idx, _) = panels
            .iter()
            .enumerate()
            .fold((0, -1.0), |acc, (i, p)| if p.3 > acc.1 { (i, p.3) } else { acc });
        let (pa, pb, _, _) = panels.swap_remove(idx);
        let m = 0.5 * (pa + pb);
        let (v1, e1) = panel(&mut f, pa, m);
        let (v2, e2) = panel(&mut f, m, pb);
        panels.push((pa, m, v1, e1));
        panels.push((m, pb, v2, e2));
    }
}
