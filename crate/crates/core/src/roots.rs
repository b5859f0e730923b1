//! Bracketed scalar root finding.

use crate::error::{Error, Result};

/// Brent's method on `[a, b]`. `f(a)` and `f(b)` must differ in sign.
///
/// Stops once the bracket is narrower than `rtol * |x| + atol`.
pub fn brent<F: FnMut(f64) -> f64>(
    mut f: F,
    a: f64,
    b: f64,
    rtol: f64,
    atol: f64,
    max_iter: usize,
) -> Result<f64> {
    let (mut a, mut b) = (a, b);
    let mut fa = f(a);
    let mut fb = f(b);
    if fa == 0.0 {
        return Ok(a);
    }
    if fb == 0.0 {
        return Ok(b);
    }
    if !(fa.is_finite() && fb.is_finite()) || fa.signum() == fb.signum() {
        return Err(Error::Convergence(format!(
            "no sign change on [{a}, {b}]: f = ({fa}, {fb})"
        )));
    }
    let (mut c, mut fc) = (a, fa);
    let mut d = b - a;
    let mut e = d;
    for _ in 0..max_iter {
        if fb.signum() == fc.signum() {
            c = a;
            fc = fa;
            d = b - a;
            e = d;
        }
        if fc.abs() < fb.abs() {
            a = b;
            b = c;
            c = a;
            fa = fb;
            fb = fc;
            fc = fa;
        }
        let tol = 2.0 * f64::EPSILON * b.abs() + 0.5 * (rtol * b.abs() + atol);
        let m = 0.5 * (c - b);
        if m.abs() <= tol || fb == 0.0 {
            return Ok(b);
        }
        if e.abs() >= tol && fa.abs() > fb.abs() {
            let s = fb / fa;
            let (mut p, mut q);
            if a == c {
                p = 2.0 * m * s;
                q = 1.0 - s;
            } else {
                let qa = fa / fc;
                let r = fb / fc;
                p = s * (2.0 * m * qa * (qa - r) - (b - a) * (r - 1.0));
                q = (qa - 1.0) * (r - 1.0) * (s - 1.0);
            }
            if p > 0.0 {
                q = -q;
            } else {
                p = -p;
            }
            if 2.0 * p < (3.0 * m * q - (tol * q).abs()).min((e * q).abs()) {
                e = d;
                d = p / q;
            } else {
                d = m;
                e = m;
            }
        } else {
            d = m;
            e = m;
        }
        a = b;
        fa = fb;
        b += if d.abs() > tol { d } else { tol.copysign(m) };
        fb = f(b);
        if !fb.is_finite() {
            return Err(Error::Convergence(format!("non-finite value at {b}")));
        }
    }
    Err(Error::Convergence(format!(
        "brent did not converge in {max_iter} iterations"
    )))
}

/// Safeguarded Newton iteration for a monotone function on `[lo, hi]`.
///
/// `f` returns the value and derivative. Steps leaving the current bracket fall
/// back to bisection (geometric when the bracket is positive and wide).
pub fn newton_bracketed<F: FnMut(f64) -> (f64, f64)>(
    mut f: F,
    lo: f64,
    hi: f64,
    guess: f64,
    rtol: f64,
    max_iter: usize,
) -> Result<f64> {
    let (mut lo, mut hi) = (lo, hi);
    let (flo, _) = f(lo);
    let (fhi, _) = f(hi);
    if flo == 0.0 {
        return Ok(lo);
    }
    if fhi == 0.0 {
        return Ok(hi);
    }
    if !(flo.is_finite() && fhi.is_finite()) || flo.signum() == fhi.signum() {
        return Err(Error::Convergence(format!(
            "no sign change on [{lo}, {hi}]: f = ({flo}, {fhi})"
        )));
    }
    let increasing = fhi > 0.0;
    let mut x = if guess > lo && guess < hi {
        guess
    } else {
        midpoint(lo, hi)
    };
    for _ in 0..max_iter {
        let (fx, dfx) = f(x);
        if fx == 0.0 {
            return Ok(x);
        }
        if (fx > 0.0) == increasing {
            hi = x;
        } else {
            lo = x;
        }
        let newton = x - fx / dfx;
        let next = if dfx != 0.0 && newton.is_finite() && newton > lo && newton < hi {
            newton
        } else {
            midpoint(lo, hi)
        };
        let step = (next - x).abs();
        x = next;
        if step <= rtol * x.abs() || (hi - lo) <= rtol * x.abs() {
            return Ok(x);
        }
    }
    Err(Error::Convergence(format!(
        "newton did not converge in {max_iter} iterations on [{lo}, {hi}]"
    )))
}

fn midpoint(lo: f64, hi: f64) -> f64 {
    if lo > 0.0 && hi > 4.0 * lo {
        (lo * hi).sqrt()
    } else {
        0.5 * (lo + hi)
    }
}
