//! Scalar root finding for the nonlocal coupling constant.
//!
//! The constrained time step couples every node through one scalar (the
//! spatially uniform production rate), whose defining balance is a
//! continuous, piecewise-smooth, monotone function of that scalar. A
//! bracketed method is therefore the right tool: Brent's combination of
//! inverse quadratic interpolation, secant steps, and bisection fallback is
//! superlinear on the smooth pieces and never leaves the bracket.

use crate::error::{CoreError, Result};

/// Finds x in [a, b] with f(x) ≈ 0 for f continuous with f(a)·f(b) ≤ 0.
///
/// Stops when either the bracket has collapsed to `xtol` (plus unavoidable
/// floating-point granularity around the root) or |f| has dropped below
/// `ftol`. The `ftol` stop matters here: the callers' objectives are flat
/// piecewise-linear balances whose roots are only defined up to round-off
/// in the function value, not in the abscissa.
pub fn brent<F>(mut f: F, a: f64, b: f64, xtol: f64, ftol: f64, max_iter: usize) -> Result<f64>
where
    F: FnMut(f64) -> f64,
{
    let mut a = a;
    let mut b = b;
    let mut fa = f(a);
    let mut fb = f(b);
    if fa.is_nan() || fb.is_nan() {
        return Err(CoreError::InvalidParams(
            "root objective returned NaN at a bracket endpoint".into(),
        ));
    }
    if fa == 0.0 || fa.abs() <= ftol {
        return Ok(a);
    }
    if fb == 0.0 || fb.abs() <= ftol {
        return Ok(b);
    }
    if fa.signum() == fb.signum() {
        return Err(CoreError::InvalidParams(format!(
            "root finder needs a sign change: f({a}) = {fa:.3e}, f({b}) = {fb:.3e}"
        )));
    }

    let mut c = b;
    let mut fc = fb;
    let mut d = b - a;
    let mut e = d;
    for _ in 0..max_iter {
        if fb.signum() == fc.signum() {
            // b and c no longer bracket; reset c to the retained endpoint.
            c = a;
            fc = fa;
            d = b - a;
            e = d;
        }
        if fc.abs() < fb.abs() {
            // Keep the best iterate in b.
            a = b;
            b = c;
            c = a;
            fa = fb;
            fb = fc;
            fc = fa;
        }
        let tol1 = 2.0 * f64::EPSILON * b.abs() + 0.5 * xtol;
        let xm = 0.5 * (c - b);
        if xm.abs() <= tol1 || fb == 0.0 || fb.abs() <= ftol {
            return Ok(b);
        }
        if e.abs() >= tol1 && fa.abs() > fb.abs() {
            // Try inverse quadratic interpolation (secant when a == c).
            let s = fb / fa;
            let (mut p, mut q);
            if a == c {
                p = 2.0 * xm * s;
                q = 1.0 - s;
            } else {
                let r0 = fa / fc;
                let r1 = fb / fc;
                p = s * (2.0 * xm * r0 * (r0 - r1) - (b - a) * (r1 - 1.0));
                q = (r0 - 1.0) * (r1 - 1.0) * (s - 1.0);
            }
            if p > 0.0 {
                q = -q;
            }
            p = p.abs();
            let accept_interp =
                2.0 * p < (3.0 * xm * q - (tol1 * q).abs()).min((e * q).abs());
            if accept_interp {
                e = d;
                d = p / q;
            } else {
                d = xm;
                e = d;
            }
        } else {
            d = xm;
            e = d;
        }
        a = b;
        fa = fb;
        b += if d.abs() > tol1 { d } else { tol1.copysign(xm) };
        fb = f(b);
        if fb.is_nan() {
            return Err(CoreError::InvalidParams(
                "root objective returned NaN inside the bracket".into(),
            ));
        }
    }
    Err(CoreError::StepRejected {
        reason: format!("scalar root solve stalled after {max_iter} iterations"),
    })
}
