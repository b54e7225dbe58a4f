//! Adaptive stiff ODE integration for reference solutions.
//!
//! The verification suites reduce the PDE systems to small ODE systems
//! (spatially uniform states, single radial profiles) and need trajectories
//! accurate to ~1e-10 through the fast ε-scale transients. The workhorse is
//! TR-BDF2 — one trapezoidal substage to t + γh followed by a BDF2 closure,
//! γ = 2 − √2 — which is L-stable and second order, with step-doubling
//! error control:
//!
//! ```text
//! y_γ   = y_n + (γh/2)·(f(t_n, y_n) + f(t_n+γh, y_γ))
//! y_n+1 = y_γ/(γ(2−γ)) − y_n·(1−γ)²/(γ(2−γ)) + h·f(t_n+h, y_n+1)·(1−γ)/(2−γ)
//! ```
//!
//! Each step is computed once with h and once with two h/2 substeps; the
//! difference, scaled by 1/(2² − 1), estimates the local error of the finer
//! result, which is the one kept. Stage equations are solved by Newton with
//! a forward-difference Jacobian and dense LU — the systems here have at
//! most a few dozen unknowns, so factorization cost is irrelevant next to
//! robustness.

use nalgebra::{DMatrix, DVector};

use crate::error::{CoreError, Result};

/// Controls for [`integrate_stiff`].
#[derive(Debug, Clone, Copy)]
pub struct OdeOptions {
    /// Relative tolerance per component.
    pub rtol: f64,
    /// Absolute tolerance per component.
    pub atol: f64,
    /// Initial step size.
    pub h0: f64,
    /// Smallest step before the integration is declared failed.
    pub h_min: f64,
    /// Accepted-plus-rejected step budget.
    pub max_steps: usize,
}

impl Default for OdeOptions {
    fn default() -> Self {
        Self {
            rtol: 1e-10,
            atol: 1e-12,
            h0: 1e-4,
            h_min: 1e-14,
            max_steps: 10_000_000,
        }
    }
}

const GAMMA: f64 = 2.0 - std::f64::consts::SQRT_2;
const NEWTON_MAX_ITER: usize = 25;

/// Integrates y' = f(t, y) from t0 to t_end and returns y(t_end).
///
/// `f` writes the derivative of `y` into its third argument.
pub fn integrate_stiff<F>(
    f: &F,
    t0: f64,
    y0: &[f64],
    t_end: f64,
    opts: &OdeOptions,
) -> Result<Vec<f64>>
where
    F: Fn(f64, &[f64], &mut [f64]),
{
    if !(t_end.is_finite() && t0.is_finite() && t_end >= t0) {
        return Err(CoreError::OdeFailure(format!(
            "bad time span [{t0}, {t_end}]"
        )));
    }
    let mut t = t0;
    let mut y = DVector::from_column_slice(y0);
    let mut h = opts.h0.min((t_end - t0).max(opts.h_min));
    let mut steps = 0usize;

    while t < t_end {
        if steps >= opts.max_steps {
            return Err(CoreError::OdeFailure(format!(
                "step budget {} exhausted at t = {t:.6e}",
                opts.max_steps
            )));
        }
        steps += 1;
        h = h.min(t_end - t);

        let full = tr_bdf2_step(f, t, &y, h);
        let halves = tr_bdf2_step(f, t, &y, 0.5 * h)
            .and_then(|mid| tr_bdf2_step(f, t + 0.5 * h, &mid, 0.5 * h));
        let (coarse, fine) = match (full, halves) {
            (Ok(c), Ok(fi)) => (c, fi),
            _ => {
                // A stage Newton diverged: the step is too ambitious.
                h *= 0.25;
                if h < opts.h_min {
                    return Err(CoreError::OdeFailure(format!(
                        "stage solve kept failing near t = {t:.6e}"
                    )));
                }
                continue;
            }
        };

        // Normalized step-doubling error of the fine solution (order 2).
        let mut err = 0.0_f64;
        for i in 0..y.len() {
            let scale = opts.atol + opts.rtol * fine[i].abs().max(y[i].abs());
            err = err.max((fine[i] - coarse[i]).abs() / (3.0 * scale));
        }

        if err <= 1.0 {
            t += h;
            y = fine;
            let grow = if err > 0.0 {
                (0.9 * err.powf(-1.0 / 3.0)).clamp(1.0, 5.0)
            } else {
                5.0
            };
            h *= grow;
        } else {
            h *= (0.9 * err.powf(-1.0 / 3.0)).clamp(0.1, 0.5);
            if h < opts.h_min {
                return Err(CoreError::OdeFailure(format!(
                    "step size underflow at t = {t:.6e} (error {err:.3e})"
                )));
            }
        }
    }
    Ok(y.as_slice().to_vec())
}

/// One TR-BDF2 step from (t, y) over h.
fn tr_bdf2_step<F>(f: &F, t: f64, y: &DVector<f64>, h: f64) -> Result<DVector<f64>>
where
    F: Fn(f64, &[f64], &mut [f64]),
{
    let n = y.len();
    let mut fy = vec![0.0; n];
    f(t, y.as_slice(), &mut fy);

    // Trapezoidal substage to t + γh.
    let c_tr = 0.5 * GAMMA * h;
    let mut rhs = y.clone();
    for i in 0..n {
        rhs[i] += c_tr * fy[i];
    }
    let y_gamma = stage_solve(f, t + GAMMA * h, c_tr, &rhs, y)?;

    // BDF2 closure to t + h.
    let denom = GAMMA * (2.0 - GAMMA);
    let c_bdf = (1.0 - GAMMA) / (2.0 - GAMMA) * h;
    let a_gamma = 1.0 / denom;
    let a_old = (1.0 - GAMMA) * (1.0 - GAMMA) / denom;
    let rhs = &y_gamma * a_gamma - y * a_old;
    stage_solve(f, t + h, c_bdf, &rhs, &y_gamma)
}

/// Newton solve of y − c·f(t, y) = rhs, starting from `guess`.
fn stage_solve<F>(
    f: &F,
    t: f64,
    c: f64,
    rhs: &DVector<f64>,
    guess: &DVector<f64>,
) -> Result<DVector<f64>>
where
    F: Fn(f64, &[f64], &mut [f64]),
{
    let n = rhs.len();
    let mut y = guess.clone();
    let mut fy = vec![0.0; n];
    let mut fy_pert = vec![0.0; n];

    for _ in 0..NEWTON_MAX_ITER {
        f(t, y.as_slice(), &mut fy);
        let mut residual = DVector::zeros(n);
        let mut res_norm = 0.0_f64;
        for i in 0..n {
            residual[i] = y[i] - c * fy[i] - rhs[i];
            // f64::max ignores NaN, so a poisoned residual would otherwise
            // read as "converged"; fail the stage instead.
            if !residual[i].is_finite() {
                return Err(CoreError::OdeFailure(format!(
                    "non-finite stage residual at t = {t:.6e}"
                )));
            }
            res_norm = res_norm.max(residual[i].abs());
        }
        let scale = y.amax().max(1.0);
        if res_norm <= 1e-13 * scale {
            return Ok(y);
        }

        // Forward-difference Jacobian of the stage map I − c·∂f/∂y.
        let mut jac = DMatrix::identity(n, n);
        for j in 0..n {
            let delta = f64::EPSILON.sqrt() * y[j].abs().max(1.0);
            let saved = y[j];
            y[j] = saved + delta;
            f(t, y.as_slice(), &mut fy_pert);
            y[j] = saved;
            for i in 0..n {
                jac[(i, j)] -= c * (fy_pert[i] - fy[i]) / delta;
            }
        }
        let lu = jac.lu();
        let step = lu
            .solve(&residual)
            .ok_or_else(|| CoreError::OdeFailure("singular stage Jacobian".into()))?;
        y -= step;
        if !y.iter().all(|v| v.is_finite()) {
            return Err(CoreError::OdeFailure("stage iterate went non-finite".into()));
        }
    }
    Err(CoreError::OdeFailure(
        "stage Newton did not converge".into(),
    ))
}
