//! Pointwise implicit solve of the activation/inactivation kinetics.
//!
//! Both ε-steppers Lie-split each time step into a local reaction stage and
//! the transport stages. The reaction stage advances, at every surface node
//! independently,
//!
//! ```text
//! (U − U⁰)/dt   = K(U)·v − F(U)
//! ε(v − v⁰)/dt  = −K(U)·v + F(U) − a5·v + a6·w̄
//! ```
//!
//! with the bulk value w̄ frozen at the old time level. The activation rate
//! K(U) = ε·a1 + ε·a2·U/(ε·a3 + U) + c includes the external signal c at the
//! node; the inactivation rate is F(U) = a4·U/(ε + U).
//!
//! The v-equation is linear in v once U is fixed, so v is eliminated exactly:
//!
//! ```text
//! v(U) = (ε·v⁰ + dt·(F(U) + a6·w̄)) / (ε + dt·(K(U) + a5)),
//! ```
//!
//! leaving one scalar equation G(U) = U − U⁰ − dt·(K(U)·v(U) − F(U)) = 0.
//! G has a sign change on [0, U⁰ + dt·K_max·v_max + 1]: at the left end
//! G(0) = −U⁰ − dt·K(0)·v(0) ≤ 0 for admissible (nonnegative) data, and at
//! the right end the explicit bound on K·v makes G positive. A safeguarded
//! Newton iteration (bisection fallback whenever the Newton step leaves the
//! bracket or the derivative degenerates) then converges unconditionally,
//! and nonnegativity of U and v is automatic rather than enforced.

use crate::error::{CoreError, Result};
use crate::params::ModelParams;

/// Relative tolerance on the scalar residual G(U). The bracket endpoints
/// pin the root to round-off well before 50 iterations in practice; the
/// max(1, ·) floor keeps the test meaningful near U = 0.
const NEWTON_RTOL: f64 = 1e-13;

/// Iteration cap; hitting it signals the step is too large for the local
/// kinetics and the caller should retry with a smaller dt.
const NEWTON_MAX_ITER: usize = 50;

/// Activation rate K(U) for signal value c at the node.
pub(crate) fn activation_rate(u: f64, c: f64, p: &ModelParams) -> f64 {
    p.eps * p.a1 + p.eps * p.a2 * u / (p.eps * p.a3 + u) + c
}

/// Inactivation rate F(U).
pub(crate) fn inactivation_rate(u: f64, p: &ModelParams) -> f64 {
    p.a4 * u / (p.eps + u)
}

/// Result of the pointwise reaction stage.
#[derive(Debug, Clone, Copy)]
pub(crate) struct ReactionNode {
    /// Active concentration after the stage.
    pub u: f64,
    /// Inactive concentration after the stage.
    pub v: f64,
}

/// Advances one node through the implicit reaction stage.
pub(crate) fn implicit_reaction_step(
    node: usize,
    u0: f64,
    v0: f64,
    w_bar: f64,
    c: f64,
    p: &ModelParams,
    dt: f64,
) -> Result<ReactionNode> {
    debug_assert!(u0 >= 0.0 && v0 >= 0.0 && w_bar >= 0.0);

    // Eliminated v as a function of the implicit U.
    let v_of = |u: f64| -> f64 {
        let k = activation_rate(u, c, p);
        (p.eps * v0 + dt * (inactivation_rate(u, p) + p.a6 * w_bar))
            / (p.eps + dt * (k + p.a5))
    };
    let g_of = |u: f64| -> f64 {
        u - u0 - dt * (activation_rate(u, c, p) * v_of(u) - inactivation_rate(u, p))
    };

    // Bracket from the a-priori bounds K ≤ K_max, v ≤ v_max.
    let k_max = p.eps * p.a1 + p.eps * p.a2 + c;
    let v_max = (p.eps * v0 + dt * (p.a4 + p.a6 * w_bar)) / (p.eps + dt * p.a5);
    let mut lo = 0.0_f64;
    let mut hi = u0 + dt * k_max * v_max + 1.0;
    let tol = NEWTON_RTOL * hi.max(1.0);

    let g_lo = g_of(lo);
    if g_lo.abs() <= tol {
        let v = v_of(lo);
        return Ok(ReactionNode { u: lo, v });
    }

    let mut u = u0.min(hi);
    let mut g = g_of(u);
    for _ in 0..NEWTON_MAX_ITER {
        if g.abs() <= tol {
            return Ok(ReactionNode { u, v: v_of(u) });
        }
        if g < 0.0 {
            lo = u;
        } else {
            hi = u;
        }

        // Analytic derivative of G through the eliminated v.
        let k = activation_rate(u, c, p);
        let dk = p.eps * p.a2 * (p.eps * p.a3) / ((p.eps * p.a3 + u) * (p.eps * p.a3 + u));
        let f = inactivation_rate(u, p);
        let df = p.a4 * p.eps / ((p.eps + u) * (p.eps + u));
        let num = p.eps * v0 + dt * (f + p.a6 * w_bar);
        let den = p.eps + dt * (k + p.a5);
        let v = num / den;
        let dv = (dt * df * den - num * dt * dk) / (den * den);
        let dg = 1.0 - dt * (dk * v + k * dv - df);

        let newton = u - g / dg;
        u = if dg > 0.0 && newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
        g = g_of(u);
    }

    Err(CoreError::NewtonNonconvergence {
        node,
        iters: NEWTON_MAX_ITER,
        residual: g.abs(),
    })
}
