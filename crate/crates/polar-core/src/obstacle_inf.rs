//! Obstacle-type limit problem with infinitely fast bulk diffusion.
//!
//! The fast-reaction limit of the surface system collapses to a single
//! constrained parabolic equation for the active concentration u ≥ 0,
//!
//! ```text
//! ∂_t u − Δu = −a₄(1−g)·ξ + α·g,
//! u ≥ 0,   0 ≤ ξ ≤ 1,   ξ = 1 where u > 0,
//! ```
//!
//! where g ∈ (0,1) is the activation fraction of the signal and the scalar
//! α ≥ 0 acts as a Lagrange multiplier pinning the total mass ∫_Γ u to its
//! initial value. On the positivity set, α is determined by u alone:
//!
//! ```text
//! α = a₄·∫_A (1−g) / ∫_A g        for any A ⊇ {u > 0} (with ξ-weighting),
//! ```
//!
//! and ξ on {u = 0} is the feasibility ratio α·g/(a₄(1−g)), which stays in
//! [0,1] for exact solutions.
//!
//! ## Discrete step
//!
//! One implicit Euler step solves the LCP of [`crate::lcp`] with data
//! q = uⁿ + dt·(−a₄(1−g) + α·g) for a trial α, and adjusts α by a bracketed
//! scalar root-find so the discrete mass of the accepted iterate equals the
//! mass of uⁿ. The step mass is strictly increasing in α (the LCP solution
//! is entrywise nondecreasing in q because the matrix inverse is
//! nonnegative), the bracket [0, a₄·max((1−g)/g) + margin] always encloses
//! the root, and α is re-bracketed from scratch every step — the positivity
//! set and α may jump in time and no continuity is assumed. The quadrature
//! formula for α is *not* used to drive the step; it is evaluated afterwards
//! as a consistency diagnostic (`alpha_quad_gap`).

use crate::error::{CoreError, Result};
use crate::grid::{integrate_surface, SurfaceField};
use crate::lcp::ObstacleMatrix;
use crate::obstacle::{laplacian_fd, support_fraction, support_mask, ObstacleConfig};
use crate::roots::brent;

/// Absolute slack added to the α bracket's upper end so the bracket stays
/// strict even when the root sits exactly at a₄·max((1−g)/g) (constant g);
/// without it, solver noise of order 1e-13 could defeat the sign check.
const ALPHA_BRACKET_MARGIN: f64 = 1e-6;

/// State of the infinite-diffusion limit problem.
#[derive(Debug, Clone)]
pub struct ObstacleStateInf {
    u: SurfaceField,
    xi: SurfaceField,
    alpha: f64,
    t: f64,
}

impl ObstacleStateInf {
    /// Builds a state from an initial field: α and ξ are recovered from u.
    pub fn from_u(
        u: SurfaceField,
        g: &SurfaceField,
        a4: f64,
        config: &ObstacleConfig,
    ) -> Result<Self> {
        if u.min() < 0.0 {
            return Err(CoreError::InvalidField(
                "obstacle state must be nonnegative".into(),
            ));
        }
        let threshold = config.positivity_threshold(&u);
        let mask = support_mask(&u, threshold);
        let alpha = alpha_of(&u, g, a4, &mask)?;
        let (xi, _) = xi_of(&u, alpha, g, a4, threshold);
        Ok(Self {
            u,
            xi,
            alpha,
            t: 0.0,
        })
    }

    /// Active concentration u.
    pub fn u(&self) -> &SurfaceField {
        &self.u
    }

    /// Saturation field ξ.
    pub fn xi(&self) -> &SurfaceField {
        &self.xi
    }

    /// Current mass-conservation multiplier α.
    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// Simulation time.
    pub fn t(&self) -> f64 {
        self.t
    }

    /// Discrete mass ∫_Γ u.
    pub fn mass(&self) -> f64 {
        integrate_surface(&self.u)
    }
}

/// Per-step diagnostics of [`step_dinf`].
#[derive(Debug, Clone, Copy)]
pub struct DinfStepInfo {
    /// Multiplier accepted by the mass root-find.
    pub alpha: f64,
    /// Signed defect ∫u − m after the step (bounded by the root tolerance).
    pub mass_error: f64,
    /// |α − a₄·∫(1−g)/∫g over the support|: consistency of the root-found
    /// multiplier with its quadrature characterization.
    pub alpha_quad_gap: f64,
    /// Projected-SOR sweeps summed over all root-find evaluations.
    pub psor_sweeps: usize,
    /// Complementarity residual of the accepted solve.
    pub psor_residual: f64,
    /// Number of nodes where ξ needed clamping into [0, 1].
    pub clamp_violations: usize,
    /// |{u > θ_pos}| / n.
    pub support_fraction: f64,
}

/// Multiplier from its quadrature characterization over a node set.
///
/// With the uniform trapezoidal weights the quadrature reduces to plain sums
/// over the masked nodes.
pub fn alpha_of(u: &SurfaceField, g: &SurfaceField, a4: f64, support: &[bool]) -> Result<f64> {
    debug_assert_eq!(u.len(), g.len());
    debug_assert_eq!(u.len(), support.len());
    let mut num = 0.0;
    let mut den = 0.0;
    for (j, &inside) in support.iter().enumerate() {
        if inside {
            let gj = g.values()[j];
            num += 1.0 - gj;
            den += gj;
        }
    }
    if den <= 0.0 {
        return Err(CoreError::DegenerateSupport);
    }
    Ok(a4 * num / den)
}

/// Saturation field: ξ = 1 on {u > threshold}, the feasibility ratio
/// α·g/(a₄(1−g)) elsewhere, clamped into [0, 1].
///
/// Returns the field and the number of nodes where clamping engaged beyond
/// round-off; a nonzero count flags a transient violation of the
/// feasibility condition α·g ≤ a₄(1−g) on the zero set.
pub fn xi_of(
    u: &SurfaceField,
    alpha: f64,
    g: &SurfaceField,
    a4: f64,
    threshold: f64,
) -> (SurfaceField, usize) {
    let mut violations = 0;
    let values = u
        .values()
        .iter()
        .zip(g.values())
        .map(|(&uj, &gj)| {
            if uj > threshold {
                1.0
            } else {
                let ratio = alpha * gj / (a4 * (1.0 - gj));
                if !(-1e-12..=1.0 + 1e-12).contains(&ratio) {
                    violations += 1;
                }
                ratio.clamp(0.0, 1.0)
            }
        })
        .collect();
    let xi = SurfaceField::new(u.grid().clone(), values).expect("clamped field is finite");
    (xi, violations)
}

/// One implicit Euler step of size dt under the signal fraction g.
///
/// The returned state carries the same discrete mass as the input to within
/// the root-find tolerance (see [`DinfStepInfo::mass_error`]).
pub fn step_dinf(
    state: &ObstacleStateInf,
    dt: f64,
    g: &SurfaceField,
    a4: f64,
    config: &ObstacleConfig,
) -> Result<(ObstacleStateInf, DinfStepInfo)> {
    if g.len() != state.u.len() {
        return Err(CoreError::InvalidField(
            "signal fraction sampled on a different grid than the state".into(),
        ));
    }
    let grid = state.u.grid().clone();
    let matrix = ObstacleMatrix::new(&grid, dt)?;
    let m = integrate_surface(&state.u);
    let weight = grid.weight();
    let n = state.u.len();

    let alpha_hi = alpha_bracket_top(g, a4);
    let mut u_work = state.u.values().to_vec();
    let mut q = vec![0.0; n];
    let mut sweeps_total = 0usize;
    let mut last_residual = 0.0;
    let mut solver_error: Option<CoreError> = None;

    // Mass defect of the step as a function of the trial multiplier;
    // evaluating it runs one LCP solve, warm-started from the previous one.
    let mut mass_defect = |alpha: f64,
                           u_work: &mut Vec<f64>,
                           sweeps_total: &mut usize,
                           last_residual: &mut f64,
                           solver_error: &mut Option<CoreError>|
     -> f64 {
        let mut q_max = 0.0_f64;
        for (j, qj) in q.iter_mut().enumerate() {
            let gj = g.values()[j];
            *qj = state.u.values()[j] + dt * (-a4 * (1.0 - gj) + alpha * gj);
            q_max = q_max.max(qj.abs());
        }
        let tol = config.psor_rtol * q_max.max(1.0);
        match matrix.psor(
            u_work,
            &q,
            config.psor_omega,
            tol,
            config.psor_max_sweeps,
        ) {
            Ok(stats) => {
                *sweeps_total += stats.sweeps;
                *last_residual = stats.residual;
                weight * u_work.iter().sum::<f64>() - m
            }
            Err(e) => {
                *solver_error = Some(e);
                f64::NAN
            }
        }
    };

    let phi_lo = mass_defect(
        0.0,
        &mut u_work,
        &mut sweeps_total,
        &mut last_residual,
        &mut solver_error,
    );
    let phi_hi = mass_defect(
        alpha_hi,
        &mut u_work,
        &mut sweeps_total,
        &mut last_residual,
        &mut solver_error,
    );
    if let Some(e) = solver_error.take() {
        return Err(e);
    }
    let ftol = config.mass_rtol * m.max(1.0);
    if !(phi_lo <= ftol && phi_hi >= -ftol) {
        return Err(CoreError::AlphaBracketFailure {
            lo: 0.0,
            hi: alpha_hi,
            phi_lo,
            phi_hi,
        });
    }

    let alpha = brent(
        |a| {
            mass_defect(
                a,
                &mut u_work,
                &mut sweeps_total,
                &mut last_residual,
                &mut solver_error,
            )
        },
        0.0,
        alpha_hi,
        1e-14 * alpha_hi.max(1.0),
        ftol,
        config.max_alpha_iter,
    );
    if let Some(e) = solver_error.take() {
        return Err(e);
    }
    let alpha = alpha?;

    // The root-find may have evaluated other multipliers after the returned
    // one; redo the solve at the accepted α so u_work matches it.
    let mass_error = mass_defect(
        alpha,
        &mut u_work,
        &mut sweeps_total,
        &mut last_residual,
        &mut solver_error,
    );
    if let Some(e) = solver_error.take() {
        return Err(e);
    }

    let u_new = SurfaceField::new(grid, u_work)?;
    let threshold = config.positivity_threshold(&u_new);
    let mask = support_mask(&u_new, threshold);
    let alpha_quad = alpha_of(&u_new, g, a4, &mask)?;
    let (xi, clamp_violations) = xi_of(&u_new, alpha, g, a4, threshold);

    let info = DinfStepInfo {
        alpha,
        mass_error,
        alpha_quad_gap: (alpha - alpha_quad).abs(),
        psor_sweeps: sweeps_total,
        psor_residual: last_residual,
        clamp_violations,
        support_fraction: support_fraction(&mask),
    };
    let next = ObstacleStateInf {
        u: u_new,
        xi,
        alpha,
        t: state.t + dt,
    };
    Ok((next, info))
}

/// Upper end of the α bracket: past a₄·max((1−g)/g) the step's source is
/// nonnegative everywhere, so the step cannot lose mass.
fn alpha_bracket_top(g: &SurfaceField, a4: f64) -> f64 {
    let ratio_max = g
        .values()
        .iter()
        .map(|&gj| (1.0 - gj) / gj)
        .fold(0.0_f64, f64::max);
    a4 * ratio_max * (1.0 + ALPHA_BRACKET_MARGIN) + ALPHA_BRACKET_MARGIN
}

/// Convergence report of a steady-state driver.
#[derive(Debug, Clone, Copy)]
pub struct SteadyInfo {
    /// Pseudo-time steps taken.
    pub pseudo_steps: usize,
    /// L¹ increment of the final pseudo-step.
    pub final_delta_l1: f64,
    /// Complementarity residual of the stationary system at the fixed point.
    pub stationary_residual: f64,
}

/// Residual target of the stationary complementarity system.
pub const STATIONARY_RESIDUAL_TOL: f64 = 1e-8;

/// Stationary solution with mass m by pseudo-time continuation.
///
/// Runs [`step_dinf`] with dt = 1 from the uniform state until the L¹
/// increment stagnates below `steady_l1_rtol·m` *and* the stationary
/// complementarity residual max_j |min(u_j, (−Δu + a₄(1−g) − αg)_j)| drops
/// below 1e-8.
pub fn steady_dinf(
    m: f64,
    g: &SurfaceField,
    a4: f64,
    config: &ObstacleConfig,
) -> Result<(ObstacleStateInf, SteadyInfo)> {
    if !(m.is_finite() && m > 0.0) {
        return Err(CoreError::InvalidParams(format!(
            "steady mass must be positive, got {m}"
        )));
    }
    let grid = g.grid().clone();
    let uniform = SurfaceField::constant(grid, m / (2.0 * std::f64::consts::PI));
    let mut state = ObstacleStateInf::from_u(uniform, g, a4, config)?;

    let mut delta = f64::INFINITY;
    for step in 1..=config.max_steady_steps {
        let (next, _info) = step_dinf(&state, 1.0, g, a4, config)?;
        delta = next
            .u
            .zip_with(&state.u, |a, b| a - b)
            .norm_l1();
        state = next;
        if delta < config.steady_l1_rtol * m {
            let residual = stationary_residual_dinf(&state.u, state.alpha, g, a4);
            if residual < STATIONARY_RESIDUAL_TOL {
                return Ok((
                    state,
                    SteadyInfo {
                        pseudo_steps: step,
                        final_delta_l1: delta,
                        stationary_residual: residual,
                    },
                ));
            }
        }
    }
    Err(CoreError::SteadyNonconvergence {
        iters: config.max_steady_steps,
        delta,
    })
}

/// Complementarity residual of the stationary system:
/// max_j |min(u_j, (−Δu + a₄(1−g) − αg)_j)|.
pub fn stationary_residual_dinf(u: &SurfaceField, alpha: f64, g: &SurfaceField, a4: f64) -> f64 {
    let lap = laplacian_fd(u);
    u.values()
        .iter()
        .zip(g.values())
        .zip(&lap)
        .map(|((&uj, &gj), &lj)| {
            let stationary = -lj + a4 * (1.0 - gj) - alpha * gj;
            uj.min(stationary).abs()
        })
        .fold(0.0_f64, f64::max)
}
