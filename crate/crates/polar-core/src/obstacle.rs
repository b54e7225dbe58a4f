//! Configuration and set bookkeeping shared by both obstacle-limit solvers.
//!
//! The two limit problems (infinite and finite bulk diffusion) share their
//! discrete backbone: an implicit Euler step with the 3-point periodic
//! finite-difference Laplacian, constrained by u ≥ 0 through the LCP of
//! [`crate::lcp`], plus a discrete proxy for the positivity set {u > 0}.
//! Keeping the thresholds and solver knobs in one struct guarantees that
//! cross-solver comparisons (the D → ∞ consistency study in particular)
//! never differ in anything but the equations.
//!
//! The finite-difference Laplacian is deliberately *not* the spectral one
//! used by the ε-system: the comparison and contraction properties of the
//! limit problems are exact for M-matrix discretizations and only
//! approximate for spectral ones, and the limit solutions have C^{1,1}
//! kinks at the free boundary where a global Fourier basis rings.

use crate::grid::SurfaceField;

/// Solver knobs for the obstacle steppers.
#[derive(Debug, Clone, Copy)]
pub struct ObstacleConfig {
    /// Projected-SOR relaxation factor, in (0, 2).
    pub psor_omega: f64,
    /// Complementarity residual target, relative to max(1, ‖q‖∞). The floor
    /// of reliably reachable residuals is the Gauss-Seidel arithmetic noise
    /// n·ε_mach·‖u‖ ≈ 3e-14 at n = 128; 1e-13 sits just above it and far
    /// below the 1e-10 the downstream invariants need.
    pub psor_rtol: f64,
    /// Sweep budget before PSOR reports failure.
    pub psor_max_sweeps: usize,
    /// Mass residual target of the scalar root-find, relative to max(1, m).
    pub mass_rtol: f64,
    /// Iteration budget of the scalar root-find.
    pub max_alpha_iter: usize,
    /// Outer active-set iteration budget of the finite-D stepper.
    pub max_outer: usize,
    /// Positivity threshold, relative to max(1, max u): nodes with
    /// u > theta_pos_rel·max(1, max u) count as the discrete set {u > 0}.
    pub theta_pos_rel: f64,
    /// Pseudo-step budget of the steady-state drivers.
    pub max_steady_steps: usize,
    /// Pseudo-time stagnation target: the steady drivers stop once the
    /// L¹ increment per pseudo-step drops below steady_l1_rtol·m.
    pub steady_l1_rtol: f64,
}

impl Default for ObstacleConfig {
    fn default() -> Self {
        Self {
            psor_omega: 1.5,
            psor_rtol: 1e-13,
            psor_max_sweeps: 100_000,
            mass_rtol: 1e-12,
            max_alpha_iter: 200,
            max_outer: 50,
            theta_pos_rel: 1e-12,
            max_steady_steps: 100_000,
            steady_l1_rtol: 1e-11,
        }
    }
}

impl ObstacleConfig {
    /// Positivity threshold for a given field: theta_pos_rel·max(1, max u).
    pub fn positivity_threshold(&self, u: &SurfaceField) -> f64 {
        self.theta_pos_rel * u.max().max(1.0)
    }
}

/// Discrete positivity set {u > threshold} as a node mask.
pub fn support_mask(u: &SurfaceField, threshold: f64) -> Vec<bool> {
    u.values().iter().map(|&v| v > threshold).collect()
}

/// Fraction of nodes inside the mask (equals |{u>0}|/|Γ| on a uniform grid).
pub fn support_fraction(mask: &[bool]) -> f64 {
    if mask.is_empty() {
        return 0.0;
    }
    mask.iter().filter(|&&b| b).count() as f64 / mask.len() as f64
}

/// 3-point periodic finite-difference Laplacian, the stationary-residual
/// counterpart of the implicit matrix in [`crate::lcp`].
pub(crate) fn laplacian_fd(u: &SurfaceField) -> Vec<f64> {
    let n = u.len();
    let h2 = u.grid().dtheta() * u.grid().dtheta();
    let v = u.values();
    (0..n)
        .map(|j| (v[(j + n - 1) % n] - 2.0 * v[j] + v[(j + 1) % n]) / h2)
        .collect()
}
