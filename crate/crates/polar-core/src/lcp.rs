//! Projected SOR for the obstacle time step.
//!
//! One implicit Euler step of a heat equation with a one-sided constraint
//! u ≥ 0 is the linear complementarity problem
//!
//! ```text
//! u ≥ 0,   B u − q ≥ 0,   u · (B u − q) = 0,
//! B = I − dt Δ_h,
//! ```
//!
//! where Δ_h is the 3-point periodic finite-difference Laplacian. B is a
//! symmetric strictly diagonally dominant M-matrix whose columns sum to one
//! exactly (the off-diagonal entries −dt/Δθ² cancel against the diagonal
//! 1 + 2dt/Δθ² in floating point because both are computed from the same
//! product). Two consequences are load-bearing for the solvers built on top:
//!
//! * Σ u = Σ q + Σ (q − B u)_−-free identity: summing B u = q + λ with the
//!   multiplier λ ≥ 0 supported on {u = 0} gives exact discrete bookkeeping
//!   of mass up to the multiplier term.
//! * B⁻¹ ≥ 0 entrywise, so the constrained step is order preserving: q ≤ q'
//!   implies u ≤ u' nodewise. The comparison arguments in the tests rely on
//!   this being exact, not approximate.
//!
//! Projected SOR (Cryer's method) converges for symmetric positive definite
//! B and relaxation 0 < ω < 2; the sweep cost is O(n) per iteration.

use crate::error::{CoreError, Result};
use crate::grid::SurfaceGrid;

/// Convergence report for one projected-SOR solve.
#[derive(Debug, Clone, Copy)]
pub struct PsorStats {
    /// Sweeps performed before the residual dropped below tolerance.
    pub sweeps: usize,
    /// Final value of max_j |min(u_j, (Bu − q)_j)|.
    pub residual: f64,
}

/// Implicit-Euler obstacle matrix B = I − dt Δ_h on the periodic grid.
#[derive(Debug, Clone)]
pub struct ObstacleMatrix {
    n: usize,
    /// dt/Δθ², the magnitude of each off-diagonal entry.
    r: f64,
}

impl ObstacleMatrix {
    /// Builds B for the grid spacing and time step.
    pub fn new(grid: &SurfaceGrid, dt: f64) -> Result<Self> {
        if !(dt.is_finite() && dt > 0.0) {
            return Err(CoreError::InvalidParams(format!(
                "time step must be positive and finite, got {dt}"
            )));
        }
        let dtheta = grid.dtheta();
        Ok(Self {
            n: grid.n_theta(),
            r: dt / (dtheta * dtheta),
        })
    }

    /// Number of nodes.
    pub fn len(&self) -> usize {
        self.n
    }

    /// True when the matrix is empty (never for a valid grid).
    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// Diagonal entry, identical for every row.
    pub fn diagonal(&self) -> f64 {
        1.0 + 2.0 * self.r
    }

    /// Applies B to a vector.
    pub fn apply(&self, u: &[f64]) -> Vec<f64> {
        let n = self.n;
        (0..n)
            .map(|j| {
                let left = u[(j + n - 1) % n];
                let right = u[(j + 1) % n];
                (1.0 + 2.0 * self.r) * u[j] - self.r * (left + right)
            })
            .collect()
    }

    /// Componentwise complementarity residual min(u, Bu − q).
    pub fn complementarity_residual(&self, u: &[f64], q: &[f64]) -> f64 {
        self.apply(u)
            .iter()
            .zip(q)
            .zip(u)
            .map(|((bu, qj), uj)| uj.min(bu - qj).abs())
            .fold(0.0_f64, f64::max)
    }

    /// Solves the LCP u ≥ 0, Bu ≥ q, u·(Bu − q) = 0 by projected SOR.
    ///
    /// `u` enters as the initial guess (typically the previous time level,
    /// which makes warm starts nearly free) and exits as the solution.
    pub fn psor(
        &self,
        u: &mut [f64],
        q: &[f64],
        omega: f64,
        tol: f64,
        max_sweeps: usize,
    ) -> Result<PsorStats> {
        assert_eq!(u.len(), self.n, "solution/matrix size mismatch");
        assert_eq!(q.len(), self.n, "data/matrix size mismatch");
        if !(0.0 < omega && omega < 2.0) {
            return Err(CoreError::InvalidParams(format!(
                "SOR relaxation must lie in (0, 2), got {omega}"
            )));
        }
        let n = self.n;
        let diag = 1.0 + 2.0 * self.r;
        for sweep in 1..=max_sweeps {
            for j in 0..n {
                let left = u[(j + n - 1) % n];
                let right = u[(j + 1) % n];
                // Gauss-Seidel update projected onto the constraint u ≥ 0.
                let gs = (q[j] + self.r * (left + right)) / diag;
                u[j] = (u[j] + omega * (gs - u[j])).max(0.0);
            }
            let residual = self.complementarity_residual(u, q);
            if residual <= tol {
                return Ok(PsorStats {
                    sweeps: sweep,
                    residual,
                });
            }
        }
        Err(CoreError::PsorNonconvergence {
            sweeps: max_sweeps,
            residual: self.complementarity_residual(u, q),
        })
    }
}
