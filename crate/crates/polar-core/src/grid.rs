//! Geometry, fields and quadrature on the reference domain.
//!
//! The reference geometry is the unit circle Γ (the "surface", carrying the
//! membrane species) coupled to the unit disk Ω (the "bulk", carrying the
//! cytosolic species). Both are discretized by collocation:
//!
//! - [`SurfaceGrid`]: `n_theta` equispaced angles θ_j = 2πj/n_theta with the
//!   trapezoidal quadrature weight 2π/n_theta per node. On a periodic grid
//!   this quadrature is exact for trigonometric polynomials of degree
//!   < n_theta, which is what makes the spectral operators in
//!   [`crate::spectral`] trustworthy to round-off.
//! - [`BulkGrid`]: a tensor grid of `n_r` radial nodes r_i = (i+1)/n_r times
//!   the surface angles. The outermost radial ring sits exactly at r = 1 and
//!   shares the surface node indexing one-to-one, so boundary traces are a
//!   plain row copy. Radial control volumes are vertex-centered: faces at
//!   midpoints between nodes, closed by f = 0 at the center and f = 1 at the
//!   boundary. The cell volumes are used verbatim by the bulk heat stepper,
//!   so the discrete bulk integral and the finite-volume flux balance agree
//!   exactly.
//!
//! Derived constants: |Γ| = 2π and |Ω| = π, reproduced by the quadrature of
//! the constant one to round-off.

use std::sync::{Arc, OnceLock};

use crate::error::{CoreError, Result};
use crate::spectral::SpectralOps;

/// Equispaced angular collocation grid on the unit circle.
#[derive(Debug)]
pub struct SurfaceGrid {
    n_theta: usize,
    spectral: OnceLock<SpectralOps>,
    dtn_matrix: OnceLock<nalgebra::DMatrix<f64>>,
}

impl SurfaceGrid {
    /// Builds a grid with `n_theta` nodes.
    ///
    /// `n_theta` must be even (so Fourier modes pair cleanly around the
    /// Nyquist frequency) and at least 8.
    pub fn new(n_theta: usize) -> Result<Arc<Self>> {
        if !n_theta.is_multiple_of(2) {
            return Err(CoreError::InvalidGrid(format!(
                "n_theta must be even, got {n_theta}"
            )));
        }
        if n_theta < 8 {
            return Err(CoreError::InvalidGrid(format!(
                "n_theta must be at least 8, got {n_theta}"
            )));
        }
        Ok(Arc::new(Self {
            n_theta,
            spectral: OnceLock::new(),
            dtn_matrix: OnceLock::new(),
        }))
    }

    /// Number of collocation nodes.
    pub fn n_theta(&self) -> usize {
        self.n_theta
    }

    /// Angle of node `j`.
    pub fn theta(&self, j: usize) -> f64 {
        2.0 * std::f64::consts::PI * (j as f64) / (self.n_theta as f64)
    }

    /// All node angles in order.
    pub fn thetas(&self) -> Vec<f64> {
        (0..self.n_theta).map(|j| self.theta(j)).collect()
    }

    /// Quadrature weight per node (uniform): 2π/n_theta.
    pub fn weight(&self) -> f64 {
        2.0 * std::f64::consts::PI / (self.n_theta as f64)
    }

    /// Total length |Γ| = 2π as seen by the quadrature.
    pub fn circumference(&self) -> f64 {
        2.0 * std::f64::consts::PI
    }

    /// Angular mesh width 2π/n_theta (same number as [`Self::weight`], named
    /// for use as a finite-difference step).
    pub fn dtheta(&self) -> f64 {
        self.weight()
    }

    /// Shared FFT plans and spectral multipliers for this grid size.
    pub(crate) fn spectral(&self) -> &SpectralOps {
        self.spectral.get_or_init(|| SpectralOps::new(self.n_theta))
    }

    /// Nodal matrix of the Dirichlet-to-Neumann map, built once and cached.
    ///
    /// Used by the Robin boundary operator; see [`crate::robin`].
    pub(crate) fn dtn_nodal_matrix(self: &Arc<Self>) -> &nalgebra::DMatrix<f64> {
        self.dtn_matrix.get_or_init(|| {
            let n = self.n_theta;
            let mut m = nalgebra::DMatrix::zeros(n, n);
            let ops = self.spectral();
            let mut basis = vec![0.0; n];
            for col in 0..n {
                basis.fill(0.0);
                basis[col] = 1.0;
                let image = ops.apply_multiplier(&basis, |k| k.unsigned_abs() as f64);
                for row in 0..n {
                    m[(row, col)] = image[row];
                }
            }
            m
        })
    }
}

/// Tensor (radius × angle) grid on the unit disk.
///
/// Radial nodes r_i = (i+1)/n_r for i = 0..n_r, so the outermost node lies at
/// r = 1; the center r = 0 is not a node (all fields of interest are either
/// regular there or only needed up to their boundary trace).
#[derive(Debug)]
pub struct BulkGrid {
    n_r: usize,
    surface: Arc<SurfaceGrid>,
    /// Radial control-volume faces: f_0 = 0, midpoints, f_{n_r} = 1.
    faces: Vec<f64>,
    /// Control-volume measures per unit angle: (f_{i+1}² − f_i²)/2.
    cell_volumes: Vec<f64>,
}

impl BulkGrid {
    /// Builds the disk grid over an existing surface grid. Requires n_r ≥ 4.
    pub fn new(surface: Arc<SurfaceGrid>, n_r: usize) -> Result<Arc<Self>> {
        if n_r < 4 {
            return Err(CoreError::InvalidGrid(format!(
                "n_r must be at least 4, got {n_r}"
            )));
        }
        let node = |i: usize| (i as f64 + 1.0) / n_r as f64;
        let mut faces = Vec::with_capacity(n_r + 1);
        faces.push(0.0);
        for i in 1..n_r {
            faces.push(0.5 * (node(i - 1) + node(i)));
        }
        faces.push(1.0);
        let cell_volumes = (0..n_r)
            .map(|i| 0.5 * (faces[i + 1] * faces[i + 1] - faces[i] * faces[i]))
            .collect();
        Ok(Arc::new(Self {
            n_r,
            surface,
            faces,
            cell_volumes,
        }))
    }

    /// Number of radial nodes.
    pub fn n_r(&self) -> usize {
        self.n_r
    }

    /// Number of angular nodes (shared with the surface grid).
    pub fn n_theta(&self) -> usize {
        self.surface.n_theta()
    }

    /// The surface grid whose nodes index the trace row.
    pub fn surface(&self) -> &Arc<SurfaceGrid> {
        &self.surface
    }

    /// Radius of radial node `i`.
    pub fn radius(&self, i: usize) -> f64 {
        (i as f64 + 1.0) / self.n_r as f64
    }

    /// Radial control-volume faces (length n_r + 1; first 0, last 1).
    pub fn faces(&self) -> &[f64] {
        &self.faces
    }

    /// Control-volume measure of radial cell `i` per unit angle.
    pub fn cell_volume(&self, i: usize) -> f64 {
        self.cell_volumes[i]
    }

    /// Area |Ω| = π as seen by the cell-volume quadrature.
    pub fn area(&self) -> f64 {
        std::f64::consts::PI
    }
}

/// Builds matched surface and bulk grids.
///
/// The returned grids share boundary indexing: surface node j corresponds to
/// bulk node (n_r − 1, j).
pub fn build_grids(n_theta: usize, n_r: usize) -> Result<(Arc<SurfaceGrid>, Arc<BulkGrid>)> {
    let surface = SurfaceGrid::new(n_theta)?;
    let bulk = BulkGrid::new(surface.clone(), n_r)?;
    Ok((surface, bulk))
}

/// Real-valued samples on a [`SurfaceGrid`].
#[derive(Debug, Clone)]
pub struct SurfaceField {
    grid: Arc<SurfaceGrid>,
    values: Vec<f64>,
}

impl SurfaceField {
    /// Wraps nodal values; rejects length mismatches and non-finite entries.
    pub fn new(grid: Arc<SurfaceGrid>, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.n_theta() {
            return Err(CoreError::InvalidField(format!(
                "expected {} values, got {}",
                grid.n_theta(),
                values.len()
            )));
        }
        if let Some(j) = values.iter().position(|v| !v.is_finite()) {
            return Err(CoreError::InvalidField(format!(
                "non-finite value at node {j}"
            )));
        }
        Ok(Self { grid, values })
    }

    /// The constant field.
    pub fn constant(grid: Arc<SurfaceGrid>, value: f64) -> Self {
        let n = grid.n_theta();
        Self {
            grid,
            values: vec![value; n],
        }
    }

    /// Samples `f(θ_j)` at every node.
    pub fn from_fn(grid: Arc<SurfaceGrid>, f: impl Fn(f64) -> f64) -> Self {
        let values = (0..grid.n_theta()).map(|j| f(grid.theta(j))).collect();
        Self { grid, values }
    }

    pub fn grid(&self) -> &Arc<SurfaceGrid> {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Quadrature-weighted L¹ norm: (2π/n)·Σ|f_j|.
    pub fn norm_l1(&self) -> f64 {
        self.grid.weight() * self.values.iter().map(|v| v.abs()).sum::<f64>()
    }

    /// Quadrature-weighted L² norm.
    pub fn norm_l2(&self) -> f64 {
        (self.grid.weight() * self.values.iter().map(|v| v * v).sum::<f64>()).sqrt()
    }

    /// Max norm.
    pub fn norm_linf(&self) -> f64 {
        self.values.iter().map(|v| v.abs()).fold(0.0, f64::max)
    }

    /// Pointwise map, preserving the grid.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            grid: self.grid.clone(),
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    /// Pointwise combination of two fields on the same grid.
    pub fn zip_with(&self, other: &Self, f: impl Fn(f64, f64) -> f64) -> Self {
        debug_assert_eq!(self.len(), other.len());
        Self {
            grid: self.grid.clone(),
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        }
    }
}

/// Discrete surface integral ∫_Γ f dS = (2π/n)·Σ f_j.
///
/// Exact for trigonometric polynomials of degree < n_theta.
pub fn integrate_surface(f: &SurfaceField) -> f64 {
    f.grid.weight() * f.values.iter().sum::<f64>()
}

/// Quadrature of the positive part: ∫_Γ (f)₊ dS.
pub fn integrate_positive_part(f: &SurfaceField) -> f64 {
    f.grid.weight() * f.values.iter().map(|v| v.max(0.0)).sum::<f64>()
}

/// Real-valued samples on a [`BulkGrid`], stored radius-major:
/// `values[i * n_theta + j]` is the sample at (r_i, θ_j).
#[derive(Debug, Clone)]
pub struct BulkField {
    grid: Arc<BulkGrid>,
    values: Vec<f64>,
}

impl BulkField {
    pub fn new(grid: Arc<BulkGrid>, values: Vec<f64>) -> Result<Self> {
        let expected = grid.n_r() * grid.n_theta();
        if values.len() != expected {
            return Err(CoreError::InvalidField(format!(
                "expected {} values, got {}",
                expected,
                values.len()
            )));
        }
        if let Some(idx) = values.iter().position(|v| !v.is_finite()) {
            return Err(CoreError::InvalidField(format!(
                "non-finite value at flat index {idx}"
            )));
        }
        Ok(Self { grid, values })
    }

    pub fn constant(grid: Arc<BulkGrid>, value: f64) -> Self {
        let len = grid.n_r() * grid.n_theta();
        Self {
            grid,
            values: vec![value; len],
        }
    }

    pub fn grid(&self) -> &Arc<BulkGrid> {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    /// Sample at radial index `i`, angular index `j`.
    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.grid.n_theta() + j]
    }

    /// The radial ring at index `i` as a contiguous slice.
    pub fn ring(&self, i: usize) -> &[f64] {
        let n = self.grid.n_theta();
        &self.values[i * n..(i + 1) * n]
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Boundary trace: the ring at r = 1 as a surface field.
    pub fn trace(&self) -> SurfaceField {
        let i = self.grid.n_r() - 1;
        SurfaceField {
            grid: self.grid.surface().clone(),
            values: self.ring(i).to_vec(),
        }
    }
}

/// Discrete bulk integral ∫_Ω f dx using the control-volume measures.
///
/// This is the exact mass functional of the finite-volume bulk stepper: the
/// conservation identities hold for this quadrature to round-off.
pub fn integrate_bulk(f: &BulkField) -> f64 {
    let grid = f.grid();
    let w_theta = grid.surface().weight();
    let mut total = 0.0;
    for i in 0..grid.n_r() {
        let ring_sum: f64 = f.ring(i).iter().sum();
        total += grid.cell_volume(i) * ring_sum;
    }
    w_theta * total
}
