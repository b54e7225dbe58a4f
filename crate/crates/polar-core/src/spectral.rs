//! Fourier-side operators on the circle and their harmonic lift to the disk.
//!
//! On the unit circle every periodic operator of interest here is diagonal in
//! Fourier modes:
//!
//! ```text
//! second derivative (surface Laplacian):  mode k ↦ −k²
//! heat propagator over time t:            mode k ↦ exp(−k² t)
//! Dirichlet-to-Neumann map of the disk:   mode k ↦ |k|
//! harmonic extension to radius r:         mode k ↦ r^|k|
//! ```
//!
//! The Dirichlet-to-Neumann factor |k| comes from the harmonic extension of
//! e^{ikθ} into the unit disk being r^{|k|} e^{ikθ}, whose outward normal
//! derivative at r = 1 is |k| e^{ikθ}. Constants extend to constants and have
//! zero normal derivative, so the map annihilates the mean. All transforms
//! use an FFT of size `n_theta`; nodal values in, nodal values out, with the
//! 1/n normalization applied on the inverse transform.

use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::grid::{BulkField, BulkGrid, SurfaceField};

/// Cached FFT plans plus scratch-free helpers for one grid size.
pub(crate) struct SpectralOps {
    n: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for SpectralOps {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SpectralOps").field("n", &self.n).finish()
    }
}

impl SpectralOps {
    pub(crate) fn new(n: usize) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            n,
            forward: planner.plan_fft_forward(n),
            inverse: planner.plan_fft_inverse(n),
        }
    }

    /// Signed frequency of FFT bin `j`: 0, 1, …, n/2, −n/2+1, …, −1.
    pub(crate) fn frequency(&self, j: usize) -> i64 {
        if j <= self.n / 2 {
            j as i64
        } else {
            j as i64 - self.n as i64
        }
    }

    /// Forward transform of nodal values (unnormalized bins).
    pub(crate) fn to_modes(&self, values: &[f64]) -> Vec<Complex64> {
        let mut buf: Vec<Complex64> = values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.forward.process(&mut buf);
        buf
    }

    /// Inverse transform back to nodal values (applies the 1/n factor).
    pub(crate) fn to_nodes(&self, modes: &mut [Complex64]) -> Vec<f64> {
        self.inverse.process(modes);
        let scale = 1.0 / self.n as f64;
        modes.iter().map(|c| c.re * scale).collect()
    }

    /// Applies a real, even-in-k multiplier `m(k)` to every Fourier bin.
    pub(crate) fn apply_multiplier(&self, values: &[f64], m: impl Fn(i64) -> f64) -> Vec<f64> {
        let mut modes = self.to_modes(values);
        for (j, bin) in modes.iter_mut().enumerate() {
            *bin *= m(self.frequency(j));
        }
        self.to_nodes(&mut modes)
    }

    /// Fraction of spectral energy carried by modes with |k| > n/3.
    pub(crate) fn high_mode_energy_fraction(&self, values: &[f64]) -> f64 {
        let modes = self.to_modes(values);
        let cutoff = (self.n / 3) as i64;
        let mut high = 0.0;
        let mut total = 0.0;
        for (j, bin) in modes.iter().enumerate() {
            let e = bin.norm_sqr();
            total += e;
            if self.frequency(j).abs() > cutoff {
                high += e;
            }
        }
        if total > 0.0 {
            high / total
        } else {
            0.0
        }
    }
}

/// Spectral surface Laplacian: mode k ↦ −k².
pub fn laplace_beltrami(f: &SurfaceField) -> SurfaceField {
    let ops = f.grid().spectral();
    let out = ops.apply_multiplier(f.values(), |k| -((k * k) as f64));
    SurfaceField::new(f.grid().clone(), out).expect("spectral output is finite")
}

/// Exact heat propagator over time `t`: mode k ↦ exp(−k² t).
///
/// Unconditionally stable; preserves the mean (mode 0) exactly.
pub fn heat_propagate(f: &SurfaceField, t: f64) -> SurfaceField {
    let ops = f.grid().spectral();
    let out = ops.apply_multiplier(f.values(), |k| (-((k * k) as f64) * t).exp());
    SurfaceField::new(f.grid().clone(), out).expect("spectral output is finite")
}

/// Dirichlet-to-Neumann map of the unit disk: mode k ↦ |k|.
///
/// Symmetric and positive semidefinite with kernel exactly the constants.
pub fn dtn_apply(f: &SurfaceField) -> SurfaceField {
    let ops = f.grid().spectral();
    let out = ops.apply_multiplier(f.values(), |k| k.unsigned_abs() as f64);
    SurfaceField::new(f.grid().clone(), out).expect("spectral output is finite")
}

/// Harmonic extension of a boundary trace into the disk: mode k scales as
/// r^|k| on each radial ring. The outermost ring reproduces the input.
pub fn harmonic_extend(trace: &SurfaceField, bulk: &Arc<BulkGrid>) -> BulkField {
    assert_eq!(
        trace.len(),
        bulk.n_theta(),
        "trace and bulk grid must share the angular resolution"
    );
    let ops = trace.grid().spectral();
    let modes = ops.to_modes(trace.values());
    let n_theta = bulk.n_theta();
    let mut values = vec![0.0; bulk.n_r() * n_theta];
    for i in 0..bulk.n_r() {
        let r = bulk.radius(i);
        let mut ring_modes: Vec<Complex64> = modes
            .iter()
            .enumerate()
            .map(|(j, &c)| c * r.powi(ops.frequency(j).unsigned_abs() as i32))
            .collect();
        let ring = ops.to_nodes(&mut ring_modes);
        values[i * n_theta..(i + 1) * n_theta].copy_from_slice(&ring);
    }
    BulkField::new(bulk.clone(), values).expect("harmonic extension is finite")
}

/// Fraction of spectral energy in the top third of the spectrum.
///
/// A diagnostic, not a filter: fields whose top-third energy fraction
/// exceeds ~1e-6 are under-resolved and downstream spectral derivatives
/// should not be trusted to full accuracy.
pub fn high_mode_energy_fraction(f: &SurfaceField) -> f64 {
    f.grid().spectral().high_mode_energy_fraction(f.values())
}

/// Snaps the round-off-scale negative ripples a band-limited diffusion step
/// can leave on a nonnegative field back to zero.
///
/// The nodal heat kernel is positive up to the spectral truncation error,
/// which is below round-off for the resolutions and step sizes used here, so
/// a nonnegative input can only undershoot at noise level. Values in
/// (−tol, 0) with tol = 1e-11·max(1, ‖f‖∞) are set to zero; anything more
/// negative means the step itself went wrong and is reported instead of
/// silently repaired.
pub(crate) fn clamp_spectral_undershoot(values: &mut [f64], context: &str) -> crate::Result<()> {
    let scale = values.iter().fold(1.0_f64, |m, v| m.max(v.abs()));
    let tol = 1e-11 * scale;
    for v in values.iter_mut() {
        if *v < 0.0 {
            if *v < -tol {
                return Err(crate::CoreError::StepRejected {
                    reason: format!("{context} undershot to {v:.3e} (tolerance {tol:.3e})"),
                });
            }
            *v = 0.0;
        }
    }
    Ok(())
}
