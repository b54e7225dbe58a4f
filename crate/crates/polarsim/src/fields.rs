//! Initial conditions and the random field families used by the studies.
//!
//! Everything here produces surface fields carrying an exact prescribed
//! mass (up to round-off of one final rescaling), because the solvers treat
//! mass as an identity rather than a tolerance.

use std::fs;
use std::path::Path;
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use polar_core::grid::{integrate_surface, SurfaceField, SurfaceGrid};
use polar_core::signal::SignalSpec;
use rand::Rng;

use crate::config::InitialSpec;

/// Rescales a nonnegative, not identically zero field to integrate to m.
pub fn scale_to_mass(field: &SurfaceField, m: f64) -> Result<SurfaceField> {
    let total = integrate_surface(field);
    if !(total.is_finite() && total > 0.0) {
        bail!("field carries no mass to rescale (integral = {total})");
    }
    Ok(field.map(|v| v * (m / total)))
}

/// Builds the configured initial condition on the given grid.
pub fn initial_field(
    spec: &InitialSpec,
    grid: &Arc<SurfaceGrid>,
    m: f64,
) -> Result<SurfaceField> {
    match spec {
        InitialSpec::Uniform => Ok(SurfaceField::constant(
            grid.clone(),
            m / grid.circumference(),
        )),
        InitialSpec::Bump {
            center,
            width,
            floor,
        } => {
            // The signal module already owns the periodized Gaussian; reuse
            // it as a shape generator and normalize the mass afterwards.
            let profile = SignalSpec::Bump {
                floor: *floor,
                amplitude: 1.0,
                center: *center,
                width: *width,
            }
            .evaluate(grid, 0.0);
            scale_to_mass(&profile, m).context("initial.bump")
        }
        InitialSpec::File { path } => field_from_file(path, grid, m),
    }
}

/// Loads one value per line (blank lines and `#` comments skipped), checks
/// shape and sign, and rescales to mass m.
fn field_from_file(path: &Path, grid: &Arc<SurfaceGrid>, m: f64) -> Result<SurfaceField> {
    let text = fs::read_to_string(path)
        .with_context(|| format!("initial.file.path: cannot read {}", path.display()))?;
    let mut values = Vec::with_capacity(grid.n_theta());
    for (lineno, line) in text.lines().enumerate() {
        let body = line.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        let v: f64 = body.parse().with_context(|| {
            format!("initial.file: line {} is not a number: {body:?}", lineno + 1)
        })?;
        if !(v.is_finite() && v >= 0.0) {
            bail!(
                "initial.file: line {}: values must be finite and nonnegative, got {v}",
                lineno + 1
            );
        }
        values.push(v);
    }
    if values.len() != grid.n_theta() {
        bail!(
            "initial.file: expected {} values for the grid, found {}",
            grid.n_theta(),
            values.len()
        );
    }
    let field = SurfaceField::new(grid.clone(), values).map_err(anyhow::Error::from)?;
    scale_to_mass(&field, m).context("initial.file")
}

/// Random strictly positive field of mass m: a low-order trigonometric
/// perturbation of the uniform state, bounded away from zero so every draw
/// is admissible for all solvers.
pub fn random_mass_field(
    grid: &Arc<SurfaceGrid>,
    m: f64,
    rng: &mut impl Rng,
) -> SurfaceField {
    const MODES: usize = 6;
    let mut coeffs = Vec::with_capacity(MODES);
    for k in 1..=MODES {
        let damp = 1.0 / k as f64;
        coeffs.push((
            rng.gen_range(-1.0..1.0) * damp,
            rng.gen_range(-1.0..1.0) * damp,
        ));
    }
    let perturb = |theta: f64| -> f64 {
        coeffs
            .iter()
            .enumerate()
            .map(|(i, (a, b))| {
                let k = (i + 1) as f64;
                a * (k * theta).cos() + b * (k * theta).sin()
            })
            .sum()
    };
    let sup: f64 = coeffs.iter().map(|(a, b)| a.abs() + b.abs()).sum();
    let profile = SurfaceField::from_fn(grid.clone(), |theta| {
        if sup > 0.0 {
            1.0 + 0.9 * perturb(theta) / sup
        } else {
            1.0
        }
    });
    scale_to_mass(&profile, m).expect("profile is bounded in [0.1, 1.9]")
}

/// Random admissible Robin weight of the shape the solvers produce:
/// h = ℓ·g on an arc of the circle (or everywhere), zero elsewhere, with g
/// a signal fraction in (0, 1).
pub fn random_robin_weight(
    grid: &Arc<SurfaceGrid>,
    ell: f64,
    full_support: bool,
    rng: &mut impl Rng,
) -> SurfaceField {
    let tau = 2.0 * std::f64::consts::PI;
    let center = rng.gen_range(0.0..tau);
    let half_width = if full_support {
        std::f64::consts::PI
    } else {
        rng.gen_range(0.4..2.8)
    };
    let g_shift = rng.gen_range(0.25..0.6);
    let g_amp = rng.gen_range(0.05..0.2);
    SurfaceField::from_fn(grid.clone(), |t| {
        let mut d = (t - center).rem_euclid(tau);
        if d > std::f64::consts::PI {
            d -= tau;
        }
        if d.abs() <= half_width {
            ell * (g_shift + g_amp * (t * 2.0).cos())
        } else {
            0.0
        }
    })
}

/// Random nonnegative source with moderate roughness, for operator probes.
pub fn random_source(grid: &Arc<SurfaceGrid>, rng: &mut impl Rng) -> SurfaceField {
    const MODES: usize = 14;
    let mut coeffs = Vec::with_capacity(MODES);
    for _ in 1..=MODES {
        coeffs.push((rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
    }
    let sup: f64 = coeffs.iter().map(|(a, b)| a.abs() + b.abs()).sum();
    let lift = sup + rng.gen_range(0.01..0.5);
    SurfaceField::from_fn(grid.clone(), |theta| {
        let wave: f64 = coeffs
            .iter()
            .enumerate()
            .map(|(i, (a, b))| {
                let k = (i + 1) as f64;
                a * (k * theta).cos() + b * (k * theta).sin()
            })
            .sum();
        wave + lift
    })
}

/// Deterministic per-task seed derivation, stable across thread counts.
pub fn derive_seed(base: u64, index: u64) -> u64 {
    // SplitMix64 finalizer: decorrelates consecutive indices without any
    // cross-task state.
    let mut z = base ^ index.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
