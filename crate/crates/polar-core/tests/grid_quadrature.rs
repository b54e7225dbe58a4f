//! Grid construction, field plumbing, and quadrature accuracy.
//!
//! The surface quadrature is checked against an adaptive Simpson oracle on
//! closed-form integrands, and against the exactness property of the
//! periodic trapezoidal rule on band-limited data.

mod common;

use std::sync::Arc;

use polar_core::grid::{
    build_grids, integrate_bulk, integrate_positive_part, integrate_surface, BulkField, BulkGrid,
    SurfaceField, SurfaceGrid,
};
use polar_core::CoreError;
use proptest::prelude::*;

use common::{adaptive_simpson, seeded_rng, TrigPoly};

const TAU: f64 = 2.0 * std::f64::consts::PI;

// =============================================================================
// Surface grid and quadrature
// =============================================================================

#[test]
fn surface_grid_basic_geometry() {
    let grid = SurfaceGrid::new(16).expect("grid");
    assert_eq!(grid.n_theta(), 16);
    assert_eq!(grid.weight(), TAU / 16.0);
    assert_eq!(grid.dtheta(), grid.weight());
    assert_eq!(grid.circumference(), TAU);
    assert_eq!(grid.theta(0), 0.0);
    assert!((grid.theta(4) - TAU / 4.0).abs() < 1e-15);
    assert_eq!(grid.thetas().len(), 16);
}

#[test]
fn surface_grid_rejects_bad_sizes() {
    assert!(matches!(
        SurfaceGrid::new(15).unwrap_err(),
        CoreError::InvalidGrid(_)
    ));
    assert!(matches!(
        SurfaceGrid::new(4).unwrap_err(),
        CoreError::InvalidGrid(_)
    ));
}

#[test]
fn quadrature_matches_adaptive_simpson_on_smooth_integrands() {
    // Periodic analytic integrands: the trapezoidal rule converges
    // geometrically, so at n = 128 both evaluations agree to near round-off.
    type NamedIntegrand = (&'static str, Box<dyn Fn(f64) -> f64>);
    let grid = SurfaceGrid::new(128).expect("grid");
    let integrands: Vec<NamedIntegrand> = vec![
        ("exp(sin)", Box::new(|t: f64| t.sin().exp())),
        (
            "shifted cosine mix",
            Box::new(|t: f64| 1.3 + 0.4 * (3.0 * t - 0.7).cos() * (t.cos() + 1.5)),
        ),
        (
            "sharper bump",
            Box::new(|t: f64| (2.0 * (t - 1.0).cos()).exp()),
        ),
    ];
    for (name, f) in &integrands {
        let field = SurfaceField::from_fn(grid.clone(), f);
        let got = integrate_surface(&field);
        let want = adaptive_simpson(f, 0.0, TAU, 1e-13);
        assert!(
            (got - want).abs() < 1e-10,
            "{name}: quadrature {got:.15e} vs oracle {want:.15e}"
        );
    }
}

#[test]
fn quadrature_matches_oracle_on_random_trig_polynomials() {
    let grid = SurfaceGrid::new(64).expect("grid");
    let mut rng = seeded_rng(701);
    for _ in 0..20 {
        let poly = TrigPoly::random(&mut rng, 12, 2.0);
        let field = SurfaceField::from_fn(grid.clone(), |t| poly.eval(t));
        let got = integrate_surface(&field);
        // Exact: every nonconstant mode integrates to zero over the circle.
        let want = TAU * poly.a0;
        assert!(
            (got - want).abs() < 1e-11 * (1.0 + want.abs()),
            "trig polynomial integral {got:.15e} vs exact {want:.15e}"
        );
    }
}

#[test]
fn positive_part_integral_splits_signs() {
    let grid = SurfaceGrid::new(8).expect("grid");
    let values = vec![1.0, -2.0, 0.5, 0.0, -0.25, 3.0, -1.0, 0.75];
    let field = SurfaceField::new(grid.clone(), values.clone()).expect("field");
    let want: f64 = values.iter().filter(|v| **v > 0.0).sum::<f64>() * grid.weight();
    assert!((integrate_positive_part(&field) - want).abs() < 1e-14);
}

// =============================================================================
// Surface fields
// =============================================================================

#[test]
fn field_norms_on_constants() {
    let grid = SurfaceGrid::new(32).expect("grid");
    let field = SurfaceField::constant(grid, -0.5);
    assert!((field.norm_l1() - 0.5 * TAU).abs() < 1e-14);
    assert!((field.norm_l2() - 0.5 * TAU.sqrt()).abs() < 1e-14);
    assert_eq!(field.norm_linf(), 0.5);
    assert_eq!(field.min(), -0.5);
    assert_eq!(field.max(), -0.5);
    assert_eq!(field.len(), 32);
    assert!(!field.is_empty());
}

#[test]
fn field_map_and_zip() {
    let grid = SurfaceGrid::new(8).expect("grid");
    let a = SurfaceField::from_fn(grid.clone(), |t| t.cos());
    let b = SurfaceField::from_fn(grid.clone(), |t| t.sin());
    let sum = a.zip_with(&b, |x, y| x + y);
    let doubled = a.map(|x| 2.0 * x);
    for j in 0..8 {
        let t = grid.theta(j);
        assert!((sum.values()[j] - (t.cos() + t.sin())).abs() < 1e-15);
        assert!((doubled.values()[j] - 2.0 * t.cos()).abs() < 1e-15);
    }
}

#[test]
fn field_construction_rejects_bad_data() {
    let grid = SurfaceGrid::new(8).expect("grid");
    assert!(matches!(
        SurfaceField::new(grid.clone(), vec![0.0; 7]).unwrap_err(),
        CoreError::InvalidField(_)
    ));
    let mut values = vec![0.0; 8];
    values[3] = f64::NAN;
    assert!(matches!(
        SurfaceField::new(grid, values).unwrap_err(),
        CoreError::InvalidField(_)
    ));
}

// =============================================================================
// Bulk grid and fields
// =============================================================================

#[test]
fn bulk_grid_geometry_is_consistent() {
    let (surface, bulk) = build_grids(16, 8).expect("grids");
    assert_eq!(bulk.n_theta(), 16);
    assert_eq!(bulk.n_r(), 8);
    assert!(Arc::ptr_eq(bulk.surface(), &surface));
    assert!((bulk.area() - std::f64::consts::PI).abs() < 1e-14);

    // Faces partition [0, 1]; volumes are annulus areas per unit angle and
    // telescope to the half disk area 1/2.
    let faces = bulk.faces();
    assert_eq!(faces.len(), 9);
    assert_eq!(faces[0], 0.0);
    assert_eq!(faces[8], 1.0);
    let vol_sum: f64 = (0..8).map(|i| bulk.cell_volume(i)).sum();
    assert!((vol_sum - 0.5).abs() < 1e-15);
    // Node radii increase and the outermost node sits on the boundary.
    for i in 0..7 {
        assert!(bulk.radius(i) < bulk.radius(i + 1));
        assert!(faces[i + 1] > bulk.radius(i) - 1e-15);
    }
    assert_eq!(bulk.radius(7), 1.0);
}

#[test]
fn bulk_grid_rejects_bad_sizes() {
    let surface = SurfaceGrid::new(16).expect("grid");
    assert!(matches!(
        BulkGrid::new(surface, 3).unwrap_err(),
        CoreError::InvalidGrid(_)
    ));
}

#[test]
fn bulk_integral_of_constants_is_exact() {
    let (_, bulk) = build_grids(16, 32).expect("grids");
    let field = BulkField::constant(bulk, 0.75);
    assert!((integrate_bulk(&field) - 0.75 * std::f64::consts::PI).abs() < 1e-13);
}

#[test]
fn bulk_integral_of_radial_profile_converges() {
    // ∫_disk r² dx = π/2; the nodal quadrature is second order in Δr.
    let mut previous_error = f64::INFINITY;
    for n_r in [16usize, 32, 64] {
        let (_, bulk) = build_grids(8, n_r).expect("grids");
        let mut values = vec![0.0; 8 * n_r];
        for i in 0..n_r {
            let r = bulk.radius(i);
            for j in 0..8 {
                values[i * 8 + j] = r * r;
            }
        }
        let field = BulkField::new(bulk, values).expect("field");
        let error = (integrate_bulk(&field) - std::f64::consts::PI / 2.0).abs();
        assert!(
            error < 0.6 * previous_error,
            "no refinement gain at n_r = {n_r}: {error:.3e} after {previous_error:.3e}"
        );
        previous_error = error;
    }
    assert!(previous_error < 1e-3);
}

#[test]
fn bulk_indexing_and_trace() {
    let (_, bulk) = build_grids(8, 4).expect("grids");
    let values: Vec<f64> = (0..32).map(|k| k as f64).collect();
    let field = BulkField::new(bulk, values).expect("field");
    assert_eq!(field.at(0, 0), 0.0);
    assert_eq!(field.at(2, 3), 19.0);
    assert_eq!(field.ring(1), &[8.0, 9.0, 10.0, 11.0, 12.0, 13.0, 14.0, 15.0]);
    let trace = field.trace();
    assert_eq!(trace.values(), &[24.0, 25.0, 26.0, 27.0, 28.0, 29.0, 30.0, 31.0]);
    assert_eq!(field.min(), 0.0);
    assert_eq!(field.max(), 31.0);
}

#[test]
fn bulk_field_rejects_bad_data() {
    let (_, bulk) = build_grids(8, 4).expect("grids");
    assert!(matches!(
        BulkField::new(bulk.clone(), vec![0.0; 31]).unwrap_err(),
        CoreError::InvalidField(_)
    ));
    let mut values = vec![0.0; 32];
    values[10] = f64::INFINITY;
    assert!(matches!(
        BulkField::new(bulk, values).unwrap_err(),
        CoreError::InvalidField(_)
    ));
}

// =============================================================================
// Properties
// =============================================================================

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    /// The periodic trapezoidal rule integrates any representable trig
    /// polynomial exactly (up to round-off): only the mean survives.
    #[test]
    fn prop_quadrature_kills_nonconstant_modes(
        seed in 0u64..1_000_000,
        k_max in 1usize..20,
        mean in -5.0f64..5.0,
    ) {
        let grid = SurfaceGrid::new(64).expect("grid");
        let mut rng = seeded_rng(seed);
        let mut poly = TrigPoly::random(&mut rng, k_max, 3.0);
        poly.a0 = mean;
        let field = SurfaceField::from_fn(grid, |t| poly.eval(t));
        let got = integrate_surface(&field);
        prop_assert!(
            (got - TAU * mean).abs() < 1e-10 * (1.0 + mean.abs()),
            "integral {} vs {}", got, TAU * mean
        );
    }

    /// Quadrature is monotone: f ≤ g pointwise implies ∫f ≤ ∫g.
    #[test]
    fn prop_quadrature_is_monotone(
        seed in 0u64..1_000_000,
        lift in 0.0f64..3.0,
    ) {
        let grid = SurfaceGrid::new(32).expect("grid");
        let mut rng = seeded_rng(seed);
        let poly = TrigPoly::random(&mut rng, 6, 1.0);
        let f = SurfaceField::from_fn(grid.clone(), |t| poly.eval(t));
        let g = f.map(|v| v + lift);
        prop_assert!(integrate_surface(&f) <= integrate_surface(&g) + 1e-12);
    }
}
