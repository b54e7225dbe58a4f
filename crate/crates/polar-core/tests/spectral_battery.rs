//! Spectral circle operators against independent oracles.
//!
//! - Laplacian: closed forms on single modes, then a fourth-order finite
//!   difference stencil on band-limited data with an explicit truncation
//!   bound.
//! - Heat propagator: exact mode decay, semigroup law, mean preservation.
//! - Dirichlet-to-Neumann map: dense analytic trigonometric-sum matrix,
//!   symmetry, positive semidefiniteness, and the sign pattern that makes
//!   the Robin systems M-matrices.
//! - Harmonic extension: exact polynomial modes, a dense collocation
//!   oracle solved by Gaussian elimination, and the maximum principle.

mod common;

use polar_core::grid::{build_grids, integrate_surface, SurfaceField, SurfaceGrid};
use polar_core::spectral::{
    dtn_apply, harmonic_extend, heat_propagate, high_mode_energy_fraction, laplace_beltrami,
};

use common::{dense_dtn_matrix, gauss_solve, mat_vec, seeded_rng, TrigPoly};

// =============================================================================
// Laplace–Beltrami
// =============================================================================

#[test]
fn laplacian_is_exact_on_single_modes() {
    let grid = SurfaceGrid::new(64).expect("grid");
    for k in [0usize, 1, 2, 5, 17, 31] {
        let kk = k as f64;
        let cos_mode = SurfaceField::from_fn(grid.clone(), |t| (kk * t).cos());
        let got = laplace_beltrami(&cos_mode);
        for j in 0..64 {
            let want = -kk * kk * (kk * grid.theta(j)).cos();
            assert!(
                (got.values()[j] - want).abs() < 1e-10 * (1.0 + kk * kk),
                "cos mode k = {k}, node {j}: {} vs {}",
                got.values()[j],
                want
            );
        }
        if k > 0 && k < 32 {
            let sin_mode = SurfaceField::from_fn(grid.clone(), |t| (kk * t).sin());
            let got = laplace_beltrami(&sin_mode);
            for j in 0..64 {
                let want = -kk * kk * (kk * grid.theta(j)).sin();
                assert!(
                    (got.values()[j] - want).abs() < 1e-10 * (1.0 + kk * kk),
                    "sin mode k = {k}, node {j}"
                );
            }
        }
    }
    // The top representable cosine mode n/2 is handled too.
    let grid8 = SurfaceGrid::new(8).expect("grid");
    let nyquist = SurfaceField::from_fn(grid8.clone(), |t| (4.0 * t).cos());
    let got = laplace_beltrami(&nyquist);
    for j in 0..8 {
        let want = -16.0 * (4.0 * grid8.theta(j)).cos();
        assert!((got.values()[j] - want).abs() < 1e-12);
    }
}

#[test]
fn laplacian_matches_fourth_order_stencil_on_bandlimited_data() {
    let n = 128;
    let grid = SurfaceGrid::new(n).expect("grid");
    let h = grid.dtheta();
    let mut rng = seeded_rng(1105);
    for trial in 0..10 {
        let poly = TrigPoly::random(&mut rng, 10, 1.5);
        let field = SurfaceField::from_fn(grid.clone(), |t| poly.eval(t));
        let spectral = laplace_beltrami(&field);
        let v = field.values();
        // Fourth-order periodic stencil with truncation h⁴ f⁽⁶⁾ / 90; bound
        // f⁽⁶⁾ by the coefficient sum weighted with k⁶.
        let mut sixth_bound = 0.0;
        for (k, (a, b)) in poly.a.iter().zip(&poly.b).enumerate() {
            let kk = (k + 1) as f64;
            sixth_bound += (a.abs() + b.abs()) * kk.powi(6);
        }
        let tol = h.powi(4) * sixth_bound / 90.0 + 1e-11;
        for j in 0..n {
            let stencil = (-v[(j + n - 2) % n] + 16.0 * v[(j + n - 1) % n] - 30.0 * v[j]
                + 16.0 * v[(j + 1) % n]
                - v[(j + 2) % n])
                / (12.0 * h * h);
            assert!(
                (spectral.values()[j] - stencil).abs() <= tol,
                "trial {trial}, node {j}: spectral {} vs stencil {} (tol {tol:.3e})",
                spectral.values()[j],
                stencil
            );
        }
    }
}

#[test]
fn laplacian_annihilates_constants_and_preserves_mean_zero() {
    let grid = SurfaceGrid::new(32).expect("grid");
    let constant = SurfaceField::constant(grid.clone(), 3.7);
    assert!(laplace_beltrami(&constant).norm_linf() < 1e-13);

    let mut rng = seeded_rng(42);
    let poly = TrigPoly::random(&mut rng, 8, 1.0);
    let field = SurfaceField::from_fn(grid, |t| poly.eval(t));
    let lap = laplace_beltrami(&field);
    assert!(integrate_surface(&lap).abs() < 1e-12);
}

// =============================================================================
// Heat propagator
// =============================================================================

#[test]
fn heat_decays_single_modes_exactly() {
    let grid = SurfaceGrid::new(64).expect("grid");
    let t = 0.13;
    for k in [1usize, 3, 9] {
        let kk = k as f64;
        let mode = SurfaceField::from_fn(grid.clone(), |x| (kk * x).cos());
        let evolved = heat_propagate(&mode, t);
        let factor = (-kk * kk * t).exp();
        for j in 0..64 {
            let want = factor * (kk * grid.theta(j)).cos();
            assert!(
                (evolved.values()[j] - want).abs() < 1e-13,
                "mode {k} node {j}"
            );
        }
    }
}

#[test]
fn heat_preserves_the_mean_and_obeys_the_semigroup_law() {
    let grid = SurfaceGrid::new(64).expect("grid");
    let mut rng = seeded_rng(7);
    let poly = TrigPoly::random(&mut rng, 15, 1.0);
    let field = SurfaceField::from_fn(grid, |t| poly.eval(t));

    let evolved = heat_propagate(&field, 0.37);
    assert!(
        (integrate_surface(&evolved) - integrate_surface(&field)).abs() < 1e-12,
        "heat flow must conserve the mean"
    );

    let two_step = heat_propagate(&heat_propagate(&field, 0.1), 0.27);
    let diff: f64 = two_step
        .values()
        .iter()
        .zip(evolved.values())
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    assert!(diff < 1e-13, "semigroup defect {diff:.3e}");
}

#[test]
fn heat_is_a_sup_norm_contraction_on_smooth_data() {
    let grid = SurfaceGrid::new(64).expect("grid");
    let mut rng = seeded_rng(8);
    for _ in 0..5 {
        let poly = TrigPoly::random(&mut rng, 12, 1.0);
        let field = SurfaceField::from_fn(grid.clone(), |t| poly.eval(t));
        let evolved = heat_propagate(&field, 0.05);
        assert!(evolved.norm_linf() <= field.norm_linf() * (1.0 + 1e-12));
    }
}

// =============================================================================
// Dirichlet-to-Neumann map
// =============================================================================

#[test]
fn dtn_multiplies_modes_by_their_frequency() {
    let grid = SurfaceGrid::new(64).expect("grid");
    for k in [0usize, 1, 4, 11, 30] {
        let kk = k as f64;
        let mode = SurfaceField::from_fn(grid.clone(), |t| (kk * t).cos());
        let mapped = dtn_apply(&mode);
        for j in 0..64 {
            let want = kk * (kk * grid.theta(j)).cos();
            assert!(
                (mapped.values()[j] - want).abs() < 1e-11 * (1.0 + kk),
                "mode {k} node {j}"
            );
        }
    }
}

#[test]
fn dtn_agrees_with_dense_trigonometric_sum_matrix() {
    let n = 128;
    let grid = SurfaceGrid::new(n).expect("grid");
    let dense = dense_dtn_matrix(n);
    let mut rng = seeded_rng(23);
    for _ in 0..10 {
        let poly = TrigPoly::random(&mut rng, 40, 1.0);
        let field = SurfaceField::from_fn(grid.clone(), |t| poly.eval(t));
        let fast = dtn_apply(&field);
        let slow = mat_vec(&dense, field.values());
        for (j, (f, s)) in fast.values().iter().zip(&slow).enumerate() {
            assert!((f - s).abs() < 1e-10, "node {j}: fft {f} vs dense {s}");
        }
    }
}

#[test]
fn dtn_is_symmetric_and_positive_semidefinite() {
    let grid = SurfaceGrid::new(64).expect("grid");
    let weight = grid.weight();
    let mut rng = seeded_rng(31);
    for _ in 0..10 {
        let pa = TrigPoly::random(&mut rng, 20, 1.0);
        let pb = TrigPoly::random(&mut rng, 20, 1.0);
        let a = SurfaceField::from_fn(grid.clone(), |t| pa.eval(t));
        let b = SurfaceField::from_fn(grid.clone(), |t| pb.eval(t));
        let la = dtn_apply(&a);
        let lb = dtn_apply(&b);
        let inner = |x: &SurfaceField, y: &SurfaceField| -> f64 {
            weight
                * x.values()
                    .iter()
                    .zip(y.values())
                    .map(|(p, q)| p * q)
                    .sum::<f64>()
        };
        assert!(
            (inner(&la, &b) - inner(&a, &lb)).abs() < 1e-10,
            "symmetry defect"
        );
        assert!(inner(&la, &a) > -1e-10, "quadratic form must be nonnegative");
    }
    // Constants span the kernel.
    let ones = SurfaceField::constant(grid, 1.0);
    assert!(dtn_apply(&ones).norm_linf() < 1e-13);
}

#[test]
fn dtn_offdiagonal_entries_are_nonpositive() {
    // The Robin solves rely on (Λ + diag h) being an M-matrix, which needs
    // Λ_{jd} ≤ 0 off the diagonal. Check the analytic dense matrix at the
    // grid sizes the solvers actually use.
    for n in [64usize, 96, 128] {
        let dense = dense_dtn_matrix(n);
        for (j, row) in dense.iter().enumerate() {
            for (d, &entry) in row.iter().enumerate() {
                if j != d {
                    assert!(
                        entry <= 1e-12,
                        "n = {n}: positive off-diagonal Λ[{j}][{d}] = {entry:.3e}"
                    );
                }
            }
        }
    }
}

// =============================================================================
// Harmonic extension
// =============================================================================

#[test]
fn harmonic_extension_reproduces_polynomial_modes() {
    let (surface, bulk) = build_grids(32, 16).expect("grids");
    for k in [0usize, 1, 3, 7] {
        let kk = k as f64;
        let trace = SurfaceField::from_fn(surface.clone(), |t| (kk * t).cos());
        let extended = harmonic_extend(&trace, &bulk);
        for i in 0..16 {
            let r = bulk.radius(i);
            for j in 0..32 {
                let want = r.powi(k as i32) * (kk * surface.theta(j)).cos();
                assert!(
                    (extended.at(i, j) - want).abs() < 1e-12,
                    "mode {k} at ring {i}, node {j}: {} vs {}",
                    extended.at(i, j),
                    want
                );
            }
        }
    }
}

#[test]
fn harmonic_extension_matches_dense_collocation_oracle() {
    // Independent construction: fit the trace by the nodal basis of harmonic
    // polynomials {1, r^k cos kθ, r^k sin kθ, r^{n/2} cos(nθ/2)} via a dense
    // collocation solve, then evaluate the series inside the disk.
    let n = 32;
    let (surface, bulk) = build_grids(n, 12).expect("grids");
    let mut rng = seeded_rng(555);
    let poly = TrigPoly::random(&mut rng, 16, 1.0);
    let trace = SurfaceField::from_fn(surface.clone(), |t| poly.eval(t));

    let basis: Vec<Box<dyn Fn(f64, f64) -> f64>> = {
        let mut fns: Vec<Box<dyn Fn(f64, f64) -> f64>> = vec![Box::new(|_r, _t| 1.0)];
        for k in 1..n / 2 {
            let kk = k as f64;
            fns.push(Box::new(move |r: f64, t: f64| r.powf(kk) * (kk * t).cos()));
            fns.push(Box::new(move |r: f64, t: f64| r.powf(kk) * (kk * t).sin()));
        }
        let half = (n / 2) as f64;
        fns.push(Box::new(move |r: f64, t: f64| {
            r.powf(half) * (half * t).cos()
        }));
        fns
    };
    assert_eq!(basis.len(), n);

    let matrix: Vec<Vec<f64>> = (0..n)
        .map(|j| {
            let t = surface.theta(j);
            basis.iter().map(|f| f(1.0, t)).collect()
        })
        .collect();
    let coefficients = gauss_solve(matrix, trace.values().to_vec());

    let extended = harmonic_extend(&trace, &bulk);
    for i in 0..12 {
        let r = bulk.radius(i);
        for j in 0..n {
            let t = surface.theta(j);
            let want: f64 = basis
                .iter()
                .zip(&coefficients)
                .map(|(f, c)| c * f(r, t))
                .sum();
            assert!(
                (extended.at(i, j) - want).abs() < 1e-10,
                "ring {i}, node {j}: {} vs dense {}",
                extended.at(i, j),
                want
            );
        }
    }
}

#[test]
fn harmonic_extension_obeys_the_maximum_principle() {
    let (surface, bulk) = build_grids(64, 24).expect("grids");
    let mut rng = seeded_rng(91);
    for _ in 0..5 {
        let poly = TrigPoly::random(&mut rng, 20, 1.0);
        let trace = SurfaceField::from_fn(surface.clone(), |t| poly.eval(t));
        let extended = harmonic_extend(&trace, &bulk);
        let lo = trace.min() - 1e-12;
        let hi = trace.max() + 1e-12;
        assert!(
            extended.min() >= lo && extended.max() <= hi,
            "interior range [{}, {}] escapes trace range [{lo}, {hi}]",
            extended.min(),
            extended.max()
        );
    }
}

// =============================================================================
// Mode-energy diagnostic
// =============================================================================

#[test]
fn high_mode_energy_fraction_separates_smooth_from_rough() {
    let grid = SurfaceGrid::new(64).expect("grid");
    let smooth = SurfaceField::from_fn(grid.clone(), |t| 1.0 + 0.5 * t.cos() + 0.2 * (3.0 * t).sin());
    assert!(high_mode_energy_fraction(&smooth) < 1e-6);

    let rough = SurfaceField::from_fn(grid, |t| (31.0 * t).cos());
    assert!(high_mode_energy_fraction(&rough) > 0.9);
}
