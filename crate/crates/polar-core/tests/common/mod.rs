//! Shared helpers for the integration-test suites.
//!
//! Everything here is deliberately independent of the library internals:
//! the dense Dirichlet-to-Neumann matrix is assembled from the analytic
//! trigonometric sum, linear systems are solved by a hand-rolled Gaussian
//! elimination, and quadrature oracles use adaptive Simpson refinement.
//! Agreement between these and the production code is therefore evidence,
//! not circularity.
#![allow(dead_code)]

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Deterministic RNG for reproducible test data.
pub fn seeded_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

// =============================================================================
// Random smooth data
// =============================================================================

/// Coefficients of a real trigonometric polynomial
/// f(θ) = a₀ + Σ_{k=1}^{K} (a_k cos kθ + b_k sin kθ).
#[derive(Debug, Clone)]
pub struct TrigPoly {
    pub a0: f64,
    pub a: Vec<f64>,
    pub b: Vec<f64>,
}

impl TrigPoly {
    /// Random polynomial of degree `k_max` with coefficients in [-amp, amp],
    /// decaying like 1/(1+k) so the sample is smooth.
    pub fn random(rng: &mut impl Rng, k_max: usize, amp: f64) -> Self {
        let a0 = rng.gen_range(-amp..amp);
        let mut a = Vec::with_capacity(k_max);
        let mut b = Vec::with_capacity(k_max);
        for k in 1..=k_max {
            let decay = 1.0 / (1.0 + k as f64);
            a.push(rng.gen_range(-amp..amp) * decay);
            b.push(rng.gen_range(-amp..amp) * decay);
        }
        Self { a0, a, b }
    }

    /// Point evaluation.
    pub fn eval(&self, theta: f64) -> f64 {
        let mut s = self.a0;
        for (k, (&ak, &bk)) in self.a.iter().zip(&self.b).enumerate() {
            let kk = (k + 1) as f64;
            s += ak * (kk * theta).cos() + bk * (kk * theta).sin();
        }
        s
    }

    /// Largest possible magnitude (coefficient sum; crude but safe bound).
    pub fn sup_bound(&self) -> f64 {
        self.a0.abs()
            + self
                .a
                .iter()
                .zip(&self.b)
                .map(|(a, b)| a.abs() + b.abs())
                .sum::<f64>()
    }
}

// =============================================================================
// Dense linear algebra (hand-rolled, no external solver)
// =============================================================================

/// Solves A x = b by Gaussian elimination with partial pivoting.
///
/// `a` is row-major and consumed; panics on sizes that do not match and on
/// a pivot below 1e-300 (the test matrices are all comfortably regular).
pub fn gauss_solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
    let n = b.len();
    assert_eq!(a.len(), n, "matrix/vector size mismatch");
    for row in &a {
        assert_eq!(row.len(), n, "matrix must be square");
    }
    for col in 0..n {
        let pivot_row = (col..n)
            .max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))
            .unwrap();
        a.swap(col, pivot_row);
        b.swap(col, pivot_row);
        let pivot = a[col][col];
        assert!(pivot.abs() > 1e-300, "oracle matrix is singular");
        let (pivot_part, rest) = a.split_at_mut(col + 1);
        let pivot_values = &pivot_part[col];
        for (offset, target) in rest.iter_mut().enumerate() {
            let factor = target[col] / pivot;
            if factor == 0.0 {
                continue;
            }
            for (t, pv) in target[col..].iter_mut().zip(&pivot_values[col..]) {
                *t -= factor * pv;
            }
            b[col + 1 + offset] -= factor * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let mut s = b[row];
        for col in row + 1..n {
            s -= a[row][col] * x[col];
        }
        x[row] = s / a[row][row];
    }
    x
}

/// Dense nodal Dirichlet-to-Neumann matrix on the n-point periodic grid,
/// assembled from the analytic eigendecomposition: the map acts as
/// multiplication by |k| on the Fourier mode of frequency k, so the nodal
/// entries are
///
///   Λ_{jd} = (1/n) [ Σ_{k=1}^{n/2-1} 2k cos(k·2π(j-d)/n) + (n/2)(-1)^{j-d} ].
///
/// No FFT is involved; this is the independent oracle for the spectral map.
pub fn dense_dtn_matrix(n: usize) -> Vec<Vec<f64>> {
    assert!(n >= 4 && n.is_multiple_of(2), "need an even grid");
    let half = n / 2;
    // The entry depends only on the index offset d = j - d mod n.
    let mut kernel = vec![0.0; n];
    for (d, entry) in kernel.iter_mut().enumerate() {
        let angle = 2.0 * std::f64::consts::PI * d as f64 / n as f64;
        let mut s = 0.0;
        for k in 1..half {
            s += 2.0 * k as f64 * (k as f64 * angle).cos();
        }
        s += half as f64 * if d % 2 == 0 { 1.0 } else { -1.0 };
        *entry = s / n as f64;
    }
    let mut matrix = vec![vec![0.0; n]; n];
    for j in 0..n {
        for d in 0..n {
            matrix[j][d] = kernel[(n + j - d) % n];
        }
    }
    matrix
}

/// Dense matrix-vector product for row-major matrices.
pub fn mat_vec(a: &[Vec<f64>], x: &[f64]) -> Vec<f64> {
    a.iter()
        .map(|row| row.iter().zip(x).map(|(r, v)| r * v).sum())
        .collect()
}

// =============================================================================
// Quadrature oracle
// =============================================================================

/// Adaptive Simpson quadrature of `f` over [a, b] to absolute tolerance `tol`.
pub fn adaptive_simpson(f: &impl Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    fn simpson(a: f64, fa: f64, b: f64, fb: f64, fm: f64) -> f64 {
        (b - a) / 6.0 * (fa + 4.0 * fm + fb)
    }
    #[allow(clippy::too_many_arguments)]
    fn recurse(
        f: &impl Fn(f64) -> f64,
        a: f64,
        fa: f64,
        b: f64,
        fb: f64,
        fm: f64,
        whole: f64,
        tol: f64,
        depth: usize,
    ) -> f64 {
        let m = 0.5 * (a + b);
        let lm = 0.5 * (a + m);
        let rm = 0.5 * (m + b);
        let flm = f(lm);
        let frm = f(rm);
        let left = simpson(a, fa, m, fm, flm);
        let right = simpson(m, fm, b, fb, frm);
        let err = left + right - whole;
        if depth == 0 || err.abs() <= 15.0 * tol {
            return left + right + err / 15.0;
        }
        recurse(f, a, fa, m, fm, flm, left, 0.5 * tol, depth - 1)
            + recurse(f, m, fm, b, fb, frm, right, 0.5 * tol, depth - 1)
    }
    let fa = f(a);
    let fb = f(b);
    let fm = f(0.5 * (a + b));
    let whole = simpson(a, fa, b, fb, fm);
    recurse(&f, a, fa, b, fb, fm, whole, tol, 40)
}

// =============================================================================
// Kinetics oracle
// =============================================================================

/// Activation rate K(U) = ε·a1 + ε·a2·U/(ε·a3 + U) + c of the ε-scaled
/// kinetics, restated here independently of the library internals.
pub fn rate_k(u: f64, c: f64, p: &polar_core::params::ModelParams) -> f64 {
    p.eps * p.a1 + p.eps * p.a2 * u / (p.eps * p.a3 + u) + c
}

/// Deactivation rate F(U) = a4·U/(ε + U).
pub fn rate_f(u: f64, p: &polar_core::params::ModelParams) -> f64 {
    p.a4 * u / (p.eps + u)
}

/// Spatially uniform equilibrium (U, v, w) of the ε-scaled exchange model
/// under a constant signal c: reaction balance K(U)·v = F(U), exchange
/// balance a5·v = a6·w, and the total-mass identity
///
///   2π·U + ε·(2π + π·a5/a6)·F(U)/K(U) = m,
///
/// solved by bisection. The left side vanishes at U = 0 and exceeds m at
/// U = m/(2π), so a root always exists.
pub fn uniform_eps_fixed_point(p: &polar_core::params::ModelParams, c: f64) -> (f64, f64, f64) {
    let tau = 2.0 * std::f64::consts::PI;
    let mass_of = |u: f64| {
        let ratio = rate_f(u, p) / rate_k(u, c, p);
        tau * u + p.eps * (tau + 0.5 * tau * p.a5 / p.a6) * ratio - p.m
    };
    let mut lo = 0.0;
    let mut hi = p.m / tau;
    assert!(mass_of(lo) < 0.0 && mass_of(hi) > 0.0, "fixed point not bracketed");
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mass_of(mid) > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let u = 0.5 * (lo + hi);
    let v = rate_f(u, p) / rate_k(u, c, p);
    let w = p.a5 * v / p.a6;
    (u, v, w)
}

/// Compensated (Kahan) sum, used where the oracle must out-resolve naive
/// floating-point accumulation.
pub fn kahan_sum(values: impl Iterator<Item = f64>) -> f64 {
    let mut sum = 0.0;
    let mut carry = 0.0;
    for v in values {
        let y = v - carry;
        let t = sum + y;
        carry = (t - sum) - y;
        sum = t;
    }
    sum
}
