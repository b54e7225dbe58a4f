//! Core solvers for a bulk–surface model of cell polarization.
//!
//! A circular cell membrane Γ (unit circle) exchanges a signaling protein
//! with the cytosol Ω (unit disk). The protein exists in three pools: active
//! on the membrane (u or U), inactive on the membrane (v), and cytosolic
//! (w). Activation is driven by an external signal through the fraction
//! g = c/(c + a5) ∈ (0,1); the total amount of protein m is conserved.
//!
//! Two families of problems are implemented, connected by the fast-reaction
//! scale ε:
//!
//! - **ε-systems** ([`eps_inf`], [`eps_fin`]): the full three-species
//!   reaction–diffusion dynamics at finite ε, with the cytosol either
//!   infinitely fast (w spatially constant) or diffusing at a finite ratio D
//!   (w a field on the disk with Robin exchange through the membrane).
//! - **Obstacle limits** ([`obstacle_inf`], [`obstacle_fin`]): the ε → 0
//!   limits, in which v and w become slaved to u and the dynamics collapses
//!   to a constrained parabolic equation for u ≥ 0 with a saturation field
//!   ξ ∈ [0,1] on the zero set — a parabolic obstacle-type problem. For
//!   finite D the coupling is the nonlocal harmonic Robin solve of
//!   [`robin`].
//!
//! Structural properties of the continuous problems — mass conservation,
//! order preservation, L¹ contraction of differences, convergence to unique
//! steady states — are preserved *exactly* by the discrete obstacle solvers
//! (M-matrix finite differences plus a projected-SOR complementarity solve),
//! not just up to truncation error. The companion binary crate drives
//! simulations and verification studies on top of this library.

pub mod error;
pub mod grid;
pub mod params;
pub mod signal;
pub mod spectral;
pub mod robin;
pub mod lcp;
pub mod roots;
mod reaction;
pub mod eps_inf;
pub mod eps_fin;
pub mod obstacle;
pub mod obstacle_inf;
pub mod obstacle_fin;
pub mod ode;

pub use error::{CoreError, Result};
