//! Error types shared by all solver modules.

use thiserror::Error;

/// Errors produced by grid construction, operator assembly and time-stepping.
#[derive(Debug, Error)]
pub enum CoreError {
    /// Grid sizes outside the supported range.
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    /// A field was built against the wrong grid or contains non-finite values.
    #[error("invalid field: {0}")]
    InvalidField(String),

    /// Model parameters violate the admissibility assumptions.
    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    /// The external signal dropped to or below zero somewhere.
    #[error("signal below positive floor at node {node}: c = {value}")]
    SignalBelowFloor { node: usize, value: f64 },

    /// Initial data does not carry the prescribed total mass.
    #[error("initial surface mass must equal m: got {got}, expected {expected}")]
    MassMismatch { got: f64, expected: f64 },

    /// Robin coefficient is identically zero (the operator needs |{h>0}| > 0).
    #[error("h vanishes identically")]
    HVanishes,

    /// Robin coefficient is negative somewhere.
    #[error("h negative at node {node}: {value}")]
    HNegative { node: usize, value: f64 },

    /// A dense boundary solve did not reach the requested residual.
    #[error("boundary system solve failed: {0}")]
    SingularSystem(String),

    /// The per-node implicit reaction solve did not converge.
    #[error(
        "reaction Newton did not converge at node {node} after {iters} iterations \
         (|G| = {residual:.3e}); retry with a smaller dt"
    )]
    NewtonNonconvergence {
        node: usize,
        iters: usize,
        residual: f64,
    },

    /// Projected SOR ran out of sweeps.
    #[error("projected SOR did not converge: residual {residual:.3e} after {sweeps} sweeps")]
    PsorNonconvergence { sweeps: usize, residual: f64 },

    /// The scalar mass multiplier could not be bracketed.
    #[error(
        "mass multiplier bracket failure: phi({lo}) = {phi_lo:.3e}, phi({hi}) = {phi_hi:.3e}"
    )]
    AlphaBracketFailure {
        lo: f64,
        hi: f64,
        phi_lo: f64,
        phi_hi: f64,
    },

    /// The active-set fixed point oscillated without settling.
    #[error(
        "active set cycling after {iters} iterations; last two supports had {size_a} and \
         {size_b} nodes"
    )]
    ActiveSetCycling {
        iters: usize,
        size_a: usize,
        size_b: usize,
    },

    /// Positivity set shrank to nothing (cannot happen for positive mass; guarded).
    #[error("degenerate positivity set")]
    DegenerateSupport,

    /// A step produced a state outside the admissible set and was rejected.
    #[error("step rejected: {reason}; retry with a smaller dt")]
    StepRejected { reason: String },

    /// A pseudo-time iteration toward a steady state ran out of iterations.
    #[error("steady-state iteration did not converge after {iters} steps (delta = {delta:.3e})")]
    SteadyNonconvergence { iters: usize, delta: f64 },

    /// The adaptive ODE integrator failed (step size underflow or iteration cap).
    #[error("ODE integration failed: {0}")]
    OdeFailure(String),
}

/// Convenience alias used throughout the crate.
pub type Result<T> = std::result::Result<T, CoreError>;
