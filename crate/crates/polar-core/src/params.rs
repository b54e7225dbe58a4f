//! Model parameters shared by every solver.

use crate::error::{CoreError, Result};

/// Cytosolic diffusion: a finite ratio D ≥ 1 or the infinite-diffusion
/// idealization in which the bulk concentration is spatially constant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Diffusion {
    Finite(f64),
    Infinite,
}

impl Diffusion {
    pub fn is_infinite(&self) -> bool {
        matches!(self, Diffusion::Infinite)
    }
}

/// Rate constants, diffusion ratio, total mass and the signal floor.
///
/// The admissibility assumptions are: a1, a2 ≥ 0; a3, a4, a5, a6 > 0;
/// D ≥ 1 or infinite; m > 0; c0 > 0. The fast-reaction scale ε > 0 is only
/// consulted by the ε-system steppers; the limit solvers ignore it.
#[derive(Debug, Clone, Copy)]
pub struct ModelParams {
    pub a1: f64,
    pub a2: f64,
    pub a3: f64,
    pub a4: f64,
    pub a5: f64,
    pub a6: f64,
    pub diffusion: Diffusion,
    /// Fast-reaction scale; must be positive when an ε-system stepper is built.
    pub eps: f64,
    /// Total conserved mass.
    pub m: f64,
    /// Lower bound the external signal must respect: c(x,t) ≥ c0 > 0.
    pub c0: f64,
}

impl ModelParams {
    /// Checks the admissibility assumptions (everything except ε).
    pub fn validate(&self) -> Result<()> {
        let finite = [
            ("a1", self.a1),
            ("a2", self.a2),
            ("a3", self.a3),
            ("a4", self.a4),
            ("a5", self.a5),
            ("a6", self.a6),
            ("m", self.m),
            ("c0", self.c0),
        ];
        for (name, v) in finite {
            if !v.is_finite() {
                return Err(CoreError::InvalidParams(format!("{name} must be finite")));
            }
        }
        if self.a1 < 0.0 || self.a2 < 0.0 {
            return Err(CoreError::InvalidParams(
                "a1 and a2 must be nonnegative".into(),
            ));
        }
        for (name, v) in [
            ("a3", self.a3),
            ("a4", self.a4),
            ("a5", self.a5),
            ("a6", self.a6),
        ] {
            if v <= 0.0 {
                return Err(CoreError::InvalidParams(format!(
                    "{name} must be strictly positive"
                )));
            }
        }
        if let Diffusion::Finite(d) = self.diffusion {
            if !(d.is_finite() && d >= 1.0) {
                return Err(CoreError::InvalidParams(format!(
                    "D must be ≥ 1 or infinite, got {d}"
                )));
            }
        }
        if self.m <= 0.0 {
            return Err(CoreError::InvalidParams("m must be positive".into()));
        }
        if self.c0 <= 0.0 {
            return Err(CoreError::InvalidParams("c0 must be positive".into()));
        }
        Ok(())
    }

    /// Additionally requires a positive fast-reaction scale ε.
    pub fn validate_eps(&self) -> Result<()> {
        self.validate()?;
        if !(self.eps.is_finite() && self.eps > 0.0) {
            return Err(CoreError::InvalidParams(format!(
                "eps must be strictly positive, got {}",
                self.eps
            )));
        }
        Ok(())
    }

    /// Boundary-exchange ratio ℓ = a6/D, with ℓ = 0 for infinite diffusion.
    pub fn ell(&self) -> f64 {
        match self.diffusion {
            Diffusion::Finite(d) => self.a6 / d,
            Diffusion::Infinite => 0.0,
        }
    }

    /// Default time step for the ε-system steppers: min(1e-2, ε/2).
    ///
    /// The ε/2 cap resolves the O(ε) initial relaxation layer; the stiff
    /// local reactions themselves are handled implicitly and impose no step
    /// restriction.
    pub fn default_eps_dt(&self) -> f64 {
        (0.01_f64).min(0.5 * self.eps)
    }
}
