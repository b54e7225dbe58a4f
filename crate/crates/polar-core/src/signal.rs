//! External signal c(x,t) and the derived activation fraction g.
//!
//! The signal models an extracellular cue. Everything downstream only
//! requires c ≥ c0 > 0, which keeps the activation fraction
//!
//! ```text
//! g = c / (c + a5)
//! ```
//!
//! strictly inside (0,1). Two canonical shapes cover the uniform and
//! polarized regimes: a constant signal and an angular Gaussian bump
//! (periodized over the circle). A time-modulated variant scales the bump
//! amplitude by 1 + β·sin(2πt/P) for slowly varying cues.

use std::sync::Arc;

use crate::error::{CoreError, Result};
use crate::grid::{SurfaceField, SurfaceGrid};

/// Shape of the external signal.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SignalSpec {
    /// c(x,t) ≡ level.
    Constant { level: f64 },
    /// c(θ) = floor + amplitude · Σ_k exp(−(θ − center + 2πk)²/width²),
    /// periodized with |k| ≤ 3 images.
    Bump {
        floor: f64,
        amplitude: f64,
        center: f64,
        width: f64,
    },
    /// Bump with amplitude scaled by (1 + depth·sin(2πt/period)).
    TimeModulatedBump {
        floor: f64,
        amplitude: f64,
        center: f64,
        width: f64,
        depth: f64,
        period: f64,
    },
}

impl SignalSpec {
    /// Structural validation against a required signal floor c0.
    ///
    /// Guarantees that [`SignalSpec::evaluate`] can never dip below c0 at any
    /// time, not just at the sampled instants.
    pub fn validate(&self, c0: f64) -> Result<()> {
        match *self {
            SignalSpec::Constant { level } => {
                if !(level.is_finite() && level >= c0) {
                    return Err(CoreError::InvalidParams(format!(
                        "constant signal level {level} is below the floor c0 = {c0}"
                    )));
                }
            }
            SignalSpec::Bump {
                floor,
                amplitude,
                width,
                ..
            } => {
                if !(floor.is_finite() && floor >= c0) {
                    return Err(CoreError::InvalidParams(format!(
                        "bump floor {floor} is below the signal floor c0 = {c0}"
                    )));
                }
                if !(amplitude.is_finite() && amplitude >= 0.0) {
                    return Err(CoreError::InvalidParams(
                        "bump amplitude must be nonnegative".into(),
                    ));
                }
                if !(width.is_finite() && width > 0.0) {
                    return Err(CoreError::InvalidParams(
                        "bump width must be positive".into(),
                    ));
                }
            }
            SignalSpec::TimeModulatedBump {
                floor,
                amplitude,
                width,
                depth,
                period,
                ..
            } => {
                if !(floor.is_finite() && floor >= c0) {
                    return Err(CoreError::InvalidParams(format!(
                        "bump floor {floor} is below the signal floor c0 = {c0}"
                    )));
                }
                if !(amplitude.is_finite() && amplitude >= 0.0) {
                    return Err(CoreError::InvalidParams(
                        "bump amplitude must be nonnegative".into(),
                    ));
                }
                if !(width.is_finite() && width > 0.0) {
                    return Err(CoreError::InvalidParams(
                        "bump width must be positive".into(),
                    ));
                }
                if !(depth.is_finite() && (0.0..=1.0).contains(&depth)) {
                    return Err(CoreError::InvalidParams(
                        "modulation depth must lie in [0, 1] so the amplitude stays nonnegative"
                            .into(),
                    ));
                }
                if !(period.is_finite() && period > 0.0) {
                    return Err(CoreError::InvalidParams(
                        "modulation period must be positive".into(),
                    ));
                }
            }
        }
        Ok(())
    }

    /// True when the evaluated signal is independent of t.
    pub fn is_static(&self) -> bool {
        !matches!(self, SignalSpec::TimeModulatedBump { .. })
    }

    /// Samples c(·,t) on the grid.
    pub fn evaluate(&self, grid: &Arc<SurfaceGrid>, t: f64) -> SurfaceField {
        match *self {
            SignalSpec::Constant { level } => SurfaceField::constant(grid.clone(), level),
            SignalSpec::Bump {
                floor,
                amplitude,
                center,
                width,
            } => SurfaceField::from_fn(grid.clone(), |theta| {
                floor + amplitude * periodized_gaussian(theta - center, width)
            }),
            SignalSpec::TimeModulatedBump {
                floor,
                amplitude,
                center,
                width,
                depth,
                period,
            } => {
                let a = amplitude * (1.0 + depth * (2.0 * std::f64::consts::PI * t / period).sin());
                SurfaceField::from_fn(grid.clone(), |theta| {
                    floor + a * periodized_gaussian(theta - center, width)
                })
            }
        }
    }
}

/// Σ_{|k| ≤ 3} exp(−(x + 2πk)²/σ²).
///
/// Three images suffice: for σ ≤ 2 the first omitted image contributes less
/// than exp(−(7π/2)²/4) ≈ 1e-13 relative to the peak.
fn periodized_gaussian(x: f64, sigma: f64) -> f64 {
    let tau = 2.0 * std::f64::consts::PI;
    (-3..=3)
        .map(|k| {
            let d = x + tau * k as f64;
            (-(d * d) / (sigma * sigma)).exp()
        })
        .sum()
}

/// Activation fraction g = c/(c + a5), computed pointwise.
///
/// Rejects any node where the signal is not strictly positive; with c ≥ c0
/// and a5 > 0 the output lies strictly inside (0,1).
pub fn eval_g(c: &SurfaceField, a5: f64) -> Result<SurfaceField> {
    if !(a5.is_finite() && a5 > 0.0) {
        return Err(CoreError::InvalidParams(format!(
            "a5 must be strictly positive, got {a5}"
        )));
    }
    for (node, &value) in c.values().iter().enumerate() {
        if value <= 0.0 {
            return Err(CoreError::SignalBelowFloor { node, value });
        }
    }
    Ok(c.map(|v| v / (v + a5)))
}
