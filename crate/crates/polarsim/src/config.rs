//! JSON run configuration: schema, loading, and validation.
//!
//! The schema is strict — unknown keys are rejected so a typo cannot
//! silently fall back to a default — and every validation failure names the
//! offending field by its path in the document (`solver.dt`, `model.c0`, …).
//! A parsed-and-validated [`RunConfig`] is the only entry point the runners
//! and studies accept.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use polar_core::params::{Diffusion, ModelParams};
use polar_core::signal::SignalSpec;
use serde::{Deserialize, Serialize};

/// Top-level configuration document.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub geometry: Geometry,
    pub model: ModelBlock,
    pub signal: SignalBlock,
    pub initial: InitialSpec,
    pub solver: SolverBlock,
    #[serde(default)]
    pub study: StudyBlock,
    /// Default output directory; the CLI `--out` flag overrides it.
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
}

/// Grid resolutions: angular nodes on the membrane, radial rings in the
/// cytosol (only consulted by the finite-diffusion ε-system and for bulk
/// snapshots).
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Geometry {
    pub n_theta: usize,
    #[serde(default = "default_n_r")]
    pub n_r: usize,
}

fn default_n_r() -> usize {
    64
}

/// Cytosolic diffusion: `"infinite"` or `{"finite": D}` with D ≥ 1.
#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
#[serde(rename_all = "snake_case")]
pub enum DiffusionSpec {
    Infinite,
    Finite(f64),
}

/// Rate constants, diffusion, fast-reaction scale, mass and signal floor.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelBlock {
    pub a1: f64,
    pub a2: f64,
    pub a3: f64,
    pub a4: f64,
    pub a5: f64,
    pub a6: f64,
    pub diffusion: DiffusionSpec,
    /// Fast-reaction scale; consulted only by the ε-system solvers.
    #[serde(default = "default_eps")]
    pub eps: f64,
    /// Total conserved mass.
    pub mass: f64,
    /// Signal floor: every configured signal must satisfy c ≥ c0 > 0.
    pub c0: f64,
}

fn default_eps() -> f64 {
    0.05
}

/// External signal shape; mirrors the solver library's signal family.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SignalBlock {
    Constant {
        level: f64,
    },
    Bump {
        floor: f64,
        amplitude: f64,
        center: f64,
        width: f64,
    },
    TimeModulatedBump {
        floor: f64,
        amplitude: f64,
        center: f64,
        width: f64,
        depth: f64,
        period: f64,
    },
}

impl SignalBlock {
    /// Converts to the solver library's signal type.
    pub fn to_spec(self) -> SignalSpec {
        match self {
            SignalBlock::Constant { level } => SignalSpec::Constant { level },
            SignalBlock::Bump {
                floor,
                amplitude,
                center,
                width,
            } => SignalSpec::Bump {
                floor,
                amplitude,
                center,
                width,
            },
            SignalBlock::TimeModulatedBump {
                floor,
                amplitude,
                center,
                width,
                depth,
                period,
            } => SignalSpec::TimeModulatedBump {
                floor,
                amplitude,
                center,
                width,
                depth,
                period,
            },
        }
    }
}

/// Initial surface concentration; always rescaled to carry the configured
/// mass exactly.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitialSpec {
    /// u₀ ≡ m / (2π).
    Uniform,
    /// Periodized angular Gaussian profile, normalized to mass m. `floor`
    /// is the relative baseline under the bump (0 gives a near-compact
    /// profile, larger values flatten it).
    Bump {
        center: f64,
        width: f64,
        #[serde(default)]
        floor: f64,
    },
    /// One value per line (comments with `#`), length n_theta, rescaled to
    /// mass m. Relative paths resolve against the config file's directory.
    File { path: PathBuf },
}

/// Which solver a plain `run` executes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolverKind {
    EpsInf,
    EpsFin,
    ObstacleDinf,
    ObstacleDfin,
}

impl SolverKind {
    pub fn is_eps(self) -> bool {
        matches!(self, SolverKind::EpsInf | SolverKind::EpsFin)
    }

    pub fn is_obstacle(self) -> bool {
        !self.is_eps()
    }

    pub fn needs_finite_diffusion(self) -> bool {
        matches!(self, SolverKind::EpsFin | SolverKind::ObstacleDfin)
    }

    pub fn label(self) -> &'static str {
        match self {
            SolverKind::EpsInf => "eps-inf",
            SolverKind::EpsFin => "eps-fin",
            SolverKind::ObstacleDinf => "obstacle-dinf",
            SolverKind::ObstacleDfin => "obstacle-dfin",
        }
    }
}

/// Time stepping and solver tolerances.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverBlock {
    pub kind: SolverKind,
    pub dt: f64,
    pub t_end: f64,
    /// Times at which full field snapshots are written.
    #[serde(default)]
    pub snapshot_times: Vec<f64>,
    /// Record a series row every this many steps (default: chosen so the
    /// series holds at most ~1000 rows; the first and last step always
    /// record).
    #[serde(default)]
    pub record_every: Option<usize>,
    /// Projected-SOR relaxation factor, in (0, 2).
    #[serde(default = "default_psor_omega")]
    pub psor_omega: f64,
    /// Complementarity residual target, relative.
    #[serde(default = "default_psor_rtol")]
    pub psor_rtol: f64,
    /// Mass root-find residual target, relative.
    #[serde(default = "default_mass_rtol")]
    pub mass_rtol: f64,
    /// Positivity threshold for the discrete support, relative to max u.
    #[serde(default = "default_theta_pos")]
    pub theta_pos_rel: f64,
    /// Stagnation target of the steady-state drivers, relative L¹ per step.
    #[serde(default = "default_steady_rtol")]
    pub steady_l1_rtol: f64,
}

fn default_psor_omega() -> f64 {
    1.5
}
fn default_psor_rtol() -> f64 {
    1e-13
}
fn default_mass_rtol() -> f64 {
    1e-12
}
fn default_theta_pos() -> f64 {
    1e-12
}
fn default_steady_rtol() -> f64 {
    1e-11
}

/// Sweep lists and sample counts for the studies; every field has a default
/// so a plain run config works for any study.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StudyBlock {
    /// Fast-reaction scales for the convergence study (≥ 3, descending).
    pub eps_sweep: Option<Vec<f64>>,
    /// Exchange ratios ℓ for the vanishing-exchange consistency check.
    pub ell_sweep: Option<Vec<f64>>,
    /// Mass multipliers (relative to `model.mass`) for the steady ladder.
    pub mass_ladder: Option<Vec<f64>>,
    /// Random equal-mass pairs in the contraction study.
    pub pairs: Option<usize>,
    /// Random initial conditions in the stability study.
    pub initials: Option<usize>,
    /// Interior time cut δ: convergence errors integrate over (δ, t_end).
    pub delta: Option<f64>,
    /// Random (weight, source) samples in the operator battery.
    pub operator_samples: Option<usize>,
}

impl RunConfig {
    /// Solver-library parameter struct for this configuration.
    pub fn params(&self) -> ModelParams {
        let m = &self.model;
        ModelParams {
            a1: m.a1,
            a2: m.a2,
            a3: m.a3,
            a4: m.a4,
            a5: m.a5,
            a6: m.a6,
            diffusion: match m.diffusion {
                DiffusionSpec::Infinite => Diffusion::Infinite,
                DiffusionSpec::Finite(d) => Diffusion::Finite(d),
            },
            eps: m.eps,
            m: m.mass,
            c0: m.c0,
        }
    }

    /// Obstacle-solver knobs assembled from the solver block.
    pub fn obstacle_config(&self) -> polar_core::obstacle::ObstacleConfig {
        polar_core::obstacle::ObstacleConfig {
            psor_omega: self.solver.psor_omega,
            psor_rtol: self.solver.psor_rtol,
            mass_rtol: self.solver.mass_rtol,
            theta_pos_rel: self.solver.theta_pos_rel,
            steady_l1_rtol: self.solver.steady_l1_rtol,
            ..Default::default()
        }
    }

    /// Structural validation; errors name fields by document path.
    pub fn validate(&self) -> Result<()> {
        // Geometry: delegate the precise rules to the grid constructors but
        // keep the field path in the message.
        if let Err(e) = polar_core::grid::SurfaceGrid::new(self.geometry.n_theta) {
            bail!("geometry.n_theta: {e}");
        }
        if self.geometry.n_r < 2 {
            bail!(
                "geometry.n_r: need at least 2 radial rings, got {}",
                self.geometry.n_r
            );
        }

        let params = self.params();
        if let Err(e) = params.validate() {
            bail!("model: {e}");
        }
        if self.solver.kind.is_eps() {
            if let Err(e) = params.validate_eps() {
                bail!("model.eps: {e}");
            }
        }
        match (self.solver.kind.needs_finite_diffusion(), self.model.diffusion) {
            (true, DiffusionSpec::Infinite) => bail!(
                "solver.kind: {} requires model.diffusion = {{\"finite\": D}}",
                self.solver.kind.label()
            ),
            (false, DiffusionSpec::Finite(_)) => bail!(
                "solver.kind: {} requires model.diffusion = \"infinite\"",
                self.solver.kind.label()
            ),
            _ => {}
        }

        if let Err(e) = self.signal.to_spec().validate(self.model.c0) {
            bail!("signal: {e}");
        }

        match &self.initial {
            InitialSpec::Uniform => {}
            InitialSpec::Bump { width, floor, .. } => {
                if !(width.is_finite() && *width > 0.0) {
                    bail!("initial.bump.width: must be positive, got {width}");
                }
                if !(floor.is_finite() && *floor >= 0.0) {
                    bail!("initial.bump.floor: must be nonnegative, got {floor}");
                }
            }
            InitialSpec::File { path } => {
                if path.as_os_str().is_empty() {
                    bail!("initial.file.path: must not be empty");
                }
            }
        }

        let s = &self.solver;
        if !(s.dt.is_finite() && s.dt > 0.0) {
            bail!("solver.dt: must be positive and finite, got {}", s.dt);
        }
        if !(s.t_end.is_finite() && s.t_end > 0.0) {
            bail!("solver.t_end: must be positive and finite, got {}", s.t_end);
        }
        for (i, &t) in s.snapshot_times.iter().enumerate() {
            if !(t.is_finite() && (0.0..=s.t_end).contains(&t)) {
                bail!(
                    "solver.snapshot_times[{i}]: must lie in [0, t_end = {}], got {t}",
                    s.t_end
                );
            }
        }
        if let Some(every) = s.record_every {
            if every == 0 {
                bail!("solver.record_every: must be at least 1");
            }
        }
        if !(s.psor_omega.is_finite() && 0.0 < s.psor_omega && s.psor_omega < 2.0) {
            bail!("solver.psor_omega: must lie in (0, 2), got {}", s.psor_omega);
        }
        for (name, v) in [
            ("solver.psor_rtol", s.psor_rtol),
            ("solver.mass_rtol", s.mass_rtol),
            ("solver.theta_pos_rel", s.theta_pos_rel),
            ("solver.steady_l1_rtol", s.steady_l1_rtol),
        ] {
            if !(v.is_finite() && v > 0.0) {
                bail!("{name}: must be positive, got {v}");
            }
        }

        let st = &self.study;
        for (name, sweep) in [
            ("study.eps_sweep", &st.eps_sweep),
            ("study.ell_sweep", &st.ell_sweep),
            ("study.mass_ladder", &st.mass_ladder),
        ] {
            if let Some(values) = sweep {
                if values.is_empty() {
                    bail!("{name}: must not be empty");
                }
                for (i, &v) in values.iter().enumerate() {
                    if !(v.is_finite() && v > 0.0) {
                        bail!("{name}[{i}]: must be positive, got {v}");
                    }
                }
            }
        }
        for (name, count) in [("study.pairs", st.pairs), ("study.initials", st.initials)] {
            if count == Some(0) {
                bail!("{name}: must be at least 1");
            }
        }
        if let Some(delta) = st.delta {
            if !(delta.is_finite() && (0.0..s.t_end).contains(&delta)) {
                bail!(
                    "study.delta: must lie in [0, t_end = {}), got {delta}",
                    s.t_end
                );
            }
        }
        if st.operator_samples == Some(0) {
            bail!("study.operator_samples: must be at least 1");
        }
        Ok(())
    }
}

/// Reads, parses and validates a configuration file.
///
/// Relative initial-condition paths are resolved against the config file's
/// directory, so a config and its data files travel together.
pub fn load_config(path: &Path) -> Result<RunConfig> {
    let text = fs::read_to_string(path)
        .with_context(|| format!("cannot read config file {}", path.display()))?;
    let de = &mut serde_json::Deserializer::from_str(&text);
    let mut config: RunConfig = serde_path_to_error::deserialize(de)
        .map_err(|e| anyhow::anyhow!("{}: {}", e.path(), e.inner()))
        .with_context(|| format!("invalid config {}", path.display()))?;

    if let InitialSpec::File { path: ic } = &mut config.initial {
        if ic.is_relative() {
            if let Some(dir) = path.parent() {
                *ic = dir.join(&*ic);
            }
        }
    }
    config.validate()?;
    Ok(config)
}
