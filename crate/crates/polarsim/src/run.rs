//! Run orchestration: drives one solver trajectory and persists it.
//!
//! The four solvers expose different states and diagnostics; the driver
//! normalizes them into the common series schema (mass, multiplier, range,
//! support fraction) plus solver-specific trailing columns, so downstream
//! tooling reads every run the same way.

use std::path::Path;
use std::sync::Arc;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use polar_core::eps_fin::{init_eps_fin, step_eps_fin, EpsStateFin};
use polar_core::eps_inf::{init_eps_inf, step_eps_inf, EpsStateInf};
use polar_core::grid::{build_grids, SurfaceField, SurfaceGrid};
use polar_core::obstacle::{support_fraction, support_mask, ObstacleConfig};
use polar_core::obstacle_fin::{steady_dfin, step_dfin_cached, DfinCache, ObstacleStateFin};
use polar_core::obstacle_inf::{steady_dinf, step_dinf, ObstacleStateInf};
use polar_core::params::ModelParams;
use polar_core::signal::{eval_g, SignalSpec};
use serde::Serialize;

use crate::config::{RunConfig, SolverKind};
use crate::fields::initial_field;
use crate::record::{time_label, write_snapshot, SeriesWriter};

/// Outcome of a plain simulation run, echoed into the manifest.
#[derive(Debug, Clone, Serialize)]
pub struct RunSummary {
    pub solver: String,
    pub steps: usize,
    pub series_rows: usize,
    pub snapshots: Vec<String>,
    pub final_t: f64,
    pub final_mass: f64,
    /// max_t |∫u(+εv+εw) − m| observed along the run.
    pub max_mass_defect: f64,
    pub wall_seconds: f64,
}

/// Outcome of a steady-state solve.
#[derive(Debug, Clone, Serialize)]
pub struct SteadySummary {
    pub solver: String,
    pub pseudo_steps: usize,
    pub final_delta_l1: f64,
    pub stationary_residual: f64,
    pub mass: f64,
    pub alpha: Option<f64>,
    pub support_fraction: f64,
    pub snapshot: String,
    pub wall_seconds: f64,
}

/// One trajectory in progress, tagged by solver kind.
enum Driver {
    EpsInf(EpsStateInf),
    EpsFin(EpsStateFin),
    Dinf(ObstacleStateInf),
    Dfin(Box<ObstacleStateFin>, Box<DfinCache>),
}

/// Normalized per-row diagnostics.
struct Probe {
    t: f64,
    mass: f64,
    alpha: Option<f64>,
    min_u: f64,
    max_u: f64,
    support: f64,
    aux: Vec<f64>,
}

impl Driver {
    fn new(
        kind: SolverKind,
        u0: SurfaceField,
        cfg: &RunConfig,
        p: &ModelParams,
        ocfg: &ObstacleConfig,
        g0: &SurfaceField,
    ) -> Result<Self> {
        Ok(match kind {
            SolverKind::EpsInf => Driver::EpsInf(init_eps_inf(u0, p)?),
            SolverKind::EpsFin => {
                let (_, bulk) = build_grids(cfg.geometry.n_theta, cfg.geometry.n_r)?;
                Driver::EpsFin(init_eps_fin(u0, &bulk, p)?)
            }
            SolverKind::Dinf => unreachable!(),
            SolverKind::ObstacleDinf => {
                Driver::Dinf(ObstacleStateInf::from_u(u0, g0, p.a4, ocfg)?)
            }
            SolverKind::ObstacleDfin => Driver::Dfin(
                Box::new(ObstacleStateFin::from_u(u0, g0, p, ocfg)?),
                Box::new(DfinCache::default()),
            ),
        })
    }

    /// Trailing series column names for this solver.
    fn aux_names(kind: SolverKind) -> &'static [&'static str] {
        match kind {
            SolverKind::EpsInf => &["w", "mass_defect"],
            SolverKind::EpsFin => &["w_trace_min", "w_trace_max", "mass_defect"],
            SolverKind::ObstacleDinf => &["psor_residual", "psor_sweeps", "clamp_violations"],
            SolverKind::ObstacleDfin => &[
                "max_w",
                "solve_residual",
                "outer_iters",
                "refactorizations",
                "clamp_violations",
            ],
        }
    }

    /// Advances one step; returns the solver-specific aux column values.
    fn step(
        &mut self,
        dt: f64,
        p: &ModelParams,
        ocfg: &ObstacleConfig,
        c: &SurfaceField,
        g: &SurfaceField,
    ) -> Result<Vec<f64>> {
        match self {
            Driver::EpsInf(state) => {
                *state = step_eps_inf(state, dt, p, c)?;
                Ok(vec![state.w(), state.total_mass(p) - p.m])
            }
            Driver::EpsFin(state) => {
                *state = step_eps_fin(state, dt, p, c)?;
                let ring = trace_ring(state);
                let (lo, hi) = min_max(ring);
                Ok(vec![lo, hi, state.total_mass(p) - p.m])
            }
            Driver::Dinf(state) => {
                let (next, info) = step_dinf(state, dt, g, p.a4, ocfg)?;
                *state = next;
                Ok(vec![
                    info.psor_residual,
                    info.psor_sweeps as f64,
                    info.clamp_violations as f64,
                ])
            }
            Driver::Dfin(state, cache) => {
                let (next, info) = step_dfin_cached(state, dt, g, p, ocfg, cache)?;
                **state = next;
                Ok(vec![
                    info.max_w,
                    info.solve_residual,
                    info.outer_iters as f64,
                    info.refactorizations as f64,
                    info.clamp_violations as f64,
                ])
            }
        }
    }

    /// Diagnostics of the current state; `aux` comes from the last step (or
    /// the resting values before the first one).
    fn probe(&self, p: &ModelParams, ocfg: &ObstacleConfig, aux: Vec<f64>) -> Probe {
        let (t, u, alpha, mass) = match self {
            Driver::EpsInf(s) => (s.t(), s.u(), None, s.total_mass(p)),
            Driver::EpsFin(s) => (s.t(), s.u(), None, s.total_mass(p)),
            Driver::Dinf(s) => (s.t(), s.u(), Some(s.alpha()), s.mass()),
            Driver::Dfin(s, _) => (s.t(), s.u(), None, s.mass()),
        };
        let mask = support_mask(u, ocfg.positivity_threshold(u));
        Probe {
            t,
            mass,
            alpha,
            min_u: u.min(),
            max_u: u.max(),
            support: support_fraction(&mask),
            aux,
        }
    }

    /// Resting aux values for the t = 0 row.
    fn initial_aux(&self, p: &ModelParams) -> Vec<f64> {
        match self {
            Driver::EpsInf(s) => vec![s.w(), s.total_mass(p) - p.m],
            Driver::EpsFin(s) => {
                let (lo, hi) = min_max(trace_ring(s));
                vec![lo, hi, s.total_mass(p) - p.m]
            }
            Driver::Dinf(_) => vec![0.0, 0.0, 0.0],
            Driver::Dfin(s, _) => vec![s.w_trace().max(), 0.0, 0.0, 0.0, 0.0],
        }
    }

    /// Snapshot columns: (u, ξ or blank, w-trace or blank).
    fn snapshot_columns(&self) -> (Vec<f64>, Option<Vec<f64>>, Option<Vec<f64>>) {
        match self {
            Driver::EpsInf(s) => {
                let n = s.u().len();
                (s.u().values().to_vec(), None, Some(vec![s.w(); n]))
            }
            Driver::EpsFin(s) => (s.u().values().to_vec(), None, Some(trace_ring(s).to_vec())),
            Driver::Dinf(s) => (
                s.u().values().to_vec(),
                Some(s.xi().values().to_vec()),
                None,
            ),
            Driver::Dfin(s, _) => (
                s.u().values().to_vec(),
                Some(s.xi().values().to_vec()),
                Some(s.w_trace().values().to_vec()),
            ),
        }
    }
}

fn trace_ring(state: &EpsStateFin) -> &[f64] {
    state.w().ring(state.w().grid().n_r() - 1)
}

fn min_max(values: &[f64]) -> (f64, f64) {
    values.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
        (lo.min(v), hi.max(v))
    })
}

/// Step count and final (possibly shorter) step size for the span.
fn schedule(t_end: f64, dt: f64) -> (usize, f64) {
    let n = ((t_end / dt) - 1e-9).ceil().max(1.0) as usize;
    let last = t_end - (n - 1) as f64 * dt;
    (n, last)
}

/// Executes the configured solver, writing `series.csv` and the requested
/// snapshots into `out_dir`.
pub fn run_simulation(cfg: &RunConfig, out_dir: &Path) -> Result<RunSummary> {
    let started = Instant::now();
    std::fs::create_dir_all(out_dir)
        .with_context(|| format!("cannot create output directory {}", out_dir.display()))?;

    let p = cfg.params();
    let ocfg = cfg.obstacle_config();
    let kind = cfg.solver.kind;
    let spec = cfg.signal.to_spec();
    let grid = SurfaceGrid::new(cfg.geometry.n_theta)?;
    let u0 = initial_field(&cfg.initial, &grid, p.m)?;

    let mut c = spec.evaluate(&grid, 0.0);
    let mut g = eval_g(&c, p.a5)?;
    let static_signal = spec.is_static();

    let mut driver = Driver::new(kind, u0, cfg, &p, &ocfg, &g)?;

    let (n_steps, dt_last) = schedule(cfg.solver.t_end, cfg.solver.dt);
    let every = cfg
        .solver
        .record_every
        .unwrap_or_else(|| (n_steps / 1000).max(1));

    // Snapshot schedule: each requested time fires at its nearest step.
    let mut targets: Vec<f64> = cfg.solver.snapshot_times.clone();
    targets.sort_by(f64::total_cmp);
    targets.dedup();
    let fire_at: Vec<(usize, f64)> = targets
        .iter()
        .map(|&tg| (((tg / cfg.solver.dt).round() as usize).min(n_steps), tg))
        .collect();

    let mut series = SeriesWriter::create(&out_dir.join("series.csv"), Driver::aux_names(kind))?;
    let mut snapshots = Vec::new();
    let mut max_defect = 0.0_f64;

    let mut emit = |driver: &Driver,
                    aux: Vec<f64>,
                    step: usize,
                    record: bool,
                    series: &mut SeriesWriter,
                    snapshots: &mut Vec<String>,
                    max_defect: &mut f64|
     -> Result<()> {
        let probe = driver.probe(&p, &ocfg, aux);
        *max_defect = max_defect.max((probe.mass - p.m).abs());
        if record {
            series.row(
                probe.t,
                probe.mass,
                probe.alpha,
                probe.min_u,
                probe.max_u,
                probe.support,
                &probe.aux,
            )?;
        }
        for &(k, tg) in &fire_at {
            if k == step {
                let name = format!("snapshot_t{}.csv", time_label(tg));
                let (u, xi, w) = driver.snapshot_columns();
                write_snapshot(
                    &out_dir.join(&name),
                    &grid.thetas(),
                    &u,
                    xi.as_deref(),
                    w.as_deref(),
                )?;
                snapshots.push(name);
            }
        }
        Ok(())
    };

    let aux0 = driver.initial_aux(&p);
    emit(&driver, aux0, 0, true, &mut series, &mut snapshots, &mut max_defect)?;

    for k in 1..=n_steps {
        let dt_k = if k == n_steps { dt_last } else { cfg.solver.dt };
        if !static_signal {
            let t_now = match &driver {
                Driver::EpsInf(s) => s.t(),
                Driver::EpsFin(s) => s.t(),
                Driver::Dinf(s) => s.t(),
                Driver::Dfin(s, _) => s.t(),
            };
            c = spec.evaluate(&grid, t_now);
            g = eval_g(&c, p.a5)?;
        }
        let aux = driver
            .step(dt_k, &p, &ocfg, &c, &g)
            .with_context(|| format!("solver failed at step {k} of {n_steps}"))?;
        let record = k == n_steps || k % every == 0;
        emit(&driver, aux, k, record, &mut series, &mut snapshots, &mut max_defect)?;
    }

    let final_probe = driver.probe(&p, &ocfg, vec![]);
    let rows = series.rows();
    series.finish()?;

    Ok(RunSummary {
        solver: kind.label().to_string(),
        steps: n_steps,
        series_rows: rows,
        snapshots,
        final_t: final_probe.t,
        final_mass: final_probe.mass,
        max_mass_defect: max_defect,
        wall_seconds: started.elapsed().as_secs_f64(),
    })
}

/// Solves for the stationary state of the configured obstacle solver and
/// writes `snapshot_steady.csv`.
pub fn steady_run(cfg: &RunConfig, out_dir: &Path) -> Result<SteadySummary> {
    let started = Instant::now();
    std::fs::create_dir_all(out_dir)
        .with_context(|| format!("cannot create output directory {}", out_dir.display()))?;

    let kind = cfg.solver.kind;
    if !kind.is_obstacle() {
        bail!(
            "steady: requires an obstacle solver, got solver.kind = {}",
            kind.label()
        );
    }
    let spec = cfg.signal.to_spec();
    if !spec.is_static() {
        bail!("steady: requires a static signal (time-modulated signals have no steady state)");
    }

    let p = cfg.params();
    let ocfg = cfg.obstacle_config();
    let grid = SurfaceGrid::new(cfg.geometry.n_theta)?;
    let c = spec.evaluate(&grid, 0.0);
    let g = eval_g(&c, p.a5)?;

    let name = "snapshot_steady.csv".to_string();
    let path = out_dir.join(&name);
    let thetas = grid.thetas();

    let summary = match kind {
        SolverKind::ObstacleDinf => {
            let (state, info) = steady_dinf(p.m, &g, p.a4, &ocfg)?;
            write_snapshot(
                &path,
                &thetas,
                state.u().values(),
                Some(state.xi().values()),
                None,
            )?;
            let mask = support_mask(state.u(), ocfg.positivity_threshold(state.u()));
            SteadySummary {
                solver: kind.label().to_string(),
                pseudo_steps: info.pseudo_steps,
                final_delta_l1: info.final_delta_l1,
                stationary_residual: info.stationary_residual,
                mass: state.mass(),
                alpha: Some(state.alpha()),
                support_fraction: support_fraction(&mask),
                snapshot: name,
                wall_seconds: started.elapsed().as_secs_f64(),
            }
        }
        SolverKind::ObstacleDfin => {
            let (state, info) = steady_dfin(p.m, &g, &p, &ocfg)?;
            write_snapshot(
                &path,
                &thetas,
                state.u().values(),
                Some(state.xi().values()),
                Some(state.w_trace().values()),
            )?;
            let mask = support_mask(state.u(), ocfg.positivity_threshold(state.u()));
            SteadySummary {
                solver: kind.label().to_string(),
                pseudo_steps: info.pseudo_steps,
                final_delta_l1: info.final_delta_l1,
                stationary_residual: info.stationary_residual,
                mass: state.mass(),
                alpha: None,
                support_fraction: support_fraction(&mask),
                snapshot: name,
                wall_seconds: started.elapsed().as_secs_f64(),
            }
        }
        _ => unreachable!("eps kinds rejected above"),
    };
    Ok(summary)
}

/// Shared state advancement for the studies: steps any obstacle trajectory
/// in place under a fixed signal fraction, returning nothing but errors.
pub(crate) enum ObstacleTrajectory {
    Dinf(ObstacleStateInf),
    Dfin(Box<ObstacleStateFin>, Box<DfinCache>),
}

impl ObstacleTrajectory {
    pub(crate) fn new(
        kind: SolverKind,
        u0: SurfaceField,
        g: &SurfaceField,
        p: &ModelParams,
        ocfg: &ObstacleConfig,
    ) -> Result<Self> {
        Ok(match kind {
            SolverKind::ObstacleDinf => {
                ObstacleTrajectory::Dinf(ObstacleStateInf::from_u(u0, g, p.a4, ocfg)?)
            }
            SolverKind::ObstacleDfin => ObstacleTrajectory::Dfin(
                Box::new(ObstacleStateFin::from_u(u0, g, p, ocfg)?),
                Box::new(DfinCache::default()),
            ),
            _ => bail!("study: requires an obstacle solver, got solver.kind = {}", kind.label()),
        })
    }

    pub(crate) fn step(
        &mut self,
        dt: f64,
        g: &SurfaceField,
        p: &ModelParams,
        ocfg: &ObstacleConfig,
    ) -> Result<()> {
        match self {
            ObstacleTrajectory::Dinf(state) => {
                *state = step_dinf(state, dt, g, p.a4, ocfg)?.0;
            }
            ObstacleTrajectory::Dfin(state, cache) => {
                **state = step_dfin_cached(state, dt, g, p, ocfg, cache)?.0;
            }
        }
        Ok(())
    }

    pub(crate) fn u(&self) -> &SurfaceField {
        match self {
            ObstacleTrajectory::Dinf(s) => s.u(),
            ObstacleTrajectory::Dfin(s, _) => s.u(),
        }
    }
}
