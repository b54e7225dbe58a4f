//! Run persistence: the CSV series, field snapshots, and the JSON manifest.
//!
//! Every floating-point value is written with 17 significant digits
//! (`{:.16e}`), which round-trips f64 exactly, so re-running an analysis on
//! the persisted files reproduces the in-memory verdicts bit for bit.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Serialize;

use crate::config::RunConfig;

/// 17-significant-digit representation, exact for f64 round-trips.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

/// Label for a snapshot time: the shortest exact decimal (`1`, `0.25`, …).
pub fn time_label(t: f64) -> String {
    if t == t.trunc() && t.abs() < 1e15 {
        format!("{}", t as i64)
    } else {
        format!("{t}")
    }
}

/// Append-only writer for `series.csv`.
pub struct SeriesWriter {
    out: BufWriter<File>,
    columns: usize,
    rows: usize,
}

impl SeriesWriter {
    /// Creates the file and writes the header; `aux` names the
    /// solver-specific trailing columns.
    pub fn create(path: &Path, aux: &[&str]) -> Result<Self> {
        let file = File::create(path)
            .with_context(|| format!("cannot create series file {}", path.display()))?;
        let mut out = BufWriter::new(file);
        let mut header = String::from("t,mass,alpha_or_blank,min_u,max_u,support_fraction");
        for name in aux {
            header.push(',');
            header.push_str(name);
        }
        writeln!(out, "{header}")?;
        Ok(Self {
            out,
            columns: 6 + aux.len(),
            rows: 0,
        })
    }

    /// Writes one diagnostics row; `alpha` is blank for solvers without a
    /// mass multiplier.
    pub fn row(
        &mut self,
        t: f64,
        mass: f64,
        alpha: Option<f64>,
        min_u: f64,
        max_u: f64,
        support_fraction: f64,
        aux: &[f64],
    ) -> Result<()> {
        debug_assert_eq!(6 + aux.len(), self.columns, "aux column count drifted");
        let alpha = alpha.map(fmt_f64).unwrap_or_default();
        let mut line = format!(
            "{},{},{alpha},{},{},{}",
            fmt_f64(t),
            fmt_f64(mass),
            fmt_f64(min_u),
            fmt_f64(max_u),
            fmt_f64(support_fraction)
        );
        for &v in aux {
            line.push(',');
            line.push_str(&fmt_f64(v));
        }
        writeln!(self.out, "{line}")?;
        self.rows += 1;
        Ok(())
    }

    /// Rows written so far (excluding the header).
    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn finish(mut self) -> Result<()> {
        self.out.flush()?;
        Ok(())
    }
}

/// Writes one field snapshot with the fixed column layout
/// `theta,u,xi,w_trace_or_blank`; `xi` and `w` are blank where the solver
/// has no such field.
pub fn write_snapshot(
    path: &Path,
    thetas: &[f64],
    u: &[f64],
    xi: Option<&[f64]>,
    w_trace: Option<&[f64]>,
) -> Result<()> {
    let file = File::create(path)
        .with_context(|| format!("cannot create snapshot {}", path.display()))?;
    let mut out = BufWriter::new(file);
    writeln!(out, "theta,u,xi,w_trace_or_blank")?;
    for j in 0..thetas.len() {
        let xi_cell = xi.map(|x| fmt_f64(x[j])).unwrap_or_default();
        let w_cell = w_trace.map(|w| fmt_f64(w[j])).unwrap_or_default();
        writeln!(
            out,
            "{},{},{xi_cell},{w_cell}",
            fmt_f64(thetas[j]),
            fmt_f64(u[j])
        )?;
    }
    out.flush()?;
    Ok(())
}

/// One pass/fail row of a study: the measured value and the threshold it
/// was held against travel with the flag, so the verdict is reproducible
/// from the manifest alone.
#[derive(Debug, Clone, Serialize)]
pub struct Verdict {
    pub property: String,
    pub measured: f64,
    pub threshold: f64,
    pub pass: bool,
}

impl Verdict {
    /// Passes when the measured value is at most the threshold.
    pub fn at_most(property: impl Into<String>, measured: f64, threshold: f64) -> Self {
        Self {
            property: property.into(),
            measured,
            threshold,
            pass: measured <= threshold,
        }
    }

    /// Passes when the measured value exceeds the threshold.
    pub fn above(property: impl Into<String>, measured: f64, threshold: f64) -> Self {
        Self {
            property: property.into(),
            measured,
            threshold,
            pass: measured > threshold,
        }
    }
}

/// Top-level record of a CLI invocation, persisted as `manifest.json`.
#[derive(Debug, Serialize)]
pub struct Manifest<'a> {
    pub tool: &'static str,
    pub code_version: &'static str,
    pub command: String,
    pub created_utc: String,
    pub finished_utc: String,
    pub seed: u64,
    pub threads: usize,
    pub config: &'a RunConfig,
    /// Files this invocation wrote, relative to the output directory.
    pub outputs: Vec<String>,
    /// Free-form per-command summary (final mass, step counts, …).
    pub summary: serde_json::Value,
    /// Study verdicts; empty for plain runs.
    pub verdicts: Vec<Verdict>,
}

/// RFC 3339 timestamp of the current instant.
pub fn now_utc() -> String {
    time::OffsetDateTime::now_utc()
        .format(&time::format_description::well_known::Rfc3339)
        .unwrap_or_else(|_| "unknown".into())
}

/// Serializes the manifest into `out_dir/manifest.json`.
pub fn write_manifest(out_dir: &Path, manifest: &Manifest) -> Result<PathBuf> {
    fs::create_dir_all(out_dir)
        .with_context(|| format!("cannot create output directory {}", out_dir.display()))?;
    let path = out_dir.join("manifest.json");
    let file = File::create(&path)
        .with_context(|| format!("cannot create manifest {}", path.display()))?;
    let mut out = BufWriter::new(file);
    serde_json::to_writer_pretty(&mut out, manifest).context("manifest serialization failed")?;
    out.write_all(b"\n")?;
    out.flush()?;
    Ok(path)
}
