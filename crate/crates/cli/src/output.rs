//! CSV schemas and number formatting shared by the subcommands.
//!
//! Floats are written with Rust's shortest round-trip representation, so a
//! CSV value parses back to the exact `f64` that produced it.

use std::fs::File;
use std::io::{self, Write};
use std::path::Path;

use anyhow::{Context, Result};
use clap::ValueEnum;
use serde::Serialize;

use ehcap_core::model::{nats_to_bits, TrajectoryStats};
use ehcap_core::rates::ArchRateReport;
use ehcap_core::simulator::StepRecord;
use ehcap_core::sweep::SweepRow;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Units {
    Nats,
    Bits,
}

impl Units {
    pub fn convert(self, nats: f64) -> f64 {
        match self {
            Units::Nats => nats,
            Units::Bits => nats_to_bits(nats),
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Units::Nats => "nats",
            Units::Bits => "bits",
        }
    }
}

/// `rates` output row.
#[derive(Debug, Serialize)]
pub struct RateRow {
    pub formula_id: &'static str,
    pub rate_nats: f64,
    pub rate_bits: f64,
    pub lower_bound_flag: bool,
    pub iterations: usize,
    pub quad_error: f64,
    /// Optimal sleep probability; empty for cells without sleep.
    pub p_sleep: Option<f64>,
}

impl From<&ArchRateReport> for RateRow {
    fn from(r: &ArchRateReport) -> Self {
        Self {
            formula_id: r.formula.tag(),
            rate_nats: r.rate.rate_nats,
            rate_bits: r.rate.rate_bits(),
            lower_bound_flag: r.lower_bound,
            iterations: r.rate.diagnostics.iterations,
            quad_error: r.rate.diagnostics.quad_error,
            p_sleep: r.sleep.as_ref().map(|s| s.p_sleep),
        }
    }
}

/// `sweep` output row.
#[derive(Debug, Serialize)]
pub struct SweepCsvRow {
    pub param_value: f64,
    pub formula_id: &'static str,
    pub rate_nats: f64,
    pub rate_bits: f64,
    pub lower_bound_flag: bool,
}

impl From<&SweepRow> for SweepCsvRow {
    fn from(r: &SweepRow) -> Self {
        Self {
            param_value: r.param_value,
            formula_id: r.formula_id.tag(),
            rate_nats: r.rate_nats,
            rate_bits: nats_to_bits(r.rate_nats),
            lower_bound_flag: r.lower_bound,
        }
    }
}

/// `simulate` per-replication row.
#[derive(Debug, Serialize)]
pub struct ReplicationRow {
    pub replication: usize,
    pub empirical_rate_nats: f64,
    pub mean_used_energy: f64,
    pub truncation_fraction: f64,
    pub clip_fraction: f64,
    pub final_buffer: f64,
    pub buffer_slope: f64,
}

impl ReplicationRow {
    pub fn new(replication: usize, t: &TrajectoryStats) -> Self {
        Self {
            replication,
            empirical_rate_nats: t.empirical_rate_nats,
            mean_used_energy: t.mean_used_energy,
            truncation_fraction: t.truncation_fraction,
            clip_fraction: t.clip_fraction,
            final_buffer: t.final_buffer,
            buffer_slope: t.buffer_slope,
        }
    }
}

/// Trace row: `(k, Y_k, H_k, E_k, T_k, truncated, clipped)`.
#[derive(Debug, Serialize)]
pub struct TraceRow {
    pub k: usize,
    pub harvest: f64,
    pub fade: f64,
    pub energy: f64,
    pub used: f64,
    pub truncated: bool,
    pub clipped: bool,
}

impl From<&StepRecord> for TraceRow {
    fn from(r: &StepRecord) -> Self {
        Self {
            k: r.k,
            harvest: r.harvest,
            fade: r.fade,
            energy: r.energy,
            used: r.used,
            truncated: r.truncated,
            clipped: r.clipped,
        }
    }
}

/// Writes `rows` as CSV with a header, to `path` or standard output.
pub fn write_csv<T: Serialize>(
    path: Option<&Path>,
    rows: impl IntoIterator<Item = T>,
) -> Result<()> {
    let sink: Box<dyn Write> = match path {
        Some(p) => {
            Box::new(File::create(p).with_context(|| format!("cannot create {}", p.display()))?)
        }
        None => Box::new(io::stdout().lock()),
    };
    let mut w = csv::Writer::from_writer(sink);
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}
