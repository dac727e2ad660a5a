//! Result persistence: CSV tables and JSON manifests.
//!
//! Every output file carries the master seed, the config hash, and the
//! artifact version in comment lines, and no command emits data without a
//! run manifest naming its outputs. All floats print with fixed formats so
//! reruns are byte-comparable.

use crate::ao::AoHistoryRow;
use crate::eval::{HeatmapStats, PointRow};
use crate::manifold::TracePoint;
use crate::rom::RomHistoryRow;
use crate::signal::Frame;
use crate::CMat;
use serde::Serialize;

pub const ARTIFACT_VERSION: &str = env!("CARGO_PKG_VERSION");

/// Metadata stamped on every output file.
#[derive(Debug, Clone, Serialize)]
pub struct OutputMeta {
    pub master_seed: u64,
    pub config_hash: String,
    pub version: String,
}

impl OutputMeta {
    pub fn new(cfg: &crate::config::ScenarioConfig) -> Self {
        Self {
            master_seed: cfg.master_seed,
            config_hash: cfg.hash(),
            version: ARTIFACT_VERSION.to_string(),
        }
    }

    fn comment_header(&self) -> String {
        format!(
            "# master_seed={}\n# config_hash={}\n# version={}\n",
            self.master_seed, self.config_hash, self.version
        )
    }
}

/// Sweep results: one row per (axis value, strategy).
pub fn sweep_csv(rows: &[PointRow], meta: &OutputMeta) -> String {
    let mut out = meta.comment_header();
    out.push_str("axis_value,strategy,ser,ser_stderr,sum_rate,min_margin,wall_ms\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{:.6e},{:.6e},{:.6},{:.9e},{:.3}\n",
            r.axis_value, r.strategy, r.ser, r.ser_stderr, r.sum_rate, r.min_margin, r.wall_ms
        ));
    }
    out
}

/// Outer-iteration margin history of one phase-optimization run.
pub fn rom_history_csv(history: &[RomHistoryRow], meta: &OutputMeta) -> String {
    let mut out = meta.comment_header();
    out.push_str("outer_iter,min_margin,wall_time_ms\n");
    for r in history {
        out.push_str(&format!("{},{:.9e},{:.3}\n", r.outer_iter, r.min_margin, r.wall_ms));
    }
    out
}

/// Inner descent trace of one layer solve.
pub fn descent_trace_csv(trace: &[TracePoint], meta: &OutputMeta) -> String {
    let mut out = meta.comment_header();
    out.push_str("iteration,objective,step,grad_norm\n");
    for t in trace {
        out.push_str(&format!(
            "{},{:.9e},{:.6e},{:.6e}\n",
            t.iteration, t.value, t.step, t.grad_norm
        ));
    }
    out
}

/// Alternating-optimization history: margin after each block per round.
pub fn ao_history_csv(history: &[AoHistoryRow], meta: &OutputMeta) -> String {
    let mut out = meta.comment_header();
    out.push_str("round,after_selection,after_phases,after_power\n");
    for r in history {
        out.push_str(&format!(
            "{},{:.9e},{:.9e},{:.9e}\n",
            r.round, r.after_selection, r.after_phases, r.after_power
        ));
    }
    out
}

/// Channel-gain heatmap with its summary statistics as comments.
pub fn heatmap_csv(stats: &HeatmapStats, meta: &OutputMeta) -> String {
    let mut out = meta.comment_header();
    out.push_str(&format!(
        "# diag_offdiag_gap_db={:.6}\n# diag_variance_db={:.6}\n",
        stats.diag_offdiag_gap_db, stats.diag_variance_db
    ));
    out.push_str("user,stream,gain_db\n");
    for r in 0..stats.gains_db.nrows() {
        for c in 0..stats.gains_db.ncols() {
            out.push_str(&format!("{},{},{:.6}\n", r + 1, c + 1, stats.gains_db[(r, c)]));
        }
    }
    out
}

/// Per-symbol constellation dump: received point and margin per (user, slot).
pub fn constellation_csv(rx: &CMat, frame: &Frame, margins: &[f64], meta: &OutputMeta) -> String {
    let mut out = meta.comment_header();
    out.push_str("user,slot,re,im,margin\n");
    for mu in 0..frame.slots() {
        for k in 0..frame.users() {
            let m = margins[mu * frame.users() + k];
            out.push_str(&format!(
                "{},{},{:.9e},{:.9e},{:.9e}\n",
                k + 1,
                mu + 1,
                rx[(k, mu)].re,
                rx[(k, mu)].im,
                m
            ));
        }
    }
    out
}

/// Manifest accompanying every command's outputs: config echo, seed, hash,
/// and the list of files written.
#[derive(Debug, Serialize)]
pub struct RunManifest<'a> {
    pub version: &'a str,
    pub command: &'a str,
    pub master_seed: u64,
    pub config_hash: String,
    pub outputs: Vec<String>,
    pub config: &'a crate::config::ScenarioConfig,
}

impl<'a> RunManifest<'a> {
    pub fn new(command: &'a str, cfg: &'a crate::config::ScenarioConfig, outputs: Vec<String>) -> Self {
        Self {
            version: ARTIFACT_VERSION,
            command,
            master_seed: cfg.master_seed,
            config_hash: cfg.hash(),
            outputs,
            config: cfg,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("manifest serializes")
    }
}

/// Summary of a single joint-optimization run: selection (1-based antenna
/// indices), allocation fractions, and final margin.
#[derive(Debug, Serialize)]
pub struct RunSummary {
    pub version: String,
    pub master_seed: u64,
    pub config_hash: String,
    pub selection_1based: Vec<usize>,
    pub allocation: Vec<f64>,
    pub min_margin: f64,
    pub margin_history: Vec<f64>,
}

impl RunSummary {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("summary serializes")
    }
}
