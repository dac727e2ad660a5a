//! Command-line front end: scenario loading, command dispatch, result
//! persistence.
//!
//! Exit codes: 0 success, 1 usage, 2 config validation, 3 numerical or I/O
//! abort, 4 check-suite failure.

use anyhow::Context;
use clap::{Parser, Subcommand};
use simiep_core::ao::{rom_ao, AoOptions};
use simiep_core::channel::ChannelModel;
use simiep_core::config::{ScenarioConfig, Strategy};
use simiep_core::error::SimError;
use simiep_core::eval::{channel_gain_heatmap, run_frame, run_sweep, SweepOptions};
use simiep_core::report::{
    ao_history_csv, constellation_csv, descent_trace_csv, heatmap_csv, rom_history_csv,
    sweep_csv, OutputMeta, RunManifest, RunSummary,
};
use simiep_core::rom::{rom, RomParams};
use simiep_core::seeding::derive_rng;
use simiep_core::signal::{Frame, NldMode, PhaseStack};
use std::path::{Path, PathBuf};

#[derive(Parser)]
#[command(
    name = "simiep",
    about = "Link-level simulator for stacked-metasurface interference-exploitation precoding",
    version
)]
struct Cli {
    /// Scenario JSON (missing fields take defaults).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Built-in scenario preset (table1, desk) used when no config is given.
    #[arg(long, global = true, default_value = "table1")]
    preset: String,
    /// Master seed override.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory override.
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,
    /// Worker threads (affects speed only, never results).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Joint selection/phase/power optimization of one frame; summary JSON.
    Run,
    /// Monte Carlo sweep over the configured axis; CSV table.
    Sweep,
    /// Phase-optimizer convergence history and inner descent traces; CSVs.
    Trace,
    /// Channel-gain heatmap of one optimized frame; CSV.
    Heatmap,
    /// Per-symbol received constellation with margins; CSV.
    Constellation,
    /// Run the verification suite; nonzero exit on any failure.
    Check {
        /// Restrict to specific item ids (e.g. `--only 1,3,8b`; `8` selects
        /// the whole trend suite).
        #[arg(long, value_delimiter = ',')]
        only: Option<Vec<String>>,
    },
}

fn main() {
    std::process::exit(real_main());
}

fn real_main() -> i32 {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    match dispatch(cli) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err:#}");
            classify(&err)
        }
    }
}

fn classify(err: &anyhow::Error) -> i32 {
    match err.downcast_ref::<SimError>() {
        Some(SimError::Config { .. })
        | Some(SimError::Parse(_))
        | Some(SimError::Geometry(_))
        | Some(SimError::Argument(_)) => 2,
        Some(SimError::Numerical(_)) | Some(SimError::Io { .. }) | None => 3,
    }
}

fn dispatch(cli: Cli) -> anyhow::Result<i32> {
    if let Some(threads) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .context("thread pool")?;
    }

    let mut cfg = match &cli.config {
        Some(path) => ScenarioConfig::load(path)?,
        None => ScenarioConfig::preset(&cli.preset)?,
    };
    if let Some(seed) = cli.seed {
        cfg.master_seed = seed;
    }
    if let Some(dir) = &cli.out_dir {
        cfg.out_dir = dir.display().to_string();
    }

    match cli.command {
        Command::Run => cmd_run(&cfg),
        Command::Sweep => cmd_sweep(&cfg),
        Command::Trace => cmd_trace(&cfg),
        Command::Heatmap => cmd_heatmap(&cfg),
        Command::Constellation => cmd_constellation(&cfg),
        Command::Check { only } => cmd_check(only),
    }
}

/// Channel, frame, and initial phases of the seeded frame index 0, drawn
/// from the same streams the sweep runner uses.
fn frame_zero(
    cfg: &ScenarioConfig,
) -> anyhow::Result<(simiep_core::channel::ChannelSet, Frame, PhaseStack)> {
    let model = ChannelModel::new(cfg)?;
    let mut rng_channel = derive_rng(cfg.master_seed, &[("frame", 0), ("channel", 0)]);
    let channels = model.sample(&mut rng_channel)?;
    let mut rng_bits = derive_rng(cfg.master_seed, &[("frame", 0), ("bits", 0)]);
    let frame = Frame::random(cfg.users, cfg.slots, &cfg.saleh, &mut rng_bits);
    let mut rng_init = derive_rng(cfg.master_seed, &[("frame", 0), ("init", 0)]);
    let init = PhaseStack::random(cfg.layers, channels.atoms(), &mut rng_init);
    Ok((channels, frame, init))
}

fn write_output(dir: &Path, name: &str, content: &str) -> anyhow::Result<String> {
    std::fs::create_dir_all(dir).map_err(|source| SimError::Io {
        path: dir.display().to_string(),
        source,
    })?;
    let path = dir.join(name);
    std::fs::write(&path, content).map_err(|source| SimError::Io {
        path: path.display().to_string(),
        source,
    })?;
    Ok(path.display().to_string())
}

fn finish(
    command: &str,
    cfg: &ScenarioConfig,
    dir: &Path,
    outputs: Vec<String>,
) -> anyhow::Result<i32> {
    let manifest = RunManifest::new(command, cfg, outputs);
    let path = write_output(dir, &format!("{command}_manifest.json"), &manifest.to_json())?;
    println!("wrote {path}");
    Ok(0)
}

fn cmd_run(cfg: &ScenarioConfig) -> anyhow::Result<i32> {
    let dir = PathBuf::from(&cfg.out_dir);
    let (channels, frame, init) = frame_zero(cfg)?;
    let params = RomParams::from_optimizer(&cfg.optimizer);
    let out = rom_ao(
        &channels,
        &frame,
        NldMode::Aware,
        cfg.users,
        &params,
        cfg.optimizer.eps_p,
        cfg.optimizer.ao_rounds,
        AoOptions::default(),
        init,
    )?;
    let meta = OutputMeta::new(cfg);
    let summary = RunSummary {
        version: meta.version.clone(),
        master_seed: cfg.master_seed,
        config_hash: meta.config_hash.clone(),
        selection_1based: out.selection.chosen.iter().map(|&a| a + 1).collect(),
        allocation: out.power.allocation(),
        min_margin: out.final_margin(),
        margin_history: out.history.iter().map(|r| r.after_power).collect(),
    };
    let mut outputs = vec![write_output(&dir, "run_summary.json", &summary.to_json())?];
    outputs.push(write_output(&dir, "ao_history.csv", &ao_history_csv(&out.history, &meta))?);
    for line in &out.history {
        println!(
            "round {}: margin {:.6e} (selection) {:.6e} (phases) {:.6e} (power)",
            line.round, line.after_selection, line.after_phases, line.after_power
        );
    }
    println!(
        "selected antennas {:?}, allocation {:?}",
        summary.selection_1based, summary.allocation
    );
    finish("run", cfg, &dir, outputs)
}

fn cmd_sweep(cfg: &ScenarioConfig) -> anyhow::Result<i32> {
    let dir = PathBuf::from(&cfg.out_dir);
    let rows = run_sweep(cfg, SweepOptions::default())?;
    let meta = OutputMeta::new(cfg);
    let outputs = vec![write_output(&dir, "sweep.csv", &sweep_csv(&rows, &meta))?];
    for row in &rows {
        println!(
            "{} @ {}: ser {:.3e} (+/-{:.1e}), rate {:.3}, margin {:.3e}",
            row.strategy, row.axis_value, row.ser, row.ser_stderr, row.sum_rate, row.min_margin
        );
    }
    finish("sweep", cfg, &dir, outputs)
}

fn cmd_trace(cfg: &ScenarioConfig) -> anyhow::Result<i32> {
    let dir = PathBuf::from(&cfg.out_dir);
    let (channels, frame, init) = frame_zero(cfg)?;
    let params = RomParams::from_optimizer(&cfg.optimizer);
    let selection: Vec<usize> = (0..cfg.users).collect();
    let uniform = simiep_core::manifold::SpherePoint::uniform(cfg.users);
    let out = rom(
        &channels,
        &selection,
        Some(uniform.vec()),
        &frame,
        NldMode::Aware,
        &params,
        init,
    )?;
    let meta = OutputMeta::new(cfg);
    let mut outputs = vec![write_output(&dir, "rom_history.csv", &rom_history_csv(&out.history, &meta))?];
    for (layer, trace) in out.last_inner_traces.iter().enumerate() {
        outputs.push(write_output(
            &dir,
            &format!("descent_layer{}.csv", layer + 1),
            &descent_trace_csv(trace, &meta),
        )?);
    }
    println!(
        "{} outer iterations, final margin {:.6e}",
        out.history.len(),
        out.final_margin()
    );
    finish("trace", cfg, &dir, outputs)
}

fn cmd_heatmap(cfg: &ScenarioConfig) -> anyhow::Result<i32> {
    let dir = PathBuf::from(&cfg.out_dir);
    let model = ChannelModel::new(cfg)?;
    let run = run_frame(&model, cfg, Strategy::Rom, 0)?;
    let stats = channel_gain_heatmap(&run.effective);
    println!(
        "diag-offdiag gap {:.3} dB, diag variance {:.3} dB^2",
        stats.diag_offdiag_gap_db, stats.diag_variance_db
    );
    let meta = OutputMeta::new(cfg);
    let outputs = vec![write_output(&dir, "heatmap.csv", &heatmap_csv(&stats, &meta))?];
    finish("heatmap", cfg, &dir, outputs)
}

fn cmd_constellation(cfg: &ScenarioConfig) -> anyhow::Result<i32> {
    let dir = PathBuf::from(&cfg.out_dir);
    let model = ChannelModel::new(cfg)?;
    let run = run_frame(&model, cfg, Strategy::RomAo { selection: true, power: true }, 0)?;
    let meta = OutputMeta::new(cfg);
    let outputs = vec![write_output(
        &dir,
        "constellation.csv",
        &constellation_csv(&run.rx, &run.frame, &run.margins, &meta),
    )?];
    println!("min margin {:.6e} over {} symbols", run.min_margin, run.margins.len());
    finish("constellation", cfg, &dir, outputs)
}

fn cmd_check(only: Option<Vec<String>>) -> anyhow::Result<i32> {
    let items = simiep_core::checks::run_all(only.as_deref());
    if items.is_empty() {
        eprintln!("no check ids matched; known ids: {:?}", simiep_core::checks::CHECK_IDS);
        return Ok(1);
    }
    let mut failed = 0usize;
    for item in &items {
        let status = if item.passed { "PASS" } else { "FAIL" };
        println!("[{status}] {:>2} {} ({:.1}s)\n        {}", item.id, item.name, item.seconds, item.detail);
        if !item.passed {
            failed += 1;
        }
    }
    println!("{}/{} checks passed", items.len() - failed, items.len());
    Ok(if failed == 0 { 0 } else { 4 })
}
