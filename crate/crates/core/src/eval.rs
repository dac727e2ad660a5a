//! Monte Carlo link-level evaluation: SER and sum-rate sweeps over SNR,
//! layer count, or aperture size, against random-phase, quantized-phase,
//! and zero-forcing baselines.
//!
//! Pairing discipline: every frame's channel, symbols, phase initialization,
//! and noise come from streams derived from `(master_seed, frame_index)`
//! alone, so all strategies at one axis point see identical realizations;
//! the sweep asserts this by hashing each strategy's realization stream.
//! Frames are independent work units mapped in parallel and reduced in
//! index order, so worker count never changes results.

use crate::ao::{rom_ao, AoOptions};
use crate::channel::{ChannelModel, ChannelSet};
use crate::config::{ScenarioConfig, Strategy, SweepAxis};
use crate::error::SimError;
use crate::manifold::SpherePoint;
use crate::rom::{rom, RomParams};
use crate::seeding::{derive_rng, StreamHasher};
use crate::signal::{
    detect_qpsk_index, apply_nld, safety_margin, Frame, NldMode, PhaseStack, QPSK_PHI,
};
use crate::{CMat, CVec, RMat};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

/// Sum rate Σ_k log2(1 + |E[k,k]|² / (Σ_{i≠k} |E[k,i]|² + σ²)) in bit/s/Hz.
///
/// The SINR treats the diagonal of the effective matrix as signal and the
/// off-diagonal entries as interference; this definition is artifact-local.
pub fn sum_rate(effective: &CMat, sigma2: f64) -> f64 {
    assert!(sigma2 > 0.0, "sum rate needs positive noise power");
    let k = effective.nrows();
    let mut total = 0.0;
    for u in 0..k {
        let signal = effective[(u, u)].norm_sqr();
        let interference: f64 = (0..effective.ncols())
            .filter(|&i| i != u)
            .map(|i| effective[(u, i)].norm_sqr())
            .sum();
        total += (1.0 + signal / (interference + sigma2)).log2();
    }
    total
}

/// Snaps every phase to the nearest of 2^bits uniform levels on [0, 2π),
/// ties toward the lower level.
pub fn quantize_phases(phases: &PhaseStack, bits: u8) -> PhaseStack {
    assert!(bits >= 1, "quantization needs at least one bit");
    let levels = 1u32 << bits;
    let step = std::f64::consts::TAU / levels as f64;
    let thetas = (0..phases.layers())
        .map(|l| {
            CVec::from_fn(phases.layer(l).len(), |n, _| {
                let angle = phases.layer(l)[n].arg().rem_euclid(std::f64::consts::TAU);
                let q = (angle / step - 0.5).ceil().rem_euclid(levels as f64);
                Complex64::from_polar(1.0, q * step)
            })
        })
        .collect();
    PhaseStack::new(thetas).expect("quantized phases are unit modulus")
}

/// Channel-gain heatmap of an effective matrix, in dB, with the summary
/// statistics the aperture-scaling comparisons use. Entries are clamped at
/// a −200 dB floor.
#[derive(Debug, Clone)]
pub struct HeatmapStats {
    pub gains_db: RMat,
    /// Mean diagonal gain minus mean off-diagonal gain, dB.
    pub diag_offdiag_gap_db: f64,
    /// Population variance of the diagonal gains, dB².
    pub diag_variance_db: f64,
}

pub const HEATMAP_FLOOR_DB: f64 = -200.0;

pub fn channel_gain_heatmap(effective: &CMat) -> HeatmapStats {
    let gains_db = effective.map(|e| (20.0 * e.norm().log10()).max(HEATMAP_FLOOR_DB));
    let (rows, cols) = (gains_db.nrows(), gains_db.ncols());
    let mut diag_sum = 0.0;
    let mut diag_sq = 0.0;
    let mut off_sum = 0.0;
    let mut off_count = 0usize;
    for r in 0..rows {
        for c in 0..cols {
            let v = gains_db[(r, c)];
            if r == c {
                diag_sum += v;
                diag_sq += v * v;
            } else {
                off_sum += v;
                off_count += 1;
            }
        }
    }
    let diag_n = rows.min(cols) as f64;
    let diag_mean = diag_sum / diag_n;
    let off_mean = if off_count > 0 { off_sum / off_count as f64 } else { 0.0 };
    HeatmapStats {
        gains_db,
        diag_offdiag_gap_db: if off_count > 0 { diag_mean - off_mean } else { 0.0 },
        diag_variance_db: diag_sq / diag_n - diag_mean * diag_mean,
    }
}

/// Noise-free transmit result of one strategy on one frame.
#[derive(Debug, Clone)]
pub struct FrameRun {
    /// Noise-free received symbols, K×U.
    pub rx: CMat,
    pub frame: Frame,
    /// Effective user-by-stream matrix used for the sum rate.
    pub effective: CMat,
    pub margins: Vec<f64>,
    pub min_margin: f64,
    /// Average received symbol power; the SNR reference. SNR is defined
    /// receiver-side: σ² = mean received power / 10^(SNR/10).
    pub mean_rx_power: f64,
    /// Digest of the channel and symbol realization for pairing assertions.
    pub realization_hash: [u8; 32],
    /// Antenna choice (selection order) and power allocation, when the
    /// strategy produced them.
    pub selection: Vec<usize>,
    pub allocation: Vec<f64>,
}

/// Runs one strategy on one frame: draws the frame's channel and symbols
/// from their derived streams, configures the stack, and returns the
/// noise-free link state.
pub fn run_frame(
    model: &ChannelModel,
    cfg: &ScenarioConfig,
    strategy: Strategy,
    frame_idx: u64,
) -> Result<FrameRun, SimError> {
    let mut rng_channel = derive_rng(cfg.master_seed, &[("frame", frame_idx), ("channel", 0)]);
    let channels = model.sample(&mut rng_channel)?;
    let mut rng_bits = derive_rng(cfg.master_seed, &[("frame", frame_idx), ("bits", 0)]);
    let frame = Frame::random(cfg.users, cfg.slots, &cfg.saleh, &mut rng_bits);
    let mut rng_init = derive_rng(cfg.master_seed, &[("frame", frame_idx), ("init", 0)]);
    let init = PhaseStack::random(cfg.layers, channels.atoms(), &mut rng_init);

    let mut hasher = StreamHasher::new();
    for v in channels.h_users.iter() {
        hasher.absorb_f64s([&v.re, &v.im]);
    }
    for v in frame.ideal.iter() {
        hasher.absorb_f64s([&v.re, &v.im]);
    }
    let realization_hash = hasher.finish();

    let params = RomParams::from_optimizer(&cfg.optimizer);
    let k = cfg.users;
    let first_k: Vec<usize> = (0..k).collect();
    let uniform = SpherePoint::uniform(k);

    let (rx, effective, selection, allocation) = match strategy {
        Strategy::Rom => {
            let out = rom(&channels, &first_k, Some(uniform.vec()), &frame, NldMode::Aware, &params, init)?;
            let e = crate::signal::effective_matrix(&channels, &out.phases, &first_k, Some(uniform.vec()))?;
            (&e * &frame.distorted, e, first_k, uniform.allocation())
        }
        Strategy::RomAo { selection, power } => {
            let out = rom_ao(
                &channels,
                &frame,
                NldMode::Aware,
                k,
                &params,
                cfg.optimizer.eps_p,
                cfg.optimizer.ao_rounds,
                AoOptions { selection, power },
                init,
            )?;
            let e = crate::signal::effective_matrix(
                &channels,
                &out.phases,
                &out.selection.chosen,
                Some(out.power.vec()),
            )?;
            (
                &e * &frame.distorted,
                e,
                out.selection.chosen,
                out.power.allocation(),
            )
        }
        Strategy::RandomPhase => {
            let e = crate::signal::effective_matrix(&channels, &init, &first_k, Some(uniform.vec()))?;
            (&e * &frame.distorted, e, first_k, uniform.allocation())
        }
        Strategy::Quantized { bits } => {
            let out = rom(&channels, &first_k, Some(uniform.vec()), &frame, NldMode::Aware, &params, init)?;
            let snapped = quantize_phases(&out.phases, bits);
            let e = crate::signal::effective_matrix(&channels, &snapped, &first_k, Some(uniform.vec()))?;
            (&e * &frame.distorted, e, first_k, uniform.allocation())
        }
        Strategy::Zf { optimized_phases } => {
            let phases = if optimized_phases {
                rom(&channels, &first_k, Some(uniform.vec()), &frame, NldMode::Aware, &params, init)?.phases
            } else {
                init
            };
            let (rx, e_eff) = zf_transmit(&channels, &phases, &frame, &cfg.saleh)?;
            (rx, e_eff, first_k, uniform.allocation())
        }
    };

    let mut margins = Vec::with_capacity(k * cfg.slots);
    for mu in 0..cfg.slots {
        for user in 0..k {
            margins.push(safety_margin(rx[(user, mu)], frame.ideal[(user, mu)], QPSK_PHI));
        }
    }
    let min_margin = margins.iter().cloned().fold(f64::INFINITY, f64::min);
    let mean_rx_power = rx.iter().map(|v| v.norm_sqr()).sum::<f64>() / (k * cfg.slots) as f64;

    Ok(FrameRun {
        rx,
        frame,
        effective,
        margins,
        min_margin,
        mean_rx_power,
        realization_hash,
        selection,
        allocation,
    })
}

/// Digital zero-forcing transmission through a fixed stack: the precoder
/// right-inverts the effective channel, each slot's precoded vector is
/// scaled to unit total transmit power, and the amplifier distorts each
/// antenna's sample. Returns the noise-free received matrix and the scaled
/// effective matrix used for the sum rate. A singular channel falls back to
/// diagonal loading of 1e−9 times the Gram trace.
pub fn zf_transmit(
    channels: &ChannelSet,
    phases: &PhaseStack,
    frame: &Frame,
    saleh: &crate::signal::SalehParams,
) -> Result<(CMat, CMat), SimError> {
    let k = frame.users();
    let selection: Vec<usize> = (0..k).collect();
    let e = crate::signal::effective_matrix(channels, phases, &selection, None)?;
    let gram = &e * e.adjoint();
    let inv = match gram.clone().try_inverse() {
        Some(inv) => inv,
        None => {
            let trace: Complex64 = (0..k).map(|i| gram[(i, i)]).sum();
            let loaded = &gram + CMat::identity(k, k) * (trace * Complex64::new(1e-9, 0.0));
            loaded
                .try_inverse()
                .ok_or_else(|| SimError::numerical("zero-forcing channel is singular even after loading"))?
        }
    };
    let w = e.adjoint() * inv;

    let slots = frame.slots();
    let mut rx = CMat::zeros(k, slots);
    let mut scale_sum = 0.0;
    for mu in 0..slots {
        let x = &w * frame.ideal.column(mu);
        let norm = x.norm();
        if norm == 0.0 {
            return Err(SimError::numerical("zero-forcing produced a zero transmit vector"));
        }
        scale_sum += 1.0 / norm;
        let distorted = CVec::from_fn(k, |i, _| apply_nld(x[i] / norm, saleh));
        rx.column_mut(mu).copy_from(&(&e * distorted));
    }
    let e_eff = &e * &w * Complex64::new(scale_sum / slots as f64, 0.0);
    Ok((rx, e_eff))
}

/// One-shot zero-forcing baseline: transmit, add noise at `sigma2`, detect.
/// Returns the symbol error ratio and the sum rate.
pub fn zf_baseline<R: Rng>(
    channels: &ChannelSet,
    phases: &PhaseStack,
    frame: &Frame,
    saleh: &crate::signal::SalehParams,
    sigma2: f64,
    rng: &mut R,
) -> Result<(f64, f64), SimError> {
    let (rx, e_eff) = zf_transmit(channels, phases, frame, saleh)?;
    let mut errors = 0usize;
    for mu in 0..frame.slots() {
        let noisy = crate::signal::add_noise(&rx.column(mu).into_owned(), sigma2, rng);
        for k in 0..frame.users() {
            if detect_qpsk_index(noisy[k]) != detect_qpsk_index(frame.ideal[(k, mu)]) {
                errors += 1;
            }
        }
    }
    let ser = errors as f64 / (frame.users() * frame.slots()) as f64;
    Ok((ser, sum_rate(&e_eff, sigma2)))
}

/// Noise evaluation of one frame at one SNR point: errors, per-frame sum
/// rate, and the digest of the standard-normal noise draws (shared across
/// strategies at the same frame and SNR index).
pub struct NoiseEval {
    pub errors: usize,
    pub symbols: usize,
    pub sum_rate: f64,
    pub noise_hash: [u8; 32],
}

pub fn evaluate_at_snr(
    run: &FrameRun,
    snr_db: f64,
    master_seed: u64,
    frame_idx: u64,
    snr_idx: u64,
) -> NoiseEval {
    let k = run.frame.users();
    let slots = run.frame.slots();
    let sigma2 = run.mean_rx_power / 10f64.powf(snr_db / 10.0);
    let mut rng = derive_rng(master_seed, &[("frame", frame_idx), ("noise", snr_idx)]);
    let mut hasher = StreamHasher::new();
    let amp = (sigma2 / 2.0).sqrt();
    let mut errors = 0usize;
    for mu in 0..slots {
        for user in 0..k {
            let zr: f64 = rng.sample(StandardNormal);
            let zi: f64 = rng.sample(StandardNormal);
            hasher.absorb_f64s([&zr, &zi]);
            let y = run.rx[(user, mu)] + Complex64::new(amp * zr, amp * zi);
            if detect_qpsk_index(y) != detect_qpsk_index(run.frame.ideal[(user, mu)]) {
                errors += 1;
            }
        }
    }
    NoiseEval {
        errors,
        symbols: k * slots,
        sum_rate: if sigma2 > 0.0 { sum_rate(&run.effective, sigma2) } else { 0.0 },
        noise_hash: hasher.finish(),
    }
}

#[derive(Debug, Clone, Copy)]
pub struct SerEstimate {
    pub ser: f64,
    pub stderr: f64,
}

/// Monte Carlo SER of one strategy at one SNR point, over `frames`
/// independently faded frames.
pub fn monte_carlo_ser(
    cfg: &ScenarioConfig,
    strategy: Strategy,
    snr_db: f64,
    frames: usize,
) -> Result<SerEstimate, SimError> {
    let model = ChannelModel::new(cfg)?;
    let evals: Vec<NoiseEval> = (0..frames as u64)
        .into_par_iter()
        .map(|f| {
            let run = run_frame(&model, cfg, strategy, f)?;
            Ok(evaluate_at_snr(&run, snr_db, cfg.master_seed, f, 0))
        })
        .collect::<Result<_, SimError>>()?;
    let errors: usize = evals.iter().map(|e| e.errors).sum();
    let symbols: usize = evals.iter().map(|e| e.symbols).sum();
    Ok(ser_estimate(errors, symbols))
}

fn ser_estimate(errors: usize, symbols: usize) -> SerEstimate {
    let ser = errors as f64 / symbols as f64;
    SerEstimate {
        ser,
        stderr: (ser * (1.0 - ser) / symbols as f64).sqrt(),
    }
}

/// One row of a sweep result: a strategy evaluated at one axis value.
#[derive(Debug, Clone)]
pub struct PointRow {
    pub axis_value: f64,
    pub strategy: String,
    pub ser: f64,
    pub ser_stderr: f64,
    pub sum_rate: f64,
    pub min_margin: f64,
    pub wall_ms: f64,
}

#[derive(Debug, Clone, Copy)]
pub struct SweepOptions {
    /// When false, wall-clock columns are written as zero so reruns are
    /// byte-identical.
    pub record_timing: bool,
}

impl Default for SweepOptions {
    fn default() -> Self {
        Self { record_timing: true }
    }
}

/// Runs the configured sweep. Frames are evaluated in parallel; results are
/// reduced in frame order, and paired-realization hashes are asserted across
/// strategies at every point.
pub fn run_sweep(cfg: &ScenarioConfig, opts: SweepOptions) -> Result<Vec<PointRow>, SimError> {
    let sweep = &cfg.sweep;
    let mut rows = Vec::new();
    match sweep.axis {
        SweepAxis::SnrDb => {
            let model = ChannelModel::new(cfg)?;
            let mut reference: Option<Vec<[u8; 32]>> = None;
            let mut noise_reference: Option<Vec<[u8; 32]>> = None;
            for &strategy in &sweep.strategies {
                let started = std::time::Instant::now();
                let runs: Vec<FrameRun> = (0..sweep.frames as u64)
                    .into_par_iter()
                    .map(|f| run_frame(&model, cfg, strategy, f))
                    .collect::<Result<_, SimError>>()?;
                assert_paired_realizations(&mut reference, &runs, &strategy.label());
                let elapsed = started.elapsed().as_secs_f64() * 1e3;
                let per_point = elapsed / sweep.values.len() as f64;

                let mut noise_hashes = Vec::new();
                for (snr_idx, &snr_db) in sweep.values.iter().enumerate() {
                    let mut errors = 0usize;
                    let mut symbols = 0usize;
                    let mut rate_sum = 0.0;
                    let mut margin_sum = 0.0;
                    for (f, run) in runs.iter().enumerate() {
                        let eval =
                            evaluate_at_snr(run, snr_db, cfg.master_seed, f as u64, snr_idx as u64);
                        errors += eval.errors;
                        symbols += eval.symbols;
                        rate_sum += eval.sum_rate;
                        margin_sum += run.min_margin;
                        noise_hashes.push(eval.noise_hash);
                    }
                    let est = ser_estimate(errors, symbols);
                    rows.push(PointRow {
                        axis_value: snr_db,
                        strategy: strategy.label(),
                        ser: est.ser,
                        ser_stderr: est.stderr,
                        sum_rate: rate_sum / runs.len() as f64,
                        min_margin: margin_sum / runs.len() as f64,
                        wall_ms: if opts.record_timing { per_point } else { 0.0 },
                    });
                }
                match &noise_reference {
                    None => noise_reference = Some(noise_hashes),
                    Some(reference) => assert_eq!(
                        reference, &noise_hashes,
                        "noise realizations diverged between strategies"
                    ),
                }
            }
        }
        SweepAxis::Layers | SweepAxis::AtomsPerLayer => {
            for &value in &sweep.values {
                let mut scenario = cfg.clone();
                match sweep.axis {
                    SweepAxis::Layers => scenario.layers = value as usize,
                    SweepAxis::AtomsPerLayer => {
                        let side = (value as f64).sqrt().round() as usize;
                        scenario.nx = side;
                        scenario.ny = side;
                    }
                    SweepAxis::SnrDb => unreachable!(),
                }
                scenario.validate()?;
                let model = ChannelModel::new(&scenario)?;
                let mut reference: Option<Vec<[u8; 32]>> = None;
                for &strategy in &sweep.strategies {
                    let started = std::time::Instant::now();
                    let runs: Vec<FrameRun> = (0..sweep.frames as u64)
                        .into_par_iter()
                        .map(|f| run_frame(&model, &scenario, strategy, f))
                        .collect::<Result<_, SimError>>()?;
                    assert_paired_realizations(&mut reference, &runs, &strategy.label());
                    let mut errors = 0usize;
                    let mut symbols = 0usize;
                    let mut rate_sum = 0.0;
                    let mut margin_sum = 0.0;
                    for (f, run) in runs.iter().enumerate() {
                        let eval = evaluate_at_snr(run, sweep.snr_db, scenario.master_seed, f as u64, 0);
                        errors += eval.errors;
                        symbols += eval.symbols;
                        rate_sum += eval.sum_rate;
                        margin_sum += run.min_margin;
                    }
                    let est = ser_estimate(errors, symbols);
                    rows.push(PointRow {
                        axis_value: value,
                        strategy: strategy.label(),
                        ser: est.ser,
                        ser_stderr: est.stderr,
                        sum_rate: rate_sum / runs.len() as f64,
                        min_margin: margin_sum / runs.len() as f64,
                        wall_ms: if opts.record_timing {
                            started.elapsed().as_secs_f64() * 1e3
                        } else {
                            0.0
                        },
                    });
                }
            }
        }
    }
    Ok(rows)
}

fn assert_paired_realizations(
    reference: &mut Option<Vec<[u8; 32]>>,
    runs: &[FrameRun],
    strategy: &str,
) {
    let hashes: Vec<[u8; 32]> = runs.iter().map(|r| r.realization_hash).collect();
    match reference {
        None => *reference = Some(hashes),
        Some(expected) => assert_eq!(
            expected, &hashes,
            "channel/symbol realizations diverged for strategy {strategy}"
        ),
    }
}
