//! Greedy safety-margin antenna selection, unit-sphere power allocation, and
//! the alternating loop that combines them with the phase optimizer.
//!
//! Selection is combinatorial, so it grows greedily: stage k tries every
//! unchosen antenna as the carrier of user k's stream (streams map to users
//! in selection order), scores the worst margin over the k users served so
//! far, and keeps the best antenna. Power allocation reuses the manifold
//! descent on the unit sphere in R^K: entries may go negative (a sign is a
//! half-turn phase shift in the wave domain); allocations are reported as
//! squared entries.
//!
//! Every block of the alternating loop keeps its incumbent when the
//! candidate would lower the exact frame margin, so the recorded history
//! never decreases.

use crate::channel::ChannelSet;
use crate::error::SimError;
use crate::manifold::{descend, lse, softmax_weights, DescentOutcome, DescentParams, SpherePoint, UnitSphere};
use crate::rom::{margin_of, rom, RomParams};
use crate::signal::{effective_matrix, safety_margin, Frame, NldMode, PhaseStack};
use crate::{CMat, RVec};

/// Result of one greedy selection pass: antenna indices in selection order
/// (stream i rides `chosen[i]`) and the margin of the completed set.
#[derive(Debug, Clone, PartialEq)]
pub struct SelectionState {
    pub chosen: Vec<usize>,
    pub margin_best: f64,
}

/// Greedy safety-margin antenna selection.
///
/// Partial stages (k < K) transmit the first k users' streams at uniform
/// amplitude 1/sqrt(k); the final stage applies `power` when given. Ties
/// break toward the lowest antenna index.
pub fn greedy_as(
    channels: &ChannelSet,
    phases: &PhaseStack,
    frame: &Frame,
    mode: NldMode,
    power: Option<&RVec>,
    k_users: usize,
    phi: f64,
) -> Result<SelectionState, SimError> {
    let m = channels.antennas();
    if k_users > m {
        return Err(SimError::argument(format!(
            "cannot select {k_users} antennas out of {m}"
        )));
    }
    if k_users == 0 || k_users > frame.users() {
        return Err(SimError::argument("selection size must be 1..=frame users"));
    }
    if let Some(p) = power {
        if p.len() != k_users {
            return Err(SimError::argument("power vector length != user count"));
        }
    }

    // Per-antenna composite gains: column m is Hᴴ·G·q_m.
    let all: Vec<usize> = (0..m).collect();
    let gains = effective_matrix(channels, phases, &all, None)?;
    let symbols = mode.chain_symbols(frame);
    let slots = frame.slots();

    let mut chosen: Vec<usize> = Vec::with_capacity(k_users);
    let mut margin_best = f64::NEG_INFINITY;
    for stage in 1..=k_users {
        let amps: Vec<f64> = if stage == k_users {
            match power {
                Some(p) => p.iter().cloned().collect(),
                None => vec![1.0 / (stage as f64).sqrt(); stage],
            }
        } else {
            vec![1.0 / (stage as f64).sqrt(); stage]
        };
        let mut best: Option<(usize, f64)> = None;
        for cand in 0..m {
            if chosen.contains(&cand) {
                continue;
            }
            let mut set = chosen.clone();
            set.push(cand);
            let mut worst = f64::INFINITY;
            for mu in 0..slots {
                for user in 0..stage {
                    let mut y = num_complex::Complex64::ZERO;
                    for (i, &ant) in set.iter().enumerate() {
                        y += gains[(user, ant)] * symbols[(i, mu)] * amps[i];
                    }
                    worst = worst.min(safety_margin(y, frame.ideal[(user, mu)], phi));
                }
            }
            if best.map_or(true, |(_, b)| worst > b) {
                best = Some((cand, worst));
            }
        }
        let (winner, margin) = best.expect("at least one unchosen antenna");
        chosen.push(winner);
        margin_best = margin;
    }
    Ok(SelectionState { chosen, margin_best })
}

/// Per-(slot, user) real splits of the composite per-stream gains the power
/// vector multiplies; everything the smoothed power objective needs.
#[derive(Debug, Clone)]
pub struct PowerContext {
    pub tan_phi: f64,
    pub users: usize,
    pub slots: usize,
    /// Re/Im of B[k,·]·Diag(s_μ)·e^{−j∠s̃_{μ,k}} per (slot, user), K entries
    /// each, index μ·K + k.
    pub h_re: Vec<RVec>,
    pub h_im: Vec<RVec>,
    /// Largest coefficient-row norm; the solver divides terms by this so the
    /// smoothing temperature is read relative to the problem scale.
    pub scale: f64,
    rows: Vec<PowerRows>,
}

#[derive(Debug, Clone)]
struct PowerRows {
    odd: RVec,
    even: RVec,
}

/// Builds the power-allocation context for a fixed selection and phase
/// stack.
pub fn power_context(
    channels: &ChannelSet,
    phases: &PhaseStack,
    selection: &[usize],
    frame: &Frame,
    mode: NldMode,
    phi: f64,
) -> Result<PowerContext, SimError> {
    let b = effective_matrix(channels, phases, selection, None)?;
    Ok(PowerContext::assemble(&b, frame, mode, phi))
}

impl PowerContext {
    pub fn assemble(b: &CMat, frame: &Frame, mode: NldMode, phi: f64) -> Self {
        let users = frame.users();
        let slots = frame.slots();
        let symbols = mode.chain_symbols(frame);
        let t = phi.tan();
        let mut h_re = Vec::with_capacity(users * slots);
        let mut h_im = Vec::with_capacity(users * slots);
        let mut rows = Vec::with_capacity(users * slots);
        let mut scale: f64 = 0.0;
        for mu in 0..slots {
            for k in 0..users {
                let s = frame.ideal[(k, mu)];
                let rot = s.conj() / s.norm();
                let mut re = RVec::zeros(users);
                let mut im = RVec::zeros(users);
                for i in 0..users {
                    let r = b[(k, i)] * symbols[(i, mu)] * rot;
                    re[i] = r.re;
                    im[i] = r.im;
                }
                let pr = PowerRows { odd: &im - &re * t, even: -(&im + &re * t) };
                scale = scale.max(pr.odd.norm()).max(pr.even.norm());
                rows.push(pr);
                h_re.push(re);
                h_im.push(im);
            }
        }
        if scale == 0.0 {
            scale = 1.0;
        }
        Self { tan_phi: t, users, slots, h_re, h_im, scale, rows }
    }

    pub fn term_count(&self) -> usize {
        2 * self.users * self.slots
    }

    /// The 2KU real terms at an ambient power vector; per (slot, user) the
    /// maximum of the pair is the negated margin.
    pub fn terms(&self, p: &RVec) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.term_count());
        for r in &self.rows {
            out.push(r.odd.dot(p));
            out.push(r.even.dot(p));
        }
        out
    }
}

/// Margin terms at a feasible power point.
pub fn pa_terms(ctx: &PowerContext, p: &SpherePoint) -> Vec<f64> {
    ctx.terms(p.vec())
}

/// Smoothed power objective and Euclidean gradient.
pub fn pa_objective(ctx: &PowerContext, p: &RVec, eps_p: f64) -> (f64, RVec) {
    let terms = ctx.terms(p);
    let value = lse(&terms, eps_p);
    let weights = softmax_weights(&terms, eps_p);
    let mut grad = RVec::zeros(p.len());
    for (pair, r) in ctx.rows.iter().enumerate() {
        grad += &r.odd * weights[2 * pair];
        grad += &r.even * weights[2 * pair + 1];
    }
    (value, grad)
}

/// Scale-normalized power objective the sphere solver descends.
pub fn scaled_pa_objective(ctx: &PowerContext, p: &RVec, eps_p: f64) -> (f64, RVec) {
    let inv = 1.0 / ctx.scale;
    let terms: Vec<f64> = ctx.terms(p).into_iter().map(|t| t * inv).collect();
    let value = lse(&terms, eps_p);
    let weights = softmax_weights(&terms, eps_p);
    let mut grad = RVec::zeros(p.len());
    for (pair, r) in ctx.rows.iter().enumerate() {
        grad += &r.odd * (weights[2 * pair] * inv);
        grad += &r.even * (weights[2 * pair + 1] * inv);
    }
    (value, grad)
}

/// Minimizes the smoothed power objective on the unit sphere.
pub fn optimize_pa(
    ctx: &PowerContext,
    p0: SpherePoint,
    eps_p: f64,
    descent_params: &DescentParams,
) -> Result<(SpherePoint, DescentOutcome<RVec>), SimError> {
    let outcome = descend(
        &UnitSphere,
        |p: &RVec| scaled_pa_objective(ctx, p, eps_p),
        p0.vec().clone(),
        descent_params,
    )?;
    let point = SpherePoint::new(outcome.point.clone())?;
    Ok((point, outcome))
}

#[derive(Debug, Clone, Copy)]
pub struct AoOptions {
    pub selection: bool,
    pub power: bool,
}

impl Default for AoOptions {
    fn default() -> Self {
        Self { selection: true, power: true }
    }
}

/// Margins recorded after each block of one alternating round.
#[derive(Debug, Clone, Copy)]
pub struct AoHistoryRow {
    pub round: usize,
    pub after_selection: f64,
    pub after_phases: f64,
    pub after_power: f64,
}

#[derive(Debug, Clone)]
pub struct AoOutcome {
    pub selection: SelectionState,
    pub phases: PhaseStack,
    pub power: SpherePoint,
    pub history: Vec<AoHistoryRow>,
}

impl AoOutcome {
    pub fn final_margin(&self) -> f64 {
        self.history.last().map_or(f64::NEG_INFINITY, |r| r.after_power)
    }
}

/// Alternating optimization of antenna selection, phases, and power for one
/// frame. Blocks run in that order each round; disabled blocks keep the
/// identity selection (first K antennas) and uniform power. With M = K the
/// selection is forced and the loop degenerates to phases plus power.
///
/// Terminates after `ao_rounds` rounds or when the margin change between
/// rounds satisfies the same tolerance rule as the phase optimizer.
#[allow(clippy::too_many_arguments)]
pub fn rom_ao(
    channels: &ChannelSet,
    frame: &Frame,
    mode: NldMode,
    k_users: usize,
    params: &RomParams,
    eps_p: f64,
    ao_rounds: usize,
    opts: AoOptions,
    init: PhaseStack,
) -> Result<AoOutcome, SimError> {
    let m = channels.antennas();
    if k_users > m {
        return Err(SimError::argument(format!("K = {k_users} exceeds M = {m}")));
    }
    let mut selection: Vec<usize> = (0..k_users).collect();
    let mut power = SpherePoint::uniform(k_users);
    let mut phases = init;
    let mut margin = margin_of(
        channels, &phases, &selection, Some(power.vec()), frame, mode, params.phi,
    )?;
    // margins are compared in the frame's natural unit, as in the phase loop
    let margin_unit = {
        let e = effective_matrix(channels, &phases, &selection, Some(power.vec()))?;
        let y = &e * mode.chain_symbols(frame);
        (y.iter().map(|v| v.norm_sqr()).sum::<f64>() / y.len() as f64)
            .sqrt()
            .max(f64::MIN_POSITIVE)
    };
    let mut history: Vec<AoHistoryRow> = Vec::new();

    for round in 1..=ao_rounds {
        if opts.selection && m > k_users {
            let cand = greedy_as(channels, &phases, frame, mode, Some(power.vec()), k_users, params.phi)?;
            let cand_margin = margin_of(
                channels, &phases, &cand.chosen, Some(power.vec()), frame, mode, params.phi,
            )?;
            if cand_margin >= margin {
                selection = cand.chosen;
                margin = cand_margin;
            }
        }
        let after_selection = margin;

        let rom_out = rom(
            channels,
            &selection,
            Some(power.vec()),
            frame,
            mode,
            params,
            phases,
        )?;
        margin = margin.max(rom_out.final_margin());
        phases = rom_out.phases;
        let after_phases = margin;

        if opts.power {
            let ctx = power_context(channels, &phases, &selection, frame, mode, params.phi)?;
            let (cand, _) = optimize_pa(&ctx, power.clone(), eps_p, &DescentParams {
                epsilon: eps_p,
                ..params.descent
            })?;
            let cand_margin = margin_of(
                channels, &phases, &selection, Some(cand.vec()), frame, mode, params.phi,
            )?;
            if cand_margin >= margin {
                power = cand;
                margin = cand_margin;
            }
        }
        let after_power = margin;

        history.push(AoHistoryRow { round, after_selection, after_phases, after_power });

        if round >= 2 {
            let prev = history[round - 2].after_power;
            let delta = (after_power - prev).abs();
            let converged = if prev.abs() < 1e-6 * margin_unit {
                delta <= params.eps_conv * margin_unit
            } else {
                delta / prev.abs() <= params.eps_conv
            };
            if converged {
                break;
            }
        }
    }

    Ok(AoOutcome {
        selection: SelectionState { chosen: selection, margin_best: margin },
        phases,
        power,
        history,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seeding::derive_rng;
    use crate::signal::{SalehParams, QPSK_PHI};
    use crate::testutil::random_channels;
    use approx::assert_abs_diff_eq;
    use num_complex::Complex64;
    use rand::Rng;

    fn setup(rng: &mut impl Rng, n: usize, m: usize, k: usize, layers: usize, slots: usize)
        -> (crate::channel::ChannelSet, PhaseStack, Frame) {
        let channels = random_channels(rng, n, m, k, layers);
        let phases = PhaseStack::random(layers, n, rng);
        let frame = Frame::random(k, slots, &SalehParams::default(), rng);
        (channels, phases, frame)
    }

    /// Margin of an explicit ordered selection under stage-K amplitudes.
    fn selection_margin(
        channels: &crate::channel::ChannelSet,
        phases: &PhaseStack,
        frame: &Frame,
        set: &[usize],
        power: Option<&RVec>,
    ) -> f64 {
        let amps: RVec = match power {
            Some(p) => p.clone(),
            None => RVec::from_element(set.len(), 1.0 / (set.len() as f64).sqrt()),
        };
        margin_of(channels, phases, set, Some(&amps), frame, NldMode::Aware, QPSK_PHI).unwrap()
    }

    fn ordered_pairs(m: usize) -> Vec<Vec<usize>> {
        let mut out = Vec::new();
        for a in 0..m {
            for b in 0..m {
                if a != b {
                    out.push(vec![a, b]);
                }
            }
        }
        out
    }

    #[test]
    fn single_user_greedy_is_exhaustive() {
        let mut rng = derive_rng(31, &[("as", 0)]);
        for _ in 0..10 {
            let (channels, phases, frame) = setup(&mut rng, 4, 5, 1, 2, 3);
            let got = greedy_as(&channels, &phases, &frame, NldMode::Aware, None, 1, QPSK_PHI).unwrap();
            let mut best = (0, f64::NEG_INFINITY);
            for m in 0..5 {
                let v = selection_margin(&channels, &phases, &frame, &[m], None);
                if v > best.1 {
                    best = (m, v);
                }
            }
            assert_eq!(got.chosen, vec![best.0]);
            assert_abs_diff_eq!(got.margin_best, best.1, epsilon = 1e-12);
        }
    }

    #[test]
    fn greedy_never_beats_exhaustive_and_sometimes_matches() {
        let mut rng = derive_rng(32, &[("as", 1)]);
        let mut matched = 0;
        for _ in 0..20 {
            let (channels, phases, frame) = setup(&mut rng, 4, 4, 2, 2, 4);
            let greedy = greedy_as(&channels, &phases, &frame, NldMode::Aware, None, 2, QPSK_PHI).unwrap();
            let greedy_val = selection_margin(&channels, &phases, &frame, &greedy.chosen, None);
            let best = ordered_pairs(4)
                .into_iter()
                .map(|set| selection_margin(&channels, &phases, &frame, &set, None))
                .fold(f64::NEG_INFINITY, f64::max);
            assert!(
                greedy_val <= best + 1e-12,
                "greedy {greedy_val} exceeds exhaustive {best}"
            );
            if (greedy_val - best).abs() <= 1e-9 {
                matched += 1;
            }
        }
        assert!(matched >= 1, "greedy never matched the exhaustive optimum");
    }

    #[test]
    fn greedy_output_is_duplicate_free_and_full() {
        let mut rng = derive_rng(33, &[("as", 2)]);
        for _ in 0..10 {
            let (channels, phases, frame) = setup(&mut rng, 4, 6, 3, 2, 3);
            let got = greedy_as(&channels, &phases, &frame, NldMode::Aware, None, 3, QPSK_PHI).unwrap();
            assert_eq!(got.chosen.len(), 3);
            let mut sorted = got.chosen.clone();
            sorted.sort_unstable();
            sorted.dedup();
            assert_eq!(sorted.len(), 3);
            assert!(got.chosen.iter().all(|&m| m < 6));
        }
    }

    #[test]
    fn greedy_is_stable_under_antenna_relabeling() {
        let mut rng = derive_rng(34, &[("as", 3)]);
        let (mut channels, phases, frame) = setup(&mut rng, 4, 5, 2, 2, 3);
        let base = greedy_as(&channels, &phases, &frame, NldMode::Aware, None, 2, QPSK_PHI).unwrap();
        // rotate antenna labels by 2
        let m = 5;
        let perm: Vec<usize> = (0..m).map(|i| (i + 2) % m).collect();
        let orig = channels.q_first.clone();
        for (new, &old) in perm.iter().enumerate() {
            channels.q_first.column_mut(new).copy_from(&orig.column(old));
        }
        let permuted = greedy_as(&channels, &phases, &frame, NldMode::Aware, None, 2, QPSK_PHI).unwrap();
        let expect: Vec<usize> = base
            .chosen
            .iter()
            .map(|&c| perm.iter().position(|&p| p == c).unwrap())
            .collect();
        assert_eq!(permuted.chosen, expect);
    }

    #[test]
    fn pa_margin_identity() {
        let mut rng = derive_rng(35, &[("pa", 0)]);
        for _ in 0..20 {
            let k = rng.random_range(1..=3);
            let (channels, phases, frame) = setup(&mut rng, 4, k, k, 2, 3);
            let sel: Vec<usize> = (0..k).collect();
            let ctx = power_context(&channels, &phases, &sel, &frame, NldMode::Aware, QPSK_PHI).unwrap();
            let p = SpherePoint::uniform(k);
            let terms = pa_terms(&ctx, &p);
            let margin = margin_of(
                &channels, &phases, &sel, Some(p.vec()), &frame, NldMode::Aware, QPSK_PHI,
            )
            .unwrap();
            let worst_pair = (0..ctx.users * ctx.slots)
                .map(|pair| terms[2 * pair].max(terms[2 * pair + 1]))
                .fold(f64::NEG_INFINITY, f64::max);
            assert!(
                (worst_pair + margin).abs() <= 1e-10 * (1.0 + margin.abs()),
                "max term {worst_pair} vs -margin {}",
                -margin
            );
        }
    }

    #[test]
    fn pa_terms_scale_linearly_with_gains() {
        let mut rng = derive_rng(36, &[("pa", 1)]);
        let (channels, phases, frame) = setup(&mut rng, 4, 2, 2, 2, 2);
        let sel = [0usize, 1];
        let b = effective_matrix(&channels, &phases, &sel, None).unwrap();
        let ctx = PowerContext::assemble(&b, &frame, NldMode::Aware, QPSK_PHI);
        let scaled = PowerContext::assemble(&(&b * Complex64::new(2.5, 0.0)), &frame, NldMode::Aware, QPSK_PHI);
        let p = SpherePoint::uniform(2);
        for (a, b) in pa_terms(&ctx, &p).iter().zip(pa_terms(&scaled, &p).iter()) {
            assert_abs_diff_eq!(b, &(2.5 * a), epsilon = 1e-12);
        }
    }

    #[test]
    fn single_user_pa_reduces_to_scalar_margin() {
        let mut rng = derive_rng(37, &[("pa", 2)]);
        let (channels, phases, frame) = setup(&mut rng, 4, 1, 1, 2, 2);
        let ctx = power_context(&channels, &phases, &[0], &frame, NldMode::Aware, QPSK_PHI).unwrap();
        let p = SpherePoint::new(RVec::from_element(1, 1.0)).unwrap();
        let terms = pa_terms(&ctx, &p);
        let e = effective_matrix(&channels, &phases, &[0], None).unwrap();
        for mu in 0..2 {
            let y = e[(0, 0)] * frame.distorted[(0, mu)];
            let margin = crate::signal::safety_margin(y, frame.ideal[(0, mu)], QPSK_PHI);
            assert_abs_diff_eq!(terms[2 * mu].max(terms[2 * mu + 1]), -margin, epsilon = 1e-12);
        }
    }

    #[test]
    fn single_user_pa_optimum_is_unit_allocation() {
        let mut rng = derive_rng(38, &[("pa", 3)]);
        let (channels, phases, frame) = setup(&mut rng, 3, 1, 1, 1, 2);
        let ctx = power_context(&channels, &phases, &[0], &frame, NldMode::Aware, QPSK_PHI).unwrap();
        let (p, _) = optimize_pa(
            &ctx,
            SpherePoint::uniform(1),
            10f64.powf(-1.5),
            &DescentParams::default(),
        )
        .unwrap();
        assert_abs_diff_eq!(p.vec()[0].abs(), 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(p.allocation()[0], 1.0, epsilon = 1e-12);
    }

    #[test]
    fn symmetric_users_get_symmetric_allocations() {
        let mut rng = derive_rng(39, &[("pa", 4)]);
        let mut gaps: Vec<f64> = Vec::new();
        for _ in 0..11 {
            // two users whose gain rows are entry swaps of each other, so the
            // objective is invariant under swapping the power entries
            let frame = Frame::random(2, 4, &SalehParams::default(), &mut rng);
            let mut b = CMat::zeros(2, 2);
            let (a, c) = (
                Complex64::new(rng.random_range(0.5..1.5), rng.random_range(-0.5..0.5)),
                Complex64::new(rng.random_range(-0.5..0.5), rng.random_range(-0.3..0.3)),
            );
            b[(0, 0)] = a;
            b[(0, 1)] = c;
            b[(1, 1)] = a;
            b[(1, 0)] = c;
            // mirrored symbols keep the full term set swap-invariant
            let mut ideal = frame.ideal.clone();
            for mu in 0..4 {
                ideal[(1, mu)] = ideal[(0, mu)];
            }
            let frame = Frame::from_ideal(ideal, &SalehParams::default());
            let ctx = PowerContext::assemble(&b, &frame, NldMode::Aware, QPSK_PHI);
            let (p, _) = optimize_pa(
                &ctx,
                SpherePoint::uniform(2),
                10f64.powf(-1.5),
                &DescentParams::default(),
            )
            .unwrap();
            let alloc = p.allocation();
            gaps.push((alloc[0] - alloc[1]).abs());
        }
        gaps.sort_by(f64::total_cmp);
        assert!(gaps[gaps.len() / 2] <= 0.05, "median gap {} too wide", gaps[gaps.len() / 2]);
    }

    #[test]
    fn forced_selection_with_single_round_matches_plain_rom() {
        let mut rng = derive_rng(40, &[("ao", 0)]);
        let (channels, phases, frame) = setup(&mut rng, 4, 2, 2, 2, 3);
        let params = RomParams {
            max_outer: 4,
            descent: DescentParams { max_inner: 30, ..Default::default() },
            ..Default::default()
        };
        let uniform = SpherePoint::uniform(2);
        let plain = rom(
            &channels, &[0, 1], Some(uniform.vec()), &frame, NldMode::Aware, &params, phases.clone(),
        )
        .unwrap();
        let ao = rom_ao(
            &channels,
            &frame,
            NldMode::Aware,
            2,
            &params,
            10f64.powf(-1.5),
            1,
            AoOptions { selection: true, power: false },
            phases,
        )
        .unwrap();
        assert_eq!(ao.selection.chosen, vec![0, 1]);
        assert_eq!(ao.phases, plain.phases);
        for (a, b) in ao.history.iter().zip(plain.history.last()) {
            assert_eq!(a.after_phases.to_bits(), b.min_margin.to_bits());
        }
    }

    #[test]
    fn ao_history_never_decreases() {
        let mut rng = derive_rng(41, &[("ao", 1)]);
        for _ in 0..5 {
            let (channels, phases, frame) = setup(&mut rng, 4, 5, 2, 2, 3);
            let params = RomParams {
                max_outer: 3,
                descent: DescentParams { max_inner: 25, ..Default::default() },
                ..Default::default()
            };
            let out = rom_ao(
                &channels,
                &frame,
                NldMode::Aware,
                2,
                &params,
                10f64.powf(-1.5),
                3,
                AoOptions::default(),
                phases.clone(),
            )
            .unwrap();
            let mut prev = f64::NEG_INFINITY;
            for row in &out.history {
                assert!(row.after_selection >= prev);
                assert!(row.after_phases >= row.after_selection);
                assert!(row.after_power >= row.after_phases);
                prev = row.after_power;
            }
        }
    }
}
