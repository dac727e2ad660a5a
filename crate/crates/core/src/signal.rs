//! Finite-alphabet symbols, amplifier distortion, and constructive-
//! interference geometry.
//!
//! Transmitted symbols are QPSK; the power amplifier applies a memoryless
//! Saleh nonlinearity (rational AM/AM and AM/PM curves). A received symbol
//! decodes correctly whenever it falls inside its quadrant-aligned cone of
//! half-angle φ = π/4; the signed distance from the cone boundary is the
//! safety margin the optimizers maximize.

use crate::channel::ChannelSet;
use crate::error::SimError;
use crate::manifold::FEASIBILITY_TOL;
use crate::{CMat, CVec, RVec};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use std::f64::consts::FRAC_1_SQRT_2;

/// The four unit-energy QPSK symbols in Gray order: bit pairs
/// 00, 01, 11, 10 map to indices 0..4 (one quadrant counter-clockwise per
/// index starting from the first quadrant).
pub const QPSK_SYMBOLS: [Complex64; 4] = [
    Complex64::new(FRAC_1_SQRT_2, FRAC_1_SQRT_2),
    Complex64::new(-FRAC_1_SQRT_2, FRAC_1_SQRT_2),
    Complex64::new(-FRAC_1_SQRT_2, -FRAC_1_SQRT_2),
    Complex64::new(FRAC_1_SQRT_2, -FRAC_1_SQRT_2),
];

/// Half-angle of the QPSK constructive-interference cone.
pub const QPSK_PHI: f64 = std::f64::consts::FRAC_PI_4;

/// Saleh amplifier model: amplitude gain/compression and phase
/// gain/compression factors. Defaults are the classic measured values.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SalehParams {
    pub alpha_a: f64,
    pub beta_a: f64,
    pub alpha_phi: f64,
    pub beta_phi: f64,
}

impl Default for SalehParams {
    fn default() -> Self {
        Self {
            alpha_a: 1.6623,
            beta_a: 0.0552,
            alpha_phi: 0.1533,
            beta_phi: 0.3456,
        }
    }
}

impl SalehParams {
    /// Pass-through amplifier: A(a) = a, φ(a) = 0.
    pub fn identity() -> Self {
        Self { alpha_a: 1.0, beta_a: 0.0, alpha_phi: 0.0, beta_phi: 0.0 }
    }

    pub fn validate(&self) -> Result<(), SimError> {
        for (name, v) in [
            ("alpha_a", self.alpha_a),
            ("beta_a", self.beta_a),
            ("alpha_phi", self.alpha_phi),
            ("beta_phi", self.beta_phi),
        ] {
            if !(v >= 0.0) {
                return Err(SimError::Config {
                    field: "saleh",
                    reason: format!("{name} must be nonnegative, got {v}"),
                });
            }
        }
        Ok(())
    }

    /// AM/AM curve A(a) = α_a·a / (1 + β_a·a²).
    pub fn amplitude(&self, a: f64) -> f64 {
        self.alpha_a * a / (1.0 + self.beta_a * a * a)
    }

    /// AM/PM curve φ(a) = α_φ·a² / (1 + β_φ·a²), radians.
    pub fn phase_shift(&self, a: f64) -> f64 {
        self.alpha_phi * a * a / (1.0 + self.beta_phi * a * a)
    }
}

/// Applies the Saleh nonlinearity to one modulated symbol: the output keeps
/// the input argument plus the AM/PM offset, with the AM/AM amplitude.
/// Zero maps to zero.
pub fn apply_nld(sym: Complex64, p: &SalehParams) -> Complex64 {
    let a = sym.norm();
    if a == 0.0 {
        return Complex64::ZERO;
    }
    let amp = p.amplitude(a);
    let arg = sym.arg() + p.phase_shift(a);
    Complex64::from_polar(amp, arg)
}

/// Gray-maps a bit stream onto QPSK symbols: 00→(1+j)/√2, 01→(−1+j)/√2,
/// 11→(−1−j)/√2, 10→(1−j)/√2. The bit count must be even.
pub fn modulate_qpsk(bits: &[bool]) -> Result<Vec<Complex64>, SimError> {
    if bits.len() % 2 != 0 {
        return Err(SimError::argument("QPSK needs an even number of bits"));
    }
    Ok(bits
        .chunks_exact(2)
        .map(|b| QPSK_SYMBOLS[symbol_index(b[0], b[1])])
        .collect())
}

fn symbol_index(b0: bool, b1: bool) -> usize {
    match (b0, b1) {
        (false, false) => 0,
        (false, true) => 1,
        (true, true) => 2,
        (true, false) => 3,
    }
}

/// Index of the QPSK symbol whose quadrant contains `y`.
///
/// Boundary ties resolve toward the positive-rotation (counter-clockwise)
/// neighbor, so e.g. the positive real axis decodes to the first-quadrant
/// symbol. The origin decodes to index 0. This convention is fixed: a zero
/// margin sits on the closed cone boundary and must count as correct.
pub fn detect_qpsk_index(y: Complex64) -> usize {
    if y.re > 0.0 && y.im >= 0.0 {
        0
    } else if y.re <= 0.0 && y.im > 0.0 {
        1
    } else if y.re < 0.0 && y.im <= 0.0 {
        2
    } else if y.re >= 0.0 && y.im < 0.0 {
        3
    } else {
        0 // origin
    }
}

/// The QPSK symbol whose quadrant contains `y`.
pub fn detect_qpsk(y: Complex64) -> Complex64 {
    QPSK_SYMBOLS[detect_qpsk_index(y)]
}

/// Gray bit pair for a detected symbol index.
pub fn demap_qpsk(index: usize) -> (bool, bool) {
    match index {
        0 => (false, false),
        1 => (false, true),
        2 => (true, true),
        3 => (true, false),
        _ => panic!("QPSK index out of range"),
    }
}

/// Safety margin of a received noise-free symbol `y` against the decision
/// boundary of the cone centered on `s_ideal`:
///
/// `Re{y·e^{−j∠s}}·tan φ − |Im{y·e^{−j∠s}}|`
///
/// Nonnegative means `y` lies in the closed constructive-interference region
/// and decodes correctly.
pub fn safety_margin(y: Complex64, s_ideal: Complex64, phi: f64) -> f64 {
    let n = s_ideal.norm();
    assert!(n > 0.0, "safety margin needs a nonzero reference symbol");
    let u = y * s_ideal.conj() / n;
    u.re * phi.tan() - u.im.abs()
}

/// Adds i.i.d. circularly-symmetric complex Gaussian noise of variance
/// `sigma2` per entry. `sigma2 = 0` is the identity.
pub fn add_noise<R: Rng>(y: &CVec, sigma2: f64, rng: &mut R) -> CVec {
    assert!(sigma2 >= 0.0);
    if sigma2 == 0.0 {
        return y.clone();
    }
    let s = (sigma2 / 2.0).sqrt();
    CVec::from_fn(y.len(), |i, _| {
        let nr: f64 = rng.sample(StandardNormal);
        let ni: f64 = rng.sample(StandardNormal);
        y[i] + Complex64::new(s * nr, s * ni)
    })
}

/// Which symbols drive the transmit chain during optimization: the amplifier
/// output (distortion-aware) or the ideal constellation (distortion-blind).
/// Margins are always measured against the ideal symbols, because the
/// receiver's decision regions are the fixed QPSK quadrants.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NldMode {
    Aware,
    Unaware,
}

impl NldMode {
    pub fn chain_symbols<'a>(&self, frame: &'a Frame) -> &'a CMat {
        match self {
            NldMode::Aware => &frame.distorted,
            NldMode::Unaware => &frame.ideal,
        }
    }
}

/// One coherence frame: K×U ideal QPSK symbols and their amplifier-distorted
/// counterparts. The distorted matrix is always the entrywise Saleh image of
/// the ideal one.
#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    pub ideal: CMat,
    pub distorted: CMat,
}

impl Frame {
    /// Builds a frame from 2·K·U bits, filled slot-major (all users of slot
    /// 0, then slot 1, ...).
    pub fn from_bits(bits: &[bool], users: usize, slots: usize, saleh: &SalehParams) -> Result<Self, SimError> {
        if bits.len() != 2 * users * slots {
            return Err(SimError::argument(format!(
                "expected {} bits for a {users}x{slots} frame, got {}",
                2 * users * slots,
                bits.len()
            )));
        }
        let symbols = modulate_qpsk(bits)?;
        let ideal = CMat::from_fn(users, slots, |k, u| symbols[u * users + k]);
        Ok(Self::from_ideal(ideal, saleh))
    }

    /// Draws 2·K·U random bits from `rng` and modulates them.
    pub fn random<R: Rng>(users: usize, slots: usize, saleh: &SalehParams, rng: &mut R) -> Self {
        let bits: Vec<bool> = (0..2 * users * slots).map(|_| rng.random()).collect();
        Self::from_bits(&bits, users, slots, saleh).expect("bit count is even by construction")
    }

    pub fn from_ideal(ideal: CMat, saleh: &SalehParams) -> Self {
        let distorted = ideal.map(|s| apply_nld(s, saleh));
        Self { ideal, distorted }
    }

    pub fn users(&self) -> usize {
        self.ideal.nrows()
    }

    pub fn slots(&self) -> usize {
        self.ideal.ncols()
    }
}

/// Per-layer unit-modulus phase vectors of the metasurface stack.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseStack {
    thetas: Vec<CVec>,
}

impl PhaseStack {
    /// Validates |θ_{l,n}| = 1 within [`FEASIBILITY_TOL`] for every element.
    pub fn new(thetas: Vec<CVec>) -> Result<Self, SimError> {
        for (l, t) in thetas.iter().enumerate() {
            for (n, v) in t.iter().enumerate() {
                if (v.norm() - 1.0).abs() > FEASIBILITY_TOL {
                    return Err(SimError::argument(format!(
                        "phase ({l},{n}) is not unit modulus: |θ| = {}",
                        v.norm()
                    )));
                }
            }
        }
        Ok(Self { thetas })
    }

    /// Uniform random phases on the circle, one draw per (layer, atom).
    pub fn random<R: Rng>(layers: usize, atoms: usize, rng: &mut R) -> Self {
        let thetas = (0..layers)
            .map(|_| {
                CVec::from_fn(atoms, |_, _| {
                    let a: f64 = rng.random_range(0.0..std::f64::consts::TAU);
                    Complex64::from_polar(1.0, a)
                })
            })
            .collect();
        Self { thetas }
    }

    /// All-ones phases (no shift).
    pub fn flat(layers: usize, atoms: usize) -> Self {
        Self {
            thetas: vec![CVec::from_element(atoms, Complex64::ONE); layers],
        }
    }

    pub fn layers(&self) -> usize {
        self.thetas.len()
    }

    pub fn atoms(&self) -> usize {
        self.thetas.first().map_or(0, |t| t.len())
    }

    /// Phase vector of layer `l` (0-based).
    pub fn layer(&self, l: usize) -> &CVec {
        &self.thetas[l]
    }

    /// Replaces layer `l` without revalidating the others.
    pub fn set_layer(&mut self, l: usize, theta: CVec) -> Result<(), SimError> {
        for (n, v) in theta.iter().enumerate() {
            if (v.norm() - 1.0).abs() > FEASIBILITY_TOL {
                return Err(SimError::argument(format!(
                    "phase ({l},{n}) is not unit modulus: |θ| = {}",
                    v.norm()
                )));
            }
        }
        self.thetas[l] = theta;
        Ok(())
    }

    pub fn max_modulus_violation(&self) -> f64 {
        self.thetas
            .iter()
            .flat_map(|t| t.iter())
            .map(|v| (v.norm() - 1.0).abs())
            .fold(0.0, f64::max)
    }
}

/// Effective user-by-stream channel Hᴴ·Φ_L·Q_L···Φ_1·Q̃_1·P.
///
/// `selection` picks antenna columns of the first-hop channel in order
/// (stream i rides antenna `selection[i]`); `power` is the per-stream
/// amplitude diagonal (identity if `None`). Entry (k, i) is the complex gain
/// from stream i to user k.
pub fn effective_matrix(
    channels: &ChannelSet,
    phases: &PhaseStack,
    selection: &[usize],
    power: Option<&RVec>,
) -> Result<CMat, SimError> {
    let m = channels.q_first.ncols();
    let mut seen = vec![false; m];
    for &s in selection {
        if s >= m {
            return Err(SimError::argument(format!(
                "antenna index {s} out of range (M = {m})"
            )));
        }
        if seen[s] {
            return Err(SimError::argument(format!("duplicate antenna index {s}")));
        }
        seen[s] = true;
    }
    if let Some(p) = power {
        if p.len() != selection.len() {
            return Err(SimError::argument("power vector length != selection length"));
        }
    }
    if phases.layers() != channels.layers() {
        return Err(SimError::argument("phase stack layer count != channel layer count"));
    }

    let n = channels.q_first.nrows();
    // B = Q̃₁·P, then climb the stack: B ← Φ_l·B, B ← Q_{l+1}·B, ...
    let mut b = CMat::zeros(n, selection.len());
    for (i, &ant) in selection.iter().enumerate() {
        let scale = power.map_or(1.0, |p| p[i]);
        b.column_mut(i).copy_from(&(channels.q_first.column(ant) * Complex64::new(scale, 0.0)));
    }
    scale_rows(&mut b, phases.layer(0));
    for (l, q) in channels.q_layers.iter().enumerate() {
        b = q * b;
        scale_rows(&mut b, phases.layer(l + 1));
    }
    Ok(channels.h_users.adjoint() * b)
}

fn scale_rows(mat: &mut CMat, theta: &CVec) {
    for r in 0..mat.nrows() {
        let t = theta[r];
        for c in 0..mat.ncols() {
            mat[(r, c)] *= t;
        }
    }
}

/// Margins of every (slot, user) pair for noise-free reception
/// `Y = effective · chain_symbols`, measured against the ideal constellation.
pub fn frame_margins(effective: &CMat, frame: &Frame, mode: NldMode, phi: f64) -> Vec<f64> {
    let y = effective * mode.chain_symbols(frame);
    let (k_users, slots) = (frame.users(), frame.slots());
    let mut margins = Vec::with_capacity(k_users * slots);
    for u in 0..slots {
        for k in 0..k_users {
            margins.push(safety_margin(y[(k, u)], frame.ideal[(k, u)], phi));
        }
    }
    margins
}

/// Minimum margin over the frame; the objective the optimizers report.
pub fn min_frame_margin(effective: &CMat, frame: &Frame, mode: NldMode, phi: f64) -> f64 {
    frame_margins(effective, frame, mode, phi)
        .into_iter()
        .fold(f64::INFINITY, f64::min)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::ChannelSet;
    use approx::assert_abs_diff_eq;
    use rand::Rng;

    #[test]
    fn qpsk_mapping_matches_gray_table() {
        let syms = modulate_qpsk(&[false, false, false, true, true, true, true, false]).unwrap();
        assert_abs_diff_eq!(syms[0].re, FRAC_1_SQRT_2, epsilon = 1e-15);
        assert_abs_diff_eq!(syms[0].im, FRAC_1_SQRT_2, epsilon = 1e-15);
        assert_eq!(syms[1], QPSK_SYMBOLS[1]);
        assert_eq!(syms[2], QPSK_SYMBOLS[2]);
        assert_eq!(syms[3], QPSK_SYMBOLS[3]);
        for s in &syms {
            assert_abs_diff_eq!(s.norm(), 1.0, epsilon = 1e-15);
        }
    }

    #[test]
    fn qpsk_roundtrip_over_alphabet() {
        for b0 in [false, true] {
            for b1 in [false, true] {
                let s = modulate_qpsk(&[b0, b1]).unwrap()[0];
                let idx = detect_qpsk_index(s);
                assert_eq!(demap_qpsk(idx), (b0, b1));
            }
        }
    }

    #[test]
    fn odd_bit_count_rejected() {
        assert!(modulate_qpsk(&[true]).is_err());
    }

    #[test]
    fn nld_of_zero_is_zero() {
        let p = SalehParams::default();
        assert_eq!(apply_nld(Complex64::ZERO, &p), Complex64::ZERO);
    }

    #[test]
    fn nld_at_unit_amplitude_matches_direct_formula() {
        let p = SalehParams::default();
        let out = apply_nld(Complex64::ONE, &p);
        // direct evaluation of the rational curves at a = 1
        let amp = 1.6623 / (1.0 + 0.0552);
        let ph = 0.1533 / (1.0 + 0.3456);
        assert_abs_diff_eq!(out.norm(), amp, epsilon = 1e-12);
        assert_abs_diff_eq!(out.arg(), ph, epsilon = 1e-12);
    }

    #[test]
    fn nld_adds_exactly_the_ampm_phase() {
        let p = SalehParams::default();
        let mut rng = crate::seeding::derive_rng(3, &[("nld", 0)]);
        for _ in 0..100 {
            let s = Complex64::new(rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0));
            if s.norm() < 1e-6 {
                continue;
            }
            let out = apply_nld(s, &p);
            let dphi = (out / s).arg();
            assert_abs_diff_eq!(dphi, p.phase_shift(s.norm()), epsilon = 1e-12);
        }
    }

    #[test]
    fn nld_is_injective_on_qpsk_alphabet() {
        let p = SalehParams::default();
        let outs: Vec<Complex64> = QPSK_SYMBOLS.iter().map(|&s| apply_nld(s, &p)).collect();
        for i in 0..4 {
            for j in (i + 1)..4 {
                assert!((outs[i] - outs[j]).norm() > 1e-6);
            }
        }
    }

    #[test]
    fn margin_examples() {
        let s = QPSK_SYMBOLS[0];
        // rotate the probe so y·e^{-j∠s} lands on the given point
        let probe = |u: Complex64| u * s;
        assert_abs_diff_eq!(safety_margin(probe(Complex64::new(1.0, 0.0)), s, QPSK_PHI), 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(safety_margin(probe(Complex64::new(0.5, 0.5)), s, QPSK_PHI), 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(safety_margin(probe(Complex64::new(0.3, -0.5)), s, QPSK_PHI), -0.2, epsilon = 1e-12);
    }

    #[test]
    fn detect_examples() {
        assert_eq!(detect_qpsk(Complex64::new(2.0, 3.0)), QPSK_SYMBOLS[0]);
        assert_eq!(detect_qpsk(Complex64::new(-0.1, -5.0)), QPSK_SYMBOLS[2]);
        // tie conventions
        assert_eq!(detect_qpsk_index(Complex64::new(1.0, 0.0)), 0);
        assert_eq!(detect_qpsk_index(Complex64::new(0.0, 1.0)), 1);
        assert_eq!(detect_qpsk_index(Complex64::new(-1.0, 0.0)), 2);
        assert_eq!(detect_qpsk_index(Complex64::new(0.0, -1.0)), 3);
        assert_eq!(detect_qpsk_index(Complex64::ZERO), 0);
    }

    #[test]
    fn noise_with_zero_variance_is_identity() {
        let y = CVec::from_fn(4, |i, _| Complex64::new(i as f64, -(i as f64)));
        let mut rng = crate::seeding::derive_rng(4, &[("noise", 0)]);
        let out = add_noise(&y, 0.0, &mut rng);
        assert_eq!(out, y);
    }

    #[test]
    fn noise_statistics_match_sigma2() {
        let sigma2 = 0.37;
        let draws = 100_000;
        let y = CVec::zeros(1);
        let mut rng = crate::seeding::derive_rng(5, &[("noise", 1)]);
        let mut sum_sq = 0.0;
        let mut sum_cross = 0.0;
        for _ in 0..draws {
            let z = add_noise(&y, sigma2, &mut rng)[0];
            sum_sq += z.norm_sqr();
            sum_cross += z.re * z.im;
        }
        let var = sum_sq / draws as f64;
        // se of the variance estimate ≈ sigma2 / sqrt(draws)
        let se = sigma2 / (draws as f64).sqrt();
        assert!((var - sigma2).abs() < 3.0 * se, "var {var} vs {sigma2}");
        let cross = sum_cross / draws as f64;
        let cross_se = sigma2 / 2.0 / (draws as f64).sqrt();
        assert!(cross.abs() < 3.0 * cross_se, "re/im correlated: {cross}");
    }

    #[test]
    fn frame_from_bits_is_slot_major_and_distorted_consistently() {
        let saleh = SalehParams::default();
        let bits = [false, false, false, true, true, true, true, false];
        let frame = Frame::from_bits(&bits, 2, 2, &saleh).unwrap();
        assert_eq!(frame.ideal[(0, 0)], QPSK_SYMBOLS[0]);
        assert_eq!(frame.ideal[(1, 0)], QPSK_SYMBOLS[1]);
        assert_eq!(frame.ideal[(0, 1)], QPSK_SYMBOLS[2]);
        assert_eq!(frame.ideal[(1, 1)], QPSK_SYMBOLS[3]);
        for u in 0..2 {
            for k in 0..2 {
                assert_eq!(frame.distorted[(k, u)], apply_nld(frame.ideal[(k, u)], &saleh));
            }
        }
    }

    #[test]
    fn scalar_chain_reduces_to_conjugate_product() {
        // L = 1, Φ = I, K = M = N = 1: effective = h* · q
        let h = Complex64::new(0.3, -0.7);
        let q = Complex64::new(-1.1, 0.2);
        let channels = ChannelSet {
            q_layers: vec![],
            q_first: CMat::from_element(1, 1, q),
            h_users: CMat::from_element(1, 1, h),
            covariance: crate::RMat::identity(1, 1),
            path_loss: vec![1.0],
        };
        let phases = PhaseStack::flat(1, 1);
        let e = effective_matrix(&channels, &phases, &[0], None).unwrap();
        let expect = h.conj() * q;
        assert_abs_diff_eq!(e[(0, 0)].re, expect.re, epsilon = 1e-15);
        assert_abs_diff_eq!(e[(0, 0)].im, expect.im, epsilon = 1e-15);
    }

    #[test]
    fn selection_errors_are_reported() {
        let channels = ChannelSet {
            q_layers: vec![],
            q_first: CMat::from_element(2, 3, Complex64::ONE),
            h_users: CMat::from_element(2, 2, Complex64::ONE),
            covariance: crate::RMat::identity(2, 2),
            path_loss: vec![1.0, 1.0],
        };
        let phases = PhaseStack::flat(1, 2);
        assert!(effective_matrix(&channels, &phases, &[0, 0], None).is_err());
        assert!(effective_matrix(&channels, &phases, &[0, 5], None).is_err());
    }

    #[test]
    fn permuting_selection_permutes_columns() {
        let mut rng = crate::seeding::derive_rng(6, &[("sel", 0)]);
        let channels = crate::testutil::random_channels(&mut rng, 4, 3, 2, 2);
        let phases = PhaseStack::random(2, 4, &mut rng);
        let e01 = effective_matrix(&channels, &phases, &[0, 1], None).unwrap();
        let e10 = effective_matrix(&channels, &phases, &[1, 0], None).unwrap();
        for k in 0..2 {
            assert_eq!(e01[(k, 0)], e10[(k, 1)]);
            assert_eq!(e01[(k, 1)], e10[(k, 0)]);
        }
    }
}
