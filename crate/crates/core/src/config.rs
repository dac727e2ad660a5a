//! Scenario configuration: one flat JSON document describing geometry,
//! counts, amplifier constants, optimizer knobs, and the sweep protocol.
//!
//! Every field has a default, so an empty JSON object is a complete,
//! runnable scenario.

use crate::error::SimError;
use crate::manifold::DescentParams;
use crate::signal::SalehParams;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::path::Path;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    /// Carrier frequency, Hz. The wavelength is always c/f0.
    pub f0_hz: f64,
    /// Meta-atoms per row and per column of each layer (N = nx·ny).
    pub nx: usize,
    pub ny: usize,
    /// Metasurface layer count L.
    pub layers: usize,
    /// Transmit antennas M.
    pub antennas: usize,
    /// Served users K (requires K ≤ M).
    pub users: usize,
    /// Slots per coherence frame U.
    pub slots: usize,
    /// Element pitch in wavelengths (must be ≤ 0.5).
    pub delta_wavelengths: f64,
    /// Stack thickness in wavelengths; layer spacing is thickness/L.
    pub t_sim_wavelengths: f64,
    /// Antenna plane x-offset from the origin, meters.
    pub d_bs_m: f64,
    /// User pitch along the z axis, meters.
    pub d_ue_m: f64,
    /// User plane x coordinate, meters.
    pub d_user_x_m: f64,
    /// Free-space path loss at 1 m, dB.
    pub c0_db: f64,
    /// Path loss exponent.
    pub path_loss_exp: f64,
    pub saleh: SalehParams,
    pub optimizer: OptimizerConfig,
    pub sweep: SweepConfig,
    pub master_seed: u64,
    pub out_dir: String,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            f0_hz: 30e9,
            nx: 6,
            ny: 6,
            layers: 4,
            antennas: 4,
            users: 4,
            slots: 128,
            delta_wavelengths: 0.5,
            t_sim_wavelengths: 10.0,
            d_bs_m: 10.0,
            d_ue_m: 10.0,
            d_user_x_m: 100.0,
            c0_db: -20.0,
            path_loss_exp: 3.5,
            saleh: SalehParams::default(),
            optimizer: OptimizerConfig::default(),
            sweep: SweepConfig::default(),
            master_seed: 1,
            out_dir: "out".to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptimizerConfig {
    /// Outer layer-sweep iterations of the phase optimizer.
    pub max_outer: usize,
    /// Relative min-margin change below which the outer loop stops.
    pub eps_conv: f64,
    /// Log-sum-exp temperature of the phase objective.
    pub lse_eps: f64,
    /// Log-sum-exp temperature of the power objective (10^-1.5).
    pub eps_p: f64,
    /// Alternating rounds of selection / phases / power.
    pub ao_rounds: usize,
    pub descent: DescentParams,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            max_outer: 20,
            eps_conv: 1e-3,
            lse_eps: 1e-1,
            eps_p: 10f64.powf(-1.5),
            ao_rounds: 4,
            descent: DescentParams::default(),
        }
    }
}

/// What a sweep iterates over.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    SnrDb,
    Layers,
    AtomsPerLayer,
}

/// A precoder configuration strategy evaluated by the Monte Carlo sweeps.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Strategy {
    /// Phase optimization only; first K antennas, uniform power.
    Rom,
    /// Alternating antenna selection, phase optimization, power allocation.
    RomAo {
        #[serde(default = "default_true")]
        selection: bool,
        #[serde(default = "default_true")]
        power: bool,
    },
    /// Seeded random phases, no optimization.
    RandomPhase,
    /// Phase optimization followed by b-bit quantization of every phase.
    Quantized { bits: u8 },
    /// Digital zero-forcing through a random-phase stack, amplifier applied
    /// per antenna to the precoded samples.
    Zf {
        #[serde(default)]
        optimized_phases: bool,
    },
}

fn default_true() -> bool {
    true
}

impl Strategy {
    /// Stable label used in CSV output.
    pub fn label(&self) -> String {
        match self {
            Strategy::Rom => "rom".into(),
            Strategy::RomAo { selection, power } => match (selection, power) {
                (true, true) => "rom_ao".into(),
                (true, false) => "rom_as".into(),
                (false, true) => "rom_pa".into(),
                (false, false) => "rom_plain".into(),
            },
            Strategy::RandomPhase => "random_phase".into(),
            Strategy::Quantized { bits } => format!("quantized{bits}"),
            Strategy::Zf { optimized_phases: false } => "zf".into(),
            Strategy::Zf { optimized_phases: true } => "zf_opt".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    pub axis: SweepAxis,
    pub values: Vec<f64>,
    /// Monte Carlo frames per axis point.
    pub frames: usize,
    pub strategies: Vec<Strategy>,
    /// SNR used when the axis is not snr_db.
    pub snr_db: f64,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            axis: SweepAxis::SnrDb,
            values: vec![0.0, 2.0, 4.0, 6.0, 8.0, 10.0, 12.0],
            frames: 50,
            strategies: vec![Strategy::Rom, Strategy::RandomPhase],
            snr_db: 10.0,
        }
    }
}

impl ScenarioConfig {
    /// Loads and validates a config file; missing fields take defaults.
    pub fn load(path: &Path) -> Result<Self, SimError> {
        let text = std::fs::read_to_string(path).map_err(|source| SimError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_json(&text)
    }

    pub fn from_json(text: &str) -> Result<Self, SimError> {
        let cfg: ScenarioConfig = serde_json::from_str(text)
            .map_err(|e| SimError::Parse(format!("{e} (line {}, column {})", e.line(), e.column())))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn save(&self, path: &Path) -> Result<(), SimError> {
        std::fs::write(path, self.to_json()).map_err(|source| SimError::Io {
            path: path.display().to_string(),
            source,
        })
    }

    /// Built-in named scenarios: `table1` (the full-scale defaults) and
    /// `desk` (a small configuration that runs in seconds).
    pub fn preset(name: &str) -> Result<Self, SimError> {
        match name {
            "table1" | "default" => Ok(Self::default()),
            "desk" => Ok(Self {
                nx: 4,
                ny: 4,
                layers: 3,
                antennas: 3,
                users: 3,
                slots: 32,
                optimizer: OptimizerConfig {
                    max_outer: 10,
                    descent: DescentParams { max_inner: 60, ..Default::default() },
                    ..Default::default()
                },
                sweep: SweepConfig { frames: 20, ..Default::default() },
                ..Default::default()
            }),
            other => Err(SimError::Config {
                field: "preset",
                reason: format!("unknown preset `{other}` (expected table1 or desk)"),
            }),
        }
    }

    pub fn atoms_per_layer(&self) -> usize {
        self.nx * self.ny
    }

    pub fn wavelength(&self) -> f64 {
        crate::SPEED_OF_LIGHT / self.f0_hz
    }

    pub fn validate(&self) -> Result<(), SimError> {
        fn positive(field: &'static str, v: f64) -> Result<(), SimError> {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(SimError::Config { field, reason: format!("must be positive, got {v}") })
            }
        }
        positive("f0_hz", self.f0_hz)?;
        positive("delta_wavelengths", self.delta_wavelengths)?;
        positive("t_sim_wavelengths", self.t_sim_wavelengths)?;
        positive("d_bs_m", self.d_bs_m)?;
        positive("d_ue_m", self.d_ue_m)?;
        positive("d_user_x_m", self.d_user_x_m)?;
        positive("path_loss_exp", self.path_loss_exp)?;
        for (field, v) in [
            ("nx", self.nx),
            ("ny", self.ny),
            ("layers", self.layers),
            ("antennas", self.antennas),
            ("users", self.users),
            ("slots", self.slots),
        ] {
            if v == 0 {
                return Err(SimError::Config { field, reason: "must be at least 1".into() });
            }
        }
        if self.users > self.antennas {
            return Err(SimError::Config {
                field: "users",
                reason: format!("K = {} exceeds M = {} antennas", self.users, self.antennas),
            });
        }
        if self.delta_wavelengths > 0.5 + 1e-12 {
            return Err(SimError::Config {
                field: "delta_wavelengths",
                reason: format!("element pitch must be at most half a wavelength, got {}", self.delta_wavelengths),
            });
        }
        self.saleh.validate()?;
        self.optimizer.validate()?;
        self.sweep.validate()?;
        Ok(())
    }

    /// Hash of the canonical JSON form; embedded in every output file.
    pub fn hash(&self) -> String {
        let digest: [u8; 32] = Sha256::digest(serde_json::to_string(self).expect("config serializes")).into();
        crate::seeding::hex_digest(&digest)
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<(), SimError> {
        if self.max_outer == 0 {
            return Err(SimError::Config { field: "optimizer.max_outer", reason: "must be at least 1".into() });
        }
        if self.ao_rounds == 0 {
            return Err(SimError::Config { field: "optimizer.ao_rounds", reason: "must be at least 1".into() });
        }
        if !(self.eps_conv > 0.0) {
            return Err(SimError::Config { field: "optimizer.eps_conv", reason: "must be positive".into() });
        }
        if !(self.lse_eps > 0.0) {
            return Err(SimError::Config { field: "optimizer.lse_eps", reason: "must be positive".into() });
        }
        if !(self.eps_p > 0.0) {
            return Err(SimError::Config { field: "optimizer.eps_p", reason: "must be positive".into() });
        }
        self.descent
            .validate()
            .map_err(|e| SimError::Config { field: "optimizer.descent", reason: e.to_string() })
    }
}

impl SweepConfig {
    pub fn validate(&self) -> Result<(), SimError> {
        if self.values.is_empty() {
            return Err(SimError::Config { field: "sweep.values", reason: "must not be empty".into() });
        }
        if self.frames == 0 {
            return Err(SimError::Config { field: "sweep.frames", reason: "must be at least 1".into() });
        }
        if self.strategies.is_empty() {
            return Err(SimError::Config { field: "sweep.strategies", reason: "must not be empty".into() });
        }
        for s in &self.strategies {
            if let Strategy::Quantized { bits } = s {
                if !(2..=4).contains(bits) {
                    return Err(SimError::Config {
                        field: "sweep.strategies",
                        reason: format!("quantized bits must be 2, 3, or 4, got {bits}"),
                    });
                }
            }
        }
        match self.axis {
            SweepAxis::Layers | SweepAxis::AtomsPerLayer => {
                for &v in &self.values {
                    if v < 1.0 || v.fract() != 0.0 {
                        return Err(SimError::Config {
                            field: "sweep.values",
                            reason: format!("axis values must be positive integers, got {v}"),
                        });
                    }
                    if self.axis == SweepAxis::AtomsPerLayer {
                        let n = v as usize;
                        let s = (n as f64).sqrt().round() as usize;
                        if s * s != n {
                            return Err(SimError::Config {
                                field: "sweep.values",
                                reason: format!("atoms per layer must be a perfect square, got {n}"),
                            });
                        }
                    }
                }
            }
            SweepAxis::SnrDb => {}
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_object_yields_full_default_scenario() {
        let cfg = ScenarioConfig::from_json("{}").unwrap();
        assert_eq!(cfg, ScenarioConfig::default());
        assert_eq!(cfg.f0_hz, 30e9);
        assert_eq!(cfg.slots, 128);
        assert_eq!(cfg.saleh.alpha_a, 1.6623);
        assert_eq!(cfg.optimizer.eps_conv, 1e-3);
        assert_eq!(cfg.optimizer.lse_eps, 1e-1);
        assert!((cfg.optimizer.eps_p - 10f64.powf(-1.5)).abs() < 1e-15);
    }

    #[test]
    fn users_exceeding_antennas_rejected_with_field_name() {
        let err = ScenarioConfig::from_json(r#"{"users": 5, "antennas": 2}"#).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("users"), "message should name the field: {msg}");
    }

    #[test]
    fn parse_errors_carry_position() {
        let err = ScenarioConfig::from_json("{ not json").unwrap_err();
        assert!(err.to_string().contains("line"));
    }

    #[test]
    fn json_roundtrip_is_lossless() {
        let mut cfg = ScenarioConfig::default();
        cfg.nx = 3;
        cfg.sweep.strategies = vec![
            Strategy::Rom,
            Strategy::RomAo { selection: true, power: false },
            Strategy::Quantized { bits: 3 },
            Strategy::Zf { optimized_phases: false },
        ];
        let back = ScenarioConfig::from_json(&cfg.to_json()).unwrap();
        assert_eq!(back, cfg);
        assert_eq!(back.hash(), cfg.hash());
    }

    #[test]
    fn unknown_fields_and_presets_are_rejected() {
        assert!(ScenarioConfig::from_json(r#"{"nonsense": 1}"#).is_err());
        assert!(ScenarioConfig::preset("desk").is_ok());
        assert!(ScenarioConfig::preset("nope").is_err());
    }

    #[test]
    fn oversized_pitch_rejected() {
        let err = ScenarioConfig::from_json(r#"{"delta_wavelengths": 0.8}"#).unwrap_err();
        assert!(err.to_string().contains("delta_wavelengths"));
    }

    #[test]
    fn quantized_bits_range_enforced() {
        let json = r#"{"sweep": {"strategies": [{"kind": "quantized", "bits": 7}]}}"#;
        assert!(ScenarioConfig::from_json(json).is_err());
    }
}
