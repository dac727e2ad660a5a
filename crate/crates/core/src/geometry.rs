//! Physical layout of the transmitter: antenna array, metasurface layers,
//! and user positions.
//!
//! Layers are regular nx×ny grids in parallel y-z planes spaced
//! `t_sim / L` apart, centered on the x axis, with layer 1 nearest the
//! antennas. The antennas form a half-wavelength uniform linear array along
//! y, one layer spacing behind layer 1. Users sit on a line parallel to the
//! z axis at a configurable x offset; the path-loss distance is measured
//! from the center of the last layer.

use crate::config::ScenarioConfig;
use crate::error::SimError;
use nalgebra::Vector3;

#[derive(Debug, Clone, PartialEq)]
pub struct SimGeometry {
    pub layers: usize,
    pub nx: usize,
    pub ny: usize,
    /// Element pitch, meters.
    pub delta: f64,
    /// Stack thickness, meters.
    pub t_sim: f64,
    /// Inter-layer spacing t_sim / L, meters.
    pub d_layer: f64,
    /// Carrier wavelength, meters.
    pub lambda: f64,
    /// Atom centers per layer (layer index 0 is nearest the antennas),
    /// atom index n = iz·nx + iy.
    pub atom_positions: Vec<Vec<Vector3<f64>>>,
    pub antenna_positions: Vec<Vector3<f64>>,
    pub user_positions: Vec<Vector3<f64>>,
}

impl SimGeometry {
    pub fn atoms_per_layer(&self) -> usize {
        self.nx * self.ny
    }

    /// Unit normal of every layer plane (propagation axis).
    pub fn layer_normal(&self) -> Vector3<f64> {
        Vector3::new(1.0, 0.0, 0.0)
    }

    /// Center of the last layer; path-loss distances are measured from here.
    pub fn exit_center(&self) -> Vector3<f64> {
        let last = self.atom_positions.last().expect("at least one layer");
        let mut c = Vector3::zeros();
        for p in last {
            c += p;
        }
        c / last.len() as f64
    }
}

pub fn build_geometry(cfg: &ScenarioConfig) -> Result<SimGeometry, SimError> {
    cfg.validate().map_err(|e| SimError::Geometry(e.to_string()))?;
    let lambda = cfg.wavelength();
    let delta = cfg.delta_wavelengths * lambda;
    let t_sim = cfg.t_sim_wavelengths * lambda;
    let d_layer = t_sim / cfg.layers as f64;

    let atom_positions = (1..=cfg.layers)
        .map(|l| {
            let x = cfg.d_bs_m + l as f64 * d_layer;
            let mut atoms = Vec::with_capacity(cfg.nx * cfg.ny);
            for iz in 0..cfg.ny {
                for iy in 0..cfg.nx {
                    let y = (iy as f64 - (cfg.nx as f64 - 1.0) / 2.0) * delta;
                    let z = (iz as f64 - (cfg.ny as f64 - 1.0) / 2.0) * delta;
                    atoms.push(Vector3::new(x, y, z));
                }
            }
            atoms
        })
        .collect();

    let antenna_positions = (0..cfg.antennas)
        .map(|m| {
            let y = (m as f64 - (cfg.antennas as f64 - 1.0) / 2.0) * lambda / 2.0;
            Vector3::new(cfg.d_bs_m, y, 0.0)
        })
        .collect();

    let user_positions = (0..cfg.users)
        .map(|k| {
            let z = (k as f64 - (cfg.users as f64 - 1.0) / 2.0) * cfg.d_ue_m;
            Vector3::new(cfg.d_user_x_m, 0.0, z)
        })
        .collect();

    Ok(SimGeometry {
        layers: cfg.layers,
        nx: cfg.nx,
        ny: cfg.ny,
        delta,
        t_sim,
        d_layer,
        lambda,
        atom_positions,
        antenna_positions,
        user_positions,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn wavelength_and_pitch_at_30ghz() {
        let cfg = ScenarioConfig::default();
        let geom = build_geometry(&cfg).unwrap();
        assert_abs_diff_eq!(geom.lambda, 0.0099933, epsilon = 1e-6);
        assert_abs_diff_eq!(geom.delta, geom.lambda / 2.0, epsilon = 1e-15);
    }

    #[test]
    fn layer_spacing_is_exact_division() {
        let cfg = ScenarioConfig { layers: 5, antennas: 5, users: 4, ..Default::default() };
        let geom = build_geometry(&cfg).unwrap();
        assert_eq!(geom.d_layer, geom.t_sim / 5.0);
        assert_abs_diff_eq!(geom.d_layer, 2.0 * geom.lambda, epsilon = 1e-15);
        // plane x coordinates step by exactly d_layer, layer 1 nearest the antennas
        for l in 0..5 {
            let x = geom.atom_positions[l][0].x;
            assert_abs_diff_eq!(x, cfg.d_bs_m + (l as f64 + 1.0) * geom.d_layer, epsilon = 1e-12);
            for p in &geom.atom_positions[l] {
                assert_eq!(p.x, geom.atom_positions[l][0].x);
            }
        }
        assert_eq!(geom.antenna_positions[0].x, cfg.d_bs_m);
    }

    #[test]
    fn six_by_six_grid_span() {
        let cfg = ScenarioConfig::default();
        let geom = build_geometry(&cfg).unwrap();
        assert_eq!(geom.atoms_per_layer(), 36);
        // physical side length nx·delta ≈ 0.03 m at half-wavelength pitch
        assert_abs_diff_eq!(6.0 * geom.delta, 0.03, epsilon = 2e-4);
        let ys: Vec<f64> = geom.atom_positions[0].iter().map(|p| p.y).collect();
        let span = ys.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
            - ys.iter().cloned().fold(f64::INFINITY, f64::min);
        assert_abs_diff_eq!(span, 5.0 * geom.delta, epsilon = 1e-12);
    }

    #[test]
    fn grids_are_centered_on_the_x_axis() {
        let cfg = ScenarioConfig { nx: 3, ny: 5, users: 3, antennas: 4, ..Default::default() };
        let geom = build_geometry(&cfg).unwrap();
        for layer in &geom.atom_positions {
            let (mut sy, mut sz) = (0.0, 0.0);
            for p in layer {
                sy += p.y;
                sz += p.z;
            }
            assert_abs_diff_eq!(sy, 0.0, epsilon = 1e-12);
            assert_abs_diff_eq!(sz, 0.0, epsilon = 1e-12);
        }
        let sy: f64 = geom.antenna_positions.iter().map(|p| p.y).sum();
        assert_abs_diff_eq!(sy, 0.0, epsilon = 1e-12);
        let sz: f64 = geom.user_positions.iter().map(|p| p.z).sum();
        assert_abs_diff_eq!(sz, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn invalid_counts_rejected() {
        let cfg = ScenarioConfig { users: 6, antennas: 2, ..Default::default() };
        assert!(build_geometry(&cfg).is_err());
        let cfg = ScenarioConfig { delta_wavelengths: 0.9, ..Default::default() };
        assert!(build_geometry(&cfg).is_err());
    }
}
