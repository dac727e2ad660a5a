//! Channel construction: Rayleigh-Sommerfeld diffraction between layers,
//! sinc-correlated Rayleigh fading toward the users, and free-space path
//! loss.
//!
//! Building a [`ChannelSet`] from the same geometry and seed is bitwise
//! reproducible; nothing here keeps mutable state.

use crate::config::ScenarioConfig;
use crate::error::SimError;
use crate::geometry::{build_geometry, SimGeometry};
use crate::{CMat, RMat};
use nalgebra::Vector3;
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use std::f64::consts::TAU;

/// All propagation matrices of one scenario realization.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelSet {
    /// Inter-layer channels Q_2..Q_L (N×N each; empty when L = 1).
    pub q_layers: Vec<CMat>,
    /// Antenna to first-layer channel (N×M, column per antenna).
    pub q_first: CMat,
    /// User channels H (N×K, column per user).
    pub h_users: CMat,
    /// Spatial correlation of the last layer's aperture (N×N, unit diagonal).
    pub covariance: RMat,
    /// Free-space path loss per user.
    pub path_loss: Vec<f64>,
}

impl ChannelSet {
    pub fn layers(&self) -> usize {
        self.q_layers.len() + 1
    }

    pub fn atoms(&self) -> usize {
        self.q_first.nrows()
    }

    pub fn users(&self) -> usize {
        self.h_users.ncols()
    }

    pub fn antennas(&self) -> usize {
        self.q_first.ncols()
    }

    /// Builds the full set for a scenario: deterministic matrices from the
    /// geometry, user channels drawn from `rng`.
    pub fn build<R: Rng>(cfg: &ScenarioConfig, rng: &mut R) -> Result<Self, SimError> {
        ChannelModel::new(cfg)?.sample(rng)
    }
}

/// The deterministic part of the channel (geometry-derived matrices and the
/// correlation factor), reusable across Monte Carlo frames: only the user
/// channels are redrawn per frame.
#[derive(Debug, Clone)]
pub struct ChannelModel {
    pub geom: SimGeometry,
    pub q_layers: Vec<CMat>,
    pub q_first: CMat,
    pub covariance: RMat,
    factor: RMat,
    pub path_loss: Vec<f64>,
}

impl ChannelModel {
    pub fn new(cfg: &ScenarioConfig) -> Result<Self, SimError> {
        let geom = build_geometry(cfg)?;
        let (q_layers, q_first) = build_interlayer_channels(&geom);
        let covariance = build_user_covariance(&geom);
        let factor = covariance_factor(&covariance)?;
        let path_loss = path_losses(&geom, cfg.c0_db, cfg.path_loss_exp);
        Ok(Self { geom, q_layers, q_first, covariance, factor, path_loss })
    }

    pub fn sample<R: Rng>(&self, rng: &mut R) -> Result<ChannelSet, SimError> {
        let h_users = sample_with_factor(&self.factor, &self.path_loss, rng);
        Ok(ChannelSet {
            q_layers: self.q_layers.clone(),
            q_first: self.q_first.clone(),
            h_users,
            covariance: self.covariance.clone(),
            path_loss: self.path_loss.clone(),
        })
    }
}

/// Rayleigh-Sommerfeld diffraction coefficient between two points:
///
/// `(Δ²·cos α / r) · (1/(2πr) − j/λ) · e^{jκr}`
///
/// with `r` the propagation distance, `cos α` the angle between the
/// propagation direction and the source plane normal, and `κ = 2π/λ`.
pub fn diffraction_coefficient(
    src: &Vector3<f64>,
    dst: &Vector3<f64>,
    normal: &Vector3<f64>,
    delta: f64,
    lambda: f64,
) -> Result<Complex64, SimError> {
    let d = dst - src;
    let r = d.norm();
    if r == 0.0 {
        return Err(SimError::argument("diffraction distance is zero"));
    }
    let cos_alpha = d.dot(normal).abs() / r;
    let kappa = TAU / lambda;
    let radial = Complex64::new(1.0 / (TAU * r), -1.0 / lambda);
    let phase = Complex64::from_polar(1.0, kappa * r);
    Ok(delta * delta * cos_alpha / r * radial * phase)
}

/// Builds Q_2..Q_L and the antenna-to-layer-1 channel. Entry (n', n) of Q_l
/// propagates atom n of layer l−1 to atom n' of layer l; column m of the
/// first-hop matrix propagates antenna m to the first layer.
pub fn build_interlayer_channels(geom: &SimGeometry) -> (Vec<CMat>, CMat) {
    let n = geom.atoms_per_layer();
    let normal = geom.layer_normal();
    let q_layers = (1..geom.layers)
        .map(|l| {
            let (prev, cur) = (&geom.atom_positions[l - 1], &geom.atom_positions[l]);
            CMat::from_fn(n, n, |dst, src| {
                diffraction_coefficient(&prev[src], &cur[dst], &normal, geom.delta, geom.lambda)
                    .expect("distinct layer planes")
            })
        })
        .collect();
    let first = &geom.atom_positions[0];
    let q_first = CMat::from_fn(n, geom.antenna_positions.len(), |dst, m| {
        diffraction_coefficient(
            &geom.antenna_positions[m],
            &first[dst],
            &normal,
            geom.delta,
            geom.lambda,
        )
        .expect("antennas sit behind the first layer")
    });
    (q_layers, q_first)
}

/// Aperture correlation of the last layer: R[n,n'] = sin(κr)/(κr) with r the
/// in-plane distance between atoms n and n'; unit diagonal.
pub fn build_user_covariance(geom: &SimGeometry) -> RMat {
    let atoms = geom.atom_positions.last().expect("at least one layer");
    let n = atoms.len();
    let kappa = TAU / geom.lambda;
    RMat::from_fn(n, n, |a, b| {
        if a == b {
            1.0
        } else {
            let r = (atoms[a] - atoms[b]).norm();
            (kappa * r).sin() / (kappa * r)
        }
    })
}

/// Symmetric factor F with F·Fᵀ = R, via eigendecomposition with negative
/// eigenvalues clipped to zero. The sinc kernel is positive semidefinite in
/// exact arithmetic; clipping absorbs floating-point noise. An eigenvalue
/// below −1e−9 signals a covariance construction bug and is rejected.
pub fn covariance_factor(r: &RMat) -> Result<RMat, SimError> {
    let eig = r.clone().symmetric_eigen();
    let min = eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
    if min < -1e-9 {
        return Err(SimError::numerical(format!(
            "covariance has eigenvalue {min:.3e} below tolerance"
        )));
    }
    let mut f = eig.eigenvectors;
    for c in 0..f.ncols() {
        let s = eig.eigenvalues[c].max(0.0).sqrt();
        f.column_mut(c).scale_mut(s);
    }
    Ok(f)
}

/// Draws the user channel matrix: column k = sqrt(ρ_k)·R^{1/2}·w with w a
/// standard circularly-symmetric complex Gaussian vector; columns
/// independent.
pub fn sample_user_channels<R: Rng>(
    covariance: &RMat,
    path_loss: &[f64],
    rng: &mut R,
) -> Result<CMat, SimError> {
    let factor = covariance_factor(covariance)?;
    Ok(sample_with_factor(&factor, path_loss, rng))
}

fn sample_with_factor<R: Rng>(factor: &RMat, path_loss: &[f64], rng: &mut R) -> CMat {
    let n = factor.nrows();
    let mut h = CMat::zeros(n, path_loss.len());
    for (k, &rho) in path_loss.iter().enumerate() {
        let w = CMat::from_fn(n, 1, |_, _| {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
        });
        let col = factor.map(|x| Complex64::new(x, 0.0)) * w * Complex64::new(rho.sqrt(), 0.0);
        h.column_mut(k).copy_from(&col.column(0));
    }
    h
}

/// Free-space path loss ρ_k = C0·d_k^{−α}, distance measured from the center
/// of the last layer.
pub fn path_losses(geom: &SimGeometry, c0_db: f64, alpha: f64) -> Vec<f64> {
    let c0 = 10f64.powf(c0_db / 10.0);
    let exit = geom.exit_center();
    geom.user_positions
        .iter()
        .map(|u| c0 * (u - exit).norm().powf(-alpha))
        .collect()
}

// --- JSON interchange form (complex numbers as [re, im] pairs) ---

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ComplexMatrixJson {
    pub rows: usize,
    pub cols: usize,
    /// Row-major [re, im] pairs.
    pub data: Vec<[f64; 2]>,
}

impl ComplexMatrixJson {
    fn from_mat(m: &CMat) -> Self {
        let mut data = Vec::with_capacity(m.nrows() * m.ncols());
        for r in 0..m.nrows() {
            for c in 0..m.ncols() {
                data.push([m[(r, c)].re, m[(r, c)].im]);
            }
        }
        Self { rows: m.nrows(), cols: m.ncols(), data }
    }

    fn to_mat(&self) -> Result<CMat, SimError> {
        if self.data.len() != self.rows * self.cols {
            return Err(SimError::Parse("matrix data length mismatch".into()));
        }
        Ok(CMat::from_fn(self.rows, self.cols, |r, c| {
            let [re, im] = self.data[r * self.cols + c];
            Complex64::new(re, im)
        }))
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RealMatrixJson {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

/// Serializable image of a [`ChannelSet`] for oracle cross-checking from
/// other tooling.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ChannelSetJson {
    pub q_layers: Vec<ComplexMatrixJson>,
    pub q_first: ComplexMatrixJson,
    pub h_users: ComplexMatrixJson,
    pub covariance: RealMatrixJson,
    pub path_loss: Vec<f64>,
}

impl ChannelSet {
    pub fn to_json(&self) -> String {
        let form = ChannelSetJson {
            q_layers: self.q_layers.iter().map(ComplexMatrixJson::from_mat).collect(),
            q_first: ComplexMatrixJson::from_mat(&self.q_first),
            h_users: ComplexMatrixJson::from_mat(&self.h_users),
            covariance: RealMatrixJson {
                rows: self.covariance.nrows(),
                cols: self.covariance.ncols(),
                data: self.covariance.transpose().as_slice().to_vec(),
            },
            path_loss: self.path_loss.clone(),
        };
        serde_json::to_string(&form).expect("channel set serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, SimError> {
        let form: ChannelSetJson =
            serde_json::from_str(text).map_err(|e| SimError::Parse(e.to_string()))?;
        if form.covariance.data.len() != form.covariance.rows * form.covariance.cols {
            return Err(SimError::Parse("covariance data length mismatch".into()));
        }
        let covariance = RMat::from_fn(form.covariance.rows, form.covariance.cols, |r, c| {
            form.covariance.data[r * form.covariance.cols + c]
        });
        Ok(ChannelSet {
            q_layers: form.q_layers.iter().map(|m| m.to_mat()).collect::<Result<_, _>>()?,
            q_first: form.q_first.to_mat()?,
            h_users: form.h_users.to_mat()?,
            covariance,
            path_loss: form.path_loss,
        })
    }
}
