//! Oblique-manifold machinery shared by the phase optimizer and the power
//! allocator: log-sum-exp smoothing, tangent projection, per-column
//! retraction, and first-order Riemannian descent with backtracking.
//!
//! Points on the product-of-circles manifold are 2×N real matrices whose
//! columns have unit norm (row 0 holds the real parts of the phase vector,
//! row 1 the imaginary parts). Power vectors live on the unit sphere in R^K.

use crate::error::SimError;
use crate::{CVec, RMat, RVec};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

/// Smoothed maximum: `epsilon * log(sum_i exp(v_i / epsilon))`, computed in
/// max-shifted form so large inputs cannot overflow. Underflow of individual
/// terms to zero is exact in the limit and acceptable.
pub fn lse(values: &[f64], epsilon: f64) -> f64 {
    assert!(!values.is_empty(), "lse of an empty list");
    assert!(epsilon > 0.0, "lse temperature must be positive");
    let m = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let sum: f64 = values.iter().map(|v| ((v - m) / epsilon).exp()).sum();
    m + epsilon * sum.ln()
}

/// Softmax weights `exp(v_i/eps) / sum_j exp(v_j/eps)` in max-shifted form.
pub fn softmax_weights(values: &[f64], epsilon: f64) -> Vec<f64> {
    let m = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut w: Vec<f64> = values.iter().map(|v| ((v - m) / epsilon).exp()).collect();
    let sum: f64 = w.iter().sum();
    for x in &mut w {
        *x /= sum;
    }
    w
}

/// Tolerance for the unit-norm feasibility invariant.
pub const FEASIBILITY_TOL: f64 = 1e-12;

/// A point on the product-of-circles manifold: a 2×N real matrix with
/// unit-norm columns. Column n is (Re θ_n, Im θ_n) for one phase shift.
#[derive(Debug, Clone, PartialEq)]
pub struct ObliquePoint {
    mat: RMat,
}

impl ObliquePoint {
    /// Validates unit-norm columns to within [`FEASIBILITY_TOL`].
    pub fn new(mat: RMat) -> Result<Self, SimError> {
        if mat.nrows() != 2 {
            return Err(SimError::argument("oblique point must have 2 rows"));
        }
        let gap = max_column_norm_violation(&mat);
        if gap > FEASIBILITY_TOL {
            return Err(SimError::argument(format!(
                "oblique point infeasible: max column norm deviation {gap:.3e}"
            )));
        }
        Ok(Self { mat })
    }

    /// Real/imaginary split of a unit-modulus phase vector.
    pub fn from_phases(phases: &CVec) -> Self {
        let n = phases.len();
        let mat = RMat::from_fn(2, n, |r, c| {
            if r == 0 {
                phases[c].re
            } else {
                phases[c].im
            }
        });
        Self { mat }
    }

    /// Reassembles the complex phase vector θ = row0 + j·row1.
    pub fn phases(&self) -> CVec {
        CVec::from_fn(self.mat.ncols(), |c, _| {
            Complex64::new(self.mat[(0, c)], self.mat[(1, c)])
        })
    }

    pub fn mat(&self) -> &RMat {
        &self.mat
    }

    pub fn into_mat(self) -> RMat {
        self.mat
    }

    pub fn norm_violation(&self) -> f64 {
        max_column_norm_violation(&self.mat)
    }
}

/// Unit-norm vector in R^K; the feasible set of power amplitude vectors.
/// Entries may go negative during descent (a sign flip is representable as a
/// half-turn phase shift in the wave domain); allocations are reported as
/// squared entries, so signs never reach the output.
#[derive(Debug, Clone, PartialEq)]
pub struct SpherePoint {
    vec: RVec,
}

impl SpherePoint {
    pub fn new(vec: RVec) -> Result<Self, SimError> {
        let gap = (vec.norm() - 1.0).abs();
        if gap > FEASIBILITY_TOL {
            return Err(SimError::argument(format!(
                "sphere point infeasible: norm deviation {gap:.3e}"
            )));
        }
        Ok(Self { vec })
    }

    /// Uniform vector 1/sqrt(K) per entry.
    pub fn uniform(dim: usize) -> Self {
        let v = RVec::from_element(dim, 1.0 / (dim as f64).sqrt());
        Self { vec: v }
    }

    pub fn vec(&self) -> &RVec {
        &self.vec
    }

    /// Per-stream allocation fractions p_k^2 (sums to 1).
    pub fn allocation(&self) -> Vec<f64> {
        self.vec.iter().map(|p| p * p).collect()
    }
}

fn max_column_norm_violation(mat: &RMat) -> f64 {
    (0..mat.ncols())
        .map(|c| (mat.column(c).norm() - 1.0).abs())
        .fold(0.0, f64::max)
}

/// Knobs for the descent loop. `epsilon` is the log-sum-exp smoothing
/// temperature consumed by the objective the caller builds, kept here so one
/// struct travels with each solve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DescentParams {
    pub epsilon: f64,
    pub step0: f64,
    pub shrink: f64,
    pub max_inner: usize,
    pub grad_tol: f64,
}

impl Default for DescentParams {
    fn default() -> Self {
        Self {
            epsilon: 1e-1,
            step0: 1.0,
            shrink: 0.5,
            max_inner: 200,
            grad_tol: 1e-6,
        }
    }
}

impl DescentParams {
    pub fn validate(&self) -> Result<(), SimError> {
        if !(self.epsilon > 0.0) {
            return Err(SimError::argument("descent epsilon must be positive"));
        }
        if !(self.step0 > 0.0) {
            return Err(SimError::argument("descent step0 must be positive"));
        }
        if !(self.shrink > 0.0 && self.shrink < 1.0) {
            return Err(SimError::argument("descent shrink must be in (0, 1)"));
        }
        Ok(())
    }
}

/// One record of the descent trace; exported as CSV for convergence plots.
#[derive(Debug, Clone, Copy)]
pub struct TracePoint {
    pub iteration: usize,
    pub value: f64,
    pub step: f64,
    pub grad_norm: f64,
}

#[derive(Debug, Clone)]
pub struct DescentOutcome<A> {
    pub point: A,
    pub value: f64,
    pub trace: Vec<TracePoint>,
}

/// The geometric operations descent needs, over an ambient representation
/// shared by points, gradients, and tangent vectors.
pub trait ManifoldOps {
    type Ambient: Clone;

    /// Orthogonal projection of an ambient gradient onto the tangent space.
    fn project(&self, at: &Self::Ambient, grad: &Self::Ambient) -> Self::Ambient;

    /// Maps an ambient point back onto the manifold. `None` signals a
    /// degenerate input (zero column); the caller must shrink its step.
    fn retract(&self, ambient: &Self::Ambient) -> Option<Self::Ambient>;

    /// `at - scale * dir` in the ambient space.
    fn step(&self, at: &Self::Ambient, dir: &Self::Ambient, scale: f64) -> Self::Ambient;

    fn norm(&self, v: &Self::Ambient) -> f64;

    /// Worst unit-norm violation of a point; zero on the manifold.
    fn feasibility_gap(&self, p: &Self::Ambient) -> f64;
}

/// Product of N unit circles; ambient points are 2×N matrices.
pub struct Oblique;

impl ManifoldOps for Oblique {
    type Ambient = RMat;

    fn project(&self, at: &RMat, grad: &RMat) -> RMat {
        // Z = G - Θ·Diag(diag(ΘᵀG)); per column: g - θ (θᵀ g)
        let mut z = grad.clone();
        for c in 0..at.ncols() {
            let theta = at.column(c);
            let dot = theta.dot(&grad.column(c));
            let mut col = z.column_mut(c);
            col[0] -= theta[0] * dot;
            col[1] -= theta[1] * dot;
        }
        z
    }

    fn retract(&self, ambient: &RMat) -> Option<RMat> {
        let mut out = ambient.clone();
        for c in 0..out.ncols() {
            let n = out.column(c).norm();
            if n == 0.0 || !n.is_finite() {
                return None;
            }
            let mut col = out.column_mut(c);
            col[0] /= n;
            col[1] /= n;
        }
        Some(out)
    }

    fn step(&self, at: &RMat, dir: &RMat, scale: f64) -> RMat {
        at - dir * scale
    }

    fn norm(&self, v: &RMat) -> f64 {
        v.norm()
    }

    fn feasibility_gap(&self, p: &RMat) -> f64 {
        max_column_norm_violation(p)
    }
}

/// Unit sphere in R^K; a single global inner product and whole-vector
/// normalization as retraction.
pub struct UnitSphere;

impl ManifoldOps for UnitSphere {
    type Ambient = RVec;

    fn project(&self, at: &RVec, grad: &RVec) -> RVec {
        grad - at * at.dot(grad)
    }

    fn retract(&self, ambient: &RVec) -> Option<RVec> {
        let n = ambient.norm();
        if n == 0.0 || !n.is_finite() {
            return None;
        }
        Some(ambient / n)
    }

    fn step(&self, at: &RVec, dir: &RVec, scale: f64) -> RVec {
        at - dir * scale
    }

    fn norm(&self, v: &RVec) -> f64 {
        v.norm()
    }

    fn feasibility_gap(&self, p: &RVec) -> f64 {
        (p.norm() - 1.0).abs()
    }
}

const MAX_BACKTRACKS: usize = 60;

/// Riemannian gradient descent with a backtracking line search.
///
/// Each iteration projects the Euclidean gradient onto the tangent space,
/// walks along the negative direction, and retracts back onto the manifold.
/// The step starts at `step0` and shrinks until the objective does not
/// increase, so the returned trace is non-increasing by construction.
/// Terminates when the Riemannian gradient norm drops below `grad_tol`, when
/// no acceptable step exists, or after `max_inner` iterations.
pub fn descend<M, F>(
    manifold: &M,
    mut objective: F,
    start: M::Ambient,
    params: &DescentParams,
) -> Result<DescentOutcome<M::Ambient>, SimError>
where
    M: ManifoldOps,
    F: FnMut(&M::Ambient) -> (f64, M::Ambient),
{
    params.validate()?;
    let mut x = start;
    let (mut fx, mut gx) = objective(&x);
    ensure_finite(fx, "objective at start")?;

    let mut trace = Vec::with_capacity(params.max_inner + 1);
    let z0 = manifold.project(&x, &gx);
    trace.push(TracePoint {
        iteration: 0,
        value: fx,
        step: 0.0,
        grad_norm: manifold.norm(&z0),
    });

    for it in 1..=params.max_inner {
        let z = manifold.project(&x, &gx);
        let gz = manifold.norm(&z);
        if gz <= params.grad_tol {
            break;
        }

        let mut zeta = params.step0;
        let mut accepted = false;
        for _ in 0..MAX_BACKTRACKS {
            if let Some(cand) = manifold.retract(&manifold.step(&x, &z, zeta)) {
                let (fc, gc) = objective(&cand);
                ensure_finite(fc, "objective during line search")?;
                if fc <= fx {
                    x = cand;
                    fx = fc;
                    gx = gc;
                    accepted = true;
                    break;
                }
            }
            zeta *= params.shrink;
        }
        if !accepted {
            break;
        }
        debug_assert!(fx <= trace.last().unwrap().value);
        trace.push(TracePoint {
            iteration: it,
            value: fx,
            step: zeta,
            grad_norm: gz,
        });
    }

    debug_assert!(manifold.feasibility_gap(&x) <= 1e-10);
    Ok(DescentOutcome { point: x, value: fx, trace })
}

fn ensure_finite(v: f64, what: &str) -> Result<(), SimError> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(SimError::numerical(format!("{what} is not finite ({v})")))
    }
}
