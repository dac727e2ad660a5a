//! Shared fixtures for unit tests: synthetic unit-scale channels and random
//! manifold points, independent of the physical channel builder.

use crate::channel::ChannelSet;
use crate::manifold::ObliquePoint;
use crate::CVec;
use num_complex::Complex64;
use rand::Rng;

pub(crate) fn random_channels(
    rng: &mut impl Rng,
    n: usize,
    m: usize,
    k: usize,
    layers: usize,
) -> ChannelSet {
    crate::checks::synthetic_channels(rng, n, m, k, layers)
}

pub(crate) fn random_oblique(rng: &mut impl Rng, n: usize) -> ObliquePoint {
    let phases = CVec::from_fn(n, |_, _| {
        let a = rng.random_range(0.0..std::f64::consts::TAU);
        Complex64::new(a.cos(), a.sin())
    });
    ObliquePoint::from_phases(&phases)
}
