//! Deterministic normal streams, one per trajectory.
//!
//! A stream is a ChaCha8 generator keyed by the 64-bit run seed with its
//! stream counter set to the trajectory index, so every index owns one of
//! the 2⁶⁴ disjoint ChaCha keystreams. Normals come from the ziggurat
//! sampler in `rand_distr::StandardNormal`. Both choices are fixed: a given
//! `(seed, index)` always yields the same draws, regardless of thread count
//! or scheduling.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

#[derive(Clone, Debug)]
pub struct RngStream {
    inner: ChaCha8Rng,
}

pub fn derive_stream(seed: u64, trajectory_index: u64) -> RngStream {
    let mut inner = ChaCha8Rng::seed_from_u64(seed);
    inner.set_stream(trajectory_index);
    RngStream { inner }
}

impl RngStream {
    #[inline]
    pub fn normal(&mut self) -> f64 {
        self.inner.sample(StandardNormal)
    }

    #[inline]
    pub fn fill_normal(&mut self, out: &mut [f64]) {
        for z in out.iter_mut() {
            *z = self.inner.sample(StandardNormal);
        }
    }

    /// Uniform draw on `[0, 1)`.
    #[inline]
    pub fn uniform(&mut self) -> f64 {
        self.inner.random::<f64>()
    }
}
