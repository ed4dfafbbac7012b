//! Euler–Maruyama steps for overdamped Langevin dynamics.
//!
//! * `EM`: `x' = x - ∇V h + √(2β⁻¹h) z`
//! * `EM_RESCALED`: `x' = x - g∇V h + √(2β⁻¹gh) z`, stationary law `∝ exp(-βV)/g`
//! * `EM_IP`: adds `β⁻¹∇g h`, which restores `exp(-βV)`
//!
//! With `g ≡ 1` all three produce bit-identical output for the same draws.

mod adjoint;

pub use adjoint::{adjoint_stationarity_audit, refinement_study, ResidualField};

use crate::ensemble::{PhaseState, StepInfo};
use crate::error::{Error, Result};
use crate::monitor::Monitor;
use crate::potentials::Potential;
use crate::rng::RngStream;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OverdampedScheme {
    Em,
    EmRescaled,
    EmIp,
}

#[derive(Clone, Debug)]
pub struct Overdamped<P, G> {
    pub pot: P,
    pub mon: G,
    pub scheme: OverdampedScheme,
    pub beta_inv: f64,
}

/// Position plus scratch buffers for one trajectory.
#[derive(Clone, Debug)]
pub struct OverdampedState {
    pub x: Vec<f64>,
    grad_v: Vec<f64>,
    grad_g: Vec<f64>,
    z: Vec<f64>,
}

impl OverdampedState {
    pub fn new(x: Vec<f64>) -> Self {
        let d = x.len();
        Self { x, grad_v: vec![0.0; d], grad_g: vec![0.0; d], z: vec![0.0; d] }
    }
}

impl<P: Potential, G: Monitor> Overdamped<P, G> {
    pub fn new(scheme: OverdampedScheme, pot: P, mon: G, beta_inv: f64) -> Result<Self> {
        if scheme != OverdampedScheme::Em && mon.dim() != pot.dim() {
            return Err(Error::Dimension { expected: pot.dim(), got: mon.dim() });
        }
        Ok(Self { pot, mon, scheme, beta_inv })
    }

    pub fn dim(&self) -> usize {
        self.pot.dim()
    }

    pub fn start(&self, init: PhaseState) -> OverdampedState {
        OverdampedState::new(init.x)
    }

    /// Standard EM. Returns `1`, the implied monitor value.
    #[inline]
    pub fn em_step(&self, st: &mut OverdampedState, z: &[f64], h: f64) -> f64 {
        self.pot.gradient(&st.x, &mut st.grad_v);
        let s = (2.0 * self.beta_inv * h).sqrt();
        for i in 0..st.x.len() {
            st.x[i] = st.x[i] - st.grad_v[i] * h + s * z[i];
        }
        1.0
    }

    /// Direct time-rescaled EM. Returns `g(x)` at the input position.
    #[inline]
    pub fn em_rescaled_step(&self, st: &mut OverdampedState, z: &[f64], h: f64) -> f64 {
        self.pot.gradient(&st.x, &mut st.grad_v);
        let g = self.mon.value(&st.x);
        let s = (2.0 * self.beta_inv * g * h).sqrt();
        for i in 0..st.x.len() {
            st.x[i] = st.x[i] - st.grad_v[i] * g * h + s * z[i];
        }
        g
    }

    /// Invariant-preserving EM. Returns `g(x)` at the input position.
    #[inline]
    pub fn em_ip_step(&self, st: &mut OverdampedState, z: &[f64], h: f64) -> f64 {
        self.pot.gradient(&st.x, &mut st.grad_v);
        let g = self.mon.value_and_gradient(&st.x, &mut st.grad_g);
        let bi = self.beta_inv;
        let s = (2.0 * bi * g * h).sqrt();
        for i in 0..st.x.len() {
            st.x[i] = st.x[i] - st.grad_v[i] * g * h + bi * st.grad_g[i] * h + s * z[i];
        }
        g
    }

    /// Applies the configured scheme with the given draws.
    #[inline]
    pub fn apply(&self, st: &mut OverdampedState, z: &[f64], h: f64) -> f64 {
        match self.scheme {
            OverdampedScheme::Em => self.em_step(st, z, h),
            OverdampedScheme::EmRescaled => self.em_rescaled_step(st, z, h),
            OverdampedScheme::EmIp => self.em_ip_step(st, z, h),
        }
    }

    #[inline]
    pub fn step(&self, st: &mut OverdampedState, rng: &mut RngStream, h: f64) -> StepInfo {
        let mut z = std::mem::take(&mut st.z);
        rng.fill_normal(&mut z);
        let g = self.apply(st, &z, h);
        st.z = z;
        StepInfo::explicit(g)
    }
}

/// `Σ Q(xₙ) g(xₙ) h / Σ g(xₙ) h` over a direct time-rescaled trajectory.
pub fn reweighted_average<Q, W>(samples: &[Vec<f64>], q: Q, g: W, h: f64) -> Result<f64>
where
    Q: Fn(&[f64]) -> f64,
    W: Fn(&[f64]) -> f64,
{
    if samples.is_empty() {
        return Err(Error::EmptySamples);
    }
    let mut num = 0.0;
    let mut den = 0.0;
    for x in samples {
        let w = g(x) * h;
        num += q(x) * w;
        den += w;
    }
    Ok(num / den)
}
