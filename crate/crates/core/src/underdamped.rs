//! Splitting integrators for time-rescaled underdamped Langevin dynamics.
//!
//! Sub-flows, with `F = -∇V` and `C = exp(-g h γ)`:
//!
//! | step | update |
//! |------|--------|
//! | `B`  | `p += h F` |
//! | `B̂`  | `p += h (g F + β⁻¹ ∇g)` |
//! | `B̃`  | `p += h g F` |
//! | `O`  | `p = e^{-γh} p + √(β⁻¹(1 - e^{-2γh})) z` |
//! | `Ô`  | `p = C p + √(β⁻¹(1 - C²)) z` |
//! | `Õ`  | `p = C p + ∇g (1 - C) / (βγg) + √(β⁻¹(1 - C²)) z` |
//! | `A`  | `x' = x + h p g((x + x')/2)`, by fixed-point iteration |
//!
//! The hat family puts the `β⁻¹∇g` correction in the kick, the tilde family
//! in the thermostat. Compositions use half steps for the outer symmetric
//! pairs. `SPV` is `A(h/2)`, an exact OU update with the full drift
//! `(gF + β⁻¹∇g)/(γg)`, then `A(h/2)`.
//!
//! Caches of `F`, `g` and `∇g` stay valid across `B` and `O` steps (and
//! across step boundaries) and are dropped whenever `x` moves.

use crate::ensemble::{PhaseState, SamplerConfig, StepInfo};
use crate::error::{Error, Result};
use crate::monitor::Monitor;
use crate::potentials::Potential;
use crate::rng::RngStream;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Composition {
    Baoab,
    Aboba,
    Obabo,
    Spv,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Variant {
    /// Unit monitor; the monitor is never evaluated.
    Fixed,
    Hat,
    Tilde,
}

/// Phase-space state with cached force and monitor evaluations.
#[derive(Clone, Debug)]
pub struct SplitState {
    pub x: Vec<f64>,
    pub p: Vec<f64>,
    /// `F = -∇V(x)`, valid when `force_ok`.
    pub force: Vec<f64>,
    /// `g(x)` and `∇g(x)`, valid when `monitor_ok`.
    pub g: f64,
    pub grad_g: Vec<f64>,
    force_ok: bool,
    monitor_ok: bool,
    /// Last iterate difference of the most recent A-step.
    pub last_fp_diff: f64,
    x_prev: Vec<f64>,
    x_next: Vec<f64>,
    mid: Vec<f64>,
    z: Vec<f64>,
}

impl SplitState {
    pub fn new(x: Vec<f64>, p: Vec<f64>) -> Self {
        let d = x.len();
        assert_eq!(d, p.len(), "x and p must have the same length");
        Self {
            x,
            p,
            force: vec![0.0; d],
            g: 1.0,
            grad_g: vec![0.0; d],
            force_ok: false,
            monitor_ok: false,
            last_fp_diff: 0.0,
            x_prev: vec![0.0; d],
            x_next: vec![0.0; d],
            mid: vec![0.0; d],
            z: vec![0.0; d],
        }
    }

    fn moved(&mut self) {
        self.force_ok = false;
        self.monitor_ok = false;
    }
}

/// Outcome of one implicit A-step.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AStep {
    pub iters: u32,
    pub converged: bool,
}

#[derive(Clone, Debug)]
pub struct Underdamped<P, G> {
    pub pot: P,
    pub mon: G,
    pub composition: Composition,
    pub variant: Variant,
    pub beta_inv: f64,
    pub gamma: f64,
    pub fp_tol: f64,
    pub fp_max_iter: u32,
}

impl<P: Potential, G: Monitor> Underdamped<P, G> {
    pub fn new(composition: Composition, variant: Variant, pot: P, mon: G, cfg: &SamplerConfig) -> Result<Self> {
        if variant != Variant::Fixed && mon.dim() != pot.dim() {
            return Err(Error::Dimension { expected: pot.dim(), got: mon.dim() });
        }
        if (variant == Variant::Tilde || composition == Composition::Spv) && !(cfg.gamma > 0.0) {
            return Err(Error::ZeroFriction(cfg.gamma));
        }
        Ok(Self {
            pot,
            mon,
            composition,
            variant,
            beta_inv: cfg.beta_inv,
            gamma: cfg.gamma,
            fp_tol: cfg.fp_tol,
            fp_max_iter: cfg.fp_max_iter,
        })
    }

    pub fn dim(&self) -> usize {
        self.pot.dim()
    }

    pub fn start(&self, init: PhaseState) -> SplitState {
        let d = init.x.len();
        SplitState::new(init.x, init.p.unwrap_or_else(|| vec![0.0; d]))
    }

    #[inline]
    pub fn ensure_force(&self, st: &mut SplitState) {
        if !st.force_ok {
            self.pot.gradient(&st.x, &mut st.force);
            for f in st.force.iter_mut() {
                *f = -*f;
            }
            st.force_ok = true;
        }
    }

    #[inline]
    pub fn ensure_monitor(&self, st: &mut SplitState) {
        if !st.monitor_ok {
            if self.variant == Variant::Fixed {
                st.g = 1.0;
                st.grad_g.iter_mut().for_each(|v| *v = 0.0);
            } else {
                st.g = self.mon.value_and_gradient(&st.x, &mut st.grad_g);
            }
            st.monitor_ok = true;
        }
    }

    /// True when every valid cache equals a fresh evaluation at `st.x`.
    pub fn cache_is_coherent(&self, st: &SplitState) -> bool {
        let d = st.x.len();
        let mut ok = true;
        if st.force_ok {
            let mut f = vec![0.0; d];
            self.pot.gradient(&st.x, &mut f);
            ok &= f.iter().zip(&st.force).all(|(a, b)| -a == *b);
        }
        if st.monitor_ok && self.variant != Variant::Fixed {
            let mut gg = vec![0.0; d];
            let g = self.mon.value_and_gradient(&st.x, &mut gg);
            ok &= g == st.g && gg == st.grad_g;
        }
        ok
    }

    /// `p += h F`.
    #[inline]
    pub fn b_fixed(&self, st: &mut SplitState, h: f64) {
        self.ensure_force(st);
        for i in 0..st.p.len() {
            st.p[i] = st.p[i] + h * st.force[i];
        }
    }

    /// `p += h (g F + β⁻¹ ∇g)`.
    #[inline]
    pub fn b_hat(&self, st: &mut SplitState, h: f64) {
        self.ensure_force(st);
        self.ensure_monitor(st);
        let (g, bi) = (st.g, self.beta_inv);
        for i in 0..st.p.len() {
            st.p[i] = st.p[i] + h * (g * st.force[i] + bi * st.grad_g[i]);
        }
    }

    /// `p += h g F`.
    #[inline]
    pub fn b_tilde(&self, st: &mut SplitState, h: f64) {
        self.ensure_force(st);
        self.ensure_monitor(st);
        let g = st.g;
        for i in 0..st.p.len() {
            st.p[i] = st.p[i] + h * (g * st.force[i]);
        }
    }

    /// Exact OU update at rate `γ`.
    #[inline]
    pub fn o_fixed(&self, st: &mut SplitState, h: f64, z: &[f64]) {
        let c = (-(h * self.gamma)).exp();
        let s = (self.beta_inv * (1.0 - c * c)).sqrt();
        for i in 0..st.p.len() {
            st.p[i] = c * st.p[i] + s * z[i];
        }
    }

    /// Exact OU update at rate `γ g(x)`.
    #[inline]
    pub fn o_hat(&self, st: &mut SplitState, h: f64, z: &[f64]) {
        self.ensure_monitor(st);
        let c = (-(st.g * h * self.gamma)).exp();
        let s = (self.beta_inv * (1.0 - c * c)).sqrt();
        for i in 0..st.p.len() {
            st.p[i] = c * st.p[i] + s * z[i];
        }
    }

    /// Exact OU update at rate `γ g(x)` with the constant drift `β⁻¹∇g`.
    pub fn o_tilde(&self, st: &mut SplitState, h: f64, z: &[f64]) -> Result<()> {
        if !(self.gamma > 0.0) {
            return Err(Error::ZeroFriction(self.gamma));
        }
        self.o_tilde_unchecked(st, h, z);
        Ok(())
    }

    #[inline]
    fn o_tilde_unchecked(&self, st: &mut SplitState, h: f64, z: &[f64]) {
        self.ensure_monitor(st);
        let g = st.g;
        let c = (-(g * h * self.gamma)).exp();
        let s = (self.beta_inv * (1.0 - c * c)).sqrt();
        let k = (1.0 - c) * self.beta_inv / (self.gamma * g);
        for i in 0..st.p.len() {
            st.p[i] = c * st.p[i] + st.grad_g[i] * k + s * z[i];
        }
    }

    /// Exact OU update with drift `g F + β⁻¹∇g` and rate `γ g(x)` (the SPV core).
    #[inline]
    pub fn o_full(&self, st: &mut SplitState, h: f64, z: &[f64]) {
        self.ensure_force(st);
        self.ensure_monitor(st);
        let g = st.g;
        let c = (-(g * h * self.gamma)).exp();
        let s = (self.beta_inv * (1.0 - c * c)).sqrt();
        let k = (1.0 - c) / (self.gamma * g);
        for i in 0..st.p.len() {
            st.p[i] = c * st.p[i] + (g * st.force[i] + self.beta_inv * st.grad_g[i]) * k + s * z[i];
        }
    }

    /// `x += h p`.
    #[inline]
    pub fn a_fixed(&self, st: &mut SplitState, h: f64) {
        for i in 0..st.x.len() {
            st.x[i] = st.x[i] + h * st.p[i];
        }
        st.last_fp_diff = 0.0;
        st.moved();
    }

    /// Implicit midpoint `x' = x + h p g((x + x')/2)` by fixed-point
    /// iteration from `x + h p g(x)`, stopping when the max-norm change of
    /// an iterate is at most `fp_tol`.
    pub fn a_implicit(&self, st: &mut SplitState, h: f64) -> AStep {
        self.ensure_monitor(st);
        let g0 = st.g;
        let d = st.x.len();
        for i in 0..d {
            st.x_prev[i] = st.x[i];
            st.x_next[i] = st.x[i] + h * st.p[i] * g0;
        }
        let mut result = AStep { iters: self.fp_max_iter, converged: false };
        for it in 1..=self.fp_max_iter {
            for i in 0..d {
                st.mid[i] = 0.5 * (st.x_prev[i] + st.x_next[i]);
            }
            let gm = self.mon.value(&st.mid);
            let mut diff: f64 = 0.0;
            for i in 0..d {
                let v = st.x_prev[i] + h * st.p[i] * gm;
                diff = diff.max((v - st.x_next[i]).abs());
                st.x_next[i] = v;
            }
            st.last_fp_diff = diff;
            if diff <= self.fp_tol {
                result = AStep { iters: it, converged: true };
                break;
            }
            if !diff.is_finite() {
                result = AStep { iters: it, converged: false };
                break;
            }
        }
        std::mem::swap(&mut st.x, &mut st.x_next);
        st.moved();
        result
    }

    #[inline]
    fn kick(&self, st: &mut SplitState, h: f64) {
        match self.variant {
            Variant::Fixed => self.b_fixed(st, h),
            Variant::Hat => self.b_hat(st, h),
            Variant::Tilde => self.b_tilde(st, h),
        }
    }

    #[inline]
    fn thermostat(&self, st: &mut SplitState, h: f64, draw: &mut impl FnMut(&mut [f64])) {
        let mut z = std::mem::take(&mut st.z);
        draw(&mut z);
        match self.variant {
            Variant::Fixed => self.o_fixed(st, h, &z),
            Variant::Hat => self.o_hat(st, h, &z),
            Variant::Tilde => self.o_tilde_unchecked(st, h, &z),
        }
        st.z = z;
    }

    #[inline]
    fn drift(&self, st: &mut SplitState, h: f64, info: &mut StepInfo) {
        if self.variant == Variant::Fixed {
            self.a_fixed(st, h);
            return;
        }
        let a = self.a_implicit(st, h);
        info.fp_iters += a.iters;
        info.fp_solves += 1;
        info.fp_iters_max = info.fp_iters_max.max(a.iters);
        info.converged &= a.converged;
    }

    /// One composed step; `draw` fills each O-step's normal vector.
    pub fn step_with(&self, st: &mut SplitState, h: f64, mut draw: impl FnMut(&mut [f64])) -> StepInfo {
        self.ensure_monitor(st);
        let mut info = StepInfo::explicit(st.g);
        let half = 0.5 * h;
        match self.composition {
            Composition::Baoab => {
                self.kick(st, half);
                self.drift(st, half, &mut info);
                self.thermostat(st, h, &mut draw);
                self.drift(st, half, &mut info);
                self.kick(st, half);
            }
            Composition::Aboba => {
                self.drift(st, half, &mut info);
                self.kick(st, half);
                self.thermostat(st, h, &mut draw);
                self.kick(st, half);
                self.drift(st, half, &mut info);
            }
            Composition::Obabo => {
                self.thermostat(st, half, &mut draw);
                self.kick(st, half);
                self.drift(st, h, &mut info);
                self.kick(st, half);
                self.thermostat(st, half, &mut draw);
            }
            Composition::Spv => {
                self.drift(st, half, &mut info);
                let mut z = std::mem::take(&mut st.z);
                draw(&mut z);
                self.o_full(st, h, &z);
                st.z = z;
                self.drift(st, half, &mut info);
            }
        }
        info
    }

    #[inline]
    pub fn step(&self, st: &mut SplitState, rng: &mut RngStream, h: f64) -> StepInfo {
        self.step_with(st, h, |z| rng.fill_normal(z))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::monitor::{constant_monitor, monitor_well, MonitorModel, Psi, WellQuantity};
    use crate::potentials::{Harmonic, ModifiedHarmonic, PotentialModel};
    use crate::rng::derive_stream;

    /// `g(x) = c0 + c1 x` (unbounded; fine for single-step arithmetic).
    struct Affine(f64, f64);

    impl Monitor for Affine {
        fn dim(&self) -> usize {
            1
        }
        fn value(&self, x: &[f64]) -> f64 {
            self.0 + self.1 * x[0]
        }
        fn value_and_gradient(&self, x: &[f64], grad: &mut [f64]) -> f64 {
            grad[0] = self.1;
            self.value(x)
        }
        fn bounds(&self) -> (f64, f64) {
            (f64::MIN_POSITIVE, f64::MAX)
        }
    }

    fn cfg(beta_inv: f64, gamma: f64) -> SamplerConfig {
        SamplerConfig { beta_inv, gamma, ..Default::default() }
    }

    fn flat() -> Harmonic {
        Harmonic { k: 0.0, dim: 1 }
    }

    fn unit() -> Harmonic {
        Harmonic { k: 1.0, dim: 1 }
    }

    fn state(x: f64, p: f64) -> SplitState {
        SplitState::new(vec![x], vec![p])
    }

    #[test]
    fn b_hat_examples() {
        let s = Underdamped::new(Composition::Baoab, Variant::Hat, flat(), Affine(1.0, 2.0), &cfg(1.0, 0.1)).unwrap();
        let mut st = state(0.3, 0.25);
        s.b_hat(&mut st, 0.5);
        assert_eq!(st.p[0], 1.25);
        assert_eq!(st.x[0], 0.3);
        let s = Underdamped::new(Composition::Baoab, Variant::Hat, unit(), constant_monitor(1, 1.0), &cfg(1.0, 0.1)).unwrap();
        let mut st = state(0.8, 0.1);
        s.b_hat(&mut st, 0.2);
        assert_eq!(st.p[0], 0.1 - 0.2 * 0.8);
    }

    #[test]
    fn b_hat_matches_hand_evaluation_for_g3() {
        let well = ModifiedHarmonic { a: 2.75, b: 0.1, c: 0.1, x0: 0.5 };
        let psi = Psi::new(0.1, 1.1, 1.0, 1);
        let mon = monitor_well(well.clone(), WellQuantity::Omega, psi);
        let s = Underdamped::new(Composition::Baoab, Variant::Hat, unit(), mon, &cfg(1.0, 0.1)).unwrap();
        let mut st = state(0.5, 0.0);
        s.b_hat(&mut st, 0.1);
        // at x = x0: ω = a, ω' = 0, so ∇g = 0 and g = ψ(2.75)
        let u: f64 = 2.75;
        let inner = u * u;
        let root = (1.0 + 0.01 * inner).sqrt();
        let g = root / (root / 1.1 + inner.sqrt());
        assert!((st.p[0] - 0.1 * (g * -0.5)).abs() < 1e-15);
    }

    #[test]
    fn o_hat_examples() {
        let s = Underdamped::new(Composition::Baoab, Variant::Hat, unit(), constant_monitor(1, 1.0), &cfg(1.0, 0.0)).unwrap();
        let mut st = state(0.0, 0.7);
        s.o_hat(&mut st, 0.3, &[1.5]);
        assert_eq!(st.p[0], 0.7);
        let s = Underdamped::new(Composition::Baoab, Variant::Hat, unit(), constant_monitor(1, 1.0), &cfg(0.4, 0.1)).unwrap();
        let mut st = state(0.0, 1.0);
        s.o_hat(&mut st, 0.1, &[0.0]);
        assert!((st.p[0] - 0.990_049_833_749_168).abs() < 1e-14);
        let mut st = state(0.0, 5.0);
        s.o_hat(&mut st, 1e6, &[0.8]);
        assert!((st.p[0] - 0.4f64.sqrt() * 0.8).abs() < 1e-15);
    }

    #[test]
    fn b_tilde_examples() {
        let s = Underdamped::new(Composition::Baoab, Variant::Tilde, unit(), constant_monitor(1, 0.5), &cfg(1.0, 0.1)).unwrap();
        let mut st = state(1.0, 0.0);
        s.b_tilde(&mut st, 0.2);
        assert!((st.p[0] + 0.1).abs() < 1e-16);
        let s = Underdamped::new(Composition::Baoab, Variant::Tilde, flat(), Affine(1.0, 3.0), &cfg(1.0, 0.1)).unwrap();
        let mut st = state(1.0, 0.4);
        s.b_tilde(&mut st, 0.2);
        assert_eq!(st.p[0], 0.4);
    }

    #[test]
    fn o_tilde_examples() {
        // g(0) = 1, ∇g = 0.3
        let s = Underdamped::new(Composition::Baoab, Variant::Tilde, flat(), Affine(1.0, 0.3), &cfg(1.0, 0.1)).unwrap();
        let mut st = state(0.0, 0.0);
        s.o_tilde(&mut st, 1.0, &[0.0]).unwrap();
        assert!((st.p[0] - 3.0 * (1.0 - (-0.1f64).exp())).abs() < 1e-15);
        assert!((st.p[0] - 0.285_48).abs() < 1e-5);
        let mut st = state(0.0, 2.0);
        s.o_tilde(&mut st, 1e6, &[0.0]).unwrap();
        assert!((st.p[0] - 0.3 / 0.1).abs() < 1e-12);
        // ∇g = 0 reduces to Ô
        let s = Underdamped::new(Composition::Baoab, Variant::Tilde, flat(), Affine(1.3, 0.0), &cfg(0.5, 0.2)).unwrap();
        let (mut a, mut b) = (state(0.1, 0.9), state(0.1, 0.9));
        s.o_tilde(&mut a, 0.4, &[0.3]).unwrap();
        s.o_hat(&mut b, 0.4, &[0.3]);
        assert_eq!(a.p, b.p);
    }

    #[test]
    fn o_tilde_requires_friction() {
        let err = Underdamped::new(Composition::Baoab, Variant::Tilde, unit(), constant_monitor(1, 1.0), &cfg(1.0, 0.0)).unwrap_err();
        assert!(matches!(err, Error::ZeroFriction(_)));
        let mut s = Underdamped::new(Composition::Baoab, Variant::Hat, unit(), constant_monitor(1, 1.0), &cfg(1.0, 0.0)).unwrap();
        s.variant = Variant::Tilde;
        assert!(s.o_tilde(&mut state(0.0, 0.0), 0.1, &[0.0]).is_err());
    }

    #[test]
    fn a_step_trivial_cases() {
        let s = Underdamped::new(Composition::Baoab, Variant::Hat, unit(), constant_monitor(1, 1.0), &cfg(1.0, 0.1)).unwrap();
        let mut st = state(0.2, 0.7);
        let a = s.a_implicit(&mut st, 0.1);
        assert_eq!(a, AStep { iters: 1, converged: true });
        assert_eq!(st.x[0], 0.2 + 0.1 * 0.7);
        let s = Underdamped::new(Composition::Baoab, Variant::Hat, unit(), Affine(1.0, 0.5), &cfg(1.0, 0.1)).unwrap();
        let mut st = state(0.2, 0.0);
        assert_eq!(s.a_implicit(&mut st, 0.1), AStep { iters: 1, converged: true });
        assert_eq!(st.x[0], 0.2);
    }

    #[test]
    fn a_step_solves_the_midpoint_relation_and_is_reversible() {
        let well = ModifiedHarmonic { a: 2.75, b: 0.1, c: 0.1, x0: 0.5 };
        let mon = monitor_well(well.clone(), WellQuantity::Omega, Psi::new(0.1, 1.1, 1.0, 1));
        let s = Underdamped::new(Composition::Baoab, Variant::Hat, PotentialModel::ModifiedHarmonic(well), mon.clone(), &cfg(1.0, 0.1)).unwrap();
        for &(x0, p, h) in &[(0.3, 1.2, 0.05), (0.45, -0.8, 0.1), (-1.0, 2.0, 0.2)] {
            let mut st = state(x0, p);
            let a = s.a_implicit(&mut st, h);
            assert!(a.converged && st.last_fp_diff <= 1e-12);
            let x1 = st.x[0];
            let residual = x1 - (x0 + h * p * mon.value(&[0.5 * (x0 + x1)]));
            assert!(residual.abs() < 1e-11);
            s.a_implicit(&mut st, -h);
            assert!((st.x[0] - x0).abs() <= 10.0 * 1e-12);
        }
    }

    #[test]
    fn a_step_flags_non_convergence() {
        let c = SamplerConfig { fp_max_iter: 3, ..cfg(1.0, 0.1) };
        let s = Underdamped::new(Composition::Baoab, Variant::Hat, unit(), Affine(1.0, 5.0), &c).unwrap();
        let mut st = state(0.0, 1.0);
        let a = s.a_implicit(&mut st, 1.0);
        assert!(!a.converged);
        assert_eq!(a.iters, 3);
    }

    #[test]
    fn baoab_fixed_is_velocity_verlet_without_friction() {
        let s = Underdamped::new(Composition::Baoab, Variant::Fixed, unit(), constant_monitor(1, 1.0), &cfg(1.0, 0.0)).unwrap();
        let mut st = state(1.0, 0.0);
        let info = s.step_with(&mut st, 0.1, |z| z.fill(0.0));
        assert!((st.x[0] - 0.995).abs() < 1e-15);
        assert!((st.p[0] + 0.09975).abs() < 1e-15);
        assert_eq!(info.monitor, 1.0);
        assert_eq!(info.fp_solves, 0);
    }

    #[test]
    fn caches_stay_coherent_across_steps() {
        let well = ModifiedHarmonic { a: 2.75, b: 0.1, c: 0.1, x0: 0.5 };
        let mon = monitor_well(well.clone(), WellQuantity::Omega, Psi::new(0.1, 1.1, 1.0, 1));
        for comp in [Composition::Baoab, Composition::Aboba, Composition::Obabo, Composition::Spv] {
            for var in [Variant::Fixed, Variant::Hat, Variant::Tilde] {
                let s = Underdamped::new(comp, var, PotentialModel::ModifiedHarmonic(well.clone()), mon.clone(), &cfg(1.0, 0.1)).unwrap();
                let mut st = state(0.2, 0.3);
                let mut rng = derive_stream(1, 0);
                for _ in 0..50 {
                    s.step(&mut st, &mut rng, 0.05);
                    assert!(s.cache_is_coherent(&st), "{comp:?} {var:?}");
                }
            }
        }
    }

    #[test]
    fn o_steps_thermalize_momentum() {
        let s = Underdamped::new(Composition::Baoab, Variant::Hat, unit(), constant_monitor(1, 0.7), &cfg(0.5, 1.0)).unwrap();
        let mut st = state(0.3, 3.0);
        let mut rng = derive_stream(9, 0);
        let mut z = [0.0];
        let n = 100_000;
        let mut ps = Vec::with_capacity(n);
        for _ in 0..n {
            // large h gives nearly independent draws
            rng.fill_normal(&mut z);
            s.o_hat(&mut st, 3.0, &z);
            ps.push(st.p[0]);
        }
        let mean = ps.iter().sum::<f64>() / n as f64;
        let var = ps.iter().map(|p| (p - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        let se = 0.5 * (2.0 / (n - 1) as f64).sqrt();
        assert!((var - 0.5).abs() < 3.0 * se, "var {var}");
    }

    fn run(s: &Underdamped<Harmonic, MonitorModel>, seed: u64, steps: usize) -> SplitState {
        let mut st = state(0.4, -0.2);
        let mut rng = derive_stream(seed, 0);
        for _ in 0..steps {
            s.step(&mut st, &mut rng, 0.1);
        }
        st
    }

    #[test]
    fn spv_ou_core_reduces_to_kick_plus_ou_for_small_steps() {
        let s = Underdamped::new(Composition::Spv, Variant::Tilde, unit(), constant_monitor(1, 1.0), &cfg(1.0, 0.5)).unwrap();
        let mut st = state(1.0, 0.0);
        s.o_full(&mut st, 1e-6, &[0.0]);
        assert!((st.p[0] + 1e-6).abs() < 1e-12);
    }

    #[test]
    fn hat_with_unit_monitor_matches_fixed_bitwise() {
        for comp in [Composition::Baoab, Composition::Aboba, Composition::Obabo] {
            let fixed = Underdamped::new(comp, Variant::Fixed, unit(), constant_monitor(1, 1.0), &cfg(1.0, 0.3)).unwrap();
            let hat = Underdamped::new(comp, Variant::Hat, unit(), constant_monitor(1, 1.0), &cfg(1.0, 0.3)).unwrap();
            let tilde = Underdamped::new(comp, Variant::Tilde, unit(), constant_monitor(1, 1.0), &cfg(1.0, 0.3)).unwrap();
            for seed in 0..5 {
                let a = run(&fixed, seed, 200);
                let b = run(&hat, seed, 200);
                let c = run(&tilde, seed, 200);
                assert_eq!(a.x, b.x);
                assert_eq!(a.p, b.p);
                assert_eq!(a.x, c.x);
                assert_eq!(a.p, c.p);
            }
        }
    }
}
