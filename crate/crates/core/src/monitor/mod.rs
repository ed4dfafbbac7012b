//! Monitor functions `g = ψ ∘ G`: bounded, strictly positive time rescalings.
//!
//! `ψ` maps a nonnegative "difficulty" magnitude `u` to a stepsize factor that
//! decreases monotonically from `M` at `u = 0` toward `mM/(m+M)` as `u → ∞`:
//!
//! ```text
//! ψ(u) = √(1 + m² r u^{2α}) / ( √(1 + m² r u^{2α}) / M + √(r u^{2α}) )
//! ```
//!
//! Larger `r` gives a faster decay. The scalar field `G` is problem-specific:
//! the local frequency of the modified harmonic well, the steep-prior
//! distance in the Bayesian example, or the distance to the narrow channel
//! in the two-pathway landscape.

mod audit;

pub use audit::{audit_criteria, AuditReport, AuditRow};

use serde::{Deserialize, Serialize};

use crate::potentials::{ModifiedHarmonic, Potential};

/// State-dependent time rescaling `g(x) > 0`.
pub trait Monitor: Send + Sync {
    fn dim(&self) -> usize;
    fn value(&self, x: &[f64]) -> f64;
    /// Writes `∇g(x)` into `grad` and returns `g(x)`.
    fn value_and_gradient(&self, x: &[f64], grad: &mut [f64]) -> f64;
    /// Declared `(lower, upper)` bounds on `g`.
    fn bounds(&self) -> (f64, f64);
}

impl<G: Monitor + ?Sized> Monitor for &G {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    #[inline]
    fn value(&self, x: &[f64]) -> f64 {
        (**self).value(x)
    }
    #[inline]
    fn value_and_gradient(&self, x: &[f64], grad: &mut [f64]) -> f64 {
        (**self).value_and_gradient(x, grad)
    }
    fn bounds(&self) -> (f64, f64) {
        (**self).bounds()
    }
}

/// Parameters of the bounded heuristic `ψ`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Psi {
    pub m: f64,
    #[serde(rename = "M")]
    pub big_m: f64,
    pub r: f64,
    pub alpha: u32,
}

impl Psi {
    pub fn new(m: f64, big_m: f64, r: f64, alpha: u32) -> Self {
        Self { m, big_m, r, alpha }
    }

    /// Limit of `ψ(u)` as `u → ∞`.
    pub fn floor(&self) -> f64 {
        self.m * self.big_m / (self.m + self.big_m)
    }

    /// `r u^{2α}`, computed as `r (u²)^α`.
    #[inline]
    fn inner(&self, u: f64) -> f64 {
        self.r * (u * u).powi(self.alpha as i32)
    }

    #[inline]
    pub fn value(&self, u: f64) -> f64 {
        let u = u.abs();
        let v = self.inner(u);
        if v <= 1.0 {
            let s = (1.0 + self.m * self.m * v).sqrt();
            s / (s / self.big_m + v.sqrt())
        } else {
            // divided through by √v; exact and overflow-free for huge u
            let s = (1.0 / v + self.m * self.m).sqrt();
            s / (s / self.big_m + 1.0)
        }
    }

    /// `dψ/du` for `u ≥ 0` (right derivative at `0`).
    #[inline]
    pub fn derivative(&self, u: f64) -> f64 {
        let u = u.abs();
        let alpha = self.alpha as f64;
        let v = self.inner(u);
        if v <= 1.0 {
            let s = (1.0 + self.m * self.m * v).sqrt();
            let den = s / self.big_m + v.sqrt();
            let lead = if self.alpha == 1 { 1.0 } else { u.powi(self.alpha as i32 - 1) };
            -alpha * self.r.sqrt() * lead / (s * den * den)
        } else {
            let s = (1.0 / v + self.m * self.m).sqrt();
            let den = s / self.big_m + 1.0;
            -alpha / (u * v * s * den * den)
        }
    }

    /// `ψ(1/f)` for `f ≥ 0`, finite at `f = 0` where it equals the floor.
    #[inline]
    pub fn value_of_reciprocal(&self, f: f64) -> f64 {
        let t = (f * f).powi(self.alpha as i32);
        let s = (t + self.m * self.m * self.r).sqrt();
        s / (s / self.big_m + self.r.sqrt())
    }

    /// `d/df ψ(1/f)` for `f ≥ 0`.
    #[inline]
    pub fn derivative_of_reciprocal(&self, f: f64) -> f64 {
        let f = f.abs();
        let t = (f * f).powi(self.alpha as i32);
        let s = (t + self.m * self.m * self.r).sqrt();
        let den = s / self.big_m + self.r.sqrt();
        let lead = f.powi(2 * self.alpha as i32 - 1);
        self.r.sqrt() * self.alpha as f64 * lead / (s * den * den)
    }
}

/// Scalar difficulty field `G` fed into `ψ`.
pub trait ScalarField: Send + Sync {
    fn dim(&self) -> usize;
    fn value(&self, x: &[f64]) -> f64;
    /// Writes `∇G(x)` into `grad` and returns `G(x)`.
    fn value_and_gradient(&self, x: &[f64], grad: &mut [f64]) -> f64;
}

/// Which way `ψ` is applied to the field.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Orientation {
    /// `g = ψ(|G|)`: small where `G` is large.
    #[default]
    Direct,
    /// `g = ψ(1/G)`: small where `G` vanishes.
    Reciprocal,
}

/// `g = ψ(|G|)` or `g = ψ(1/G)`, with gradient by the chain rule.
#[derive(Clone, Debug, PartialEq)]
pub struct MonitorFunction<F> {
    pub field: F,
    pub psi: Psi,
    pub orientation: Orientation,
}

impl<F: ScalarField> MonitorFunction<F> {
    pub fn new(field: F, psi: Psi) -> Self {
        Self { field, psi, orientation: Orientation::Direct }
    }

    pub fn with_orientation(mut self, orientation: Orientation) -> Self {
        self.orientation = orientation;
        self
    }
}

impl<F: ScalarField> Monitor for MonitorFunction<F> {
    fn dim(&self) -> usize {
        self.field.dim()
    }

    #[inline]
    fn value(&self, x: &[f64]) -> f64 {
        let g = self.field.value(x);
        match self.orientation {
            Orientation::Direct => self.psi.value(g),
            Orientation::Reciprocal => self.psi.value_of_reciprocal(g),
        }
    }

    #[inline]
    fn value_and_gradient(&self, x: &[f64], grad: &mut [f64]) -> f64 {
        let g = self.field.value_and_gradient(x, grad);
        let sign = if g > 0.0 {
            1.0
        } else if g < 0.0 {
            -1.0
        } else {
            0.0
        };
        let (val, slope) = match self.orientation {
            Orientation::Direct => (self.psi.value(g), self.psi.derivative(g) * sign),
            Orientation::Reciprocal => (self.psi.value_of_reciprocal(g), self.psi.derivative_of_reciprocal(g) * sign),
        };
        for v in grad.iter_mut() {
            *v *= slope;
        }
        val
    }

    fn bounds(&self) -> (f64, f64) {
        (self.psi.floor(), self.psi.big_m)
    }
}

/// `G ≡ 0`, giving the constant monitor `g ≡ M`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ZeroField {
    pub dim: usize,
}

impl ScalarField for ZeroField {
    fn dim(&self) -> usize {
        self.dim
    }
    fn value(&self, _x: &[f64]) -> f64 {
        0.0
    }
    fn value_and_gradient(&self, _x: &[f64], grad: &mut [f64]) -> f64 {
        grad.fill(0.0);
        0.0
    }
}

/// Fields derived from the modified harmonic well.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WellQuantity {
    /// `V'(x)` (the `g₁` design)
    Force,
    /// `ω(x)²` (the `g₂` design)
    OmegaSquared,
    /// `ω(x)` (the `g₃` design)
    Omega,
}

#[derive(Clone, Debug, PartialEq)]
pub struct WellField {
    pub well: ModifiedHarmonic,
    pub quantity: WellQuantity,
}

impl ScalarField for WellField {
    fn dim(&self) -> usize {
        1
    }

    #[inline]
    fn value(&self, x: &[f64]) -> f64 {
        match self.quantity {
            WellQuantity::Force => self.well.force_derivative(x[0]) * x[0],
            WellQuantity::OmegaSquared => {
                let w = self.well.omega(x[0]);
                w * w
            }
            WellQuantity::Omega => self.well.omega(x[0]),
        }
    }

    #[inline]
    fn value_and_gradient(&self, x: &[f64], grad: &mut [f64]) -> f64 {
        let (v, d) = match self.quantity {
            WellQuantity::Force => {
                let mut f = [0.0];
                self.well.gradient(x, &mut f);
                (f[0], self.well.laplacian(x).unwrap_or(f64::NAN))
            }
            WellQuantity::OmegaSquared => {
                let w = self.well.omega(x[0]);
                (w * w, 2.0 * w * self.well.omega_prime(x[0]))
            }
            WellQuantity::Omega => (self.well.omega(x[0]), self.well.omega_prime(x[0])),
        };
        grad[0] = d;
        v
    }
}

/// `G(μ) = 2(μ - a) + (ȳ - a)²` for the steep-prior posterior.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BayesField {
    pub y_mean: f64,
    pub a: f64,
}

impl ScalarField for BayesField {
    fn dim(&self) -> usize {
        1
    }
    #[inline]
    fn value(&self, x: &[f64]) -> f64 {
        let d = self.y_mean - self.a;
        2.0 * (x[0] - self.a) + d * d
    }
    #[inline]
    fn value_and_gradient(&self, x: &[f64], grad: &mut [f64]) -> f64 {
        grad[0] = 2.0;
        self.value(x)
    }
}

/// `f(x, y) = (y + x² - 4)²`, vanishing on the narrow upper channel.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct ChannelField;

impl ScalarField for ChannelField {
    fn dim(&self) -> usize {
        2
    }
    #[inline]
    fn value(&self, x: &[f64]) -> f64 {
        let s = x[1] + x[0] * x[0] - 4.0;
        s * s
    }
    #[inline]
    fn value_and_gradient(&self, x: &[f64], grad: &mut [f64]) -> f64 {
        let s = x[1] + x[0] * x[0] - 4.0;
        grad[0] = 4.0 * x[0] * s;
        grad[1] = 2.0 * s;
        s * s
    }
}

/// A field given by user closures for `G` and `∇G`.
pub struct FnField<V, D> {
    pub dim: usize,
    pub value: V,
    pub gradient: D,
}

impl<V, D> ScalarField for FnField<V, D>
where
    V: Fn(&[f64]) -> f64 + Send + Sync,
    D: Fn(&[f64], &mut [f64]) + Send + Sync,
{
    fn dim(&self) -> usize {
        self.dim
    }
    fn value(&self, x: &[f64]) -> f64 {
        (self.value)(x)
    }
    fn value_and_gradient(&self, x: &[f64], grad: &mut [f64]) -> f64 {
        (self.gradient)(x, grad);
        (self.value)(x)
    }
}

/// Runtime-selected built-in field.
#[derive(Clone, Debug, PartialEq)]
pub enum BuiltinField {
    Zero(ZeroField),
    Well(WellField),
    Bayes(BayesField),
    Channel(ChannelField),
}

impl ScalarField for BuiltinField {
    fn dim(&self) -> usize {
        match self {
            Self::Zero(f) => f.dim(),
            Self::Well(f) => f.dim(),
            Self::Bayes(f) => f.dim(),
            Self::Channel(f) => f.dim(),
        }
    }
    #[inline]
    fn value(&self, x: &[f64]) -> f64 {
        match self {
            Self::Zero(f) => f.value(x),
            Self::Well(f) => f.value(x),
            Self::Bayes(f) => f.value(x),
            Self::Channel(f) => f.value(x),
        }
    }
    #[inline]
    fn value_and_gradient(&self, x: &[f64], grad: &mut [f64]) -> f64 {
        match self {
            Self::Zero(f) => f.value_and_gradient(x, grad),
            Self::Well(f) => f.value_and_gradient(x, grad),
            Self::Bayes(f) => f.value_and_gradient(x, grad),
            Self::Channel(f) => f.value_and_gradient(x, grad),
        }
    }
}

pub type MonitorModel = MonitorFunction<BuiltinField>;

pub fn monitor_from_scalar<F: ScalarField>(field: F, m: f64, big_m: f64, r: f64, alpha: u32) -> MonitorFunction<F> {
    MonitorFunction::new(field, Psi::new(m, big_m, r, alpha))
}

/// Constant monitor `g ≡ c`.
pub fn constant_monitor(dim: usize, c: f64) -> MonitorModel {
    MonitorFunction::new(BuiltinField::Zero(ZeroField { dim }), Psi::new(c, c, 1.0, 1))
}

pub fn monitor_well(well: ModifiedHarmonic, quantity: WellQuantity, psi: Psi) -> MonitorModel {
    MonitorFunction::new(BuiltinField::Well(WellField { well, quantity }), psi)
}

pub fn monitor_bayes(y_mean: f64, a: f64, psi: Psi) -> MonitorModel {
    MonitorFunction::new(BuiltinField::Bayes(BayesField { y_mean, a }), psi)
}

/// Two-pathway monitor built on the upper-channel distance `f`.
///
/// `Orientation::Reciprocal` (`ψ(1/f)`) is the one that shrinks the step
/// near the narrow channel; `Orientation::Direct` (`ψ(f)`) is maximal there.
pub fn monitor_2d_channel(psi: Psi, orientation: Orientation) -> MonitorModel {
    MonitorFunction::new(BuiltinField::Channel(ChannelField), psi).with_orientation(orientation)
}

/// Largest relative mismatch between `∇g` and central differences of `g`.
pub fn gradient_fd_mismatch<G: Monitor + ?Sized>(mon: &G, probes: &[Vec<f64>], eps: f64) -> f64 {
    let d = mon.dim();
    let mut grad = vec![0.0; d];
    let mut worst: f64 = 0.0;
    for x in probes {
        mon.value_and_gradient(x, &mut grad);
        let mut xp = x.clone();
        for j in 0..d {
            xp[j] = x[j] + eps;
            let vp = mon.value(&xp);
            xp[j] = x[j] - eps;
            let vm = mon.value(&xp);
            xp[j] = x[j];
            let fd = (vp - vm) / (2.0 * eps);
            worst = worst.max((fd - grad[j]).abs() / grad[j].abs().max(1.0));
        }
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn well(a: f64, b: f64) -> ModifiedHarmonic {
        ModifiedHarmonic { a, b, c: 0.1, x0: 0.5 }
    }

    #[test]
    fn psi_at_zero_is_upper_bound() {
        for (m, big_m, r, alpha) in [(0.001, 2.0, 1.0, 1), (0.1, 1.1, 5.0, 2), (0.2, 1.0, 2.0, 3)] {
            let p = Psi::new(m, big_m, r, alpha);
            assert_eq!(p.value(0.0), big_m);
        }
    }

    #[test]
    fn psi_large_argument_limit() {
        let p = Psi::new(0.001, 2.0, 1.0, 2);
        let lim = 0.001 * 2.0 / 2.001;
        assert!((p.value(1e6) - lim).abs() < 1e-12);
        assert!((p.value(1e200) - lim).abs() < 1e-15);
        assert!(p.value(f64::MAX).is_finite());
    }

    #[test]
    fn psi_scalar_value() {
        // u = 1: √(1+m²r)/(√(1+m²r)/M + √r)
        let p = Psi::new(0.001, 2.0, 1.0, 2);
        let s = (1.0f64 + 1e-6).sqrt();
        let expect = s / (s / 2.0 + 1.0);
        assert!((p.value(1.0) - expect).abs() < 1e-15);
        assert!((p.value(1.0) - 0.66667).abs() < 1e-5);
    }

    #[test]
    fn psi_derivative_at_zero() {
        let p = Psi::new(0.1, 1.1, 2.0, 1);
        assert!((p.derivative(0.0) + 2.0f64.sqrt() * 1.1 * 1.1).abs() < 1e-14);
        for alpha in 2..5 {
            assert_eq!(Psi::new(0.1, 1.1, 2.0, alpha).derivative(0.0), 0.0);
        }
    }

    #[test]
    fn psi_derivative_matches_fd() {
        for alpha in 1..4 {
            let p = Psi::new(0.01, 1.5, 2.0, alpha);
            for u in [0.05f64, 0.3, 0.9, 1.0, 1.2, 4.0, 30.0] {
                let e = 1e-6 * u.max(1.0);
                let fd = (p.value(u + e) - p.value(u - e)) / (2.0 * e);
                let d = p.derivative(u);
                assert!((fd - d).abs() < 1e-7 * d.abs().max(1.0), "alpha={alpha} u={u}: {fd} vs {d}");
            }
        }
    }

    #[test]
    fn reciprocal_form_agrees_with_direct() {
        let p = Psi::new(0.2, 1.0, 1.0, 2);
        for f in [0.01, 0.5, 1.0, 3.0, 100.0] {
            assert!((p.value_of_reciprocal(f) - p.value(1.0 / f)).abs() < 1e-13);
            let e = 1e-6 * f.max(1e-3);
            let fd = (p.value_of_reciprocal(f + e) - p.value_of_reciprocal(f - e)) / (2.0 * e);
            assert!((fd - p.derivative_of_reciprocal(f)).abs() < 1e-6);
        }
        assert!((p.value_of_reciprocal(0.0) - p.floor()).abs() < 1e-15);
    }

    #[test]
    fn zero_field_gives_constant_monitor() {
        let g = constant_monitor(2, 1.7);
        let mut grad = [9.0, 9.0];
        assert_eq!(g.value_and_gradient(&[0.3, -4.0], &mut grad), 1.7);
        assert_eq!(grad, [0.0, 0.0]);
        let one = constant_monitor(1, 1.0);
        assert_eq!(one.value(&[12.0]), 1.0);
    }

    #[test]
    fn g3_shape_on_steep_well() {
        let g3 = monitor_well(well(10.0, 0.1), WellQuantity::Omega, Psi::new(0.001, 2.0, 1.0, 1));
        let xs: Vec<f64> = (0..=500).map(|i| -2.0 + 5.0 * i as f64 / 500.0).collect();
        let (argmin, _) = xs
            .iter()
            .map(|&x| (x, g3.value(&[x])))
            .fold((0.0, f64::MAX), |acc, (x, v)| if v < acc.1 { (x, v) } else { acc });
        assert!((argmin - 0.5).abs() < 0.02);
        assert!(g3.value(&[-2.0]) > 1.9 && g3.value(&[3.0]) > 1.9);
    }

    #[test]
    fn monitor_gradients_match_fd() {
        let probes: Vec<Vec<f64>> = [-2.0, -0.4, 0.45, 0.8, 2.9].iter().map(|&x| vec![x]).collect();
        for q in [WellQuantity::Force, WellQuantity::OmegaSquared, WellQuantity::Omega] {
            for alpha in [1, 2] {
                let g = monitor_well(well(10.0, 0.1), q, Psi::new(0.001, 2.0, 1.0, alpha));
                assert!(gradient_fd_mismatch(&g, &probes, 1e-6) < 1e-6, "{q:?} alpha={alpha}");
            }
        }
        let gb = monitor_bayes(1.7, 2.0, Psi::new(0.1, 1.0, 2.0, 2));
        let pb: Vec<Vec<f64>> = [1.5, 2.0, 2.5].iter().map(|&x| vec![x]).collect();
        assert!(gradient_fd_mismatch(&gb, &pb, 1e-6) < 1e-6);
        let gb1 = monitor_bayes(1.7, 2.0, Psi::new(0.1, 1.0, 2.0, 1));
        assert!(gradient_fd_mismatch(&gb1, &pb, 1e-6) < 1e-6);
    }

    #[test]
    fn bayes_monitor_peaks_where_argument_vanishes() {
        let g = monitor_bayes(1.7, 2.0, Psi::new(0.1, 1.0, 2.0, 2));
        // 2(μ - 2) + 0.09 = 0
        let mu = 2.0 - 0.09 / 2.0;
        assert!((g.value(&[mu]) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn channel_monitor_orientations() {
        let psi = Psi::new(0.2, 1.0, 1.0, 2);
        let direct = monitor_2d_channel(psi, Orientation::Direct);
        let recip = monitor_2d_channel(psi, Orientation::Reciprocal);
        let on_curve = [0.7, 4.0 - 0.49];
        assert_eq!(direct.value(&on_curve), 1.0);
        assert!((recip.value(&on_curve) - psi.floor()).abs() < 1e-15);
        // the reciprocal monitor approaches M away from the channel
        assert!(recip.value(&[0.0, -4.0]) > 0.99);
        let mut probes = Vec::new();
        for i in 0..5 {
            for j in 0..5 {
                probes.push(vec![-3.0 + 1.5 * i as f64 + 0.01, -3.0 + 1.5 * j as f64]);
            }
        }
        for mon in [&direct, &recip] {
            assert!(gradient_fd_mismatch(mon, &probes, 1e-6) < 1e-5);
        }
    }

    proptest! {
        #[test]
        fn psi_is_monotone(u1 in 0.0f64..50.0, du in 0.0f64..50.0, r in 0.1f64..10.0, alpha in 1u32..4) {
            let p = Psi::new(0.01, 2.0, r, alpha);
            prop_assert!(p.value(u1) >= p.value(u1 + du));
        }

        #[test]
        fn psi_stays_in_range(u in 0.0f64..1e6, m in 0.001f64..0.5, big_m in 0.6f64..5.0, alpha in 1u32..4) {
            let p = Psi::new(m, big_m, 1.0, alpha);
            let v = p.value(u);
            prop_assert!(v >= p.floor() * (1.0 - 1e-14) && v <= big_m * (1.0 + 1e-14));
        }

        #[test]
        fn larger_r_decays_faster(u in 0.0f64..20.0, alpha in 1u32..4) {
            let slow = Psi::new(0.01, 2.0, 1.0, alpha);
            let fast = Psi::new(0.01, 2.0, 5.0, alpha);
            prop_assert!(fast.value(u) <= slow.value(u) + 1e-15);
        }
    }
}
