//! Built-in potentials with hand-derived gradients.

use serde::{Deserialize, Serialize};

/// A smooth confining potential `V: ℝᵈ → ℝ`.
pub trait Potential: Send + Sync {
    fn dim(&self) -> usize;
    fn value(&self, x: &[f64]) -> f64;
    /// Writes `∇V(x)` into `out`.
    fn gradient(&self, x: &[f64], out: &mut [f64]);
    /// `Σᵢ ∂²V/∂xᵢ²`, when an analytic form is available.
    fn laplacian(&self, _x: &[f64]) -> Option<f64> {
        None
    }
}

/// `V(x) = k‖x‖²/2`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Harmonic {
    pub k: f64,
    pub dim: usize,
}

impl Potential for Harmonic {
    fn dim(&self) -> usize {
        self.dim
    }

    fn value(&self, x: &[f64]) -> f64 {
        0.5 * self.k * x.iter().map(|v| v * v).sum::<f64>()
    }

    fn gradient(&self, x: &[f64], out: &mut [f64]) {
        for (o, v) in out.iter_mut().zip(x) {
            *o = self.k * v;
        }
    }

    fn laplacian(&self, _x: &[f64]) -> Option<f64> {
        Some(self.k * self.dim as f64)
    }
}

/// One-dimensional harmonic well whose stiffness rises sharply near `x0`.
///
/// The force is `-V'(x) = -(ω(x)² + c) x` with frequency
/// `ω(x) = b / (b/a + (x - x0)²)`, so `ω(x0) = a`. The closed form of `V`
/// uses `arctan(√(a/b) (x - x0))`, which is the antiderivative of that force.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModifiedHarmonic {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub x0: f64,
}

impl ModifiedHarmonic {
    #[inline]
    pub fn omega(&self, x: f64) -> f64 {
        let u = x - self.x0;
        self.b / (self.b / self.a + u * u)
    }

    #[inline]
    pub fn omega_prime(&self, x: f64) -> f64 {
        let u = x - self.x0;
        let den = self.b + self.a * u * u;
        -2.0 * self.a * self.a * self.b * u / (den * den)
    }

    #[inline]
    pub fn force_derivative(&self, x: f64) -> f64 {
        let w = self.omega(x);
        w * w + self.c
    }
}

impl Potential for ModifiedHarmonic {
    fn dim(&self) -> usize {
        1
    }

    fn value(&self, x: &[f64]) -> f64 {
        let (a, b, c, x0) = (self.a, self.b, self.c, self.x0);
        let u = x[0] - x0;
        0.5 * (a.powf(1.5) * b.sqrt() * x0 * ((a / b).sqrt() * u).atan()
            + a * b * (a * u * x0 - b) / (a * u * u + b)
            + c * u * u
            + 2.0 * c * u * x0)
    }

    fn gradient(&self, x: &[f64], out: &mut [f64]) {
        out[0] = self.force_derivative(x[0]) * x[0];
    }

    fn laplacian(&self, x: &[f64]) -> Option<f64> {
        let w = self.omega(x[0]);
        Some(w * w + self.c + 2.0 * w * self.omega_prime(x[0]) * x[0])
    }
}

/// Negative log posterior of a Gaussian mean under a steep, nearly flat prior:
/// `V(μ) = Σᵢ ½(yᵢ - μ)² + (μ - a)^{2K}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BayesPosterior {
    pub y: Vec<f64>,
    pub k: u32,
    pub a: f64,
}

impl BayesPosterior {
    pub fn y_mean(&self) -> f64 {
        self.y.iter().sum::<f64>() / self.y.len() as f64
    }
}

impl Potential for BayesPosterior {
    fn dim(&self) -> usize {
        1
    }

    fn value(&self, x: &[f64]) -> f64 {
        let mu = x[0];
        let lik: f64 = self.y.iter().map(|y| 0.5 * (y - mu) * (y - mu)).sum();
        lik + (mu - self.a).powi(2 * self.k as i32)
    }

    fn gradient(&self, x: &[f64], out: &mut [f64]) {
        let mu = x[0];
        let n = self.y.len() as f64;
        let sum: f64 = self.y.iter().sum();
        let k = self.k as i32;
        out[0] = -(sum - n * mu - 2.0 * self.k as f64 * (mu - self.a).powi(2 * k - 1));
    }

    fn laplacian(&self, x: &[f64]) -> Option<f64> {
        let k = self.k as f64;
        let d = x[0] - self.a;
        let prior = if self.k == 1 { 2.0 } else { 2.0 * k * (2.0 * k - 1.0) * d.powi(2 * self.k as i32 - 2) };
        Some(self.y.len() as f64 + prior)
    }
}

/// Planar landscape with a narrow upper channel along `y = 4 - x²` and a
/// wide, slightly higher lower channel along `y = x² - 4`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TwoPathway {
    pub k1: f64,
    pub k2: f64,
    pub k3: f64,
    pub k4: f64,
}

impl Default for TwoPathway {
    fn default() -> Self {
        Self { k1: 0.1, k2: 50.0, k3: 50.0, k4: 0.1 }
    }
}

impl TwoPathway {
    /// Squared distance-like coordinate that vanishes on the lower arc `y = x² - 4`.
    #[inline]
    pub fn lower(x: f64, y: f64) -> f64 {
        let s = y - x * x + 4.0;
        s * s
    }

    /// Vanishes on the upper (narrow) arc `y = 4 - x²`.
    #[inline]
    pub fn upper(x: f64, y: f64) -> f64 {
        let s = y + x * x - 4.0;
        s * s
    }
}

impl Potential for TwoPathway {
    fn dim(&self) -> usize {
        2
    }

    fn value(&self, x: &[f64]) -> f64 {
        let (px, py) = (x[0], x[1]);
        let p1 = Self::lower(px, py);
        let p2 = Self::upper(px, py);
        (1.0 + self.k1 * p1 * p2) / (1.0 + p1)
            + self.k3 * self.k2 * p1 * p2 / (1.0 + self.k2 * p2)
            + self.k4 * px * px
    }

    fn gradient(&self, x: &[f64], out: &mut [f64]) {
        let (px, py) = (x[0], x[1]);
        let s1 = py - px * px + 4.0;
        let s2 = py + px * px - 4.0;
        let p1 = s1 * s1;
        let p2 = s2 * s2;
        let (k1, k2, k3) = (self.k1, self.k2, self.k3);
        let d1 = 1.0 + p1;
        let d2 = 1.0 + k2 * p2;
        // partials of q with respect to p1 and p2
        let q_p1 = (k1 * p2 - 1.0) / (d1 * d1) + k3 * k2 * p2 / d2;
        let q_p2 = k1 * p1 / d1 + k3 * k2 * p1 / (d2 * d2);
        let p1_x = -4.0 * px * s1;
        let p1_y = 2.0 * s1;
        let p2_x = 4.0 * px * s2;
        let p2_y = 2.0 * s2;
        out[0] = q_p1 * p1_x + q_p2 * p2_x + 2.0 * self.k4 * px;
        out[1] = q_p1 * p1_y + q_p2 * p2_y;
    }
}

/// Runtime-selected built-in potential.
#[derive(Clone, Debug, PartialEq)]
pub enum PotentialModel {
    Harmonic(Harmonic),
    ModifiedHarmonic(ModifiedHarmonic),
    Bayes(BayesPosterior),
    TwoPathway(TwoPathway),
}

pub fn modified_harmonic(a: f64, b: f64, c: f64, x0: f64) -> PotentialModel {
    PotentialModel::ModifiedHarmonic(ModifiedHarmonic { a, b, c, x0 })
}

pub fn harmonic(k: f64) -> PotentialModel {
    PotentialModel::Harmonic(Harmonic { k, dim: 1 })
}

pub fn bayes_posterior(y: Vec<f64>, k: u32, a: f64) -> PotentialModel {
    PotentialModel::Bayes(BayesPosterior { y, k, a })
}

pub fn two_pathway(k1: f64, k2: f64, k3: f64, k4: f64) -> PotentialModel {
    PotentialModel::TwoPathway(TwoPathway { k1, k2, k3, k4 })
}

impl PotentialModel {
    pub fn id(&self) -> &'static str {
        match self {
            Self::Harmonic(_) => "harmonic",
            Self::ModifiedHarmonic(_) => "modified_harmonic",
            Self::Bayes(_) => "bayes",
            Self::TwoPathway(_) => "two_pathway",
        }
    }
}

impl Potential for PotentialModel {
    fn dim(&self) -> usize {
        match self {
            Self::Harmonic(p) => p.dim(),
            Self::ModifiedHarmonic(p) => p.dim(),
            Self::Bayes(p) => p.dim(),
            Self::TwoPathway(p) => p.dim(),
        }
    }

    #[inline]
    fn value(&self, x: &[f64]) -> f64 {
        match self {
            Self::Harmonic(p) => p.value(x),
            Self::ModifiedHarmonic(p) => p.value(x),
            Self::Bayes(p) => p.value(x),
            Self::TwoPathway(p) => p.value(x),
        }
    }

    #[inline]
    fn gradient(&self, x: &[f64], out: &mut [f64]) {
        match self {
            Self::Harmonic(p) => p.gradient(x, out),
            Self::ModifiedHarmonic(p) => p.gradient(x, out),
            Self::Bayes(p) => p.gradient(x, out),
            Self::TwoPathway(p) => p.gradient(x, out),
        }
    }

    fn laplacian(&self, x: &[f64]) -> Option<f64> {
        match self {
            Self::Harmonic(p) => p.laplacian(x),
            Self::ModifiedHarmonic(p) => p.laplacian(x),
            Self::Bayes(p) => p.laplacian(x),
            Self::TwoPathway(p) => p.laplacian(x),
        }
    }
}

impl<P: Potential + ?Sized> Potential for &P {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn value(&self, x: &[f64]) -> f64 {
        (**self).value(x)
    }
    fn gradient(&self, x: &[f64], out: &mut [f64]) {
        (**self).gradient(x, out)
    }
    fn laplacian(&self, x: &[f64]) -> Option<f64> {
        (**self).laplacian(x)
    }
}

/// Largest componentwise relative mismatch between `∇V` and central
/// differences of `V` with step `eps`, over the given probe points.
pub fn gradient_fd_mismatch<P: Potential + ?Sized>(pot: &P, probes: &[Vec<f64>], eps: f64) -> f64 {
    let d = pot.dim();
    let mut grad = vec![0.0; d];
    let mut worst: f64 = 0.0;
    for x in probes {
        pot.gradient(x, &mut grad);
        let mut xp = x.clone();
        for j in 0..d {
            xp[j] = x[j] + eps;
            let vp = pot.value(&xp);
            xp[j] = x[j] - eps;
            let vm = pot.value(&xp);
            xp[j] = x[j];
            let fd = (vp - vm) / (2.0 * eps);
            let err = (fd - grad[j]).abs() / grad[j].abs().max(1.0);
            worst = worst.max(err);
        }
    }
    worst
}
