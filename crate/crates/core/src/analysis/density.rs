//! Normalized one-dimensional densities by quadrature, inverse-CDF sampling
//! and histogram distances.

use std::fmt;
use std::sync::{Arc, OnceLock};

use serde::{Deserialize, Serialize};

use super::quadrature::{gk15, integrate, QuadResult};
use crate::error::{Error, Result};
use crate::potentials::Potential;
use crate::rng::RngStream;

/// Mass allowed outside the support before the support is rejected.
pub const TAIL_LIMIT: f64 = 1e-12;
/// Default relative tolerance for all reference quadratures.
pub const DEFAULT_TOL: f64 = 1e-12;

const SHIFT_GRID: usize = 4001;
const CDF_CELLS: usize = 8192;

type LogWeight = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// `ρ(x) = exp(w(x)) / Z` on a finite support, normalized by quadrature.
#[derive(Clone)]
pub struct Density1D {
    log_w: LogWeight,
    shift: f64,
    norm: f64,
    norm_err: f64,
    tail_mass: f64,
    support: (f64, f64),
    tol: f64,
    cdf: OnceLock<Arc<Vec<f64>>>,
}

impl fmt::Debug for Density1D {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Density1D")
            .field("support", &self.support)
            .field("log_z", &self.log_normalizer())
            .field("tail_mass", &self.tail_mass)
            .finish()
    }
}

impl Density1D {
    /// Normalizes `exp(log_w)` over `support`, rejecting supports that leave
    /// more than [`TAIL_LIMIT`] of the mass in the two adjacent windows of
    /// the same width.
    pub fn new(log_w: impl Fn(f64) -> f64 + Send + Sync + 'static, support: (f64, f64), tol: f64) -> Result<Self> {
        let (lo, hi) = support;
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(Error::InvalidConfig(format!("support [{lo}, {hi}] must be finite with lo < hi")));
        }
        let log_w: LogWeight = Arc::new(log_w);
        let shift = (0..SHIFT_GRID)
            .map(|i| log_w(lo + (hi - lo) * i as f64 / (SHIFT_GRID - 1) as f64))
            .filter(|v| v.is_finite())
            .fold(f64::NEG_INFINITY, f64::max);
        if !shift.is_finite() {
            return Err(Error::NonFinite { point: vec![lo, hi] });
        }
        let w = |x: f64| (log_w(x) - shift).exp();
        let q = integrate(w, lo, hi, 0.0, tol)?;
        let width = hi - lo;
        let left = integrate(w, lo - width, lo, 1e-3 * TAIL_LIMIT * q.value, 0.0)?;
        let right = integrate(w, hi, hi + width, 1e-3 * TAIL_LIMIT * q.value, 0.0)?;
        let tail = (left.value + right.value) / q.value;
        if !(tail < TAIL_LIMIT) {
            return Err(Error::SupportTooNarrow { tail, limit: TAIL_LIMIT });
        }
        Ok(Self { log_w, shift, norm: q.value, norm_err: q.abs_err, tail_mass: tail, support, tol, cdf: OnceLock::new() })
    }

    /// Gibbs density `exp(-βV)/Z` of a one-dimensional potential.
    pub fn gibbs<P: Potential + 'static>(pot: P, beta_inv: f64, support: (f64, f64), tol: f64) -> Result<Self> {
        check_1d(&pot)?;
        let beta = 1.0 / beta_inv;
        Self::new(move |x| -beta * pot.value(&[x]), support, tol)
    }

    pub fn support(&self) -> (f64, f64) {
        self.support
    }

    /// `ln Z` with `Z = ∫ exp(w)` over the support.
    pub fn log_normalizer(&self) -> f64 {
        self.shift + self.norm.ln()
    }

    /// Relative error estimate of the normalizer.
    pub fn normalizer_rel_err(&self) -> f64 {
        self.norm_err / self.norm
    }

    pub fn tail_mass(&self) -> f64 {
        self.tail_mass
    }

    #[inline]
    pub fn pdf(&self, x: f64) -> f64 {
        ((self.log_w)(x) - self.shift).exp() / self.norm
    }

    /// `∫ f ρ` over the support, to the construction tolerance.
    pub fn expectation(&self, f: impl Fn(f64) -> f64) -> Result<QuadResult> {
        let scale = self.norm;
        let lw = &self.log_w;
        let shift = self.shift;
        let r = integrate(|x| f(x) * (lw(x) - shift).exp(), self.support.0, self.support.1, self.tol * 1e-2 * scale, self.tol)?;
        Ok(QuadResult { value: r.value / scale, abs_err: r.abs_err / scale, intervals: r.intervals })
    }

    /// Probability mass of each bin `[edges[i], edges[i+1]]`.
    pub fn bin_masses(&self, edges: &[f64]) -> Result<Vec<f64>> {
        let lw = &self.log_w;
        let shift = self.shift;
        edges
            .windows(2)
            .map(|e| integrate(|x| (lw(x) - shift).exp(), e[0], e[1], self.tol * 1e-2 * self.norm, self.tol).map(|q| q.value / self.norm))
            .collect()
    }

    fn cdf_table(&self) -> &[f64] {
        self.cdf.get_or_init(|| {
            let (lo, hi) = self.support;
            let dx = (hi - lo) / CDF_CELLS as f64;
            let lw = &self.log_w;
            let shift = self.shift;
            let mut acc = Vec::with_capacity(CDF_CELLS + 1);
            acc.push(0.0);
            let mut s = 0.0;
            for i in 0..CDF_CELLS {
                let a = lo + dx * i as f64;
                s += gk15(&|x| (lw(x) - shift).exp(), a, a + dx).0;
                acc.push(s);
            }
            for v in acc.iter_mut() {
                *v /= s;
            }
            Arc::new(acc)
        })
    }

    /// Inverse-CDF draw: locates the cell by bisection on a tabulated CDF
    /// and interpolates linearly inside it.
    pub fn sample(&self, rng: &mut RngStream) -> f64 {
        let cdf = self.cdf_table();
        let u = rng.uniform();
        let i = cdf.partition_point(|&c| c <= u).clamp(1, CDF_CELLS) - 1;
        let (c0, c1) = (cdf[i], cdf[i + 1]);
        let t = if c1 > c0 { (u - c0) / (c1 - c0) } else { 0.5 };
        let (lo, hi) = self.support;
        lo + (hi - lo) * (i as f64 + t) / CDF_CELLS as f64
    }
}

fn check_1d<P: Potential + ?Sized>(pot: &P) -> Result<()> {
    if pot.dim() != 1 {
        return Err(Error::Dimension { expected: 1, got: pot.dim() });
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReferenceMoments {
    pub beta_inv: f64,
    /// `Z = ∫ exp(-βV)` over the support.
    pub z: f64,
    pub log_z: f64,
    /// `E_ρ[xᵏ]` for `k = 1..=k_max`.
    pub moments: Vec<f64>,
    pub support: (f64, f64),
    /// Largest quadrature error estimate among the normalized integrals.
    pub abs_err: f64,
    pub tail_mass: f64,
}

/// Gibbs moments `E_ρ[xᵏ]` by adaptive quadrature at the default tolerance.
pub fn gibbs_reference<P: Potential + Clone + 'static>(pot: &P, beta_inv: f64, k_max: usize, support: (f64, f64)) -> Result<ReferenceMoments> {
    gibbs_reference_with_tol(pot, beta_inv, k_max, support, DEFAULT_TOL)
}

pub fn gibbs_reference_with_tol<P: Potential + Clone + 'static>(
    pot: &P,
    beta_inv: f64,
    k_max: usize,
    support: (f64, f64),
    tol: f64,
) -> Result<ReferenceMoments> {
    let rho = Density1D::gibbs(pot.clone(), beta_inv, support, tol)?;
    reference_from_density(&rho, beta_inv, k_max)
}

pub fn reference_from_density(rho: &Density1D, beta_inv: f64, k_max: usize) -> Result<ReferenceMoments> {
    let mut moments = Vec::with_capacity(k_max);
    let mut abs_err = rho.normalizer_rel_err();
    for k in 1..=k_max {
        let q = rho.expectation(|x| x.powi(k as i32))?;
        abs_err = abs_err.max(q.abs_err);
        moments.push(q.value);
    }
    let log_z = rho.log_normalizer();
    Ok(ReferenceMoments { beta_inv, z: log_z.exp(), log_z, moments, support: rho.support(), abs_err, tail_mass: rho.tail_mass() })
}

#[derive(Clone, Debug, PartialEq)]
pub struct Histogram {
    pub edges: Vec<f64>,
    pub counts: Vec<u64>,
    /// Samples outside the support.
    pub outside: u64,
    pub total: u64,
}

impl Histogram {
    pub fn new(samples: &[f64], bins: usize, support: (f64, f64)) -> Self {
        let (lo, hi) = support;
        let w = (hi - lo) / bins as f64;
        let edges: Vec<f64> = (0..=bins).map(|i| if i == bins { hi } else { lo + w * i as f64 }).collect();
        let mut counts = vec![0u64; bins];
        let mut outside = 0;
        for &x in samples {
            if !(x >= lo && x <= hi) {
                outside += 1;
                continue;
            }
            let i = (((x - lo) / w) as usize).min(bins - 1);
            counts[i] += 1;
        }
        Self { edges, counts, outside, total: samples.len() as u64 }
    }

    /// `Σ|cᵢ/n - Pᵢ|`, with everything outside the bins treated as one
    /// extra bin.
    pub fn l1(&self, masses: &[f64]) -> f64 {
        let n = self.total as f64;
        let inside: f64 = self.counts.iter().zip(masses).map(|(&c, &p)| (c as f64 / n - p).abs()).sum();
        let missing = (1.0 - masses.iter().sum::<f64>()).max(0.0);
        inside + (self.outside as f64 / n - missing).abs()
    }
}

/// L1 distance between the normalized histogram of `samples` and the
/// bin-integrated reference density.
pub fn histogram_l1(samples: &[f64], density: &Density1D, bins: usize, support: (f64, f64)) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::EmptySamples);
    }
    if bins < 50 {
        return Err(Error::InvalidConfig(format!("bins: need at least 50, got {bins}")));
    }
    let hist = Histogram::new(samples, bins, support);
    let masses = density.bin_masses(&hist.edges)?;
    Ok(hist.l1(&masses))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::potentials::{harmonic, modified_harmonic, Harmonic};
    use crate::rng::derive_stream;

    #[test]
    fn gaussian_moments_are_exact() {
        let r = gibbs_reference(&harmonic(1.0), 1.0, 4, (-15.0, 15.0)).unwrap();
        let want = [0.0, 1.0, 0.0, 3.0];
        for (m, w) in r.moments.iter().zip(want) {
            assert!((m - w).abs() < 1e-10, "{m} vs {w}");
        }
        assert!((r.z - (2.0 * std::f64::consts::PI).sqrt()).abs() < 1e-10);
        assert!(r.abs_err < 1e-10);
        let r = gibbs_reference(&harmonic(2.0), 0.5, 2, (-10.0, 10.0)).unwrap();
        assert!((r.moments[1] - 0.25).abs() < 1e-12);
    }

    #[test]
    fn zeroth_moment_normalizes() {
        let rho = Density1D::gibbs(modified_harmonic(2.75, 0.1, 0.1, 0.5), 0.1, (-10.0, 10.0), DEFAULT_TOL).unwrap();
        assert!((rho.expectation(|_| 1.0).unwrap().value - 1.0).abs() < 1e-13);
    }

    #[test]
    fn two_tolerances_agree() {
        let pot = modified_harmonic(2.75, 0.1, 0.1, 0.5);
        let a = gibbs_reference_with_tol(&pot, 0.1, 4, (-10.0, 10.0), 1e-10).unwrap();
        let b = gibbs_reference_with_tol(&pot, 0.1, 4, (-10.0, 10.0), 1e-12).unwrap();
        assert!(((a.z - b.z) / b.z).abs() < 1e-9);
        for (x, y) in a.moments.iter().zip(&b.moments) {
            assert!((x - y).abs() <= 1e-9 * y.abs().max(1e-3));
        }
    }

    #[test]
    fn narrow_support_is_rejected() {
        let err = gibbs_reference(&harmonic(1.0), 1.0, 2, (-2.0, 2.0)).unwrap_err();
        assert!(matches!(err, Error::SupportTooNarrow { .. }));
        assert!(err.to_string().contains("widen"));
    }

    #[test]
    fn inverse_cdf_samples_match_their_density() {
        let rho = Density1D::gibbs(modified_harmonic(10.0, 0.1, 0.1, 0.5), 0.1, (-10.0, 10.0), DEFAULT_TOL).unwrap();
        let mut rng = derive_stream(5, 0);
        let xs: Vec<f64> = (0..1_000_000).map(|_| rho.sample(&mut rng)).collect();
        let l1 = histogram_l1(&xs, &rho, 200, (-4.0, 4.0)).unwrap();
        assert!(l1 < 0.02, "L1 = {l1}");
    }

    #[test]
    fn point_mass_gives_maximal_distance() {
        let rho = Density1D::gibbs(Harmonic { k: 1.0, dim: 1 }, 1.0, (-15.0, 15.0), DEFAULT_TOL).unwrap();
        let xs = vec![0.01; 1000];
        let l1 = histogram_l1(&xs, &rho, 200, (-10.0, 10.0)).unwrap();
        assert!(l1 > 1.9 && l1 <= 2.0 + 1e-12, "{l1}");
    }

    #[test]
    fn histogram_errors() {
        let rho = Density1D::gibbs(harmonic(1.0), 1.0, (-15.0, 15.0), DEFAULT_TOL).unwrap();
        assert!(matches!(histogram_l1(&[], &rho, 100, (-1.0, 1.0)), Err(Error::EmptySamples)));
        assert!(histogram_l1(&[0.0], &rho, 10, (-1.0, 1.0)).is_err());
    }
}
