//! Weak-error sweeps over stepsizes and log-log slope fits.

use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::density::ReferenceMoments;
use crate::ensemble::{run_ensemble, InitialCondition, SamplerConfig};
use crate::error::Result;
use crate::monitor::Monitor;
use crate::potentials::Potential;
use crate::scheme::{Scheme, SchemeStepper};

/// Points with `error <= NOISE_FACTOR * stderr` are excluded from fits.
pub const NOISE_FACTOR: f64 = 3.0;
/// A leading (largest-`h`) point is dropped when that raises `R²` by more than this.
pub const R2_GAIN: f64 = 0.05;

/// Which ensemble statistic is compared against the reference.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Estimator {
    /// `(1/M) Σⱼ φ(X_N^j)` at the final time.
    #[default]
    Final,
    /// Per-trajectory time average over the measured steps, then averaged.
    TimeAverage,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConvergenceRow {
    pub scheme: Scheme,
    pub h: f64,
    pub k: usize,
    pub estimate: f64,
    pub error: f64,
    pub stderr: f64,
    pub mean_monitor: f64,
    pub escaped: u64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SlopeFit {
    pub scheme: Scheme,
    pub k: usize,
    /// `None` when fewer than two points clear the noise floor.
    pub slope: Option<f64>,
    pub intercept: f64,
    pub r2: f64,
    pub points: usize,
    pub h_min: f64,
    pub h_max: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ConvergenceTable {
    pub rows: Vec<ConvergenceRow>,
    pub slopes: Vec<SlopeFit>,
}

impl ConvergenceTable {
    pub fn slope(&self, scheme: Scheme, k: usize) -> Option<&SlopeFit> {
        self.slopes.iter().find(|s| s.scheme == scheme && s.k == k)
    }

    /// Rows for one `(scheme, k)`, sorted by increasing `h`.
    pub fn series(&self, scheme: Scheme, k: usize) -> Vec<&ConvergenceRow> {
        let mut v: Vec<&ConvergenceRow> = self.rows.iter().filter(|r| r.scheme == scheme && r.k == k).collect();
        v.sort_by(|a, b| a.h.total_cmp(&b.h));
        v
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("scheme,h,k,error,stderr\n");
        for r in &self.rows {
            let _ = writeln!(s, "{},{:.16e},{},{:.16e},{:.16e}", r.scheme, r.h, r.k, r.error, r.stderr);
        }
        s
    }

    pub fn slopes_csv(&self) -> String {
        let mut s = String::from("scheme,k,slope,intercept,r2,points,h_min,h_max\n");
        for f in &self.slopes {
            let slope = f.slope.map_or_else(|| "indeterminate".to_string(), |v| format!("{v:.16e}"));
            let _ = writeln!(s, "{},{},{},{:.16e},{:.16e},{},{:.16e},{:.16e}", f.scheme, f.k, slope, f.intercept, f.r2, f.points, f.h_min, f.h_max);
        }
        s
    }
}

fn least_squares(pts: &[(f64, f64)]) -> (f64, f64, f64) {
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = pts.iter().map(|p| (p.1 - my).powi(2)).sum();
    let slope = sxy / sxx;
    let r2 = if syy > 0.0 { sxy * sxy / (sxx * syy) } else { 1.0 };
    (slope, my - slope * mx, r2)
}

/// Fits `log error = slope · log h + c` over `(h, error, stderr)` points.
///
/// Points at the noise floor (`error <= 3 stderr`) are excluded first. Then
/// the largest `h` is dropped while doing so improves `R²` by more than
/// [`R2_GAIN`] and at least three points remain.
pub fn fit_slope(scheme: Scheme, k: usize, points: &[(f64, f64, f64)]) -> SlopeFit {
    let mut pts: Vec<(f64, f64)> = points
        .iter()
        .filter(|(h, e, se)| e.is_finite() && *h > 0.0 && *e > 0.0 && !(*e <= NOISE_FACTOR * se))
        .map(|&(h, e, _)| (h.ln(), e.ln()))
        .collect();
    pts.sort_by(|a, b| a.0.total_cmp(&b.0));
    let empty = SlopeFit { scheme, k, slope: None, intercept: f64::NAN, r2: f64::NAN, points: pts.len(), h_min: f64::NAN, h_max: f64::NAN };
    if pts.len() < 2 || pts.first().map(|p| p.0) == pts.last().map(|p| p.0) {
        return empty;
    }
    let mut fit = least_squares(&pts);
    while pts.len() > 3 {
        let trial = least_squares(&pts[..pts.len() - 1]);
        if trial.2 - fit.2 > R2_GAIN {
            pts.pop();
            fit = trial;
        } else {
            break;
        }
    }
    SlopeFit {
        scheme,
        k,
        slope: Some(fit.0),
        intercept: fit.1,
        r2: fit.2,
        points: pts.len(),
        h_min: pts[0].0.exp(),
        h_max: pts[pts.len() - 1].0.exp(),
    }
}

/// Count of places where the error grows as `h` shrinks, over points above
/// the noise floor. Rows must belong to one `(scheme, k)` series.
pub fn monotonicity_violations(series: &[&ConvergenceRow]) -> usize {
    let mut v: Vec<&&ConvergenceRow> = series.iter().filter(|r| r.error > NOISE_FACTOR * r.stderr).collect();
    v.sort_by(|a, b| a.h.total_cmp(&b.h));
    v.windows(2).filter(|w| w[0].error > w[1].error).count()
}

/// Runs one ensemble per `(scheme, h)` and tabulates `|φ̂ - φ̄|` for every
/// reference moment, then fits a slope per `(scheme, k)`.
///
/// All runs share `cfg.seed`, so neighbouring stepsizes use common random
/// numbers. Sweeps are meaningful with four or more stepsizes spanning at
/// least a decade; shorter lists still run and report indeterminate slopes.
#[allow(clippy::too_many_arguments)]
pub fn weak_error_sweep<P: Potential, G: Monitor>(
    schemes: &[Scheme],
    hs: &[f64],
    cfg: &SamplerConfig,
    pot: &P,
    mon: &G,
    init: &InitialCondition,
    reference: &ReferenceMoments,
    estimator: Estimator,
) -> Result<ConvergenceTable> {
    let jobs: Vec<(Scheme, f64)> = schemes.iter().flat_map(|&s| hs.iter().map(move |&h| (s, h))).collect();
    let reports = jobs
        .par_iter()
        .map(|&(scheme, h)| {
            let c = SamplerConfig { h, ..cfg.clone() };
            let stepper = SchemeStepper::new(scheme, pot, mon, &c)?;
            Ok((scheme, h, run_ensemble(&stepper, &c, init)?.report))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut table = ConvergenceTable::default();
    for (scheme, h, rep) in reports {
        for (k0, exact) in reference.moments.iter().enumerate() {
            let (est, se) = match estimator {
                Estimator::Final => (rep.moments[k0], rep.moment_stderr[k0]),
                Estimator::TimeAverage => (rep.time_avg_moments[k0], rep.time_avg_stderr[k0]),
            };
            table.rows.push(ConvergenceRow {
                scheme,
                h,
                k: k0 + 1,
                estimate: est,
                error: (est - exact).abs(),
                stderr: se,
                mean_monitor: rep.mean_monitor,
                escaped: rep.escaped,
            });
        }
    }
    for &scheme in schemes {
        for k in 1..=reference.moments.len() {
            let pts: Vec<(f64, f64, f64)> = table.series(scheme, k).iter().map(|r| (r.h, r.error, r.stderr)).collect();
            table.slopes.push(fit_slope(scheme, k, &pts));
        }
    }
    Ok(table)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn synthetic(order: f64, hs: &[f64], noise: f64) -> Vec<(f64, f64, f64)> {
        hs.iter().map(|&h| (h, 0.3 * h.powf(order), noise)).collect()
    }

    #[test]
    fn recovers_exact_power_laws() {
        let hs = [0.01, 0.02, 0.05, 0.1, 0.2];
        for order in [1.0, 2.0] {
            let f = fit_slope(Scheme::EmIp, 2, &synthetic(order, &hs, 0.0));
            assert!((f.slope.unwrap() - order).abs() < 1e-12);
            assert!((f.r2 - 1.0).abs() < 1e-12);
            assert_eq!(f.points, 5);
        }
    }

    #[test]
    fn noise_floor_points_are_excluded() {
        let hs = [0.001, 0.002, 0.05, 0.1, 0.2];
        let f = fit_slope(Scheme::EmIp, 2, &synthetic(1.0, &hs, 0.3 * 0.002 / 3.0));
        assert_eq!(f.points, 3);
        assert!((f.h_min - 0.05).abs() < 1e-15);
    }

    #[test]
    fn single_point_is_indeterminate() {
        let f = fit_slope(Scheme::Em, 1, &[(0.1, 0.01, 0.0)]);
        assert!(f.slope.is_none());
        let f = fit_slope(Scheme::Em, 1, &synthetic(1.0, &[0.1, 0.2], 1.0));
        assert!(f.slope.is_none());
        let t = ConvergenceTable { rows: vec![], slopes: vec![f] };
        assert!(t.slopes_csv().contains("indeterminate"));
    }

    #[test]
    fn pre_asymptotic_point_is_dropped() {
        let mut pts = synthetic(2.0, &[0.01, 0.02, 0.04, 0.08], 0.0);
        pts.push((0.5, 1e-5, 0.0));
        let f = fit_slope(Scheme::BaoabHat, 2, &pts);
        assert_eq!(f.points, 4);
        assert!((f.slope.unwrap() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn monotonicity_counts_reversals() {
        let mk = |h: f64, e: f64| ConvergenceRow { scheme: Scheme::Em, h, k: 1, estimate: 0.0, error: e, stderr: 0.0, mean_monitor: 1.0, escaped: 0 };
        let rows = [mk(0.1, 1.0), mk(0.05, 0.6), mk(0.02, 0.7), mk(0.01, 0.1)];
        let refs: Vec<&ConvergenceRow> = rows.iter().collect();
        assert_eq!(monotonicity_violations(&refs), 1);
    }
}
