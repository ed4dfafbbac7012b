//! Grid-based falsification audit of the monitor-function criteria.
//!
//! Empirical estimates only: Lipschitz quotients over sampled grid pairs,
//! derivative bounds on grid nodes, and the `g` range check. A pass means
//! "no counterexample on this grid".

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::monitor::Monitor;
use crate::potentials::Potential;

const PAIR_BUDGET: usize = 1_000_000;
const FD_STEP: f64 = 1e-4;

#[derive(Clone, Debug, PartialEq)]
pub struct AuditRow {
    pub criterion: String,
    pub estimate: f64,
    pub bound: f64,
    pub pass: bool,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct AuditReport {
    pub rows: Vec<AuditRow>,
    pub g_min: f64,
    pub g_max: f64,
    pub bounds_violated: bool,
}

impl AuditReport {
    pub fn passed(&self) -> bool {
        self.rows.iter().all(|r| r.pass)
    }

    pub fn row(&self, criterion: &str) -> Option<&AuditRow> {
        self.rows.iter().find(|r| r.criterion == criterion)
    }

    /// `criterion,estimate,bound,pass` rows with a header.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("criterion,estimate,bound,pass\n");
        for r in &self.rows {
            let _ = writeln!(out, "{},{:.16e},{:.16e},{}", r.criterion, r.estimate, r.bound, if r.pass { "pass" } else { "fail" });
        }
        out
    }
}

fn grid_points(domain: &[(f64, f64)], n_grid: usize) -> Vec<Vec<f64>> {
    let d = domain.len();
    let total = n_grid.pow(d as u32);
    let mut pts = Vec::with_capacity(total);
    for flat in 0..total {
        let mut rem = flat;
        let mut x = Vec::with_capacity(d);
        for &(lo, hi) in domain {
            let i = rem % n_grid;
            rem /= n_grid;
            x.push(lo + (hi - lo) * i as f64 / (n_grid - 1) as f64);
        }
        pts.push(x);
    }
    pts
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Audit `mon` (with `pot` for the `g ∇V` product) on an `n_grid`-per-axis
/// grid over `domain`.
pub fn audit_criteria<G, P>(mon: &G, pot: &P, domain: &[(f64, f64)], n_grid: usize) -> Result<AuditReport>
where
    G: Monitor + ?Sized,
    P: Potential + ?Sized,
{
    let d = mon.dim();
    if domain.len() != d {
        return Err(Error::Dimension { expected: d, got: domain.len() });
    }
    if n_grid < 2 || domain.iter().any(|&(lo, hi)| !(lo.is_finite() && hi.is_finite() && hi > lo)) {
        return Err(Error::InvalidConfig("audit needs finite bounds with hi > lo and n_grid >= 2".into()));
    }
    let pts = grid_points(domain, n_grid);
    let n = pts.len();

    let mut g = vec![0.0; n];
    let mut grad_g = vec![vec![0.0; d]; n];
    let mut g_force = vec![vec![0.0; d]; n];
    let mut force = vec![0.0; d];
    let mut max_grad_norm: f64 = 0.0;
    let mut max_partial: f64 = 0.0;
    let mut max_second: f64 = 0.0;
    for (i, x) in pts.iter().enumerate() {
        g[i] = mon.value_and_gradient(x, &mut grad_g[i]);
        pot.gradient(x, &mut force);
        for j in 0..d {
            g_force[i][j] = g[i] * force[j];
        }
        let finite = g[i].is_finite() && grad_g[i].iter().all(|v| v.is_finite()) && force.iter().all(|v| v.is_finite());
        if !finite {
            return Err(Error::NonFinite { point: x.clone() });
        }
        max_grad_norm = max_grad_norm.max(grad_g[i].iter().map(|v| v * v).sum::<f64>().sqrt());
        max_partial = grad_g[i].iter().fold(max_partial, |acc, v| acc.max(v.abs()));
        let mut xp = x.clone();
        for j in 0..d {
            xp[j] = x[j] + FD_STEP;
            let up = mon.value(&xp);
            xp[j] = x[j] - FD_STEP;
            let dn = mon.value(&xp);
            xp[j] = x[j];
            let second = (up - 2.0 * g[i] + dn) / (FD_STEP * FD_STEP);
            if !second.is_finite() {
                return Err(Error::NonFinite { point: x.clone() });
            }
            max_second = max_second.max(second.abs());
        }
    }

    // pair sampling: all pairs if affordable, otherwise a fixed stride on the
    // second index plus every grid neighbour
    let all_pairs = n * (n - 1) / 2;
    let stride = if all_pairs <= PAIR_BUDGET { 1 } else { all_pairs.div_ceil(PAIR_BUDGET) };
    let mut lip_g: f64 = 0.0;
    let mut lip_grad: f64 = 0.0;
    let mut lip_gforce: f64 = 0.0;
    let mut visit = |i: usize, j: usize| {
        let r = dist(&pts[i], &pts[j]);
        if r == 0.0 {
            return;
        }
        lip_g = lip_g.max((g[i] - g[j]).abs() / r);
        lip_grad = lip_grad.max(dist(&grad_g[i], &grad_g[j]) / r);
        lip_gforce = lip_gforce.max(dist(&g_force[i], &g_force[j]) / r);
    };
    for i in 0..n {
        let mut j = i + 1;
        while j < n {
            visit(i, j);
            j += stride;
        }
        if stride > 1 {
            let mut step = 1;
            for _ in 0..d {
                if i + step < n {
                    visit(i, i + step);
                }
                step *= n_grid;
            }
        }
    }

    let g_min = g.iter().cloned().fold(f64::INFINITY, f64::min);
    let g_max = g.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let (lo, hi) = mon.bounds();
    let tol = 1e-12 * hi.abs().max(1.0);
    let lower_ok = lo > 0.0 && g_min >= lo - tol;
    let upper_ok = g_max <= hi + tol;

    let finite_row = |name: &str, v: f64| AuditRow { criterion: name.into(), estimate: v, bound: f64::INFINITY, pass: v.is_finite() };
    let rows = vec![
        finite_row("lipschitz_g", lip_g),
        finite_row("lipschitz_grad_g", lip_grad),
        AuditRow { criterion: "g_min".into(), estimate: g_min, bound: lo, pass: lower_ok },
        AuditRow { criterion: "g_max".into(), estimate: g_max, bound: hi, pass: upper_ok },
        finite_row("lipschitz_g_grad_v", lip_gforce),
        finite_row("max_grad_g_norm", max_grad_norm),
        finite_row("max_partial_g", max_partial),
        finite_row("max_second_partial_g", max_second),
    ];
    Ok(AuditReport { rows, g_min, g_max, bounds_violated: !(lower_ok && upper_ok) })
}
