//! One function per subcommand. Each writes its CSV files into the output
//! directory and reports how the run ended.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use adaptive_langevin::analysis::{
    gibbs_reference, histogram_l1, matched_escape_sweep, weak_error_sweep, Density1D, Histogram, ReferenceMoments, DEFAULT_TOL,
};
use adaptive_langevin::ensemble::{run_ensemble, run_path, InitialCondition, PhaseState, SamplerConfig};
use adaptive_langevin::monitor::{audit_criteria, AuditRow};
use adaptive_langevin::overdamped::adjoint_stationarity_audit;
use adaptive_langevin::potentials::{PotentialModel, TwoPathway};
use adaptive_langevin::scheme::SchemeStepper;
use adaptive_langevin::{derive_stream, Error, Result, Scheme};
use serde::{Deserialize, Serialize};

use crate::config::{Experiment, ExperimentConfig, PotentialConfig, ReferenceConfig};

/// How a successful run ended; errors are reported separately.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Outcome {
    Success,
    /// The sweep ran but at least one slope could not be fitted.
    NoFit,
    /// An audit criterion was violated.
    AuditFailed,
}

pub struct Context {
    pub out: PathBuf,
    /// Directory relative paths in the config resolve against.
    pub base: PathBuf,
}

pub fn run(cfg: &ExperimentConfig, ctx: &Context) -> Result<Outcome> {
    fs::create_dir_all(&ctx.out).map_err(|e| io_err(&ctx.out, e))?;
    match cfg.experiment {
        Experiment::Sample => sample(cfg, ctx),
        Experiment::Sweep => sweep(cfg, ctx),
        Experiment::Escape => escape(cfg, ctx),
        Experiment::Audit => audit(cfg, ctx),
        Experiment::TwoPathway => two_pathway(cfg, ctx),
        Experiment::BayesGen => bayes_gen(cfg, ctx),
    }
}

fn io_err(path: &Path, e: std::io::Error) -> Error {
    Error::InvalidConfig(format!("output: {}: {e}", path.display()))
}

fn write(ctx: &Context, name: &str, body: &str) -> Result<()> {
    let path = ctx.out.join(name);
    fs::write(&path, body).map_err(|e| io_err(&path, e))
}

/// Fixed-width scientific notation: 17 significant digits, round-trip exact.
fn f(v: f64) -> String {
    format!("{v:.16e}")
}

/// `n` draws of `N(mu_true, 1)` from the seed's first stream.
pub fn bayes_draws(n: usize, mu_true: f64, seed: u64) -> Vec<f64> {
    let mut rng = derive_stream(seed, 0);
    (0..n).map(|_| mu_true + rng.normal()).collect()
}

pub const REPORT_HEADER: &str = "scheme,n_traj,escaped,mean_monitor,fp_iters_mean,fp_iters_max,wall_steps,\
moment_1,moment_2,moment_3,moment_4,stderr_1,stderr_2,stderr_3,stderr_4,\
time_avg_1,time_avg_2,time_avg_3,time_avg_4,reweighted_1,reweighted_2,reweighted_3,reweighted_4,l1";

fn sample(cfg: &ExperimentConfig, ctx: &Context) -> Result<Outcome> {
    let pot = cfg.build_potential(&ctx.base)?;
    let mon = cfg.build_monitor(&pot)?;
    let init = cfg.build_init(&pot)?;
    let sc = cfg.sampler_cfg()?;
    let rc = cfg.reference_cfg()?;
    let scheme = cfg.schemes[0];
    let rho = Density1D::gibbs(pot.clone(), sc.beta_inv, rc.support, DEFAULT_TOL)?;
    let stepper = SchemeStepper::new(scheme, &pot, &mon, sc)?;
    let out = run_ensemble(&stepper, sc, &init)?;
    let xs = out.final_positions();
    let hist_support = rc.hist_support.unwrap_or(rc.support);
    let hist = Histogram::new(&xs, rc.bins, hist_support);
    let masses = rho.bin_masses(&hist.edges)?;
    let l1 = if xs.is_empty() { f64::NAN } else { histogram_l1(&xs, &rho, rc.bins, hist_support)? };

    let mut h = String::from("bin_left,bin_right,count,ref_density\n");
    for i in 0..hist.counts.len() {
        let (lo, hi) = (hist.edges[i], hist.edges[i + 1]);
        let _ = writeln!(h, "{},{},{},{}", f(lo), f(hi), hist.counts[i], f(masses[i] / (hi - lo)));
    }
    write(ctx, "histogram.csv", &h)?;

    let r = &out.report;
    let mut row = vec![scheme.to_string(), r.n_traj.to_string(), r.escaped.to_string(), f(r.mean_monitor), f(r.fp_iters_mean)];
    row.push(r.fp_iters_max.to_string());
    row.push(r.wall_steps.to_string());
    for v in [&r.moments, &r.moment_stderr, &r.time_avg_moments, &r.reweighted_moments] {
        row.extend(v.iter().map(|&x| f(x)));
    }
    row.push(f(l1));
    write(ctx, "report.csv", &format!("{REPORT_HEADER}\n{}\n", row.join(",")))?;
    eprintln!("{scheme}: L1 {l1:.4}, mean monitor {:.4}, escaped {}/{}", r.mean_monitor, r.escaped, r.n_traj);
    Ok(Outcome::Success)
}

/// Quadrature moments, memoized in `reference_cache.toml` in the output
/// directory under a key built from the potential, temperature and support.
fn cached_reference(pc: &PotentialConfig, pot: &PotentialModel, beta_inv: f64, rc: &ReferenceConfig, dir: &Path) -> Result<ReferenceMoments> {
    #[derive(Default, Serialize, Deserialize)]
    struct Cache {
        #[serde(default)]
        entry: BTreeMap<String, ReferenceMoments>,
    }
    let key = format!("{pc:?} beta_inv={beta_inv:e} support={:?} k_max={}", rc.support, rc.k_max);
    let path = dir.join("reference_cache.toml");
    let mut cache: Cache = fs::read_to_string(&path).ok().and_then(|t| toml::from_str(&t).ok()).unwrap_or_default();
    if let Some(hit) = cache.entry.get(&key) {
        return Ok(hit.clone());
    }
    let r = gibbs_reference(pot, beta_inv, rc.k_max, rc.support)?;
    cache.entry.insert(key, r.clone());
    if let Ok(text) = toml::to_string(&cache) {
        let _ = fs::write(&path, text);
    }
    Ok(r)
}

fn sweep(cfg: &ExperimentConfig, ctx: &Context) -> Result<Outcome> {
    let pot = cfg.build_potential(&ctx.base)?;
    let mon = cfg.build_monitor(&pot)?;
    let init = cfg.build_init(&pot)?;
    let sc = cfg.sampler_cfg()?;
    let rc = cfg.reference_cfg()?;
    let sw = cfg.sweep.as_ref().expect("validated");
    let reference = cached_reference(cfg.potential_cfg()?, &pot, sc.beta_inv, rc, &ctx.out)?;
    let table = weak_error_sweep(&cfg.schemes, &sw.hs, sc, &pot, &mon, &init, &reference, sw.estimator)?;
    write(ctx, "convergence.csv", &table.to_csv())?;
    write(ctx, "slopes.csv", &table.slopes_csv())?;
    for s in table.slopes.iter().filter(|s| s.k == 2) {
        match s.slope {
            Some(v) => eprintln!("{} k=2: slope {v:.3} over {} points", s.scheme, s.points),
            None => eprintln!("{} k=2: slope indeterminate", s.scheme),
        }
    }
    Ok(if table.slopes.iter().any(|s| s.slope.is_none()) { Outcome::NoFit } else { Outcome::Success })
}

fn escape(cfg: &ExperimentConfig, ctx: &Context) -> Result<Outcome> {
    let pot = cfg.build_potential(&ctx.base)?;
    let mon = cfg.build_monitor(&pot)?;
    let init = cfg.build_init(&pot)?;
    let sc = cfg.sampler_cfg()?;
    let hs = &cfg.escape.as_ref().expect("validated").hs;
    let (adaptive, fixed): (Vec<Scheme>, Vec<Scheme>) = cfg.schemes.iter().partition(|s| s.is_adaptive());
    let res = matched_escape_sweep(&adaptive, &fixed, hs, sc, &pot, &mon, &init)?;
    write(ctx, "escape.csv", &res.to_csv())?;
    eprintln!("matched monitor value {:.4}", res.g_match);
    Ok(Outcome::Success)
}

fn audit(cfg: &ExperimentConfig, ctx: &Context) -> Result<Outcome> {
    let pot = cfg.build_potential(&ctx.base)?;
    let mon = cfg.build_monitor(&pot)?;
    let ac = cfg.audit.as_ref().expect("validated");
    let mut report = audit_criteria(&mon, &pot, &ac.domain, ac.n_grid)?;
    if let Some(grid) = ac.adjoint_grid {
        let beta_inv = cfg.sampler_cfg()?.beta_inv;
        let field = adjoint_stationarity_audit(&pot, &mon, beta_inv, grid, ac.spacing)?;
        let sup = field.sup_ip();
        report.rows.push(AuditRow { criterion: "adjoint_ip_sup".into(), estimate: sup, bound: ac.adjoint_tol, pass: sup < ac.adjoint_tol });
        write(ctx, "adjoint.csv", &field.to_csv())?;
    }
    write(ctx, "audit.csv", &report.to_csv())?;
    for r in report.rows.iter().filter(|r| !r.pass) {
        eprintln!("violated: {} (estimate {:.3e}, bound {:.3e})", r.criterion, r.estimate, r.bound);
    }
    Ok(if report.passed() { Outcome::Success } else { Outcome::AuditFailed })
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Occupancy {
    pub samples: u64,
    pub upper: u64,
    pub lower: u64,
}

impl Occupancy {
    pub fn upper_fraction(&self) -> f64 {
        self.upper as f64 / self.samples.max(1) as f64
    }
    pub fn lower_fraction(&self) -> f64 {
        self.lower as f64 / self.samples.max(1) as f64
    }
}

/// Classifies a point by the squared channel distances `f_upper = (y + x² - 4)²`
/// and `f_lower = (y - x² + 4)²`, for `|x| < x_window`.
pub fn classify(occ: &mut Occupancy, x: &[f64], threshold: f64, x_window: f64) {
    occ.samples += 1;
    if x[0].abs() >= x_window {
        return;
    }
    let (up, low) = (TwoPathway::upper(x[0], x[1]), TwoPathway::lower(x[0], x[1]));
    if up < threshold && up <= low {
        occ.upper += 1;
    } else if low < threshold {
        occ.lower += 1;
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PathwayRun {
    pub name: &'static str,
    pub scheme: Scheme,
    pub h: f64,
    pub mean_monitor: f64,
    pub escaped: u64,
    pub occupancy: Occupancy,
}

#[allow(clippy::too_many_arguments)]
fn pathway_run(
    name: &'static str,
    scheme: Scheme,
    sc: &SamplerConfig,
    pot: &PotentialModel,
    mon: &adaptive_langevin::monitor::MonitorModel,
    init: &InitialCondition,
    tp: &crate::config::TwoPathwayConfig,
    traj: &mut String,
) -> Result<PathwayRun> {
    use rayon::prelude::*;
    let stepper = SchemeStepper::new(scheme, pot, mon, sc)?;
    let paths: Vec<(Vec<PhaseState>, _)> =
        (0..sc.n_traj).into_par_iter().map(|i| run_path(&stepper, sc, init, i, tp.record_every)).collect();
    let mut occ = Occupancy::default();
    let (mut g_sum, mut g_steps, mut escaped) = (0.0, 0u64, 0u64);
    let skip = (sc.burn_in_steps / tp.record_every.max(1)) as usize;
    for (i, (path, outcome)) in paths.iter().enumerate() {
        for s in path.iter().skip(skip + 1) {
            classify(&mut occ, &s.x, tp.threshold, tp.x_window);
        }
        if outcome.escaped_at.is_some() {
            escaped += 1;
        }
        g_sum += outcome.monitor_sum;
        g_steps += outcome.steps.saturating_sub(sc.burn_in_steps);
        if (i as u64) < tp.plot_trajectories {
            for (j, s) in path.iter().enumerate() {
                let _ = writeln!(traj, "{name},{i},{},{},{}", j as u64 * tp.record_every, f(s.x[0]), f(s.x[1]));
            }
        }
    }
    Ok(PathwayRun { name, scheme, h: sc.h, mean_monitor: g_sum / g_steps.max(1) as f64, escaped, occupancy: occ })
}

/// The adaptive run, the fixed run at the monitor-matched stepsize and the
/// small-step fixed run, plus the `trajectory.csv` body.
pub fn two_pathway_runs(cfg: &ExperimentConfig, base: &Path) -> Result<(Vec<PathwayRun>, String)> {
    let pot = cfg.build_potential(base)?;
    let mon = cfg.build_monitor(&pot)?;
    let init = cfg.build_init(&pot)?;
    let sc = cfg.sampler_cfg()?;
    let tp = cfg.two_pathway.clone().unwrap_or_default();
    let mut traj = String::from("run,trajectory,step,x,y\n");
    let adaptive = pathway_run("adaptive", tp.adaptive_scheme, &SamplerConfig { h: tp.h_adaptive, ..sc.clone() }, &pot, &mon, &init, &tp, &mut traj)?;
    let h_matched = tp.h_adaptive * adaptive.mean_monitor;
    let matched = pathway_run("fixed_matched", tp.fixed_scheme, &SamplerConfig { h: h_matched, ..sc.clone() }, &pot, &mon, &init, &tp, &mut traj)?;
    let small = pathway_run("fixed_small", tp.fixed_scheme, &SamplerConfig { h: tp.h_small, ..sc.clone() }, &pot, &mon, &init, &tp, &mut traj)?;
    Ok((vec![adaptive, matched, small], traj))
}

fn two_pathway(cfg: &ExperimentConfig, ctx: &Context) -> Result<Outcome> {
    let (runs, traj) = two_pathway_runs(cfg, &ctx.base)?;
    write(ctx, "trajectory.csv", &traj)?;
    let mut occ = String::from("run,scheme,h,mean_monitor,escaped,samples,upper_fraction,lower_fraction\n");
    for r in &runs {
        let o = &r.occupancy;
        let _ = writeln!(occ, "{},{},{},{},{},{},{},{}", r.name, r.scheme, f(r.h), f(r.mean_monitor), r.escaped, o.samples, f(o.upper_fraction()), f(o.lower_fraction()));
        eprintln!("{}: h {:.5}, mean monitor {:.4}, upper {:.4}, lower {:.4}", r.name, r.h, r.mean_monitor, o.upper_fraction(), o.lower_fraction());
    }
    write(ctx, "occupancy.csv", &occ)?;
    Ok(Outcome::Success)
}

fn bayes_gen(cfg: &ExperimentConfig, ctx: &Context) -> Result<Outcome> {
    let b = cfg.bayes_gen.as_ref().expect("validated");
    let mut s = String::from("y\n");
    for y in bayes_draws(b.n, b.mu_true, b.seed) {
        let _ = writeln!(s, "{}", f(y));
    }
    write(ctx, "data.csv", &s)?;
    Ok(Outcome::Success)
}
