//! Shared sampler types and the deterministic parallel ensemble runner.

use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{derive_stream, RngStream};

/// Moment orders reported by the ensemble (`k = 1..=K_MAX`).
pub const K_MAX: usize = 4;

/// A state is escaped once any position coordinate exceeds this in magnitude.
pub const ESCAPE_RADIUS: f64 = 1e3;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhaseState {
    pub x: Vec<f64>,
    pub p: Option<Vec<f64>>,
}

impl PhaseState {
    pub fn position(x: Vec<f64>) -> Self {
        Self { x, p: None }
    }

    pub fn with_momentum(x: Vec<f64>, p: Vec<f64>) -> Self {
        Self { x, p: Some(p) }
    }

    pub fn dim(&self) -> usize {
        self.x.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.x.is_empty() {
            return Err(Error::InvalidConfig("state dimension must be >= 1".into()));
        }
        if let Some(p) = &self.p {
            if p.len() != self.x.len() {
                return Err(Error::Dimension { expected: self.x.len(), got: p.len() });
            }
        }
        Ok(())
    }
}

/// True when the state must be abandoned: non-finite entries or a position
/// coordinate beyond [`ESCAPE_RADIUS`].
#[inline]
pub fn is_escaped(x: &[f64], p: Option<&[f64]>) -> bool {
    x.iter().any(|v| !v.is_finite() || v.abs() > ESCAPE_RADIUS) || p.is_some_and(|p| p.iter().any(|v| !v.is_finite()))
}

fn default_fp_tol() -> f64 {
    1e-12
}

fn default_fp_max_iter() -> u32 {
    100
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SamplerConfig {
    pub h: f64,
    pub beta_inv: f64,
    #[serde(default)]
    pub gamma: f64,
    pub t_final: f64,
    #[serde(default)]
    pub burn_in_steps: u64,
    pub n_traj: u64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_fp_tol")]
    pub fp_tol: f64,
    #[serde(default = "default_fp_max_iter")]
    pub fp_max_iter: u32,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        Self {
            h: 0.01,
            beta_inv: 1.0,
            gamma: 1.0,
            t_final: 1.0,
            burn_in_steps: 0,
            n_traj: 1,
            seed: 0,
            fp_tol: default_fp_tol(),
            fp_max_iter: default_fp_max_iter(),
        }
    }
}

impl SamplerConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |field: &str, why: &str| Err(Error::InvalidConfig(format!("{field}: {why}")));
        if !(self.h > 0.0 && self.h.is_finite()) {
            return bad("h", "must be a finite positive number");
        }
        if !(self.beta_inv > 0.0 && self.beta_inv.is_finite()) {
            return bad("beta_inv", "must be a finite positive number");
        }
        if !(self.gamma >= 0.0 && self.gamma.is_finite()) {
            return bad("gamma", "must be finite and >= 0");
        }
        if !(self.t_final > 0.0 && self.t_final.is_finite()) {
            return bad("t_final", "must be a finite positive number");
        }
        if self.n_traj < 1 {
            return bad("n_traj", "must be >= 1");
        }
        if !(self.fp_tol > 0.0 && self.fp_tol < 1.0) {
            return bad("fp_tol", "must lie in (0, 1)");
        }
        if self.fp_max_iter < 1 {
            return bad("fp_max_iter", "must be >= 1");
        }
        Ok(())
    }

    /// `⌈T_f / h⌉`, robust to representation error in `T_f / h`.
    pub fn n_steps(&self) -> u64 {
        let ratio = self.t_final / self.h;
        let nearest = ratio.round();
        if (ratio - nearest).abs() <= 1e-9 * nearest.max(1.0) {
            nearest as u64
        } else {
            ratio.ceil() as u64
        }
    }
}

/// What a single step reports back to the runner.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepInfo {
    /// Monitor value at the position the step started from (`1` for fixed-step schemes).
    pub monitor: f64,
    /// Fixed-point iterations summed over the implicit sub-steps of this step.
    pub fp_iters: u32,
    /// Number of implicit sub-steps solved.
    pub fp_solves: u32,
    /// Largest iteration count of a single implicit sub-step.
    pub fp_iters_max: u32,
    pub converged: bool,
}

impl StepInfo {
    pub const fn explicit(monitor: f64) -> Self {
        Self { monitor, fp_iters: 0, fp_solves: 0, fp_iters_max: 0, converged: true }
    }
}

/// A single-step map of a Markov chain on phase space.
///
/// Implementations must be pure in `(state, draws, h)`; all randomness comes
/// from the supplied stream.
pub trait Stepper: Sync {
    type State: Send;

    fn dim(&self) -> usize;
    fn needs_momentum(&self) -> bool;
    fn start(&self, init: PhaseState) -> Self::State;
    fn step(&self, state: &mut Self::State, rng: &mut RngStream, h: f64) -> StepInfo;
    fn position<'a>(&self, state: &'a Self::State) -> &'a [f64];
    fn momentum<'a>(&self, state: &'a Self::State) -> Option<&'a [f64]>;

    fn snapshot(&self, state: &Self::State) -> PhaseState {
        PhaseState { x: self.position(state).to_vec(), p: self.momentum(state).map(<[f64]>::to_vec) }
    }
}

type Sampler = Arc<dyn Fn(&mut RngStream) -> Vec<f64> + Send + Sync>;

/// Distribution of the starting position. Missing momenta are drawn from
/// `N(0, β⁻¹ I)` using the trajectory's own stream.
#[derive(Clone)]
pub enum InitialCondition {
    Fixed(PhaseState),
    Gaussian { mean: Vec<f64>, var: f64 },
    Sampler(Sampler),
}

impl std::fmt::Debug for InitialCondition {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::Fixed(s) => f.debug_tuple("Fixed").field(s).finish(),
            Self::Gaussian { mean, var } => f.debug_struct("Gaussian").field("mean", mean).field("var", var).finish(),
            Self::Sampler(_) => f.write_str("Sampler(..)"),
        }
    }
}

impl InitialCondition {
    pub fn sampler(f: impl Fn(&mut RngStream) -> Vec<f64> + Send + Sync + 'static) -> Self {
        Self::Sampler(Arc::new(f))
    }

    pub fn draw(&self, rng: &mut RngStream, momentum: bool, beta_inv: f64) -> PhaseState {
        let mut state = match self {
            Self::Fixed(s) => s.clone(),
            Self::Gaussian { mean, var } => {
                let sd = var.sqrt();
                PhaseState::position(mean.iter().map(|m| m + sd * rng.normal()).collect())
            }
            Self::Sampler(f) => PhaseState::position(f(rng)),
        };
        if momentum && state.p.is_none() {
            let sd = beta_inv.sqrt();
            state.p = Some((0..state.x.len()).map(|_| sd * rng.normal()).collect());
        }
        state
    }
}

/// Per-trajectory accumulators, reduced in index order.
#[derive(Clone, Debug, PartialEq)]
pub struct TrajectoryOutcome {
    pub index: u64,
    /// Final state, `None` when the trajectory escaped.
    pub final_state: Option<PhaseState>,
    pub steps: u64,
    pub monitor_sum: f64,
    /// `Σₙ x_nᵏ` over the measured steps (first coordinate).
    pub time_sums: [f64; K_MAX],
    /// `Σₙ g(x_n) x_nᵏ` and `Σₙ g(x_n)` for the reweighted estimator.
    pub weighted_sums: [f64; K_MAX],
    pub weight_sum: f64,
    pub fp_iters: u64,
    pub fp_solves: u64,
    pub fp_iters_max: u32,
    pub escaped_at: Option<u64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnsembleReport {
    pub n_traj: u64,
    /// `E[x₁ᵏ]` at the final time over non-escaped trajectories, `k = 1..=4`.
    pub moments: Vec<f64>,
    pub moment_stderr: Vec<f64>,
    /// Trajectory-averaged time averages of `x₁ᵏ` over the measured steps.
    pub time_avg_moments: Vec<f64>,
    pub time_avg_stderr: Vec<f64>,
    /// `Σ g xᵏ / Σ g` pooled over all measured steps.
    pub reweighted_moments: Vec<f64>,
    pub mean_monitor: f64,
    pub escaped: u64,
    pub fp_iters_mean: f64,
    pub fp_iters_max: u32,
    /// Total steps executed (burn-in included), summed over trajectories.
    pub wall_steps: u64,
}

#[derive(Clone, Debug)]
pub struct EnsembleOutput {
    pub report: EnsembleReport,
    pub trajectories: Vec<TrajectoryOutcome>,
}

impl EnsembleOutput {
    /// First coordinate of every non-escaped final state, in trajectory order.
    pub fn final_positions(&self) -> Vec<f64> {
        self.trajectories.iter().filter_map(|t| t.final_state.as_ref().map(|s| s.x[0])).collect()
    }
}

/// Sum in a fixed binary tree over the slice, independent of thread layout.
pub fn pairwise_sum(v: &[f64]) -> f64 {
    match v.len() {
        0 => 0.0,
        1 => v[0],
        2 => v[0] + v[1],
        n => {
            let (a, b) = v.split_at(n / 2);
            pairwise_sum(a) + pairwise_sum(b)
        }
    }
}

/// Runs one trajectory: burn-in, then `⌈T_f/h⌉` measured steps.
pub fn run_trajectory<S: Stepper>(stepper: &S, cfg: &SamplerConfig, init: &InitialCondition, index: u64) -> TrajectoryOutcome {
    let mut rng = derive_stream(cfg.seed, index);
    let start = init.draw(&mut rng, stepper.needs_momentum(), cfg.beta_inv);
    let mut state = stepper.start(start);
    let mut out = TrajectoryOutcome {
        index,
        final_state: None,
        steps: 0,
        monitor_sum: 0.0,
        time_sums: [0.0; K_MAX],
        weighted_sums: [0.0; K_MAX],
        weight_sum: 0.0,
        fp_iters: 0,
        fp_solves: 0,
        fp_iters_max: 0,
        escaped_at: None,
    };
    let record = |out: &mut TrajectoryOutcome, info: &StepInfo| {
        out.fp_iters += info.fp_iters as u64;
        out.fp_solves += info.fp_solves as u64;
        out.fp_iters_max = out.fp_iters_max.max(info.fp_iters_max);
    };
    if is_escaped(stepper.position(&state), stepper.momentum(&state)) {
        out.escaped_at = Some(0);
        return out;
    }
    for _ in 0..cfg.burn_in_steps {
        let info = stepper.step(&mut state, &mut rng, cfg.h);
        out.steps += 1;
        record(&mut out, &info);
        if !info.converged || is_escaped(stepper.position(&state), stepper.momentum(&state)) {
            out.escaped_at = Some(out.steps);
            return out;
        }
    }
    let n = cfg.n_steps();
    for _ in 0..n {
        let x = stepper.position(&state)[0];
        let info = stepper.step(&mut state, &mut rng, cfg.h);
        out.steps += 1;
        record(&mut out, &info);
        let g = info.monitor;
        out.monitor_sum += g;
        let mut xk = 1.0;
        for k in 0..K_MAX {
            xk *= x;
            out.time_sums[k] += xk;
            out.weighted_sums[k] += g * xk;
        }
        out.weight_sum += g;
        if !info.converged || is_escaped(stepper.position(&state), stepper.momentum(&state)) {
            out.escaped_at = Some(out.steps);
            return out;
        }
    }
    out.final_state = Some(stepper.snapshot(&state));
    out
}

fn mean_and_stderr(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = pairwise_sum(values) / n as f64;
    if n == 1 {
        return (mean, f64::NAN);
    }
    let dev: Vec<f64> = values.iter().map(|v| (v - mean) * (v - mean)).collect();
    let var = pairwise_sum(&dev) / (n - 1) as f64;
    (mean, (var / n as f64).sqrt())
}

/// Reduces per-trajectory outcomes (in index order) into a report.
pub fn reduce(outcomes: &[TrajectoryOutcome], steps_per_traj: u64) -> EnsembleReport {
    let kept: Vec<&TrajectoryOutcome> = outcomes.iter().filter(|t| t.final_state.is_some()).collect();
    let mut moments = Vec::with_capacity(K_MAX);
    let mut moment_stderr = Vec::with_capacity(K_MAX);
    let mut time_avg_moments = Vec::with_capacity(K_MAX);
    let mut time_avg_stderr = Vec::with_capacity(K_MAX);
    let mut reweighted = Vec::with_capacity(K_MAX);
    let weights: Vec<f64> = kept.iter().map(|t| t.weight_sum).collect();
    let weight_total = pairwise_sum(&weights);
    for k in 0..K_MAX {
        let finals: Vec<f64> = kept.iter().map(|t| t.final_state.as_ref().unwrap().x[0].powi(k as i32 + 1)).collect();
        let (m, se) = mean_and_stderr(&finals);
        moments.push(m);
        moment_stderr.push(se);
        let avgs: Vec<f64> = kept.iter().map(|t| t.time_sums[k] / steps_per_traj.max(1) as f64).collect();
        let (m, se) = mean_and_stderr(&avgs);
        time_avg_moments.push(m);
        time_avg_stderr.push(se);
        let w: Vec<f64> = kept.iter().map(|t| t.weighted_sums[k]).collect();
        reweighted.push(pairwise_sum(&w) / weight_total);
    }
    let monitor: Vec<f64> = kept.iter().map(|t| t.monitor_sum).collect();
    let monitor_steps = kept.len() as f64 * steps_per_traj as f64;
    let fp_iters: u64 = outcomes.iter().map(|t| t.fp_iters).sum();
    let fp_solves: u64 = outcomes.iter().map(|t| t.fp_solves).sum();
    EnsembleReport {
        n_traj: outcomes.len() as u64,
        moments,
        moment_stderr,
        time_avg_moments,
        time_avg_stderr,
        reweighted_moments: reweighted,
        mean_monitor: pairwise_sum(&monitor) / monitor_steps,
        escaped: outcomes.iter().filter(|t| t.final_state.is_none()).count() as u64,
        fp_iters_mean: if fp_solves > 0 { fp_iters as f64 / fp_solves as f64 } else { 0.0 },
        fp_iters_max: outcomes.iter().map(|t| t.fp_iters_max).max().unwrap_or(0),
        wall_steps: outcomes.iter().map(|t| t.steps).sum(),
    }
}

/// Runs `cfg.n_traj` independent trajectories on the current rayon pool.
///
/// Trajectory `i` uses stream `(cfg.seed, i)`; results are gathered in index
/// order and reduced with fixed pairwise sums, so the report does not depend
/// on the thread count or completion order.
pub fn run_ensemble<S: Stepper>(stepper: &S, cfg: &SamplerConfig, init: &InitialCondition) -> Result<EnsembleOutput> {
    cfg.validate()?;
    let trajectories: Vec<TrajectoryOutcome> =
        (0..cfg.n_traj).into_par_iter().map(|i| run_trajectory(stepper, cfg, init, i)).collect();
    let report = reduce(&trajectories, cfg.n_steps());
    Ok(EnsembleOutput { report, trajectories })
}

/// Positions along one trajectory, recorded every `every` steps (step 0 included).
pub fn run_path<S: Stepper>(stepper: &S, cfg: &SamplerConfig, init: &InitialCondition, index: u64, every: u64) -> (Vec<PhaseState>, TrajectoryOutcome) {
    let mut rng = derive_stream(cfg.seed, index);
    let start = init.draw(&mut rng, stepper.needs_momentum(), cfg.beta_inv);
    let mut state = stepper.start(start);
    let every = every.max(1);
    let mut path = vec![stepper.snapshot(&state)];
    let mut out = TrajectoryOutcome {
        index,
        final_state: None,
        steps: 0,
        monitor_sum: 0.0,
        time_sums: [0.0; K_MAX],
        weighted_sums: [0.0; K_MAX],
        weight_sum: 0.0,
        fp_iters: 0,
        fp_solves: 0,
        fp_iters_max: 0,
        escaped_at: None,
    };
    let total = cfg.burn_in_steps + cfg.n_steps();
    for step in 1..=total {
        let info = stepper.step(&mut state, &mut rng, cfg.h);
        out.steps += 1;
        out.fp_iters += info.fp_iters as u64;
        out.fp_solves += info.fp_solves as u64;
        out.fp_iters_max = out.fp_iters_max.max(info.fp_iters_max);
        if step > cfg.burn_in_steps {
            out.monitor_sum += info.monitor;
        }
        if !info.converged || is_escaped(stepper.position(&state), stepper.momentum(&state)) {
            out.escaped_at = Some(step);
            return (path, out);
        }
        if step % every == 0 {
            path.push(stepper.snapshot(&state));
        }
    }
    out.final_state = Some(stepper.snapshot(&state));
    (path, out)
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Identity;

    impl Stepper for Identity {
        type State = PhaseState;
        fn dim(&self) -> usize {
            1
        }
        fn needs_momentum(&self) -> bool {
            false
        }
        fn start(&self, init: PhaseState) -> PhaseState {
            init
        }
        fn step(&self, _s: &mut PhaseState, _rng: &mut RngStream, _h: f64) -> StepInfo {
            StepInfo::explicit(1.0)
        }
        fn position<'a>(&self, s: &'a PhaseState) -> &'a [f64] {
            &s.x
        }
        fn momentum<'a>(&self, _s: &'a PhaseState) -> Option<&'a [f64]> {
            None
        }
    }

    /// Random walk that blows up for trajectories with odd index.
    struct Exploding;

    impl Stepper for Exploding {
        type State = (PhaseState, bool);
        fn dim(&self) -> usize {
            1
        }
        fn needs_momentum(&self) -> bool {
            false
        }
        fn start(&self, init: PhaseState) -> Self::State {
            let odd = init.x[0] > 0.5;
            (PhaseState::position(vec![0.0]), odd)
        }
        fn step(&self, s: &mut Self::State, rng: &mut RngStream, _h: f64) -> StepInfo {
            s.0.x[0] = if s.1 { f64::NAN } else { rng.normal() };
            StepInfo::explicit(1.0)
        }
        fn position<'a>(&self, s: &'a Self::State) -> &'a [f64] {
            &s.0.x
        }
        fn momentum<'a>(&self, _s: &'a Self::State) -> Option<&'a [f64]> {
            None
        }
    }

    fn cfg(n_traj: u64) -> SamplerConfig {
        SamplerConfig { h: 0.1, t_final: 1.0, n_traj, seed: 11, ..Default::default() }
    }

    #[test]
    fn n_steps_is_ceiling() {
        let mut c = SamplerConfig { h: 0.05, t_final: 70.0, ..Default::default() };
        assert_eq!(c.n_steps(), 1400);
        c.h = 0.3;
        c.t_final = 1.0;
        assert_eq!(c.n_steps(), 4);
        c.h = 0.001;
        c.t_final = 50.0;
        assert_eq!(c.n_steps(), 50_000);
    }

    #[test]
    fn identity_stepper_preserves_initial_moments() {
        let init = InitialCondition::Gaussian { mean: vec![1.0], var: 4.0 };
        let out = run_ensemble(&Identity, &cfg(20_000), &init).unwrap();
        // direct moments of the drawn initial states
        let xs: Vec<f64> = (0..20_000).map(|i| init.draw(&mut derive_stream(11, i), false, 1.0).x[0]).collect();
        for k in 1..=4 {
            let direct = pairwise_sum(&xs.iter().map(|x| x.powi(k)).collect::<Vec<_>>()) / xs.len() as f64;
            assert!((out.report.moments[k as usize - 1] - direct).abs() <= 1e-12 * direct.abs().max(1.0));
        }
        assert!((out.report.moments[0] - 1.0).abs() < 4.0 * 2.0 / (20_000f64).sqrt());
        assert!((out.report.moments[1] - 5.0).abs() < 0.2);
    }

    #[test]
    fn reports_are_bit_identical_across_runs_and_pools() {
        let init = InitialCondition::Gaussian { mean: vec![0.0], var: 1.0 };
        let a = run_ensemble(&Exploding, &cfg(1), &init).unwrap().report;
        let b = run_ensemble(&Exploding, &cfg(1), &init).unwrap().report;
        assert_eq!(format!("{a:?}"), format!("{b:?}"));
        let c = cfg(500);
        let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let four = rayon::ThreadPoolBuilder::new().num_threads(4).build().unwrap();
        let r1 = one.install(|| run_ensemble(&Exploding, &c, &init).unwrap().report);
        let r4 = four.install(|| run_ensemble(&Exploding, &c, &init).unwrap().report);
        assert_eq!(format!("{r1:?}"), format!("{r4:?}"));
    }

    #[test]
    fn escaped_trajectories_are_counted_and_excluded() {
        let init = InitialCondition::Gaussian { mean: vec![0.0], var: 1.0 };
        let out = run_ensemble(&Exploding, &cfg(400), &init).unwrap();
        let expect = out.trajectories.iter().filter(|t| t.final_state.is_none()).count() as u64;
        assert!(expect > 0 && expect < 400);
        assert_eq!(out.report.escaped, expect);
        assert!(out.report.moments.iter().all(|m| m.is_finite()));
        // removing escaped trajectories leaves the survivors' report unchanged
        let survivors: Vec<TrajectoryOutcome> = out.trajectories.iter().filter(|t| t.final_state.is_some()).cloned().collect();
        let again = reduce(&survivors, cfg(1).n_steps());
        assert_eq!(again.moments, out.report.moments);
        assert_eq!(again.escaped, 0);
    }

    #[test]
    fn wall_steps_counts_every_step() {
        let c = SamplerConfig { h: 0.1, t_final: 1.0, n_traj: 1, ..Default::default() };
        let r = run_ensemble(&Identity, &c, &InitialCondition::Fixed(PhaseState::position(vec![0.0]))).unwrap().report;
        assert_eq!(r.wall_steps, 10);
        assert_eq!(r.mean_monitor, 1.0);
    }

    #[test]
    fn config_validation_names_the_field() {
        let c = SamplerConfig { fp_tol: 1.5, ..Default::default() };
        assert!(c.validate().unwrap_err().to_string().contains("fp_tol"));
        let c = SamplerConfig { n_traj: 0, ..Default::default() };
        assert!(c.validate().unwrap_err().to_string().contains("n_traj"));
    }

    #[test]
    fn pairwise_sum_matches_naive_on_small_input() {
        let v: Vec<f64> = (1..=10).map(f64::from).collect();
        assert_eq!(pairwise_sum(&v), 55.0);
        assert_eq!(pairwise_sum(&[]), 0.0);
    }
}
