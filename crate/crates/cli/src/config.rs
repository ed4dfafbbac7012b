//! Experiment configuration: a TOML file with top-level keys and one table
//! per concern. Unknown keys are rejected everywhere.
//!
//! ```toml
//! experiment = "sample"
//! schemes = ["EM_IP"]
//!
//! [potential]
//! id = "modified_harmonic"
//! a = 10.0
//! b = 0.1
//! c = 0.1
//! x0 = 0.5
//!
//! [monitor]
//! id = "well"
//! quantity = "omega"
//! m = 0.001
//! M = 2.0
//!
//! [sampler]
//! h = 0.05
//! beta_inv = 0.1
//! t_final = 70.0
//! n_traj = 100000
//! seed = 7
//! ```

use std::path::{Path, PathBuf};

use adaptive_langevin::ensemble::{InitialCondition, PhaseState, SamplerConfig};
use adaptive_langevin::monitor::{constant_monitor, monitor_2d_channel, monitor_bayes, monitor_well, MonitorModel, Orientation, Psi, WellQuantity};
use adaptive_langevin::potentials::{bayes_posterior, harmonic, modified_harmonic, two_pathway, ModifiedHarmonic, PotentialModel};
use adaptive_langevin::analysis::{Density1D, Estimator, DEFAULT_TOL};
use adaptive_langevin::{Error, Potential, Result, Scheme};
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    Sample,
    Sweep,
    Escape,
    Audit,
    TwoPathway,
    BayesGen,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub schemes: Vec<Scheme>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub potential: Option<PotentialConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub monitor: Option<MonitorConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sampler: Option<SamplerConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub init: Option<InitConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference: Option<ReferenceConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub escape: Option<EscapeConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub audit: Option<AuditConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub two_pathway: Option<TwoPathwayConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bayes_gen: Option<BayesGenConfig>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "id", rename_all = "snake_case", deny_unknown_fields)]
pub enum PotentialConfig {
    Harmonic {
        k: f64,
    },
    ModifiedHarmonic {
        a: f64,
        b: f64,
        c: f64,
        x0: f64,
    },
    /// Data come from exactly one of `y`, `data` (a CSV with a `y` column)
    /// or a synthetic draw `y_i ~ N(mu_true, 1)` of size `n_data`.
    Bayes {
        k: u32,
        a: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        y: Option<Vec<f64>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        data: Option<PathBuf>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        n_data: Option<usize>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        mu_true: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        data_seed: Option<u64>,
    },
    TwoPathway {
        #[serde(default = "k1")]
        k1: f64,
        #[serde(default = "k23")]
        k2: f64,
        #[serde(default = "k23")]
        k3: f64,
        #[serde(default = "k4")]
        k4: f64,
    },
}

fn k1() -> f64 {
    0.1
}
fn k23() -> f64 {
    50.0
}
fn k4() -> f64 {
    0.1
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "id", rename_all = "snake_case", deny_unknown_fields)]
pub enum MonitorConfig {
    Constant {
        c: f64,
    },
    /// Built on the modified harmonic well of `[potential]`.
    Well {
        quantity: WellQuantity,
        m: f64,
        #[serde(rename = "M")]
        big_m: f64,
        #[serde(default = "one")]
        r: f64,
        #[serde(default = "one_u")]
        alpha: u32,
    },
    /// Built on the posterior of `[potential]` (needs `id = "bayes"`).
    Bayes {
        m: f64,
        #[serde(rename = "M")]
        big_m: f64,
        #[serde(default = "one")]
        r: f64,
        #[serde(default = "one_u")]
        alpha: u32,
    },
    /// Distance to the narrow channel of the two-pathway landscape.
    Channel {
        #[serde(default = "reciprocal")]
        orientation: Orientation,
        m: f64,
        #[serde(rename = "M")]
        big_m: f64,
        #[serde(default = "one")]
        r: f64,
        #[serde(default = "one_u")]
        alpha: u32,
    },
}

fn reciprocal() -> Orientation {
    Orientation::Reciprocal
}

fn one() -> f64 {
    1.0
}
fn one_u() -> u32 {
    1
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitConfig {
    Point {
        x: Vec<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        p: Option<Vec<f64>>,
    },
    Gaussian {
        mean: Vec<f64>,
        var: f64,
    },
    /// Positions drawn from the quadrature Gibbs density (one dimension only).
    Reference,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReferenceConfig {
    /// Quadrature interval; must carry all but 1e-12 of the Gibbs mass.
    pub support: (f64, f64),
    #[serde(default = "k_max")]
    pub k_max: usize,
    #[serde(default = "bins")]
    pub bins: usize,
    /// Histogram range; defaults to `support`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hist_support: Option<(f64, f64)>,
}

fn k_max() -> usize {
    4
}
fn bins() -> usize {
    200
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub hs: Vec<f64>,
    #[serde(default)]
    pub estimator: Estimator,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EscapeConfig {
    pub hs: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AuditConfig {
    /// One `[lo, hi]` pair per dimension.
    pub domain: Vec<(f64, f64)>,
    #[serde(default = "n_grid")]
    pub n_grid: usize,
    /// Grid for the stationarity residual (one dimension only).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub adjoint_grid: Option<(f64, f64)>,
    #[serde(default = "spacing")]
    pub spacing: f64,
    /// Bound on the sup-norm of the corrected residual at `spacing`.
    #[serde(default = "adjoint_tol")]
    pub adjoint_tol: f64,
}

fn n_grid() -> usize {
    201
}
fn spacing() -> f64 {
    1e-3
}
fn adjoint_tol() -> f64 {
    1e-6
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TwoPathwayConfig {
    #[serde(default = "h_adaptive")]
    pub h_adaptive: f64,
    #[serde(default = "h_small")]
    pub h_small: f64,
    #[serde(default = "adaptive_scheme")]
    pub adaptive_scheme: Scheme,
    #[serde(default = "fixed_scheme")]
    pub fixed_scheme: Scheme,
    /// Record every this many steps.
    #[serde(default = "record_every")]
    pub record_every: u64,
    /// A sample is in a channel when that channel's squared distance is below this.
    #[serde(default = "threshold")]
    pub threshold: f64,
    /// Only `|x| < x_window` counts. The channels cross at `x = ±2`; at
    /// `|x| = 1.9` they are still 0.78 apart in `y`, so membership is unambiguous.
    #[serde(default = "x_window")]
    pub x_window: f64,
    /// Trajectories per run written to `trajectory.csv`.
    #[serde(default = "one_u64")]
    pub plot_trajectories: u64,
}

fn h_adaptive() -> f64 {
    0.0275
}
fn h_small() -> f64 {
    0.005
}
fn adaptive_scheme() -> Scheme {
    Scheme::BaoabTilde
}
fn fixed_scheme() -> Scheme {
    Scheme::BaoabFixed
}
fn record_every() -> u64 {
    10
}
fn threshold() -> f64 {
    1e-2
}
fn x_window() -> f64 {
    1.9
}
fn one_u64() -> u64 {
    1
}

impl Default for TwoPathwayConfig {
    fn default() -> Self {
        Self {
            h_adaptive: h_adaptive(),
            h_small: h_small(),
            adaptive_scheme: adaptive_scheme(),
            fixed_scheme: fixed_scheme(),
            record_every: record_every(),
            threshold: threshold(),
            x_window: x_window(),
            plot_trajectories: one_u64(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BayesGenConfig {
    pub n: usize,
    pub mu_true: f64,
    #[serde(default)]
    pub seed: u64,
}

fn invalid(field: &str, why: impl std::fmt::Display) -> Error {
    Error::InvalidConfig(format!("{field}: {why}"))
}

fn finite_positive(field: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(invalid(field, format!("must be a finite positive number, got {v}")))
    }
}

fn interval(field: &str, (lo, hi): (f64, f64)) -> Result<()> {
    if lo.is_finite() && hi.is_finite() && lo < hi {
        Ok(())
    } else {
        Err(invalid(field, format!("need finite lo < hi, got [{lo}, {hi}]")))
    }
}

fn stepsizes(field: &str, hs: &[f64]) -> Result<()> {
    if hs.is_empty() {
        return Err(invalid(field, "needs at least one stepsize"));
    }
    hs.iter().try_for_each(|&h| finite_positive(field, h))
}

fn psi(m: f64, big_m: f64, r: f64, alpha: u32) -> Result<Psi> {
    finite_positive("monitor.m", m)?;
    finite_positive("monitor.M", big_m)?;
    finite_positive("monitor.r", r)?;
    if m > big_m {
        return Err(invalid("monitor.m", format!("must not exceed M ({m} > {big_m})")));
    }
    if alpha < 1 {
        return Err(invalid("monitor.alpha", "must be >= 1"));
    }
    Ok(Psi::new(m, big_m, r, alpha))
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::InvalidConfig(e.message().to_string() + &span_hint(text, e.span())))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| invalid("config", format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    fn require<'a, T>(opt: &'a Option<T>, section: &str) -> Result<&'a T> {
        opt.as_ref().ok_or_else(|| invalid(section, "section is required for this experiment"))
    }

    pub fn potential_cfg(&self) -> Result<&PotentialConfig> {
        Self::require(&self.potential, "[potential]")
    }
    pub fn monitor_cfg(&self) -> Result<&MonitorConfig> {
        Self::require(&self.monitor, "[monitor]")
    }
    pub fn sampler_cfg(&self) -> Result<&SamplerConfig> {
        Self::require(&self.sampler, "[sampler]")
    }
    pub fn reference_cfg(&self) -> Result<&ReferenceConfig> {
        Self::require(&self.reference, "[reference]")
    }

    /// Field-level checks beyond what parsing enforces.
    pub fn validate(&self) -> Result<()> {
        use Experiment::*;
        if let Some(s) = &self.sampler {
            s.validate()?;
        }
        if let Some(r) = &self.reference {
            interval("reference.support", r.support)?;
            if let Some(hs) = r.hist_support {
                interval("reference.hist_support", hs)?;
            }
            if r.bins < 50 {
                return Err(invalid("reference.bins", format!("must be >= 50, got {}", r.bins)));
            }
            if !(1..=4).contains(&r.k_max) {
                return Err(invalid("reference.k_max", "must lie in 1..=4"));
            }
        }
        if let Some(init) = &self.init {
            match init {
                InitConfig::Gaussian { var, mean } => {
                    if !(*var >= 0.0 && var.is_finite()) {
                        return Err(invalid("init.var", "must be finite and >= 0"));
                    }
                    if mean.iter().any(|v| !v.is_finite()) {
                        return Err(invalid("init.mean", "must be finite"));
                    }
                }
                InitConfig::Point { x, p } => {
                    if let Some(p) = p {
                        if p.len() != x.len() {
                            return Err(invalid("init.p", "must match the length of init.x"));
                        }
                    }
                }
                InitConfig::Reference => {
                    Self::require(&self.reference, "[reference] (needed by init.kind = \"reference\")")?;
                }
            }
        }
        let need_sim = matches!(self.experiment, Sample | Sweep | Escape | TwoPathway);
        if need_sim {
            self.potential_cfg()?;
            self.monitor_cfg()?;
            self.sampler_cfg()?;
        }
        match self.experiment {
            Sample => {
                if self.schemes.len() != 1 {
                    return Err(invalid("schemes", "sample runs exactly one scheme"));
                }
                self.reference_cfg()?;
            }
            Sweep => {
                if self.schemes.is_empty() {
                    return Err(invalid("schemes", "needs at least one scheme"));
                }
                self.reference_cfg()?;
                stepsizes("sweep.hs", &Self::require(&self.sweep, "[sweep]")?.hs)?;
            }
            Escape => {
                if !self.schemes.iter().any(|s| s.is_adaptive()) {
                    return Err(invalid("schemes", "escape needs at least one adaptive scheme to set the matched stepsize"));
                }
                stepsizes("escape.hs", &Self::require(&self.escape, "[escape]")?.hs)?;
            }
            Audit => {
                self.potential_cfg()?;
                self.monitor_cfg()?;
                let a = Self::require(&self.audit, "[audit]")?;
                for &d in &a.domain {
                    interval("audit.domain", d)?;
                }
                if a.n_grid < 2 {
                    return Err(invalid("audit.n_grid", "must be >= 2"));
                }
                if let Some(g) = a.adjoint_grid {
                    interval("audit.adjoint_grid", g)?;
                    self.sampler_cfg()?;
                }
                finite_positive("audit.spacing", a.spacing)?;
                finite_positive("audit.adjoint_tol", a.adjoint_tol)?;
            }
            TwoPathway => {
                let t = self.two_pathway.clone().unwrap_or_default();
                finite_positive("two_pathway.h_adaptive", t.h_adaptive)?;
                finite_positive("two_pathway.h_small", t.h_small)?;
                finite_positive("two_pathway.threshold", t.threshold)?;
                finite_positive("two_pathway.x_window", t.x_window)?;
                if !t.adaptive_scheme.is_adaptive() || t.adaptive_scheme.is_overdamped() {
                    return Err(invalid("two_pathway.adaptive_scheme", "must be an adaptive underdamped scheme"));
                }
                if t.fixed_scheme.is_adaptive() || t.fixed_scheme.is_overdamped() {
                    return Err(invalid("two_pathway.fixed_scheme", "must be a fixed-step underdamped scheme"));
                }
                if !matches!(self.potential, Some(PotentialConfig::TwoPathway { .. })) {
                    return Err(invalid("potential.id", "two-pathway needs id = \"two_pathway\""));
                }
            }
            BayesGen => {
                let b = Self::require(&self.bayes_gen, "[bayes_gen]")?;
                if b.n < 1 {
                    return Err(invalid("bayes_gen.n", "must be >= 1"));
                }
                if !b.mu_true.is_finite() {
                    return Err(invalid("bayes_gen.mu_true", "must be finite"));
                }
            }
        }
        if let Some(p) = &self.potential {
            p.check()?;
        }
        Ok(())
    }

    /// Builds the potential; relative data paths resolve against `base`.
    pub fn build_potential(&self, base: &Path) -> Result<PotentialModel> {
        self.potential_cfg()?.build(base)
    }

    pub fn build_monitor(&self, pot: &PotentialModel) -> Result<MonitorModel> {
        let mon = match self.monitor_cfg()? {
            MonitorConfig::Constant { c } => {
                finite_positive("monitor.c", *c)?;
                constant_monitor(pot.dim(), *c)
            }
            MonitorConfig::Well { quantity, m, big_m, r, alpha } => {
                let PotentialModel::ModifiedHarmonic(well) = pot else {
                    return Err(invalid("monitor.id", "\"well\" needs potential id = \"modified_harmonic\""));
                };
                monitor_well(ModifiedHarmonic::clone(well), *quantity, psi(*m, *big_m, *r, *alpha)?)
            }
            MonitorConfig::Bayes { m, big_m, r, alpha } => {
                let PotentialModel::Bayes(b) = pot else {
                    return Err(invalid("monitor.id", "\"bayes\" needs potential id = \"bayes\""));
                };
                monitor_bayes(b.y_mean(), b.a, psi(*m, *big_m, *r, *alpha)?)
            }
            MonitorConfig::Channel { orientation, m, big_m, r, alpha } => {
                if !matches!(pot, PotentialModel::TwoPathway(_)) {
                    return Err(invalid("monitor.id", "\"channel\" needs potential id = \"two_pathway\""));
                }
                monitor_2d_channel(psi(*m, *big_m, *r, *alpha)?, *orientation)
            }
        };
        Ok(mon)
    }

    pub fn build_init(&self, pot: &PotentialModel) -> Result<InitialCondition> {
        let dim = pot.dim();
        let check = |field: &str, n: usize| if n == dim { Ok(()) } else { Err(invalid(field, format!("expected {dim} components, got {n}"))) };
        Ok(match &self.init {
            None => InitialCondition::Fixed(PhaseState::position(vec![0.0; dim])),
            Some(InitConfig::Point { x, p }) => {
                check("init.x", x.len())?;
                InitialCondition::Fixed(PhaseState { x: x.clone(), p: p.clone() })
            }
            Some(InitConfig::Gaussian { mean, var }) => {
                check("init.mean", mean.len())?;
                InitialCondition::Gaussian { mean: mean.clone(), var: *var }
            }
            Some(InitConfig::Reference) => {
                check("init", 1)?;
                let rho = Density1D::gibbs(pot.clone(), self.sampler_cfg()?.beta_inv, self.reference_cfg()?.support, DEFAULT_TOL)?;
                InitialCondition::sampler(move |r| vec![rho.sample(r)])
            }
        })
    }
}

impl PotentialConfig {
    fn check(&self) -> Result<()> {
        match self {
            Self::Harmonic { k } => finite_positive("potential.k", *k),
            Self::ModifiedHarmonic { a, b, c, x0 } => {
                finite_positive("potential.a", *a)?;
                finite_positive("potential.b", *b)?;
                finite_positive("potential.c", *c)?;
                if !x0.is_finite() {
                    return Err(invalid("potential.x0", "must be finite"));
                }
                Ok(())
            }
            Self::Bayes { k, a, y, data, n_data, mu_true, .. } => {
                if *k < 1 {
                    return Err(invalid("potential.k", "must be >= 1"));
                }
                if !a.is_finite() {
                    return Err(invalid("potential.a", "must be finite"));
                }
                let sources = y.is_some() as u8 + data.is_some() as u8 + n_data.is_some() as u8;
                if sources != 1 {
                    return Err(invalid("potential", "give exactly one of y, data, n_data"));
                }
                if n_data.is_some() != mu_true.is_some() {
                    return Err(invalid("potential.mu_true", "required together with n_data"));
                }
                if matches!(n_data, Some(0)) || matches!(y, Some(v) if v.is_empty()) {
                    return Err(invalid("potential", "needs at least one observation"));
                }
                Ok(())
            }
            Self::TwoPathway { k1, k2, k3, k4 } => {
                for (f, v) in [("potential.k1", k1), ("potential.k2", k2), ("potential.k3", k3), ("potential.k4", k4)] {
                    if !(*v >= 0.0 && v.is_finite()) {
                        return Err(invalid(f, "must be finite and >= 0"));
                    }
                }
                Ok(())
            }
        }
    }

    pub fn build(&self, base: &Path) -> Result<PotentialModel> {
        self.check()?;
        Ok(match self {
            Self::Harmonic { k } => harmonic(*k),
            Self::ModifiedHarmonic { a, b, c, x0 } => modified_harmonic(*a, *b, *c, *x0),
            Self::TwoPathway { k1, k2, k3, k4 } => two_pathway(*k1, *k2, *k3, *k4),
            Self::Bayes { k, a, y, data, n_data, mu_true, data_seed } => {
                let y = match (y, data, n_data) {
                    (Some(y), _, _) => y.clone(),
                    (_, Some(path), _) => read_data(&base.join(path))?,
                    (_, _, Some(n)) => crate::commands::bayes_draws(*n, mu_true.unwrap_or(0.0), data_seed.unwrap_or(0)),
                    _ => unreachable!("checked above"),
                };
                bayes_posterior(y, *k, *a)
            }
        })
    }
}

/// Reads the `y` column written by `bayes-gen`.
pub fn read_data(path: &Path) -> Result<Vec<f64>> {
    let text = std::fs::read_to_string(path).map_err(|e| invalid("potential.data", format!("{}: {e}", path.display())))?;
    let mut lines = text.lines();
    if lines.next().map(str::trim) != Some("y") {
        return Err(invalid("potential.data", format!("{}: expected a 'y' header", path.display())));
    }
    lines
        .filter(|l| !l.trim().is_empty())
        .map(|l| l.trim().parse::<f64>().map_err(|e| invalid("potential.data", format!("{}: {e} in '{l}'", path.display()))))
        .collect()
}

fn span_hint(text: &str, span: Option<std::ops::Range<usize>>) -> String {
    match span {
        Some(s) => {
            let line = text[..s.start.min(text.len())].lines().count().max(1);
            format!(" (line {line})")
        }
        None => String::new(),
    }
}
