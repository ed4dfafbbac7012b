//! Long-time statistics against closed forms and quadrature.

use adaptive_langevin::analysis::{Density1D, DEFAULT_TOL};
use adaptive_langevin::monitor::{constant_monitor, monitor_well, MonitorModel, WellQuantity};
use adaptive_langevin::potentials::{harmonic, ModifiedHarmonic};
use adaptive_langevin::scheme::SchemeStepper;
use adaptive_langevin::{run_ensemble, EnsembleReport, InitialCondition, Monitor, PotentialModel, Psi, SamplerConfig, Scheme};

fn report(scheme: Scheme, pot: &PotentialModel, mon: &MonitorModel, cfg: &SamplerConfig) -> EnsembleReport {
    let stepper = SchemeStepper::new(scheme, pot, mon, cfg).unwrap();
    let init = InitialCondition::Gaussian { mean: vec![0.0], var: 1.0 };
    run_ensemble(&stepper, cfg, &init).unwrap().report
}

fn within(got: f64, want: f64, se: f64) -> bool {
    (got - want).abs() < 4.0 * se
}

#[test]
fn em_on_a_harmonic_well_has_the_discrete_ou_variance() {
    // x' = (1 - h) x + sqrt(2h) xi is stationary at variance 2 / (2 - h)
    let h = 0.1;
    let cfg = SamplerConfig { h, beta_inv: 1.0, t_final: 20.0, n_traj: 20_000, seed: 11, ..Default::default() };
    let r = report(Scheme::Em, &harmonic(1.0), &constant_monitor(1, 1.0), &cfg);
    let want = 2.0 / (2.0 - h);
    assert!(within(r.moments[1], want, r.moment_stderr[1]), "{} vs {want} (se {})", r.moments[1], r.moment_stderr[1]);
    assert!(!within(r.moments[1], 1.0, r.moment_stderr[1]));
}

#[test]
fn baoab_samples_the_exact_harmonic_marginal_at_large_steps() {
    let cfg = SamplerConfig { h: 0.5, beta_inv: 1.0, gamma: 1.0, t_final: 40.0, n_traj: 20_000, seed: 12, ..Default::default() };
    let r = report(Scheme::BaoabFixed, &harmonic(1.0), &constant_monitor(1, 1.0), &cfg);
    assert!(within(r.moments[1], 1.0, r.moment_stderr[1]), "{} (se {})", r.moments[1], r.moment_stderr[1]);
}

fn mild_well() -> (PotentialModel, MonitorModel) {
    let w = ModifiedHarmonic { a: 1.0, b: 1.0, c: 0.1, x0: 0.5 };
    let mon = monitor_well(w.clone(), WellQuantity::Omega, Psi::new(0.3, 1.5, 1.0, 1));
    (PotentialModel::ModifiedHarmonic(w), mon)
}

/// `∫ x² ρ` for `ρ ∝ exp(-V/β⁻¹) g^power`.
fn second_moment(pot: &PotentialModel, mon: &MonitorModel, beta_inv: f64, power: f64) -> f64 {
    let (p, m) = (pot.clone(), mon.clone());
    let rho = Density1D::new(move |x| -adaptive_langevin::Potential::value(&p, &[x]) / beta_inv + power * m.value(&[x]).ln(), (-25.0, 25.0), DEFAULT_TOL).unwrap();
    rho.expectation(|x| x * x).unwrap().value
}

#[test]
fn rescaled_em_drifts_to_gibbs_over_g_while_ip_keeps_gibbs() {
    let (pot, mon) = mild_well();
    let beta_inv = 0.5;
    let gibbs = second_moment(&pot, &mon, beta_inv, 0.0);
    let biased = second_moment(&pot, &mon, beta_inv, -1.0);
    let cfg = SamplerConfig { h: 0.01, beta_inv, t_final: 30.0, n_traj: 3_000, seed: 13, ..Default::default() };

    let r = report(Scheme::EmRescaled, &pot, &mon, &cfg);
    let se = r.moment_stderr[1];
    assert!((gibbs - biased).abs() > 10.0 * se, "oracles too close: {gibbs} vs {biased}, se {se}");
    assert!(within(r.moments[1], biased, se), "EM_RESCALED {} vs rho/g {biased} (se {se})", r.moments[1]);

    let r = report(Scheme::EmIp, &pot, &mon, &cfg);
    assert!(within(r.moments[1], gibbs, r.moment_stderr[1]), "EM_IP {} vs rho {gibbs} (se {})", r.moments[1], r.moment_stderr[1]);
}
