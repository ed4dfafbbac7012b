//! Escape statistics over stepsize sweeps.

use std::fmt::Write as _;

use crate::ensemble::{run_ensemble, InitialCondition, SamplerConfig};
use crate::error::Result;
use crate::monitor::Monitor;
use crate::potentials::Potential;
use crate::scheme::{Scheme, SchemeStepper};

#[derive(Clone, Debug, PartialEq)]
pub struct EscapeRow {
    pub scheme: Scheme,
    /// Stepsize the ensemble actually ran with.
    pub h: f64,
    /// Sweep point this row belongs to.
    pub h_nominal: f64,
    pub fraction: f64,
    pub mean_monitor: f64,
}

/// Fraction of escaped trajectories for each `h`.
pub fn escape_rate<P: Potential, G: Monitor>(
    scheme: Scheme,
    hs: &[f64],
    cfg: &SamplerConfig,
    pot: &P,
    mon: &G,
    init: &InitialCondition,
) -> Result<Vec<EscapeRow>> {
    escape_rows(scheme, hs, 1.0, cfg, pot, mon, init)
}

#[allow(clippy::too_many_arguments)]
fn escape_rows<P: Potential, G: Monitor>(
    scheme: Scheme,
    hs: &[f64],
    scale: f64,
    cfg: &SamplerConfig,
    pot: &P,
    mon: &G,
    init: &InitialCondition,
) -> Result<Vec<EscapeRow>> {
    hs.iter()
        .map(|&h0| {
            let c = SamplerConfig { h: h0 * scale, ..cfg.clone() };
            let stepper = SchemeStepper::new(scheme, pot, mon, &c)?;
            let rep = run_ensemble(&stepper, &c, init)?.report;
            Ok(EscapeRow { scheme, h: c.h, h_nominal: h0, fraction: rep.escaped as f64 / rep.n_traj as f64, mean_monitor: rep.mean_monitor })
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct MatchedEscape {
    pub rows: Vec<EscapeRow>,
    /// Smallest mean monitor value over all adaptive runs in the sweep.
    pub g_match: f64,
}

impl MatchedEscape {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("scheme,h,fraction\n");
        for r in &self.rows {
            let _ = writeln!(s, "{},{:.16e},{:.16e}", r.scheme, r.h, r.fraction);
        }
        s
    }

    pub fn for_scheme(&self, scheme: Scheme) -> Vec<&EscapeRow> {
        self.rows.iter().filter(|r| r.scheme == scheme).collect()
    }
}

/// Adaptive schemes run at each nominal `h`; fixed-step schemes run at
/// `h · g_match`, where `g_match` is the smallest mean monitor value seen
/// across the adaptive runs, so both sides take comparable physical steps.
pub fn matched_escape_sweep<P: Potential, G: Monitor>(
    adaptive: &[Scheme],
    fixed: &[Scheme],
    hs: &[f64],
    cfg: &SamplerConfig,
    pot: &P,
    mon: &G,
    init: &InitialCondition,
) -> Result<MatchedEscape> {
    let mut rows = Vec::new();
    for &s in adaptive {
        rows.extend(escape_rows(s, hs, 1.0, cfg, pot, mon, init)?);
    }
    let g_match = rows.iter().map(|r| r.mean_monitor).filter(|g| g.is_finite()).fold(f64::INFINITY, f64::min);
    let g_match = if g_match.is_finite() { g_match } else { 1.0 };
    for &s in fixed {
        rows.extend(escape_rows(s, hs, g_match, cfg, pot, mon, init)?);
    }
    Ok(MatchedEscape { rows, g_match })
}
