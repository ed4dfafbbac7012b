//! Reference answers and the statistics built on top of ensemble runs.

mod density;
mod escape;
mod quadrature;
mod sweep;

pub use density::{
    gibbs_reference, gibbs_reference_with_tol, histogram_l1, reference_from_density, Density1D, Histogram, ReferenceMoments,
    DEFAULT_TOL, TAIL_LIMIT,
};
pub use escape::{escape_rate, matched_escape_sweep, EscapeRow, MatchedEscape};
pub use quadrature::{gk15, integrate, QuadResult};
pub use sweep::{fit_slope, monotonicity_violations, weak_error_sweep, ConvergenceRow, ConvergenceTable, Estimator, SlopeFit};
