//! Adaptive-timestep Langevin sampling that preserves the Gibbs measure.
//!
//! A monitor function `g(x)` rescales time so that the effective step is
//! `g(x) h`: small where the potential is stiff, large where it is flat.
//! Adding the drift correction `β⁻¹ ∇g` keeps `ρ ∝ exp(-βV)` invariant, both
//! for overdamped dynamics
//!
//! ```text
//! dx = -g ∇V dt + β⁻¹ ∇g dt + √(2β⁻¹ g) dW
//! ```
//!
//! and for underdamped dynamics, where the position flow becomes
//! `dx = g(x) p dt` and is integrated by an implicit midpoint step.
//!
//! Modules:
//! - [`rng`]: deterministic per-trajectory normal streams
//! - [`ensemble`]: shared types and the parallel ensemble runner
//! - [`potentials`]: built-in potentials with analytic gradients
//! - [`monitor`]: the bounded heuristic `ψ`, composed monitors, criteria audit
//! - [`overdamped`]: Euler–Maruyama variants, reweighting, adjoint audit
//! - [`underdamped`]: splitting sub-steps and their compositions
//! - [`analysis`]: quadrature references, histograms, weak-error sweeps, escapes

pub mod analysis;
pub mod ensemble;
pub mod error;
pub mod monitor;
pub mod overdamped;
pub mod potentials;
pub mod rng;
pub mod scheme;
pub mod underdamped;

pub use ensemble::{run_ensemble, EnsembleOutput, EnsembleReport, InitialCondition, PhaseState, SamplerConfig, Stepper};
pub use error::{Error, Result};
pub use monitor::{Monitor, MonitorFunction, Psi};
pub use potentials::{Potential, PotentialModel};
pub use rng::{derive_stream, RngStream};
pub use scheme::Scheme;
