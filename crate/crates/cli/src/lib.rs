//! Experiment runner for the adaptive Langevin samplers: TOML configs in,
//! CSV tables out.

pub mod commands;
pub mod config;

pub use commands::{run, Context, Outcome};
pub use config::ExperimentConfig;

use adaptive_langevin::Error;

/// Process exit codes.
pub mod exit {
    pub const SUCCESS: i32 = 0;
    pub const VALIDATION: i32 = 1;
    pub const AUDIT_FAILED: i32 = 2;
    pub const NON_CONVERGENCE: i32 = 3;
    /// A sweep ran to completion but some slope could not be fitted.
    pub const NO_FIT: i32 = 4;
}

pub fn exit_code_for(err: &Error) -> i32 {
    match err {
        Error::Quadrature { .. } | Error::NonFinite { .. } | Error::GridTooCoarse { .. } => exit::NON_CONVERGENCE,
        _ => exit::VALIDATION,
    }
}

pub fn exit_code(outcome: Outcome) -> i32 {
    match outcome {
        Outcome::Success => exit::SUCCESS,
        Outcome::NoFit => exit::NO_FIT,
        Outcome::AuditFailed => exit::AUDIT_FAILED,
    }
}
