//! Scheme identifiers and a stepper that dispatches on them at runtime.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::ensemble::{PhaseState, SamplerConfig, StepInfo, Stepper};
use crate::error::{Error, Result};
use crate::monitor::Monitor;
use crate::overdamped::{Overdamped, OverdampedScheme, OverdampedState};
use crate::potentials::Potential;
use crate::rng::RngStream;
use crate::underdamped::{Composition, SplitState, Underdamped, Variant};

/// Every integrator the crate provides.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum Scheme {
    Em,
    EmRescaled,
    EmIp,
    BaoabFixed,
    BaoabHat,
    BaoabTilde,
    AbobaFixed,
    AbobaHat,
    AbobaTilde,
    ObaboFixed,
    ObaboHat,
    ObaboTilde,
    SpvIp,
}

impl Scheme {
    pub const ALL: [Scheme; 13] = [
        Scheme::Em,
        Scheme::EmRescaled,
        Scheme::EmIp,
        Scheme::BaoabFixed,
        Scheme::BaoabHat,
        Scheme::BaoabTilde,
        Scheme::AbobaFixed,
        Scheme::AbobaHat,
        Scheme::AbobaTilde,
        Scheme::ObaboFixed,
        Scheme::ObaboHat,
        Scheme::ObaboTilde,
        Scheme::SpvIp,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Scheme::Em => "EM",
            Scheme::EmRescaled => "EM_RESCALED",
            Scheme::EmIp => "EM_IP",
            Scheme::BaoabFixed => "BAOAB_FIXED",
            Scheme::BaoabHat => "BAOAB_HAT",
            Scheme::BaoabTilde => "BAOAB_TILDE",
            Scheme::AbobaFixed => "ABOBA_FIXED",
            Scheme::AbobaHat => "ABOBA_HAT",
            Scheme::AbobaTilde => "ABOBA_TILDE",
            Scheme::ObaboFixed => "OBABO_FIXED",
            Scheme::ObaboHat => "OBABO_HAT",
            Scheme::ObaboTilde => "OBABO_TILDE",
            Scheme::SpvIp => "SPV_IP",
        }
    }

    pub fn is_overdamped(self) -> bool {
        matches!(self, Scheme::Em | Scheme::EmRescaled | Scheme::EmIp)
    }

    /// True when the scheme evaluates the monitor (everything but EM and the fixed splittings).
    pub fn is_adaptive(self) -> bool {
        !matches!(self, Scheme::Em | Scheme::BaoabFixed | Scheme::AbobaFixed | Scheme::ObaboFixed)
    }

    /// Whether the scheme needs `γ > 0`.
    pub fn needs_friction(self) -> bool {
        matches!(self, Scheme::BaoabTilde | Scheme::AbobaTilde | Scheme::ObaboTilde | Scheme::SpvIp)
    }

    pub fn overdamped(self) -> Option<OverdampedScheme> {
        match self {
            Scheme::Em => Some(OverdampedScheme::Em),
            Scheme::EmRescaled => Some(OverdampedScheme::EmRescaled),
            Scheme::EmIp => Some(OverdampedScheme::EmIp),
            _ => None,
        }
    }

    pub fn underdamped(self) -> Option<(Composition, Variant)> {
        use Composition::*;
        use Variant::*;
        Some(match self {
            Scheme::BaoabFixed => (Baoab, Fixed),
            Scheme::BaoabHat => (Baoab, Hat),
            Scheme::BaoabTilde => (Baoab, Tilde),
            Scheme::AbobaFixed => (Aboba, Fixed),
            Scheme::AbobaHat => (Aboba, Hat),
            Scheme::AbobaTilde => (Aboba, Tilde),
            Scheme::ObaboFixed => (Obabo, Fixed),
            Scheme::ObaboHat => (Obabo, Hat),
            Scheme::ObaboTilde => (Obabo, Tilde),
            Scheme::SpvIp => (Spv, Tilde),
            _ => return None,
        })
    }

    /// The fixed-step scheme with the same letter sequence.
    pub fn fixed_counterpart(self) -> Scheme {
        match self {
            Scheme::Em | Scheme::EmRescaled | Scheme::EmIp => Scheme::Em,
            Scheme::BaoabFixed | Scheme::BaoabHat | Scheme::BaoabTilde => Scheme::BaoabFixed,
            Scheme::AbobaFixed | Scheme::AbobaHat | Scheme::AbobaTilde => Scheme::AbobaFixed,
            Scheme::ObaboFixed | Scheme::ObaboHat | Scheme::ObaboTilde | Scheme::SpvIp => Scheme::ObaboFixed,
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key = s.trim().to_ascii_uppercase().replace('-', "_");
        Scheme::ALL.into_iter().find(|sc| sc.name() == key).ok_or_else(|| Error::UnknownId(format!("scheme '{s}'")))
    }
}

impl TryFrom<String> for Scheme {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<Scheme> for String {
    fn from(s: Scheme) -> String {
        s.name().to_string()
    }
}

/// Either integrator family behind one [`Stepper`] impl.
pub enum SchemeStepper<P, G> {
    Overdamped(Overdamped<P, G>),
    Underdamped(Underdamped<P, G>),
}

pub enum SchemeState {
    Overdamped(OverdampedState),
    Underdamped(SplitState),
}

impl<P: Potential, G: Monitor> SchemeStepper<P, G> {
    pub fn new(scheme: Scheme, pot: P, mon: G, cfg: &SamplerConfig) -> Result<Self> {
        cfg.validate()?;
        if let Some(kind) = scheme.overdamped() {
            return Ok(Self::Overdamped(Overdamped::new(kind, pot, mon, cfg.beta_inv)?));
        }
        let (comp, variant) = scheme.underdamped().expect("every scheme is one of the two families");
        Ok(Self::Underdamped(Underdamped::new(comp, variant, pot, mon, cfg)?))
    }
}

impl<P: Potential, G: Monitor> Stepper for SchemeStepper<P, G> {
    type State = SchemeState;

    fn dim(&self) -> usize {
        match self {
            Self::Overdamped(s) => s.dim(),
            Self::Underdamped(s) => s.dim(),
        }
    }

    fn needs_momentum(&self) -> bool {
        matches!(self, Self::Underdamped(_))
    }

    fn start(&self, init: PhaseState) -> SchemeState {
        match self {
            Self::Overdamped(s) => SchemeState::Overdamped(s.start(init)),
            Self::Underdamped(s) => SchemeState::Underdamped(s.start(init)),
        }
    }

    #[inline]
    fn step(&self, state: &mut SchemeState, rng: &mut RngStream, h: f64) -> StepInfo {
        match (self, state) {
            (Self::Overdamped(s), SchemeState::Overdamped(st)) => s.step(st, rng, h),
            (Self::Underdamped(s), SchemeState::Underdamped(st)) => s.step(st, rng, h),
            _ => panic!("state does not belong to this stepper"),
        }
    }

    fn position<'a>(&self, state: &'a SchemeState) -> &'a [f64] {
        match state {
            SchemeState::Overdamped(st) => &st.x,
            SchemeState::Underdamped(st) => &st.x,
        }
    }

    fn momentum<'a>(&self, state: &'a SchemeState) -> Option<&'a [f64]> {
        match state {
            SchemeState::Overdamped(_) => None,
            SchemeState::Underdamped(st) => Some(&st.p),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names_round_trip() {
        for s in Scheme::ALL {
            assert_eq!(s.name().parse::<Scheme>().unwrap(), s);
            assert_eq!(s.to_string().to_lowercase().parse::<Scheme>().unwrap(), s);
        }
        assert!("BAOAB".parse::<Scheme>().is_err());
    }

    #[test]
    fn families_partition_the_schemes() {
        for s in Scheme::ALL {
            assert!(s.overdamped().is_some() ^ s.underdamped().is_some());
            assert!(!s.fixed_counterpart().is_adaptive());
        }
    }
}
