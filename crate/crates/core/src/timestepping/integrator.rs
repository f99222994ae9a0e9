use super::bdf::MAX_BDF_STEPS;
use crate::error::{EsfemError, Result};
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use std::fmt;
use std::str::FromStr;

pub const INTEGRATOR_GRAMMAR: &str = "be | bdf<k> | libdf<k> (k = 1..5) | radau<s> (s = 1..3)";

/// Time integrator selected by a spec string such as `bdf3` or `radau2`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Integrator {
    BackwardEuler,
    Bdf(usize),
    LinearlyImplicitBdf(usize),
    Radau(usize),
}

impl Integrator {
    /// Classical order of convergence in time.
    pub fn order(&self) -> usize {
        match *self {
            Integrator::BackwardEuler => 1,
            Integrator::Bdf(k) | Integrator::LinearlyImplicitBdf(k) => k,
            Integrator::Radau(s) => 2 * s - 1,
        }
    }
}

impl fmt::Display for Integrator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Integrator::BackwardEuler => write!(f, "be"),
            Integrator::Bdf(k) => write!(f, "bdf{k}"),
            Integrator::LinearlyImplicitBdf(k) => write!(f, "libdf{k}"),
            Integrator::Radau(s) => write!(f, "radau{s}"),
        }
    }
}

impl FromStr for Integrator {
    type Err = EsfemError;

    fn from_str(s: &str) -> Result<Self> {
        let lower = s.trim().to_ascii_lowercase();
        let unknown = || {
            EsfemError::InvalidArgument(format!(
                "unknown integrator '{s}'; expected {INTEGRATOR_GRAMMAR}"
            ))
        };
        if lower == "be" {
            return Ok(Integrator::BackwardEuler);
        }
        let (name, digits) = lower
            .find(|c: char| c.is_ascii_digit())
            .map(|i| lower.split_at(i))
            .ok_or_else(unknown)?;
        let n: usize = digits.parse().map_err(|_| unknown())?;
        let bdf_range = |n: usize| -> Result<usize> {
            if n == 0 {
                Err(unknown())
            } else if n > MAX_BDF_STEPS {
                Err(EsfemError::InvalidArgument(format!(
                    "order {n} not supported; BDF methods are offered for k <= {MAX_BDF_STEPS}"
                )))
            } else {
                Ok(n)
            }
        };
        match name {
            "bdf" => Ok(Integrator::Bdf(bdf_range(n)?)),
            "libdf" => Ok(Integrator::LinearlyImplicitBdf(bdf_range(n)?)),
            "radau" if (1..=3).contains(&n) => Ok(Integrator::Radau(n)),
            _ => Err(unknown()),
        }
    }
}

impl Serialize for Integrator {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for Integrator {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}
