use serde::{Deserialize, Serialize};

/// `𝒜(s) = 1 - ½ exp(-s²/4)`.
pub fn coefficient_a(s: f64) -> f64 {
    1.0 - 0.5 * (-s * s / 4.0).exp()
}

/// `𝒜'(s) = (s/4) exp(-s²/4)`.
pub fn coefficient_a_prime(s: f64) -> f64 {
    0.25 * s * (-s * s / 4.0).exp()
}

/// Solution-dependent diffusion coefficient.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Coefficient {
    /// `1 - ½ exp(-s²/4)`; elliptic with lower bound ½, bounded by 1.
    #[default]
    Gaussian,
    Constant(f64),
}

impl Coefficient {
    pub fn value(&self, s: f64) -> f64 {
        match *self {
            Coefficient::Gaussian => coefficient_a(s),
            Coefficient::Constant(c) => c,
        }
    }

    pub fn derivative(&self, s: f64) -> f64 {
        match *self {
            Coefficient::Gaussian => coefficient_a_prime(s),
            Coefficient::Constant(_) => 0.0,
        }
    }

    pub fn is_constant(&self) -> bool {
        matches!(self, Coefficient::Constant(_))
    }

    /// Ellipticity and boundedness constants `(m, M)`.
    pub fn bounds(&self) -> (f64, f64) {
        match *self {
            Coefficient::Gaussian => (0.5, 1.0),
            Coefficient::Constant(c) => (c, c),
        }
    }
}
