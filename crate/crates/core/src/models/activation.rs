use std::f64::consts::PI;
use std::fmt;

use crate::error::{Error, Result};

/// Pointwise nonlinearity of a hidden layer.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ActivationKind {
    /// `exp(-z² / 2σ²)`
    Gaussian { sigma: f64 },
    /// `sin(2πa·z)`
    Sine { a: f64 },
    Relu,
}

impl ActivationKind {
    pub fn validate(&self) -> Result<()> {
        match *self {
            ActivationKind::Gaussian { sigma } if !(sigma > 0.0 && sigma.is_finite()) => Err(
                Error::Config(format!("gaussian sigma must be positive, got {sigma}")),
            ),
            ActivationKind::Sine { a } if !(a > 0.0 && a.is_finite()) => {
                Err(Error::Config(format!("sine frequency a must be positive, got {a}")))
            }
            _ => Ok(()),
        }
    }

    #[inline]
    pub fn apply(&self, z: f64) -> f64 {
        match *self {
            ActivationKind::Gaussian { sigma } => (-z * z / (2.0 * sigma * sigma)).exp(),
            ActivationKind::Sine { a } => (2.0 * PI * a * z).sin(),
            ActivationKind::Relu => z.max(0.0),
        }
    }

    /// `dα/dz` given the preactivation `z` and the cached output `y = α(z)`.
    #[inline]
    pub fn derivative(&self, z: f64, y: f64) -> f64 {
        match *self {
            ActivationKind::Gaussian { sigma } => -z / (sigma * sigma) * y,
            ActivationKind::Sine { a } => 2.0 * PI * a * (2.0 * PI * a * z).cos(),
            ActivationKind::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }

    pub(crate) fn tag(&self) -> (u8, f64) {
        match *self {
            ActivationKind::Gaussian { sigma } => (1, sigma),
            ActivationKind::Sine { a } => (2, a),
            ActivationKind::Relu => (3, 0.0),
        }
    }

    pub(crate) fn from_tag(tag: u8, param: f64) -> Result<Self> {
        let act = match tag {
            1 => ActivationKind::Gaussian { sigma: param },
            2 => ActivationKind::Sine { a: param },
            3 => ActivationKind::Relu,
            _ => return Err(Error::Format(format!("unknown activation tag {tag}"))),
        };
        act.validate().map_err(|e| Error::Format(e.to_string()))?;
        Ok(act)
    }
}

impl fmt::Display for ActivationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ActivationKind::Gaussian { sigma } => write!(f, "gaussian(sigma={sigma})"),
            ActivationKind::Sine { a } => write!(f, "sine(a={a})"),
            ActivationKind::Relu => write!(f, "relu"),
        }
    }
}
