//! Model parameters and their validation.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::social::SocialIndexDistribution;

/// How the partner of a newly created edge is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Version {
    /// Uniformly among all living nodes.
    U,
    /// Among living nodes with probability proportional to their social index.
    P,
}

impl Version {
    pub fn as_str(self) -> &'static str {
        match self {
            Version::U => "U",
            Version::P => "P",
        }
    }
}

impl core::str::FromStr for Version {
    type Err = ParamError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "U" | "u" => Ok(Version::U),
            "P" | "p" => Ok(Version::P),
            _ => Err(ParamError::UnknownVersion),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum ParamError {
    #[error("population is not supercritical: lambda = {lambda} <= mu = {mu}")]
    SubcriticalPopulation { lambda: f64, mu: f64 },
    #[error("rate `{name}` must be a finite non-negative number, got {value}")]
    NegativeRate { name: &'static str, value: f64 },
    #[error("beta + mu = 0: the dynamics are legal but no asymptotic formula is available")]
    ZeroGamma,
    #[error("unknown model version (expected U or P)")]
    UnknownVersion,
}

/// The four rates of the model together with the neighbour-choice rule.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    /// Node birth rate per living node.
    pub lambda: f64,
    /// Node death rate.
    pub mu: f64,
    /// Edge creation rate per unit of social index.
    pub alpha: f64,
    /// Edge death rate.
    pub beta: f64,
    pub version: Version,
}

impl ModelParams {
    pub fn new(lambda: f64, mu: f64, alpha: f64, beta: f64, version: Version) -> Self {
        Self { lambda, mu, alpha, beta, version }
    }

    /// Total hazard of an edge: its own death plus the death of the partner.
    #[inline]
    pub fn gamma(&self) -> f64 {
        self.beta + self.mu
    }

    pub fn with_version(self, version: Version) -> Self {
        Self { version, ..self }
    }

    pub fn with_alpha(self, alpha: f64) -> Self {
        Self { alpha, ..self }
    }

    /// Checks that the rates describe a legal simulation (the `ZeroGamma`
    /// case is *not* reported here).
    pub fn validate_dynamics(&self) -> Result<(), ParamError> {
        for (name, value) in [("lambda", self.lambda), ("mu", self.mu), ("alpha", self.alpha), ("beta", self.beta)] {
            if !(value.is_finite() && value >= 0.0) {
                return Err(ParamError::NegativeRate { name, value });
            }
        }
        if self.lambda <= self.mu {
            return Err(ParamError::SubcriticalPopulation { lambda: self.lambda, mu: self.mu });
        }
        Ok(())
    }

    /// Full validation: legal dynamics and `beta + mu > 0`, which every
    /// asymptotic formula divides by.
    pub fn validate(&self) -> Result<(), ParamError> {
        self.validate_dynamics()?;
        if self.gamma() <= 0.0 {
            return Err(ParamError::ZeroGamma);
        }
        Ok(())
    }
}

/// Parameters plus the social index law, i.e. the JSON model object
/// `{"lambda","mu","alpha","beta","version","social_index":{"kind",...}}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    #[serde(flatten)]
    pub params: ModelParams,
    pub social_index: SocialIndexDistribution,
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(lambda: f64, mu: f64, alpha: f64, beta: f64) -> ModelParams {
        ModelParams::new(lambda, mu, alpha, beta, Version::U)
    }

    #[test]
    fn validate_examples() {
        assert_eq!(p(1.0, 0.5, 1.0, 0.5).validate(), Ok(()));
        assert!(matches!(p(0.5, 1.0, 1.0, 0.5).validate(), Err(ParamError::SubcriticalPopulation { .. })));
        assert_eq!(p(1.0, 0.0, 1.0, 0.0).validate(), Err(ParamError::ZeroGamma));
        assert_eq!(p(1.0, 0.0, 1.0, 0.0).validate_dynamics(), Ok(()));
    }

    #[test]
    fn negative_and_nan_rates_rejected() {
        assert!(matches!(p(1.0, 0.5, -1.0, 0.5).validate(), Err(ParamError::NegativeRate { name: "alpha", .. })));
        assert!(matches!(p(1.0, f64::NAN, 1.0, 0.5).validate(), Err(ParamError::NegativeRate { name: "mu", .. })));
        // equal rates are not supercritical
        assert!(p(1.0, 1.0, 1.0, 0.5).validate().is_err());
    }

    #[test]
    fn gamma_tracks_fields() {
        let q = p(2.0, 0.25, 1.0, 0.5);
        assert_eq!(q.gamma(), 0.75);
        assert_eq!(q.with_alpha(3.0).gamma(), 0.75);
    }
}
