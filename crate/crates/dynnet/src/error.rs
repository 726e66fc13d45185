//! Failure classes and their exit codes.

use dynnet_core::analytic::AnalyticError;
use dynnet_core::bjr::BjrError;
use dynnet_core::critical::CriticalError;
use dynnet_core::sim::SimError;
use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum Failure {
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error("numeric non-convergence: {0}")]
    NonConvergence(String),
    #[error("{0}")]
    TooManyRestarts(String),
    #[error("io: {0}")]
    Io(String),
}

impl Failure {
    pub fn exit_code(&self) -> i32 {
        match self {
            Failure::InvalidConfig(_) => 2,
            Failure::NonConvergence(_) => 3,
            Failure::TooManyRestarts(_) => 4,
            Failure::Io(_) => 1,
        }
    }

    pub fn class(&self) -> &'static str {
        match self {
            Failure::InvalidConfig(_) => "invalid_config",
            Failure::NonConvergence(_) => "non_convergence",
            Failure::TooManyRestarts(_) => "too_many_restarts",
            Failure::Io(_) => "io",
        }
    }

    /// The machine-readable form printed on failure.
    pub fn to_json(&self) -> String {
        #[derive(Serialize)]
        struct Body<'a> {
            class: &'a str,
            exit_code: i32,
            message: String,
        }
        #[derive(Serialize)]
        struct Doc<'a> {
            schema: u32,
            error: Body<'a>,
        }
        let doc = Doc {
            schema: 1,
            error: Body { class: self.class(), exit_code: self.exit_code(), message: self.to_string() },
        };
        serde_json::to_string(&doc).expect("error document serialises")
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Io(e.to_string())
    }
}

impl From<csv::Error> for Failure {
    fn from(e: csv::Error) -> Self {
        Failure::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Failure {
    fn from(e: serde_json::Error) -> Self {
        Failure::Io(e.to_string())
    }
}

impl From<SimError> for Failure {
    fn from(e: SimError) -> Self {
        match e {
            SimError::TooManyRestarts { .. } => Failure::TooManyRestarts(e.to_string()),
            SimError::Extinct => Failure::TooManyRestarts(e.to_string()),
            SimError::Params(_) | SimError::Dist(_) => Failure::InvalidConfig(e.to_string()),
        }
    }
}

impl From<AnalyticError> for Failure {
    fn from(e: AnalyticError) -> Self {
        match e {
            AnalyticError::Normalization { .. } | AnalyticError::Quad(_) => Failure::NonConvergence(e.to_string()),
            _ => Failure::InvalidConfig(e.to_string()),
        }
    }
}

impl From<CriticalError> for Failure {
    fn from(e: CriticalError) -> Self {
        match e {
            CriticalError::NonConvergence { .. } | CriticalError::RootNotFound { .. } => {
                Failure::NonConvergence(e.to_string())
            }
            _ => Failure::InvalidConfig(e.to_string()),
        }
    }
}

impl From<BjrError> for Failure {
    fn from(e: BjrError) -> Self {
        match e {
            BjrError::MaxIterations { .. } => Failure::NonConvergence(e.to_string()),
            _ => Failure::InvalidConfig(e.to_string()),
        }
    }
}
