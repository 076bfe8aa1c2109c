use std::collections::BTreeMap;

use serde::Serialize;
use thiserror::Error;

/// Errors raised by design, root-finding and simulation routines.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// The multiplicity system could not be solved reliably. Usually the
    /// pair (s0, tau) is badly scaled.
    #[error("multiplicity system is numerically singular (condition number {condition:.3e})")]
    SingularSystem { condition: f64 },

    /// No real solution of the compatibility equation in the search window.
    #[error("no admissible multiple root in the search window; the compatibility equation is {equation}")]
    NoAdmissibleRoot { equation: String },

    #[error("contour passes too close to a root (min |delta| = {min_abs:.3e}) after {nudges} nudges")]
    ContourTooClose { min_abs: f64, nudges: usize },

    #[error("winding-number quadrature did not converge (last value {value:.6})")]
    QuadratureNotConverged { value: f64 },

    #[error("Newton refinement diverged near {re} + {im}i")]
    NewtonDiverged { re: f64, im: f64 },

    #[error("solution overflowed at t = {t}")]
    Overflow { t: f64 },

    #[error("perturbed delay tau - K*epsilon = {min_tau} is not positive")]
    InvalidPerturbation { min_tau: f64 },

    #[error("compute budget exceeded")]
    BudgetExceeded,
}

impl Error {
    /// Stable identifier used in serialized error envelopes.
    pub fn name(&self) -> &'static str {
        match self {
            Error::InvalidInput(_) => "InvalidInput",
            Error::SingularSystem { .. } => "SingularSystem",
            Error::NoAdmissibleRoot { .. } => "NoAdmissibleRoot",
            Error::ContourTooClose { .. } => "ContourTooClose",
            Error::QuadratureNotConverged { .. } => "QuadratureNotConverged",
            Error::NewtonDiverged { .. } => "NewtonDiverged",
            Error::Overflow { .. } => "Overflow",
            Error::InvalidPerturbation { .. } => "InvalidPerturbation",
            Error::BudgetExceeded => "BudgetExceeded",
        }
    }

    /// Structured fields of the error, keyed by name.
    pub fn details(&self) -> BTreeMap<&'static str, Detail> {
        let mut out = BTreeMap::new();
        match self {
            Error::InvalidInput(_) | Error::BudgetExceeded => {}
            Error::SingularSystem { condition } => {
                out.insert("condition", Detail::Number(*condition));
            }
            Error::NoAdmissibleRoot { equation } => {
                out.insert("compatibility_equation", Detail::Text(equation.clone()));
            }
            Error::ContourTooClose { min_abs, nudges } => {
                out.insert("min_abs", Detail::Number(*min_abs));
                out.insert("nudges", Detail::Count(*nudges));
            }
            Error::QuadratureNotConverged { value } => {
                out.insert("value", Detail::Number(*value));
            }
            Error::NewtonDiverged { re, im } => {
                out.insert("re", Detail::Number(*re));
                out.insert("im", Detail::Number(*im));
            }
            Error::Overflow { t } => {
                out.insert("t", Detail::Number(*t));
            }
            Error::InvalidPerturbation { min_tau } => {
                out.insert("min_tau", Detail::Number(*min_tau));
            }
        }
        out
    }

    pub fn envelope(&self) -> ErrorEnvelope {
        ErrorEnvelope {
            error_name: self.name().to_string(),
            message: self.to_string(),
            details: self.details(),
        }
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(untagged)]
pub enum Detail {
    Text(String),
    Number(f64),
    Count(usize),
}

/// `{error_name, message, details}` as emitted by the command line and
/// the HTTP service.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ErrorEnvelope {
    pub error_name: String,
    pub message: String,
    pub details: BTreeMap<&'static str, Detail>,
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
