use std::fmt;

use serde::Serialize;

/// Machine-readable classification of a precondition violation.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum DomainKind {
    FrequencyOutOfWindow,
    MassNotAboveThreshold,
    ZeroFunction,
    InvalidParameter,
    FieldTooWide,
    QuadraticFormNonNegative,
}

impl DomainKind {
    pub fn as_str(self) -> &'static str {
        match self {
            DomainKind::FrequencyOutOfWindow => "frequency_out_of_window",
            DomainKind::MassNotAboveThreshold => "mass_not_above_threshold",
            DomainKind::ZeroFunction => "zero_function",
            DomainKind::InvalidParameter => "invalid_parameter",
            DomainKind::FieldTooWide => "field_too_wide",
            DomainKind::QuadraticFormNonNegative => "quadratic_form_non_negative",
        }
    }
}

impl fmt::Display for DomainKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// Shapes or sizes that do not fit together.
    #[error("structural error: {0}")]
    Structural(String),

    /// Non-finite values or a failed numerical fit.
    #[error("numeric error: {0}")]
    Numeric(String),

    #[error("{kind}: {message}")]
    Domain { kind: DomainKind, message: String },

    /// An iteration ran out of budget. `bracket` carries the last bracket
    /// when the iteration was a bisection.
    #[error("convergence failure: {message}")]
    Convergence {
        message: String,
        bracket: Option<(f64, f64)>,
    },

    /// A time evolution produced non-finite values; carries the trace
    /// recorded up to the failure.
    #[error("propagation failed: {message}")]
    Blowup {
        message: String,
        trace: Box<crate::propagator::SimulationTrace>,
    },

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("serialization error: {0}")]
    Serde(#[from] serde_json::Error),
}

impl Error {
    pub fn domain(kind: DomainKind, message: impl Into<String>) -> Self {
        Error::Domain {
            kind,
            message: message.into(),
        }
    }

    pub fn convergence(message: impl Into<String>, bracket: Option<(f64, f64)>) -> Self {
        Error::Convergence {
            message: message.into(),
            bracket,
        }
    }

    /// Prefixes the message with `ctx`, keeping the variant.
    pub fn context(self, ctx: impl std::fmt::Display) -> Self {
        match self {
            Error::Structural(m) => Error::Structural(format!("{ctx}: {m}")),
            Error::Numeric(m) => Error::Numeric(format!("{ctx}: {m}")),
            Error::Domain { kind, message } => Error::Domain {
                kind,
                message: format!("{ctx}: {message}"),
            },
            Error::Convergence { message, bracket } => Error::Convergence {
                message: format!("{ctx}: {message}"),
                bracket,
            },
            other => other,
        }
    }

    /// Short snake_case tag used in machine-readable error output.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Structural(_) => "structural",
            Error::Numeric(_) | Error::Blowup { .. } => "numeric",
            Error::Domain { kind, .. } => kind.as_str(),
            Error::Convergence { .. } => "convergence",
            Error::Io(_) => "io",
            Error::Serde(_) => "serialization",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn ensure_finite(values: &[f64], what: &str) -> Result<()> {
    match values.iter().position(|v| !v.is_finite()) {
        Some(i) => Err(Error::Numeric(format!(
            "{what}: non-finite sample at index {i}"
        ))),
        None => Ok(()),
    }
}
