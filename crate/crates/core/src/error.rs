use thiserror::Error;

/// Coarse classification of library failures, used by the CLI and the C ABI
/// to pick exit statuses and status codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    /// Malformed input: a constructor or tree invariant does not hold.
    Invalid,
    /// Input is well formed but outside the operation's domain (e.g. `r = 0` for ordering).
    Domain,
    /// A numeric result left the representable range.
    Range,
    /// The prospect form is not supported by the requested analysis.
    Unsupported,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid {what}: {reason}")]
    Invalid { what: &'static str, reason: String },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("range error: {context} (|t*x| = {magnitude:e})")]
    Range { context: String, magnitude: f64 },

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("invalid tree at node `{node}`: {reason}")]
    InvalidTree { node: String, reason: String },

    #[error("unknown node `{0}`")]
    UnknownNode(String),

    #[error("incomplete policy: decision node `{node}` {reason}")]
    IncompletePolicy { node: String, reason: String },

    #[error("policy count {count} exceeds the limit of {limit}")]
    TooManyPolicies { count: u128, limit: u64 },
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::Invalid { .. }
            | Error::InvalidTree { .. }
            | Error::UnknownNode(_)
            | Error::IncompletePolicy { .. } => ErrorKind::Invalid,
            Error::Domain(_) | Error::TooManyPolicies { .. } => ErrorKind::Domain,
            Error::Range { .. } => ErrorKind::Range,
            Error::Unsupported(_) => ErrorKind::Unsupported,
        }
    }

    pub(crate) fn invalid(what: &'static str, reason: impl Into<String>) -> Self {
        Error::Invalid {
            what,
            reason: reason.into(),
        }
    }

    /// Prefixes the context of a range error; other variants pass through.
    pub fn with_context(self, ctx: impl std::fmt::Display) -> Self {
        match self {
            Error::Range { context, magnitude } => Error::Range {
                context: format!("{ctx}: {context}"),
                magnitude,
            },
            other => other,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
