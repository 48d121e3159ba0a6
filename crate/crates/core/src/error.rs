use std::fmt;

use thiserror::Error;

use crate::kernel::LawId;

/// Position-tagged message produced when source text is rejected.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SourceDiagnostic {
    pub line: usize,
    pub column: usize,
    pub message: String,
}

impl SourceDiagnostic {
    pub fn new(line: usize, column: usize, message: impl Into<String>) -> Self {
        debug_assert!(line >= 1 && column >= 1);
        Self {
            line,
            column,
            message: message.into(),
        }
    }
}

impl fmt::Display for SourceDiagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}: {}", self.line, self.column, self.message)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Error {
    #[error("{0}")]
    Syntax(SourceDiagnostic),

    #[error("malformed numeral `{0}`")]
    Numeral(String),

    #[error("probability {0} is outside [0, 1]")]
    ProbabilityRange(String),

    #[error("invalid law{}: {message}", law.map(|l| format!(" {l}")).unwrap_or_default())]
    Theory { law: Option<LawId>, message: String },

    #[error("invalid story: {0}")]
    Story(String),

    #[error("unknown atom `{0}`")]
    UnknownAtom(String),

    #[error("unknown law `{0}`")]
    UnknownLaw(String),

    #[error("invalid context: {0}")]
    Context(String),

    #[error("invalid neuron diagram: {0}")]
    Diagram(String),

    #[error("probability tree exceeds the node budget of {0}")]
    BudgetExceeded(usize),
}

impl Error {
    pub(crate) fn theory(law: Option<LawId>, message: impl Into<String>) -> Self {
        Error::Theory {
            law,
            message: message.into(),
        }
    }

    /// True for failures caused by the node budget rather than by the input.
    pub fn is_resource_limit(&self) -> bool {
        matches!(self, Error::BudgetExceeded(_))
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
