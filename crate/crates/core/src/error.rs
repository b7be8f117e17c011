use std::fmt;

/// One violated invariant found while validating a class description.
#[derive(Clone, Debug, PartialEq)]
pub enum Issue {
    /// A mass vector does not sum to one (or contains a negative / non-finite entry).
    NonNormalized { context: String, sum: f64 },
    /// A prior references a classifier id that is not in the family.
    DanglingClassifierId { context: String, id: String },
    /// A distribution has no positive mass.
    EmptySupport { context: String },
    /// Lengths, ids, dimensions or label references do not line up.
    ShapeMismatch { context: String, detail: String },
}

impl fmt::Display for Issue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Issue::NonNormalized { context, sum } => {
                write!(f, "{context}: masses sum to {sum} (expected 1)")
            }
            Issue::DanglingClassifierId { context, id } => {
                write!(f, "{context}: unknown classifier id {id:?}")
            }
            Issue::EmptySupport { context } => write!(f, "{context}: empty support"),
            Issue::ShapeMismatch { context, detail } => write!(f, "{context}: {detail}"),
        }
    }
}

/// Every issue found during validation, in discovery order.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct ValidationError {
    pub issues: Vec<Issue>,
}

impl ValidationError {
    pub fn single(issue: Issue) -> Self {
        Self { issues: vec![issue] }
    }

    pub(crate) fn push(&mut self, issue: Issue) {
        self.issues.push(issue);
    }

    pub(crate) fn into_result<T>(self, value: impl FnOnce() -> T) -> Result<T, ValidationError> {
        if self.issues.is_empty() {
            Ok(value())
        } else {
            Err(self)
        }
    }

    pub fn has_non_normalized(&self) -> bool {
        self.issues.iter().any(|i| matches!(i, Issue::NonNormalized { .. }))
    }

    pub fn has_dangling_id(&self) -> bool {
        self.issues.iter().any(|i| matches!(i, Issue::DanglingClassifierId { .. }))
    }

    pub fn has_empty_support(&self) -> bool {
        self.issues.iter().any(|i| matches!(i, Issue::EmptySupport { .. }))
    }

    pub fn has_shape_mismatch(&self) -> bool {
        self.issues.iter().any(|i| matches!(i, Issue::ShapeMismatch { .. }))
    }
}

impl fmt::Display for ValidationError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} validation issue(s)", self.issues.len())?;
        for issue in &self.issues {
            write!(f, "; {issue}")?;
        }
        Ok(())
    }
}

impl std::error::Error for ValidationError {}

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error(transparent)]
    Validation(#[from] ValidationError),
    #[error("malformed class file: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("sample has zero probability under every entry of the class")]
    ZeroEvidence,
    #[error("distribution pair is not in the support of the class")]
    UnknownPair,
    #[error("{what} too large: {size} exceeds the limit of {limit}")]
    TooLarge { what: &'static str, size: f64, limit: f64 },
    #[error("target sample is empty")]
    EmptyTargetSample,
    #[error("risk bounds are stated for entropy measured in bits")]
    WrongBase,
    #[error("the binary-label bound needs the optimal sample-wise risk")]
    MissingEStar,
    #[error("classifier {0:?} does not reproduce the labeled source sample")]
    InconsistentClassifier(String),
    #[error("domain has no metric")]
    NoMetric,
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

impl Error {
    /// True for input/validation problems, false for numeric or evidence failures.
    pub fn is_validation(&self) -> bool {
        matches!(self, Error::Validation(_) | Error::Parse(_) | Error::InvalidArgument(_))
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
