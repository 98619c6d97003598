//! Error type shared by every module of the crate.

use crate::surv::SubjectId;

/// Convenience alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// Fewer subjects at risk than the estimator needs.
    #[error("empty risk set at s = {s}: {n_at_risk} subject(s) at risk, need at least {required}")]
    EmptyRiskSet {
        s: f64,
        n_at_risk: usize,
        required: usize,
    },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// The restart curve ends in a censored observation before `s + w`.
    #[error("survival curve undefined on ({last_time}, {horizon}]: last observation is censored (set extend-tail to carry the last value forward)")]
    TailUndefined { last_time: f64, horizon: f64 },

    #[error("subject {id} has no measurement of `{name}` at or before landmark {landmark}")]
    MissingCovariate {
        id: SubjectId,
        name: String,
        landmark: f64,
    },

    /// A landmark-specific failure while stacking the super dataset.
    #[error("landmark s = {landmark}: {source}")]
    Landmark {
        landmark: f64,
        #[source]
        source: Box<Error>,
    },

    #[error("design matrix is rank deficient (condition {condition:.3e})")]
    SingularDesign { condition: f64 },

    #[error("information matrix is singular")]
    SingularInformation,

    #[error("estimating equations did not converge after {iterations} iterations (score norm {score_norm:.3e})")]
    NoConvergence { iterations: usize, score_norm: f64 },

    #[error("prediction time {s} outside the landmark range [{lower}, {upper}]")]
    OutOfRange { s: f64, lower: f64, upper: f64 },

    /// A statistic with no defined value (e.g. a C-index without usable pairs).
    #[error("undefined: {0}")]
    Undefined(String),

    #[error("event-time root finding failed for subject {subject} (seed {seed}, stream {stream})")]
    RootFinding {
        subject: SubjectId,
        seed: u64,
        stream: u64,
    },

    #[error("{path}:{line}: {message}")]
    Csv {
        path: String,
        line: u64,
        message: String,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Stable machine-readable tag for the variant.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::EmptyRiskSet { .. } => "EmptyRiskSet",
            Error::InvalidInput(_) => "InvalidInput",
            Error::TailUndefined { .. } => "TailUndefined",
            Error::MissingCovariate { .. } => "MissingCovariate",
            Error::Landmark { source, .. } => source.kind(),
            Error::SingularDesign { .. } => "SingularDesign",
            Error::SingularInformation => "SingularInformation",
            Error::NoConvergence { .. } => "NoConvergence",
            Error::OutOfRange { .. } => "OutOfRange",
            Error::Undefined(_) => "Undefined",
            Error::RootFinding { .. } => "RootFinding",
            Error::Csv { .. } => "Csv",
            Error::Io(_) => "Io",
            Error::Json(_) => "Json",
        }
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }
}
