use thiserror::Error;

/// Errors raised by the shell-model laboratory.
///
/// The variants double as the exit-code classes of the command line tool,
/// see [`DyadicError::exit_code`].
#[derive(Debug, Error)]
pub enum DyadicError {
    /// A caller broke an API contract (mismatched lengths, mismatched intervals).
    #[error("contract violation: {0}")]
    Contract(String),
    /// Non-finite or otherwise unusable input data.
    #[error("invalid input: {0}")]
    Input(String),
    /// A parameter outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),
    /// An index or time outside the admissible range.
    #[error("out of range: {0}")]
    Range(String),
    /// A hypothesis of the construction is violated (e.g. beta <= 2).
    #[error("precondition failed: {0}")]
    Precondition(String),
    /// Iterative numerics failed to converge or hit a step-size floor.
    #[error("numeric failure: {0}")]
    Numeric(String),
    /// The solution left the admissible amplitude range.
    #[error("divergence at t = {t:e}: max |u| = {max_abs:e}")]
    Divergence { t: f64, max_abs: f64 },
    /// No coupling strength on the search grid satisfied every gate.
    #[error("search failed: {0}")]
    Search(String),
    /// Profile calibration could not certify the perturbed spectrum.
    #[error("calibration failed: {0}")]
    Calibration(String),
    /// Wraps an error with the pipeline stage that produced it.
    #[error("stage `{stage}`: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<DyadicError>,
    },
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, DyadicError>;

impl DyadicError {
    pub fn at_stage(self, stage: &'static str) -> Self {
        DyadicError::Stage {
            stage,
            source: Box::new(self),
        }
    }

    /// Exit code of the command line tool for this error.
    ///
    /// | code | meaning                       |
    /// |------|-------------------------------|
    /// | 2    | validation                    |
    /// | 3    | search or calibration failure |
    /// | 4    | numeric failure               |
    pub fn exit_code(&self) -> i32 {
        match self {
            DyadicError::Contract(_)
            | DyadicError::Input(_)
            | DyadicError::Domain(_)
            | DyadicError::Range(_)
            | DyadicError::Precondition(_)
            | DyadicError::Json(_) => 2,
            DyadicError::Search(_) | DyadicError::Calibration(_) => 3,
            DyadicError::Numeric(_) | DyadicError::Divergence { .. } | DyadicError::Io(_) => 4,
            DyadicError::Stage { source, .. } => source.exit_code(),
        }
    }
}
