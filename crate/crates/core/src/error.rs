use std::fmt;

/// Pipeline stage in which an error surfaced.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Covariance,
    Regression,
    Direction,
    Theta,
    Statistic,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Stage::Covariance => "empirical covariance",
            Stage::Regression => "regression vector",
            Stage::Direction => "unit direction",
            Stage::Theta => "theta estimation",
            Stage::Statistic => "test statistic",
        };
        f.write_str(s)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("too few samples: n = {n} must exceed d = {d}")]
    TooFewSamples { n: usize, d: usize },
    #[error("covariance is rank deficient (smallest/largest eigenvalue = {ratio:e})")]
    RankDeficient { ratio: f64 },
    #[error("cross-covariance is zero; no regression direction can be formed")]
    ZeroSignal,
    #[error("numeric overflow: {0}")]
    NumericOverflow(String),
    #[error("bad dimensions: {0}")]
    BadDimensions(String),
    #[error("degenerate model: causal and confounding vectors are both zero")]
    DegenerateModel,
    #[error("matrix is singular or ill-conditioned (condition number {condition:e})")]
    SingularMatrix { condition: f64 },
    #[error("invalid data: {0}")]
    InvalidData(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("parse error at row {row}, column {column}: {message}")]
    ParseError {
        row: usize,
        column: usize,
        message: String,
    },
    #[error("non-numeric cell {value:?} at row {row}, column {column}")]
    NonNumeric {
        row: usize,
        column: usize,
        value: String,
    },
    #[error("missing column: {0}")]
    MissingColumn(String),
    #[error("column {0:?} has zero variance and cannot be normalized")]
    ConstantColumn(String),
    #[error("{stage} failed: {source}")]
    AtStage {
        stage: Stage,
        #[source]
        source: Box<Error>,
    },
    #[error("too many failed runs: {failed} of {total}")]
    TooManyFailures { failed: usize, total: usize },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn at(stage: Stage) -> impl FnOnce(Error) -> Error {
        move |e| Error::AtStage {
            stage,
            source: Box::new(e),
        }
    }

    /// The innermost error, skipping stage annotations.
    pub fn root(&self) -> &Error {
        match self {
            Error::AtStage { source, .. } => source.root(),
            other => other,
        }
    }

    /// True for failures caused by the numbers themselves rather than by
    /// malformed input.
    pub fn is_numeric(&self) -> bool {
        matches!(
            self.root(),
            Error::RankDeficient { .. }
                | Error::ZeroSignal
                | Error::NumericOverflow(_)
                | Error::DegenerateModel
                | Error::SingularMatrix { .. }
                | Error::TooManyFailures { .. }
        )
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
