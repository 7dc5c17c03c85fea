use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{what} contains a non-finite value")]
    NonFinite { what: &'static str },

    #[error("{what}: expected {expected}, found {found}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("empty input")]
    EmptyInput,

    #[error("quantile level must lie in the open interval (0, 1), got {0}")]
    InvalidQuantile(f64),

    /// The cross-covariance matrix vanished; no further latent direction exists.
    #[error("cross-product matrix is numerically zero")]
    AllZeroCrossProduct,

    #[error("column {column} has (numerically) zero norm")]
    RankDeficient { column: usize },

    #[error("matrix is singular")]
    Singular,

    #[error("quantile regression did not converge after {iterations} iterations")]
    SolverFailure { iterations: usize },

    #[error("invalid component count {requested}: must be in 1..={max}")]
    InvalidComponents { requested: usize, max: usize },

    #[error("no latent component could be extracted")]
    NoComponents,

    #[error("{0}")]
    InvalidArgument(String),

    #[error("component {index}: {source}")]
    Component {
        index: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("entry ({row}, {col}): {source}")]
    Entry {
        row: usize,
        col: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("fold {fold}: {source}")]
    Fold {
        fold: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("data error: {0}")]
    Data(String),

    /// `row` counts data rows from 1, excluding the header.
    #[error("row {row}, column '{column}': cannot read '{value}' as a finite number")]
    Cell {
        row: usize,
        column: String,
        value: String,
    },

    #[error("unsupported model format version {found} (this build reads version {supported})")]
    UnsupportedFormat { found: u32, supported: u32 },

    #[error("model file: {0}")]
    ModelFormat(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Strips component/entry/fold context and returns the innermost error.
    pub fn root(&self) -> &Error {
        match self {
            Error::Component { source, .. }
            | Error::Entry { source, .. }
            | Error::Fold { source, .. } => source.root(),
            other => other,
        }
    }

    pub(crate) fn in_component(self, index: usize) -> Error {
        Error::Component {
            index,
            source: Box::new(self),
        }
    }
}
