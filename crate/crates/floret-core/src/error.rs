use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("duplicate floret id `{0}`")]
    DuplicateFloret(String),

    #[error("floret `{id}` declares duplicate outcome label `{label}`")]
    DuplicateLabel { id: String, label: String },

    #[error("floret `{id}` has {count} outcomes; at least 2 required")]
    TooFewOutcomes { id: String, count: usize },

    #[error("unknown floret `{0}` referenced in tree")]
    UnknownFloret(String),

    #[error("floret `{0}` is declared but never used in the tree")]
    UnusedFloret(String),

    #[error("node for floret `{id}` has {given} children but the floret has {declared} outcomes")]
    ArityMismatch {
        id: String,
        declared: usize,
        given: usize,
    },

    #[error("child label `{label}` is not an outcome of floret `{id}`")]
    UnknownOutcome { id: String, label: String },

    #[error("tree has {0} leaf nodes; at least 2 required")]
    TooFewLeaves(usize),

    #[error("tree nesting exceeds the maximum supported depth of {0}")]
    TooDeep(usize),

    #[error("model file is not valid JSON: {0}")]
    Parse(#[from] serde_json::Error),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("parameter vector for floret `{id}` is not on the simplex (sum = {sum})")]
    NotSimplex { id: String, sum: f64 },

    #[error("parameter vector for floret `{id}` has a component outside [0, 1]")]
    OutOfRange { id: String },

    #[error("theta has a boundary (zero) component; the operation requires an interior point")]
    BoundaryTheta,

    #[error("observed exposure size is zero for floret `{0}`; the MLE is undefined")]
    ZeroExposure(String),

    #[error("total count N must be at least 1")]
    EmptyData,

    #[error("fitted count for leaf {0} is zero; statistic undefined")]
    ZeroFitted(usize),

    #[error("degrees of freedom would be negative ({0}); model is over-parameterized")]
    NegativeDf(i64),

    #[error("degrees of freedom must be at least 1")]
    InvalidDf,

    #[error("the fit lies on the simplex boundary; covariance and p-values are unavailable")]
    BoundaryFit,

    #[error("leaf path `{0}` does not match any leaf of the model")]
    UnknownLeafPath(String),

    #[error("data error: {0}")]
    Data(String),
}
