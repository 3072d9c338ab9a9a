use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("at least one bias must be declared")]
    EmptyBiasSet,

    #[error("bias `{0}` declared more than once")]
    DuplicateBias(&'static str),

    #[error("exposure misclassification requires a rare outcome")]
    RareOutcomeRequired,

    #[error("selection in the selected population cannot be combined with `{0}`")]
    SelectedPopulationConflict(&'static str),

    #[error("missing value for parameter `{0}`")]
    MissingParameter(String),

    #[error("unknown parameter `{0}`")]
    UnknownParameter(String),

    #[error("parameter `{0}` given more than once")]
    DuplicateParameter(String),

    #[error("{what} must be {requirement}, got {value}")]
    Domain {
        what: String,
        requirement: &'static str,
        value: f64,
    },

    #[error("invalid effect estimate: {0}")]
    InvalidEstimate(String),

    #[error("hazard ratios are not supported; give the estimate as a risk or odds ratio")]
    UnsupportedMeasure,

    #[error("invalid E-value polynomial x^{n}/(2x-1)^{k}")]
    InvalidPolynomial { n: u32, k: u32 },

    #[error("root search did not converge for target {0}")]
    NoConvergence(f64),

    #[error("infeasible world configuration: {0}")]
    InfeasibleConfig(String),

    #[error("world structure does not match bias set: {0}")]
    StructureMismatch(String),

    #[error("conditioning event has zero mass: {0}")]
    DegenerateStratum(String),
}

impl Error {
    pub(crate) fn domain(what: impl Into<String>, requirement: &'static str, value: f64) -> Self {
        Error::Domain {
            what: what.into(),
            requirement,
            value,
        }
    }
}
