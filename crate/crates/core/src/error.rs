use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("atoms and weights must have the same nonzero length (got {atoms} atoms, {weights} weights)")]
    ShapeMismatch { atoms: usize, weights: usize },

    #[error("weight {index} is invalid: {value}")]
    InvalidWeight { index: usize, value: f64 },

    #[error("weights sum to {sum}, which is too far from 1 to renormalize")]
    WeightSum { sum: f64 },

    #[error("atom {index} = {value} is outside [-{bound}, {bound}]")]
    AtomOutOfBounds { index: usize, value: f64, bound: f64 },

    #[error("atom {index} is not finite")]
    NonFiniteAtom { index: usize },

    #[error("sample size must be positive")]
    EmptySample,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("candidate lies outside the W1 ball: W1 = {distance}, radius = {radius}")]
    OutsideBall { distance: f64, radius: f64 },

    #[error("LP oracle is limited to {cap} support points (got {got})")]
    OracleTooLarge { cap: usize, got: usize },

    #[error("LP solver failed: {0}")]
    Solver(String),

    #[error("Hermite order {0} exceeds the supported maximum of 40")]
    HermiteOrder(usize),

    #[error("io error: {0}")]
    Io(String),

    #[error("parse error: {0}")]
    Parse(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Parse(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
