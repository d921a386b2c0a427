use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("binary entropy argument {0} is outside [0, 1]")]
    EntropyDomain(f64),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("slot weight {weight} is outside the likelihood table (max {max})")]
    WeightOutOfRange { weight: usize, max: usize },

    #[error("exhaustive search needs C({ell}, {k}) = {subsets} subsets, above the cap of {cap}")]
    Infeasible {
        ell: usize,
        k: usize,
        subsets: u128,
        cap: u128,
    },

    #[error("no candidate set passed every threshold test")]
    NoSetPassed,

    #[error("{0} candidate sets passed every threshold test")]
    MultipleSetsPassed(usize),
}

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}
