use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("{func}: argument outside the domain ({detail})")]
    Domain { func: &'static str, detail: String },

    #[error("{func}: series did not converge within {terms} terms")]
    NonConvergence { func: &'static str, terms: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// The direct lattice sum would visit more points than the configured budget.
    #[error("direct lattice sum in n = {n} needs ~{points:.3e} points, budget is {budget:.3e}")]
    DimensionTooLarge { n: usize, points: f64, budget: f64 },

    /// The last node of a trapezoidal rule still carries a non-negligible share of the sum.
    #[error("quadrature tail not negligible: last node carries {ratio:.3e} of the accumulated sum")]
    QuadratureDivergence { ratio: f64 },

    /// A 1-D discrete convolution was cut off by the sample range while the kernel was still live.
    #[error("1-D convolution at index {k} truncated: boundary term is {ratio:.3e} of the sum")]
    SupportTruncated { k: i64, ratio: f64 },

    #[error("dimension n = {0} is not supported by the tensor engine")]
    UnsupportedDimension(usize),

    #[error("separated expansion in n = {n} exceeds the rank budget (n <= {cap})")]
    RankBudgetExceeded { n: usize, cap: usize },
}

impl Error {
    pub(crate) fn domain(func: &'static str, detail: impl Into<String>) -> Self {
        Error::Domain {
            func,
            detail: detail.into(),
        }
    }
}
