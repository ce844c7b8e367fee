use thiserror::Error;

use crate::integration::QuadratureEstimate;
use crate::types::PosteriorResult;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Best available answer carried by [`Error::BudgetExhausted`].
#[derive(Debug, Clone, PartialEq)]
pub enum Partial {
    Quadrature(QuadratureEstimate),
    Posterior(Box<PosteriorResult>),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// No frequency vector is compatible with the observed average, so every
    /// conditional plausibility is 0/0.
    #[error("undefined (contradictory data): no {n} throws average {average}")]
    ContradictoryData { n: u32, average: String },

    #[error("degenerate constraint polytope: average {0} admits a single distribution")]
    DegeneratePolytope(String),

    #[error("integration budget exhausted: achieved error {achieved:.3e}, requested {requested:.3e}")]
    BudgetExhausted { achieved: f64, requested: f64, partial: Partial },

    #[error("{what} out of domain: {detail}")]
    Domain { what: &'static str, detail: String },

    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),

    #[error("ambiguous asymptotic regime: {0}")]
    AmbiguousRegime(String),
}

impl Error {
    pub(crate) fn domain(what: &'static str, detail: impl Into<String>) -> Self {
        Error::Domain { what, detail: detail.into() }
    }

    pub fn is_contradictory(&self) -> bool {
        matches!(self, Error::ContradictoryData { .. })
    }
}
