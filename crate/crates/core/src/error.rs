use thiserror::Error;

/// Errors raised by the numerical routines.
///
/// The variants are grouped so the CLI can map them onto exit codes:
/// input problems, numerical non-convergence, and failed statistical checks.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("unsupported noise model: {0}")]
    UnsupportedModel(String),

    #[error("white noise is delta-correlated and has no finite pointwise autocorrelation")]
    DeltaCorrelated,

    #[error("quasi-static noise (kappa = 0) has an infinite correlation time")]
    InfiniteCorrelationTime,

    #[error("jump model would need {states} states ((M+1)^N = {m_plus_one}^{n_components}), above the cap of {cap}")]
    StateCapExceeded {
        states: u128,
        m_plus_one: usize,
        n_components: usize,
        cap: usize,
    },

    #[error("step bound violated: {0}")]
    StepBound(String),

    #[error("quadrature did not reach tolerance {tolerance:e} (estimated error {estimate:e})")]
    Quadrature { tolerance: f64, estimate: f64 },

    #[error("the series expansion fails to converge numerically ({0}); use the quasi-static closed form")]
    SeriesDivergence(String),

    #[error("linear solve failed: {0}")]
    Singular(String),

    #[error("ODE integration failed: {0}")]
    Stiffness(String),

    #[error("spectrum does not decay at the grid edges: edge/peak ratio {ratio:.3e} exceeds {limit:.3e}")]
    EdgeMass { ratio: f64, limit: f64 },

    #[error("requested t_max = {requested} exceeds the amplification bound t_max <= {allowed:.3}")]
    Amplification { requested: f64, allowed: f64 },

    #[error("steady state not reached: {0}")]
    NotRelaxed(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    /// True for failures caused by the numerics rather than by the caller's input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::Quadrature { .. }
                | Error::SeriesDivergence(_)
                | Error::Singular(_)
                | Error::Stiffness(_)
                | Error::Amplification { .. }
                | Error::EdgeMass { .. }
        )
    }

    /// True for failures of a Monte Carlo consistency check.
    pub fn is_statistical(&self) -> bool {
        matches!(self, Error::NotRelaxed(_))
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_finite(name: &'static str, v: f64) -> Result<()> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(Error::param(name, format!("must be finite, got {v}")))
    }
}

pub(crate) fn check_rate(name: &'static str, v: f64) -> Result<()> {
    check_finite(name, v)?;
    if v < 0.0 {
        return Err(Error::param(name, format!("must be >= 0, got {v}")));
    }
    Ok(())
}
