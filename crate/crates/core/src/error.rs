use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter `{name}` = {value}: {reason}")]
    InvalidParam {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },

    #[error("resonant parameters: {0}")]
    Resonance(&'static str),

    #[error("unknown measure tag `{0}`")]
    UnknownMeasure(String),

    #[error("unknown payoff kind `{0}`")]
    UnknownPayoff(String),

    #[error("interval [{start}, {end}] is reversed or outside [0, {horizon}]")]
    BadInterval { start: f64, end: f64, horizon: f64 },

    #[error("negative time-to-maturity {0}")]
    NegativeTtm(f64),

    #[error("unsupported: {0}")]
    Unsupported(&'static str),

    #[error("no root: {0}")]
    NoRoot(String),

    #[error("grid too coarse: {0}")]
    GridTooCoarse(String),

    #[error("non-finite value at time level {level}, node {node}")]
    NonFinite { level: usize, node: usize },

    #[error("exponent overflow: gamma*|p - q| = {exponent:.3e} at t = {time:.6}, S = {spot:.6}")]
    Overflow { exponent: f64, time: f64, spot: f64 },

    #[error("tridiagonal pivot breakdown at row {0}")]
    PivotBreakdown(usize),

    #[error("point (t = {t}, S = {spot}) lies outside the grid")]
    OutsideGrid { t: f64, spot: f64 },

    #[error("quadrature did not converge: last change {0:.3e}")]
    NoConvergence(f64),

    #[error("too few Monte Carlo paths: {0} (minimum 100)")]
    TooFewPaths(usize),
}

impl Error {
    /// True for failures of the numerical machinery, as opposed to bad input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::NonFinite { .. }
                | Error::Overflow { .. }
                | Error::PivotBreakdown(_)
                | Error::NoConvergence(_)
                | Error::NoRoot(_)
        )
    }
}
