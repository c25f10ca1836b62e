use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("implicit Volterra step is singular at t = {t}")]
    NonConvergence { t: f64 },

    #[error("W(t) is ill-conditioned at t = {t} (condition number {condition:.3e})")]
    SingularW { t: f64, condition: f64 },

    #[error("propagator parameters undefined: {0}")]
    SingularParams(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("Fock cutoff overflow at t = {t}: top-level population {population:.3e}")]
    CutoffOverflow { t: f64, population: f64 },

    #[error("master-equation rates missing for {len} consecutive samples starting at t = {t}")]
    RateGap { t: f64, len: usize },

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("quadrature grid too coarse: spacing {spacing:.3e} exceeds {limit:.3e} required for t_max = {t_max}")]
    GridTooCoarse { spacing: f64, limit: f64, t_max: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;
