use thiserror::Error;

use crate::dynamics::Trajectory;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("no Kerr turning points: effective Kerr coefficient is zero")]
    NoKerr,

    #[error("bistability-sign condition violated: need delta_0 / K' < 0 (delta_m < eta*delta_a for K' > 0), radicand = {radicand:e}")]
    BistabilitySign { radicand: f64 },

    #[error("no stationary Gaussian state: drift matrix is not Hurwitz (max Re lambda = {max_real_part:e})")]
    NotHurwitz { max_real_part: f64 },

    #[error("numerical failure: {0}")]
    Numerical(String),

    /// The integrator could not continue; the samples produced so far are kept.
    #[error("step size underflow at t = {t:e} s (h = {h:e} s); system may be stiff")]
    Stiffness {
        t: f64,
        h: f64,
        partial: Box<Trajectory>,
    },

    #[error("covariance lost physicality at t = {t:e} s (smallest symplectic eigenvalue {nu_min})")]
    Physicality {
        t: f64,
        nu_min: f64,
        partial: Box<Trajectory>,
    },

    #[error("integration failed at t = {t:e} s: {reason}")]
    Diverged {
        t: f64,
        reason: String,
        partial: Box<Trajectory>,
    },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("config error in `{key}`: {message}")]
    Config { key: String, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn config(key: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            key: key.into(),
            message: message.into(),
        }
    }

    /// Samples computed before an integration failure.
    pub fn partial_trajectory(&self) -> Option<&Trajectory> {
        match self {
            Error::Stiffness { partial, .. } | Error::Physicality { partial, .. } | Error::Diverged { partial, .. } => {
                Some(partial)
            }
            _ => None,
        }
    }

    /// Short machine-readable tag, used for poisoned sweep cells.
    pub fn code(&self) -> &'static str {
        match self {
            Error::Domain(_) => "domain",
            Error::NoKerr => "no_kerr",
            Error::BistabilitySign { .. } => "bistability_sign",
            Error::NotHurwitz { .. } => "no_stationary_state",
            Error::Numerical(_) => "numerical",
            Error::Stiffness { .. } => "stiffness",
            Error::Physicality { .. } => "physicality",
            Error::Diverged { .. } => "diverged",
            Error::InsufficientData(_) => "insufficient_data",
            Error::Config { .. } => "config",
            Error::Io(_) => "io",
            Error::Json(_) => "json",
        }
    }
}
