use thiserror::Error;

use crate::model::RateMode;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Failures reported by the model, the solvers and the configuration layer.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParam(String),

    #[error("supercritical kappa: {kappa} >= {critical} ({mode} rate); no Gaussian equilibrium")]
    SupercriticalKappa { kappa: f64, critical: f64, mode: RateMode },

    #[error("non-normalized kernel: mass {mass} differs from 1")]
    NonNormalizedKernel { mass: f64 },

    #[error("CFL violation: dt = {dt} exceeds the stable limit {limit}")]
    Cfl { dt: f64, limit: f64 },

    #[error("denominator underflow: cells with G*f below the floor hold {mass_fraction} of the mass")]
    DenominatorUnderflow { mass_fraction: f64 },

    #[error("Gibbs measure undefined for kappa = 0")]
    GibbsUndefined,

    #[error("zero mass: mean and variance undefined")]
    ZeroMass,

    #[error("acceptance probability {probability} exceeds 1; use dt <= {max_dt}")]
    AcceptanceOverflow { probability: f64, max_dt: f64 },

    #[error("agent {agent} is isolated: interaction mean {value} below floor")]
    IsolatedAgent { agent: usize, value: f64 },

    #[error("density {rho} below floor {floor} in cell {cell}")]
    DensityBelowFloor { cell: usize, rho: f64, floor: f64 },

    #[error("linearized operator: {0}")]
    Linearization(String),

    #[error("configuration: {0}")]
    Config(String),

    #[error("i/o: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl Error {
    /// Process exit code used by the command-line driver.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::InvalidParam(_)
            | Error::Config(_)
            | Error::NonNormalizedKernel { .. }
            | Error::SupercriticalKappa { .. } => 2,
            Error::Io(_) => 1,
            _ => 3,
        }
    }
}
