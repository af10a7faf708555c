//! Opinion dynamics with grazing interactions: analytic model quantities,
//! a kinetic Fokker–Planck solver, particle simulations and the
//! macroscopic opinion–density equations.

pub mod config;
pub mod error;
pub mod experiments;
pub mod kinetic;
pub mod macro_pde;
pub mod model;
pub mod num;
pub mod particles;
pub mod quadrature;
pub mod spatial;
pub mod stats;
pub mod trace;

pub use error::{Error, Result};
pub use model::{ModelParams, NoiseLaw, RateMode};
pub use spatial::{KernelShape, SpatialKernelSpec};

pub type Params = ModelParams<f64>;
pub type Params32 = ModelParams<f32>;
