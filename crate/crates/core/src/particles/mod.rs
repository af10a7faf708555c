//! Stochastic `N`-agent simulations: the binary interaction process and the
//! mean-field SDE.

mod collision;
mod ensemble;
mod run;
mod sde;

pub use collision::{collision_step, default_collision_dt, max_acceptance, REJECTION_CAP};
pub use ensemble::{
    estimate_fields, interact, replica_rng, sample_mixture, sample_noise, FieldEstimate, ParticleEnsemble,
    SchemeKind, SimScheme,
};
pub use run::{record, run_particles, run_replicas, step_particles};
pub use sde::{
    kernel_sums, kernel_sums_direct, kernel_sums_gridded, sde_coefficients, sde_step, KernelSums,
    DIRECT_SUM_LIMIT,
};

/// Default Euler–Maruyama step.
pub const DEFAULT_SDE_DT: f64 = 0.1;
