//! Spatially homogeneous grazing-limit Fokker–Planck equation `∂_t f = Q(f)`.

mod convolve;
mod grid;
mod operator;
mod solver;
mod state;

pub use convolve::{convolve, Convolver, Moment};
pub use grid::OpinionGrid;
pub use operator::{
    apply_linearized_q, apply_q, equilibrium_residual, gibbs_from_conv, gibbs_measure, q_from_fields,
    residual_from_conv, ConvolvedFields, GibbsData, LinearizedOperator, UNDERFLOW_MASS_FRACTION,
};
pub use solver::{
    default_grid, domain_half_width, run_to_time, step, EquilibrationRule, KineticRun, KineticSolver, RunOptions,
    CFL_SAFETY, DEFAULT_CELLS, SATURATION_FRACTION,
};
pub use state::{InitialCondition, KineticState, Moments};
