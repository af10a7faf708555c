//! Macroscopic mean-opinion equations with a static density `ρ(α)`.

mod grid;
mod solver;

pub use grid::{Boundary, DensityPreset, FaceMean, MacroGrid};
pub use solver::{
    consensus_time, conserved_quantity, dissipation_rhs, entropy, step_macro, ConsensusTime, MacroSolver, MacroState,
    DEFAULT_RHO_MIN, MACRO_CFL_SAFETY,
};
