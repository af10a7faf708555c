//! Reproducible experiment drivers. Each returns a [`Table`] whose header
//! carries the resolved parameters, plus a serializable summary.

mod consensus;
mod equilibria;
mod scales;

use std::str::FromStr;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::RateMode;
use crate::trace::Table;
use crate::Params;

pub use consensus::{
    crossover_experiment, entropy_audit, uniform_consensus_time, CrossoverOutput, CrossoverSpec, EntropyAuditOutput,
    EntropyAuditSpec, EntropyRun,
};
pub use equilibria::{
    phase_scan, variance_vs_kappa, PhaseClass, PhaseRow, PhaseScanOutput, PhaseScanSpec, VarianceRow,
    VarianceVsKappaOutput, VarianceVsKappaSpec,
};
pub use scales::{
    kinetic_vs_macro, particle_vs_kinetic, InterfaceCheck, KineticVsMacroOutput, KineticVsMacroSpec, LimitSummary,
    ParticleVsKineticOutput, ParticleVsKineticSpec, SchemeSummary,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    VarianceVsKappa,
    PhaseScan,
    Crossover,
    ParticleVsKinetic,
    KineticVsMacro,
    EntropyAudit,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 6] = [
        ExperimentKind::VarianceVsKappa,
        ExperimentKind::PhaseScan,
        ExperimentKind::Crossover,
        ExperimentKind::ParticleVsKinetic,
        ExperimentKind::KineticVsMacro,
        ExperimentKind::EntropyAudit,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ExperimentKind::VarianceVsKappa => "variance-vs-kappa",
            ExperimentKind::PhaseScan => "phase-scan",
            ExperimentKind::Crossover => "crossover",
            ExperimentKind::ParticleVsKinetic => "particle-vs-kinetic",
            ExperimentKind::KineticVsMacro => "kinetic-vs-macro",
            ExperimentKind::EntropyAudit => "entropy-audit",
        }
    }
}

impl std::fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ExperimentKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key = s.trim().to_ascii_lowercase().replace('_', "-");
        ExperimentKind::ALL
            .into_iter()
            .find(|k| k.as_str() == key)
            .ok_or_else(|| Error::Config(format!("unknown experiment '{s}'")))
    }
}

/// Schema names of the experiment tables.
pub const VARIANCE_SCHEMA: &str = "variance-vs-kappa/1";
pub const PHASE_SCHEMA: &str = "phase-scan/1";
pub const CROSSOVER_SCHEMA: &str = "crossover/1";
pub const PARTICLE_KINETIC_SCHEMA: &str = "particle-vs-kinetic/1";
pub const KINETIC_MACRO_SCHEMA: &str = "kinetic-vs-macro/1";
pub const ENTROPY_SCHEMA: &str = "entropy-audit/1";

/// Numeric code of a mode in table columns.
pub fn mode_code(mode: RateMode) -> f64 {
    match mode {
        RateMode::Symmetric => 0.0,
        RateMode::NonSymmetric => 1.0,
    }
}

/// `key=value` header lines for the model parameters.
pub fn param_header(p: &Params) -> Vec<(String, String)> {
    vec![
        ("gamma".into(), format!("{:?}", p.gamma)),
        ("kappa".into(), format!("{:?}", p.kappa)),
        ("zeta".into(), format!("{:?}", p.zeta)),
        ("rate_mode".into(), p.rate_mode.as_str().into()),
        ("epsilon".into(), format!("{:?}", p.epsilon)),
        ("spatial_dim".into(), p.spatial_dim.to_string()),
        ("noise".into(), p.noise_law.as_str().into()),
        ("kernel".into(), p.kernel.as_str().into()),
    ]
}

pub(crate) fn list(xs: &[f64]) -> String {
    xs.iter().map(|x| format!("{x:?}")).collect::<Vec<_>>().join(" ")
}

pub(crate) fn check_monotone(name: &str, xs: &[f64]) -> Result<()> {
    if xs.is_empty() {
        return Err(Error::Config(format!("{name}: sweep is empty")));
    }
    let up = xs.windows(2).all(|w| w[1] > w[0]);
    let down = xs.windows(2).all(|w| w[1] < w[0]);
    if !(up || down) {
        return Err(Error::Config(format!("{name}: sweep values must be strictly monotone")));
    }
    Ok(())
}

/// Distinct master seed per sub-experiment.
pub(crate) fn derive_seed(master: u64, k: u64) -> u64 {
    master.wrapping_add(k.wrapping_mul(0x9E37_79B9_7F4A_7C15))
}

pub(crate) fn table_with(schema: &str, columns: &[&str], mut header: Vec<(String, String)>, extra: &[(&str, String)]) -> Table {
    header.extend(extra.iter().map(|(k, v)| (k.to_string(), v.clone())));
    Table::new(schema, columns).with_params(header)
}
