use serde::Serialize;

use super::{check_monotone, list, mode_code, param_header, table_with, PHASE_SCHEMA, VARIANCE_SCHEMA};
use crate::error::{Error, Result};
use crate::kinetic::{
    default_grid, EquilibrationRule, InitialCondition, KineticSolver, KineticState, OpinionGrid, RunOptions,
};
use crate::model::{critical_kappa, equilibrium_sigma2_for, RateMode};
use crate::stats::linear_fit;
use crate::trace::Table;
use crate::Params;

#[derive(Debug, Clone, PartialEq)]
pub struct VarianceVsKappaSpec {
    pub base: Params,
    pub modes: Vec<RateMode>,
    pub kappas: Vec<f64>,
    pub cells: usize,
    pub initial: InitialCondition<f64>,
    /// Run cap in units of `1/γ`.
    pub t_max_gamma: f64,
    pub tolerance: f64,
}

impl Default for VarianceVsKappaSpec {
    fn default() -> Self {
        VarianceVsKappaSpec {
            base: Params::new(0.05, 0.5, 1.0, RateMode::Symmetric),
            modes: RateMode::ALL.to_vec(),
            kappas: (1..=9).map(|k| k as f64 / 10.0).collect(),
            cells: 256,
            initial: InitialCondition::bimodal(0.5, 0.0, 1.0),
            t_max_gamma: 2000.0,
            tolerance: 0.02,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct VarianceRow {
    pub mode: RateMode,
    pub kappa: f64,
    pub sigma2_analytic: f64,
    pub sigma2_kinetic: f64,
    pub rel_err: f64,
    pub equilibrated: bool,
    pub t_end: f64,
    pub fit_distance: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct VarianceVsKappaOutput {
    #[serde(skip)]
    pub table: Table,
    pub rows: Vec<VarianceRow>,
    pub max_rel_err: f64,
    pub all_within_tolerance: bool,
    pub all_equilibrated: bool,
    /// Symmetric variance above the non-symmetric one at every shared `κ`.
    pub symmetric_wider: Option<bool>,
}

/// Steady-state kinetic variance against the closed form, per mode and `κ`.
pub fn variance_vs_kappa(spec: &VarianceVsKappaSpec) -> Result<VarianceVsKappaOutput> {
    check_monotone("kappas", &spec.kappas)?;
    let mut table = table_with(
        VARIANCE_SCHEMA,
        &["mode", "kappa", "sigma2_analytic", "sigma2_kinetic", "rel_err", "equilibrated", "t_end", "fit_distance"],
        param_header(&spec.base),
        &[
            ("kappas", list(&spec.kappas)),
            ("cells", spec.cells.to_string()),
            ("t_max_gamma", format!("{:?}", spec.t_max_gamma)),
        ],
    );
    let mut rows = Vec::new();
    for &mode in &spec.modes {
        for &kappa in &spec.kappas {
            let kc = critical_kappa(spec.base.zeta, mode);
            if kappa >= kc {
                return Err(Error::Config(format!("kappa {kappa} is not below the {mode} critical value {kc}")));
            }
            let p = spec.base.with_mode(mode).with_kappa(kappa).validate()?;
            let analytic = equilibrium_sigma2_for(p.zeta, kappa, mode)?;
            let grid = default_grid(&p, &spec.initial, spec.cells)?;
            let solver = KineticSolver::new(&p, grid)?;
            let t_end = spec.t_max_gamma / p.gamma;
            let mut opts = RunOptions::new(t_end, t_end / 50.0);
            opts.equilibration = Some(EquilibrationRule::standard(&p));
            let run = solver.run_to_time(KineticState::from_initial(grid, &spec.initial), &opts)?;
            let m = run.state.moments()?;
            let row = VarianceRow {
                mode,
                kappa,
                sigma2_analytic: analytic,
                sigma2_kinetic: m.variance,
                rel_err: (m.variance - analytic).abs() / analytic,
                equilibrated: run.equilibrated_at.is_some(),
                t_end: run.state.t,
                fit_distance: run.state.gaussian_fit_distance()?,
            };
            table.push(vec![
                mode_code(mode),
                kappa,
                row.sigma2_analytic,
                row.sigma2_kinetic,
                row.rel_err,
                row.equilibrated as u8 as f64,
                row.t_end,
                row.fit_distance,
            ]);
            rows.push(row);
        }
    }
    let max_rel_err = rows.iter().map(|r| r.rel_err).fold(0.0, f64::max);
    let wider: Vec<bool> = rows
        .iter()
        .filter(|r| r.mode == RateMode::Symmetric)
        .filter_map(|s| {
            rows.iter()
                .find(|r| r.mode == RateMode::NonSymmetric && r.kappa == s.kappa)
                .map(|a| s.sigma2_kinetic > a.sigma2_kinetic)
        })
        .collect();
    Ok(VarianceVsKappaOutput {
        table,
        max_rel_err,
        all_within_tolerance: max_rel_err <= spec.tolerance,
        all_equilibrated: rows.iter().all(|r| r.equilibrated),
        symmetric_wider: (!wider.is_empty()).then(|| wider.iter().all(|&w| w)),
        rows,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct PhaseScanSpec {
    pub base: Params,
    pub kappas: Vec<f64>,
    pub cells: usize,
    pub initial: InitialCondition<f64>,
    /// Run cap in units of `1/γ`.
    pub t_max_gamma: f64,
    /// Trend t-statistic above which a still-growing variance counts as diverging.
    pub trend_t: f64,
}

impl PhaseScanSpec {
    /// Six points at `κ_c·{0.75, 0.85, …, 1.25}`, spacing `0.1κ_c`.
    pub fn around_critical(base: Params) -> Self {
        let kc = base.critical_kappa();
        PhaseScanSpec {
            base,
            kappas: [0.75, 0.85, 0.95, 1.05, 1.15, 1.25].iter().map(|f| f * kc).collect(),
            cells: 256,
            initial: InitialCondition::gaussian(1.0, 0.0),
            t_max_gamma: 10_000.0,
            trend_t: 5.0,
        }
    }
}

impl Default for PhaseScanSpec {
    fn default() -> Self {
        Self::around_critical(Params::new(0.05, 0.5, 1.0, RateMode::Symmetric))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum PhaseClass {
    Equilibrated,
    Diverging,
    Inconclusive,
}

impl PhaseClass {
    pub fn code(self) -> f64 {
        match self {
            PhaseClass::Equilibrated => 0.0,
            PhaseClass::Diverging => 1.0,
            PhaseClass::Inconclusive => 2.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PhaseRow {
    pub kappa: f64,
    pub class: PhaseClass,
    /// `degenerate`, `equilibration-rule`, `saturated`, `trend` or `flat-trend`.
    pub reason: &'static str,
    pub final_variance: f64,
    pub t_end: f64,
    pub trend_slope: f64,
    pub trend_t: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct PhaseScanOutput {
    #[serde(skip)]
    pub table: Table,
    pub mode: RateMode,
    pub kappa_crit: f64,
    pub rows: Vec<PhaseRow>,
    /// Last equilibrated and first diverging `κ`, when the classes are ordered.
    pub boundary: Option<(f64, f64)>,
    pub brackets_critical: bool,
}

/// Equilibrated/diverging classification along a `κ` sweep.
///
/// A run is equilibrated once the equilibration rule fires and diverging once
/// its mass reaches the domain edge. Runs that hit the time cap are judged
/// by the slope of the variance over the final third: diverging when its
/// t-statistic exceeds `trend_t`, inconclusive otherwise. All points share
/// one domain sized for the widest subcritical equilibrium in the sweep.
pub fn phase_scan(spec: &PhaseScanSpec) -> Result<PhaseScanOutput> {
    check_monotone("kappas", &spec.kappas)?;
    let base = spec.base.validate()?;
    let mode = base.rate_mode;
    let kc = base.critical_kappa();
    let mut width = base.zeta.max(spec.initial.std_dev());
    for &k in &spec.kappas {
        if let Ok(s2) = equilibrium_sigma2_for(base.zeta, k, mode) {
            width = width.max(s2.sqrt());
        }
    }
    let half = 8.0 * width + spec.initial.spread();
    let grid = OpinionGrid::centered(spec.initial.mean(), half, spec.cells)?;
    let mut table = table_with(
        PHASE_SCHEMA,
        &["kappa", "class", "final_variance", "t_end", "trend_slope", "trend_t"],
        param_header(&base),
        &[
            ("kappas", list(&spec.kappas)),
            ("cells", spec.cells.to_string()),
            ("half_width", format!("{half:?}")),
            ("t_max_gamma", format!("{:?}", spec.t_max_gamma)),
            ("class_codes", "0=equilibrated 1=diverging 2=inconclusive".into()),
        ],
    );
    let mut rows = Vec::new();
    for &kappa in &spec.kappas {
        let row = if kappa == 0.0 {
            PhaseRow {
                kappa,
                class: PhaseClass::Equilibrated,
                reason: "degenerate",
                final_variance: 0.0,
                t_end: 0.0,
                trend_slope: 0.0,
                trend_t: 0.0,
            }
        } else {
            classify(&base.with_kappa(kappa).validate()?, grid, spec)?
        };
        table.push(vec![kappa, row.class.code(), row.final_variance, row.t_end, row.trend_slope, row.trend_t]);
        rows.push(row);
    }
    let boundary = ordered_boundary(&rows);
    let brackets_critical = boundary.is_some_and(|(lo, hi)| lo < kc && kc < hi);
    Ok(PhaseScanOutput { table, mode, kappa_crit: kc, rows, boundary, brackets_critical })
}

fn classify(p: &Params, grid: OpinionGrid<f64>, spec: &PhaseScanSpec) -> Result<PhaseRow> {
    let solver = KineticSolver::new(p, grid)?;
    let t_end = spec.t_max_gamma / p.gamma;
    let mut opts = RunOptions::new(t_end, t_end / 300.0);
    opts.equilibration = Some(EquilibrationRule::standard(p));
    let run = solver.run_to_time(KineticState::from_initial(grid, &spec.initial), &opts)?;
    let tail: Vec<_> = run.trace.iter().filter(|r| r.t >= run.state.t * 2.0 / 3.0).collect();
    let (slope, t) = if tail.len() >= 3 {
        let fit = linear_fit(&tail.iter().map(|r| r.t).collect::<Vec<_>>(), &tail.iter().map(|r| r.variance).collect::<Vec<_>>());
        (fit.slope, fit.t_stat())
    } else {
        (f64::NAN, f64::NAN)
    };
    let (class, reason) = if run.equilibrated_at.is_some() {
        (PhaseClass::Equilibrated, "equilibration-rule")
    } else if run.saturated {
        (PhaseClass::Diverging, "saturated")
    } else if slope > 0.0 && t > spec.trend_t {
        (PhaseClass::Diverging, "trend")
    } else {
        (PhaseClass::Inconclusive, "flat-trend")
    };
    Ok(PhaseRow {
        kappa: p.kappa,
        class,
        reason,
        final_variance: run.state.moments()?.variance,
        t_end: run.state.t,
        trend_slope: slope,
        trend_t: t,
    })
}

/// `(last equilibrated κ, first diverging κ)` when every equilibrated point
/// precedes every diverging one and nothing is inconclusive.
fn ordered_boundary(rows: &[PhaseRow]) -> Option<(f64, f64)> {
    if rows.iter().any(|r| r.class == PhaseClass::Inconclusive) {
        return None;
    }
    let mut sorted: Vec<&PhaseRow> = rows.iter().collect();
    sorted.sort_by(|a, b| a.kappa.total_cmp(&b.kappa));
    let first_div = sorted.iter().position(|r| r.class == PhaseClass::Diverging)?;
    if first_div == 0 || sorted[first_div..].iter().any(|r| r.class != PhaseClass::Diverging) {
        return None;
    }
    Some((sorted[first_div - 1].kappa, sorted[first_div].kappa))
}
