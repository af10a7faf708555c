use std::f64::consts::TAU;

use serde::Serialize;

use super::{check_monotone, list, mode_code, param_header, table_with, CROSSOVER_SCHEMA, ENTROPY_SCHEMA};
use crate::error::{Error, Result};
use crate::macro_pde::{ConsensusTime, DensityPreset, FaceMean, MacroGrid, MacroSolver, MacroState};
use crate::model::{crossover_density, RateMode};
use crate::trace::Table;
use crate::Params;

#[derive(Debug, Clone, PartialEq)]
pub struct CrossoverSpec {
    pub base: Params,
    pub rhos: Vec<f64>,
    pub cells: usize,
    pub tol_fraction: f64,
    /// Initial bisection bracket in `ρ₀`.
    pub bracket: (f64, f64),
    /// Bisection stops when the bracket is this narrow relative to its midpoint.
    pub rel_tol: f64,
    pub t_max: f64,
}

impl Default for CrossoverSpec {
    fn default() -> Self {
        CrossoverSpec {
            base: Params::new(0.05, 0.5, 1.0, RateMode::Symmetric),
            rhos: vec![0.5, 1.0, 1.5, 2.0, 2.5, 3.0, 4.0],
            cells: 128,
            tol_fraction: 0.01,
            bracket: (0.5, 4.0),
            rel_tol: 1e-4,
            t_max: 1e7,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CrossoverOutput {
    #[serde(skip)]
    pub table: Table,
    pub rho_crossing: f64,
    pub rho_star: f64,
    pub rel_err: f64,
    pub bisection_steps: usize,
    /// Non-symmetric faster below `ρ*` and symmetric faster above it, on every sweep row.
    pub ordering_correct: bool,
    pub censored_rows: usize,
}

/// Consensus time of `sin(2πα)` on a uniform density `ρ₀`.
pub fn uniform_consensus_time(p: &Params, rho0: f64, cells: usize, tol_fraction: f64, t_max: f64) -> Result<ConsensusTime<f64>> {
    let grid = MacroGrid::periodic(cells)?;
    let state = MacroState::from_fn(grid, |_| rho0, |a| (TAU * a).sin())?;
    let solver = MacroSolver::from_params(p, &state, FaceMean::Harmonic)?;
    solver.run_until_consensus(state, tol_fraction, t_max)
}

/// Consensus-speed ordering of the two modes over uniform `ρ₀`, with a
/// bisection for the density where they tie.
pub fn crossover_experiment(spec: &CrossoverSpec) -> Result<CrossoverOutput> {
    check_monotone("rhos", &spec.rhos)?;
    let base = spec.base.validate()?;
    let rho_star = crossover_density(&base)?;
    let times = |rho: f64| -> Result<(ConsensusTime<f64>, ConsensusTime<f64>)> {
        let s = uniform_consensus_time(&base.with_mode(RateMode::Symmetric), rho, spec.cells, spec.tol_fraction, spec.t_max)?;
        let a = uniform_consensus_time(&base.with_mode(RateMode::NonSymmetric), rho, spec.cells, spec.tol_fraction, spec.t_max)?;
        Ok((s, a))
    };
    let gap = |rho: f64| -> Result<f64> {
        match times(rho)? {
            (ConsensusTime::Reached(s), ConsensusTime::Reached(a)) => Ok(s - a),
            _ => Err(Error::Config(format!("consensus censored at rho0 = {rho}; raise t_max"))),
        }
    };
    let mut table = table_with(
        CROSSOVER_SCHEMA,
        &["rho0", "t_symmetric", "t_nonsymmetric", "faster"],
        param_header(&base),
        &[
            ("rhos", list(&spec.rhos)),
            ("cells", spec.cells.to_string()),
            ("tol_fraction", format!("{:?}", spec.tol_fraction)),
            ("faster_codes", "-1=symmetric 1=nonsymmetric 0=tie or censored".into()),
        ],
    );
    let mut ordering_correct = true;
    let mut censored_rows = 0;
    for &rho in &spec.rhos {
        let (s, a) = times(rho)?;
        let (ts, ta) = (s.time().unwrap_or(f64::NAN), a.time().unwrap_or(f64::NAN));
        let faster = if ts.is_nan() || ta.is_nan() {
            censored_rows += 1;
            0.0
        } else {
            ((ta - ts).signum() * -1.0).clamp(-1.0, 1.0)
        };
        let expected = if rho < rho_star { 1.0 } else { -1.0 };
        if rho != rho_star && faster != expected {
            ordering_correct = false;
        }
        table.push(vec![rho, ts, ta, faster]);
    }

    let (mut lo, mut hi) = spec.bracket;
    let (g_lo, g_hi) = (gap(lo)?, gap(hi)?);
    if !(g_lo > 0.0 && g_hi < 0.0) {
        return Err(Error::Config(format!("bracket ({lo}, {hi}) does not straddle the consensus-speed crossing")));
    }
    let mut steps = 0;
    while (hi - lo) / (0.5 * (hi + lo)) > spec.rel_tol {
        let mid = 0.5 * (lo + hi);
        if gap(mid)? > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        steps += 1;
    }
    let rho_crossing = 0.5 * (lo + hi);
    table.params.push(("rho_crossing".into(), format!("{rho_crossing:?}")));
    table.params.push(("rho_star".into(), format!("{rho_star:?}")));
    Ok(CrossoverOutput {
        table,
        rho_crossing,
        rho_star,
        rel_err: (rho_crossing - rho_star).abs() / rho_star,
        bisection_steps: steps,
        ordering_correct,
        censored_rows,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct EntropyAuditSpec {
    pub base: Params,
    pub presets: Vec<(String, DensityPreset<f64>)>,
    /// Coarse grid; the audit also runs at twice this resolution.
    pub cells: usize,
    /// Time step as a fraction of the stable step; the audit also halves it.
    pub dt_fraction: f64,
    /// Run length in units of `1/C`.
    pub t_end_c: f64,
}

impl Default for EntropyAuditSpec {
    fn default() -> Self {
        EntropyAuditSpec {
            base: Params::new(0.05, 0.5, 1.0, RateMode::Symmetric),
            presets: vec![
                ("uniform".into(), DensityPreset::Uniform(1.0)),
                ("step".into(), DensityPreset::Step { low: 0.5, high: 1.5, edges: (0.0, 0.5) }),
                ("gauss-bump".into(), DensityPreset::GaussBump { base: 0.5, amplitude: 1.5, center: 0.3, width: 0.1 }),
                (
                    "two-cluster".into(),
                    DensityPreset::TwoCluster { base: 0.3, amplitude: 1.0, centers: (0.25, 0.75), width: 0.08 },
                ),
            ],
            cells: 64,
            dt_fraction: 0.5,
            t_end_c: 0.02,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct EntropyRun {
    pub mode: RateMode,
    pub preset: String,
    pub cells: usize,
    pub dt: f64,
    /// Largest one-step entropy change; must not be positive.
    pub max_entropy_increase: f64,
    /// `max|ΔE/Δt − dissipation_rhs| / max|dissipation_rhs|` along the run.
    pub dissipation_mismatch: f64,
    pub conservation_rel_err: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct EntropyAuditOutput {
    #[serde(skip)]
    pub table: Table,
    pub runs: Vec<EntropyRun>,
    pub monotone: bool,
    /// Smallest mismatch reduction when only `dt` is halved.
    pub min_dt_ratio: f64,
    /// Smallest mismatch reduction when `Δα` is halved at fixed CFL fraction,
    /// over smooth densities.
    pub min_refine_ratio: f64,
    /// The same over discontinuous densities, where second order is not expected.
    pub min_refine_ratio_rough: Option<f64>,
    pub max_conservation_err: f64,
}

fn audit_phi(a: f64) -> f64 {
    (TAU * a).cos() + 0.5 * (3.0 * TAU * a).sin()
}

fn audit_run(p: &Params, name: &str, preset: &DensityPreset<f64>, cells: usize, dt_fraction: f64, t_end_c: f64) -> Result<EntropyRun> {
    let mode = p.rate_mode;
    let grid = MacroGrid::periodic(cells)?;
    let mut state = MacroState::from_fn(grid, |a| preset.density(a), audit_phi)?;
    let solver = MacroSolver::from_params(p, &state, FaceMean::Harmonic)?;
    let dt = solver.stable_dt() * dt_fraction;
    let steps = (t_end_c / solver.coefficient() / dt).ceil() as usize;
    let c0 = state.conserved(mode);
    let scale = state.conserved_scale(mode);
    let mut max_inc = f64::NEG_INFINITY;
    let mut max_err: f64 = 0.0;
    let mut max_rhs: f64 = 0.0;
    let mut cons: f64 = 0.0;
    for _ in 0..steps {
        let e0 = state.entropy(mode);
        let rhs = solver.dissipation_rhs(&state);
        solver.step(&mut state, dt)?;
        let e1 = state.entropy(mode);
        max_inc = max_inc.max(e1 - e0);
        max_err = max_err.max(((e1 - e0) / dt - rhs).abs());
        max_rhs = max_rhs.max(rhs.abs());
        cons = cons.max((state.conserved(mode) - c0).abs() / scale);
    }
    Ok(EntropyRun {
        mode,
        preset: name.to_string(),
        cells,
        dt,
        max_entropy_increase: max_inc,
        dissipation_mismatch: max_err / max_rhs,
        conservation_rel_err: cons,
    })
}

/// Entropy monotonicity, dissipation consistency and conservation of the
/// macro scheme for both modes on every density preset, at `(J, dt)`,
/// `(J, dt/2)` and `(2J, dt/4)`.
pub fn entropy_audit(spec: &EntropyAuditSpec) -> Result<EntropyAuditOutput> {
    let base = spec.base.validate()?;
    let mut table = table_with(
        ENTROPY_SCHEMA,
        &["mode", "preset", "cells", "dt", "max_entropy_increase", "dissipation_mismatch", "conservation_rel_err"],
        param_header(&base),
        &[
            ("presets", spec.presets.iter().map(|(n, _)| n.as_str()).collect::<Vec<_>>().join(" ")),
            ("cells", spec.cells.to_string()),
            ("dt_fraction", format!("{:?}", spec.dt_fraction)),
        ],
    );
    let mut runs = Vec::new();
    let mut min_dt_ratio = f64::INFINITY;
    let mut min_refine_ratio = f64::INFINITY;
    let mut min_refine_ratio_rough: Option<f64> = None;
    for mode in RateMode::ALL {
        let p = base.with_mode(mode);
        for (k, (name, preset)) in spec.presets.iter().enumerate() {
            let coarse = audit_run(&p, name, preset, spec.cells, spec.dt_fraction, spec.t_end_c)?;
            let half_dt = audit_run(&p, name, preset, spec.cells, spec.dt_fraction / 2.0, spec.t_end_c)?;
            let fine = audit_run(&p, name, preset, 2 * spec.cells, spec.dt_fraction, spec.t_end_c)?;
            min_dt_ratio = min_dt_ratio.min(coarse.dissipation_mismatch / half_dt.dissipation_mismatch);
            let refine = coarse.dissipation_mismatch / fine.dissipation_mismatch;
            if preset.is_smooth() {
                min_refine_ratio = min_refine_ratio.min(refine);
            } else {
                min_refine_ratio_rough = Some(min_refine_ratio_rough.map_or(refine, |r| r.min(refine)));
            }
            for r in [coarse, half_dt, fine] {
                table.push(vec![
                    mode_code(mode),
                    k as f64,
                    r.cells as f64,
                    r.dt,
                    r.max_entropy_increase,
                    r.dissipation_mismatch,
                    r.conservation_rel_err,
                ]);
                runs.push(r);
            }
        }
    }
    Ok(EntropyAuditOutput {
        table,
        monotone: runs.iter().all(|r| r.max_entropy_increase <= 0.0),
        max_conservation_err: runs.iter().map(|r| r.conservation_rel_err).fold(0.0, f64::max),
        runs,
        min_dt_ratio,
        min_refine_ratio,
        min_refine_ratio_rough,
    })
}
