use std::f64::consts::TAU;

use serde::Serialize;

use super::{
    check_monotone, derive_seed, list, mode_code, param_header, table_with, KINETIC_MACRO_SCHEMA,
    PARTICLE_KINETIC_SCHEMA,
};
use crate::error::{Error, Result};
use crate::kinetic::{default_grid, InitialCondition, KineticSolver, KineticState, RunOptions};
use crate::macro_pde::{DensityPreset, FaceMean, MacroGrid, MacroSolver, MacroState};
use crate::model::{equilibrium_sigma2, RateMode};
use crate::particles::{
    default_collision_dt, run_particles, run_replicas, ParticleEnsemble, SchemeKind, SimScheme, DEFAULT_SDE_DT,
};
use crate::stats::{linear_fit, mean_and_se};
use crate::trace::Table;
use crate::Params;

#[derive(Debug, Clone, PartialEq)]
pub struct ParticleVsKineticSpec {
    pub base: Params,
    pub modes: Vec<RateMode>,
    pub schemes: Vec<SchemeKind>,
    pub agents: usize,
    pub replicas: usize,
    pub seed: u64,
    pub t_end: f64,
    pub checkpoints: usize,
    pub cells: usize,
    pub initial: InitialCondition<f64>,
    /// `None` uses the default collision step.
    pub collision_dt: Option<f64>,
    pub sde_dt: f64,
    pub z_limit: f64,
}

impl Default for ParticleVsKineticSpec {
    fn default() -> Self {
        ParticleVsKineticSpec {
            base: Params::new(0.05, 0.5, 1.0, RateMode::Symmetric),
            modes: RateMode::ALL.to_vec(),
            schemes: vec![SchemeKind::CollisionMC, SchemeKind::MeanFieldSDE],
            agents: 10_000,
            replicas: 16,
            seed: 20_240_601,
            t_end: 400.0,
            checkpoints: 10,
            cells: 256,
            initial: InitialCondition::gaussian(1.0, 0.0),
            collision_dt: None,
            sde_dt: DEFAULT_SDE_DT,
            z_limit: 3.0,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SchemeSummary {
    pub mode: RateMode,
    pub scheme: SchemeKind,
    pub max_abs_z: f64,
    pub within_limit: bool,
    /// Largest `|z|` against the kinetic solver with the `O(γ)` jump
    /// diffusion kept. Equals `max_abs_z` for the SDE.
    pub max_abs_z_finite_gamma: f64,
    /// Largest `|z|` against the grazing solver run at `γ(1−γ)` and
    /// `κ/(1−γ)`. Equals `max_abs_z` for the SDE.
    pub max_abs_z_mapped: f64,
    pub rejection_cap_warnings: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct ParticleVsKineticOutput {
    #[serde(skip)]
    pub table: Table,
    pub summaries: Vec<SchemeSummary>,
    pub all_within_limit: bool,
}

/// Grazing parameters with the same variance balance as the jump process at
/// finite `γ` under symmetric weights.
fn mapped_params(p: &Params) -> Params {
    Params::new(p.gamma * (1.0 - p.gamma), p.kappa / (1.0 - p.gamma), p.zeta, p.rate_mode)
}

fn kinetic_variances(p: &Params, spec: &ParticleVsKineticSpec, finite_gamma: bool) -> Result<Vec<f64>> {
    let grid = default_grid(p, &spec.initial, spec.cells)?;
    let solver = KineticSolver::new(p, grid)?.with_finite_gamma(finite_gamma)?;
    let run = solver.run_to_time(
        KineticState::from_initial(grid, &spec.initial),
        &RunOptions::new(spec.t_end, spec.t_end / spec.checkpoints as f64),
    )?;
    Ok(run.trace.iter().map(|r| r.variance).collect())
}

/// Replica-averaged particle variance trajectories against the kinetic solver.
pub fn particle_vs_kinetic(spec: &ParticleVsKineticSpec) -> Result<ParticleVsKineticOutput> {
    if spec.replicas < 2 {
        return Err(Error::Config("at least 2 replicas are needed for standard errors".into()));
    }
    let base = spec.base.validate()?;
    let every = spec.t_end / spec.checkpoints as f64;
    let mut table = table_with(
        PARTICLE_KINETIC_SCHEMA,
        &["mode", "scheme", "t", "kinetic_variance", "particle_variance", "se", "z", "z_finite_gamma", "z_mapped"],
        param_header(&base),
        &[
            ("agents", spec.agents.to_string()),
            ("replicas", spec.replicas.to_string()),
            ("seed", spec.seed.to_string()),
            ("t_end", format!("{:?}", spec.t_end)),
            ("checkpoints", spec.checkpoints.to_string()),
            ("sde_dt", format!("{:?}", spec.sde_dt)),
            ("scheme_codes", "0=collision 1=sde".into()),
        ],
    );
    let mut summaries = Vec::new();
    for (mi, &mode) in spec.modes.iter().enumerate() {
        let p = base.with_mode(mode);
        let kinetic = kinetic_variances(&p, spec, false)?;
        let (kinetic_finite, kinetic_mapped) = if spec.schemes.contains(&SchemeKind::CollisionMC) {
            (kinetic_variances(&p, spec, true)?, kinetic_variances(&mapped_params(&p), spec, false)?)
        } else {
            (kinetic.clone(), kinetic.clone())
        };
        for (si, &kind) in spec.schemes.iter().enumerate() {
            let dt = match kind {
                SchemeKind::CollisionMC => spec.collision_dt.unwrap_or_else(|| default_collision_dt(&p, spec.agents, false)),
                SchemeKind::MeanFieldSDE => spec.sde_dt,
            };
            let seed = derive_seed(spec.seed, (mi * 16 + si) as u64);
            let runs = run_replicas(spec.replicas, seed, |_, rng| {
                let ens = ParticleEnsemble::sample(spec.agents, &spec.initial, seed, rng)?;
                let mut scheme = SimScheme::new(kind, dt)?;
                let (_, trace) = run_particles(ens, &p, &mut scheme, spec.t_end, every, None, rng)?;
                Ok((trace.iter().map(|r| r.variance).collect::<Vec<f64>>(), scheme.rejection_cap_warnings))
            })?;
            let (oracle_finite, oracle_mapped) = match kind {
                SchemeKind::CollisionMC => (&kinetic_finite, &kinetic_mapped),
                SchemeKind::MeanFieldSDE => (&kinetic, &kinetic),
            };
            let mut max_z: f64 = 0.0;
            let mut max_z_finite: f64 = 0.0;
            let mut max_z_mapped: f64 = 0.0;
            for (c, ((&kin, &kin_f), &kin_m)) in kinetic.iter().zip(oracle_finite).zip(oracle_mapped).enumerate() {
                let xs: Vec<f64> = runs.iter().map(|(v, _)| v[c]).collect();
                let (m, se) = mean_and_se(&xs);
                let z = (m - kin) / se;
                let zf = (m - kin_f) / se;
                let zm = (m - kin_m) / se;
                // The shared initial sample makes the t = 0 row pure sampling noise.
                max_z = max_z.max(z.abs());
                max_z_finite = max_z_finite.max(zf.abs());
                max_z_mapped = max_z_mapped.max(zm.abs());
                table.push(vec![mode_code(mode), si as f64, c as f64 * every, kin, m, se, z, zf, zm]);
            }
            summaries.push(SchemeSummary {
                mode,
                scheme: kind,
                max_abs_z: max_z,
                within_limit: max_z <= spec.z_limit,
                max_abs_z_finite_gamma: max_z_finite,
                max_abs_z_mapped: max_z_mapped,
                rejection_cap_warnings: runs.iter().map(|(_, w)| w).sum(),
            });
        }
    }
    Ok(ParticleVsKineticOutput { table, all_within_limit: summaries.iter().all(|s| s.within_limit), summaries })
}

#[derive(Debug, Clone, PartialEq)]
pub struct KineticVsMacroSpec {
    pub base: Params,
    pub modes: Vec<RateMode>,
    pub epsilons: Vec<f64>,
    pub agents: usize,
    pub bins: usize,
    /// Macro cells per bin.
    pub refine: usize,
    pub amplitude: f64,
    /// Horizon in diffusive time `t' = ε²t`.
    pub t_prime_end: f64,
    pub checkpoints: usize,
    pub seed: u64,
    /// Bins holding fewer agents than this are flagged.
    pub min_bin_count: usize,
    /// Step-density interface check (symmetric rate) at this `ε`; `None` skips it.
    pub interface_epsilon: Option<f64>,
    pub interface_t_prime: f64,
}

impl Default for KineticVsMacroSpec {
    fn default() -> Self {
        KineticVsMacroSpec {
            base: Params::new(0.05, 0.5, 1.0, RateMode::Symmetric),
            modes: RateMode::ALL.to_vec(),
            epsilons: vec![0.2, 0.1, 0.05],
            agents: 100_000,
            bins: 32,
            refine: 4,
            amplitude: 1.0,
            t_prime_end: 2.0,
            checkpoints: 8,
            seed: 20_240_602,
            min_bin_count: 500,
            interface_epsilon: Some(0.1),
            interface_t_prime: 0.2,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct LimitSummary {
    pub mode: RateMode,
    pub epsilon: f64,
    /// `‖φ̂ − φ_macro‖₂ / ‖φ_macro − φ̄‖₂` over bins and checkpoints after `t' = 0`.
    pub rel_l2: f64,
    pub particle_rate: f64,
    pub macro_rate: f64,
    pub rate_rel_err: f64,
    pub min_bin_count: usize,
    pub underpopulated_bins: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct InterfaceCheck {
    pub epsilon: f64,
    pub t_prime: f64,
    /// Mean opinion in the bins next to the density jumps.
    pub macro_value: f64,
    pub particle_value: f64,
    pub particle_se: f64,
    pub signs_agree: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct KineticVsMacroOutput {
    #[serde(skip)]
    pub table: Table,
    pub summaries: Vec<LimitSummary>,
    /// Discrepancy never grows as `ε` decreases, per mode.
    pub non_increasing: bool,
    pub interface: Option<InterfaceCheck>,
}

/// Bin averages of macro cell values.
fn bin_average(values: &[f64], refine: usize) -> Vec<f64> {
    values.chunks(refine).map(|c| c.iter().sum::<f64>() / c.len() as f64).collect()
}

/// Macro bin averages at `t' = k·t'_end/checkpoints`, `k = 0..=checkpoints`.
fn macro_bins(
    p: &Params,
    density: &DensityPreset<f64>,
    phi0: impl Fn(f64) -> f64,
    spec: &KineticVsMacroSpec,
    t_end: f64,
) -> Result<Vec<Vec<f64>>> {
    let grid = MacroGrid::periodic(spec.bins * spec.refine)?;
    let mut state = MacroState::from_fn(grid, |a| density.density(a), phi0)?;
    let solver = MacroSolver::from_params(p, &state, FaceMean::Harmonic)?;
    let dt = solver.stable_dt();
    let mut out = vec![bin_average(&state.phi, spec.refine)];
    for k in 1..=spec.checkpoints {
        let target = t_end * k as f64 / spec.checkpoints as f64;
        while state.t < target - 1e-12 * t_end {
            let h = dt.min(target - state.t);
            solver.step(&mut state, h)?;
        }
        out.push(bin_average(&state.phi, spec.refine));
    }
    Ok(out)
}

/// Projection onto `sin(2πα)` at the bin centers.
fn sine_projection(phi: &[f64]) -> f64 {
    let n = phi.len() as f64;
    2.0 / n * phi.iter().enumerate().map(|(b, v)| v * (TAU * (b as f64 + 0.5) / n).sin()).sum::<f64>()
}

/// Spatial particle bins under the diffusive scaling against the macro
/// solution with the same density and initial mean opinion.
pub fn kinetic_vs_macro(spec: &KineticVsMacroSpec) -> Result<KineticVsMacroOutput> {
    check_monotone("epsilons", &spec.epsilons)?;
    let base = spec.base.validate()?;
    let mut table = table_with(
        KINETIC_MACRO_SCHEMA,
        &["mode", "epsilon", "t_prime", "bin", "phi_particles", "phi_macro", "rho_particles"],
        param_header(&base),
        &[
            ("epsilons", list(&spec.epsilons)),
            ("agents", spec.agents.to_string()),
            ("bins", spec.bins.to_string()),
            ("amplitude", format!("{:?}", spec.amplitude)),
            ("t_prime_end", format!("{:?}", spec.t_prime_end)),
            ("seed", spec.seed.to_string()),
        ],
    );
    let amp = spec.amplitude;
    let phi0 = move |a: f64| amp * (TAU * a).sin();
    let uniform = DensityPreset::Uniform(1.0);
    let t_primes: Vec<f64> =
        (0..=spec.checkpoints).map(|k| spec.t_prime_end * k as f64 / spec.checkpoints as f64).collect();
    let mut summaries = Vec::new();
    for (mi, &mode) in spec.modes.iter().enumerate() {
        for (ei, &eps) in spec.epsilons.iter().enumerate() {
            let p = base.with_mode(mode).with_epsilon(eps).validate()?;
            let macro_phi = macro_bins(&p, &uniform, phi0, spec, spec.t_prime_end)?;
            let seed = derive_seed(spec.seed, (mi * 16 + ei) as u64);
            let sigma = equilibrium_sigma2(&p)?.sqrt();
            let mut rng = crate::particles::replica_rng(seed, 0);
            let ens = ParticleEnsemble::sample_spatial(spec.agents, &uniform, phi0, sigma, seed, &mut rng)?;
            let mut scheme = SimScheme::new(SchemeKind::CollisionMC, default_collision_dt(&p, spec.agents, true))?;
            let t_end = spec.t_prime_end / (eps * eps);
            let (_, trace) =
                run_particles(ens, &p, &mut scheme, t_end, t_end / spec.checkpoints as f64, Some(spec.bins), &mut rng)?;
            let (mut err2, mut norm2) = (0.0, 0.0);
            let mut min_count = usize::MAX;
            let mut under = 0;
            let (mut amp_p, mut amp_m) = (Vec::new(), Vec::new());
            for (k, (rec, mphi)) in trace.iter().zip(&macro_phi).enumerate() {
                let (rho, phi) = rec.bins.as_ref().expect("spatial run records bins");
                let mean_m = mphi.iter().sum::<f64>() / mphi.len() as f64;
                for b in 0..spec.bins {
                    let count = (rho[b] * spec.agents as f64 / spec.bins as f64).round() as usize;
                    min_count = min_count.min(count);
                    if count < spec.min_bin_count {
                        under += 1;
                    }
                    if k > 0 {
                        err2 += (phi[b] - mphi[b]).powi(2);
                        norm2 += (mphi[b] - mean_m).powi(2);
                    }
                    table.push(vec![mode_code(mode), eps, t_primes[k], b as f64, phi[b], mphi[b], rho[b]]);
                }
                amp_p.push(sine_projection(phi));
                amp_m.push(sine_projection(mphi));
            }
            let rate = |amps: &[f64]| -> f64 {
                let logs: Vec<f64> = amps.iter().map(|a| a.abs().ln()).collect();
                -linear_fit(&t_primes, &logs).slope
            };
            let (rp, rm) = (rate(&amp_p), rate(&amp_m));
            summaries.push(LimitSummary {
                mode,
                epsilon: eps,
                rel_l2: (err2 / norm2).sqrt(),
                particle_rate: rp,
                macro_rate: rm,
                rate_rel_err: (rp - rm).abs() / rm,
                min_bin_count: min_count,
                underpopulated_bins: under,
            });
        }
    }
    let mut non_increasing = true;
    for &mode in &spec.modes {
        let mut by_eps: Vec<&LimitSummary> = summaries.iter().filter(|s| s.mode == mode).collect();
        by_eps.sort_by(|a, b| b.epsilon.total_cmp(&a.epsilon));
        if by_eps.windows(2).any(|w| w[1].rel_l2 > w[0].rel_l2) {
            non_increasing = false;
        }
    }
    let interface = match spec.interface_epsilon {
        Some(eps) => Some(interface_check(&base, spec, eps, phi0)?),
        None => None,
    };
    Ok(KineticVsMacroOutput { table, summaries, non_increasing, interface })
}

/// Symmetric rate on a step density, high on `[0, ½)`: mean opinion next to
/// both density jumps from particles and from the macro equation.
fn interface_check(base: &Params, spec: &KineticVsMacroSpec, eps: f64, phi0: impl Fn(f64) -> f64 + Copy) -> Result<InterfaceCheck> {
    let p = base.with_mode(RateMode::Symmetric).with_epsilon(eps).validate()?;
    let density = DensityPreset::Step { low: 0.5, high: 1.5, edges: (0.0, 0.5) };
    let one = KineticVsMacroSpec { checkpoints: 1, ..spec.clone() };
    let macro_phi = macro_bins(&p, &density, phi0, &one, spec.interface_t_prime)?;
    let n = spec.bins;
    let near = [n - 1, 0, n / 2 - 1, n / 2];
    let macro_value = near.iter().map(|&b| macro_phi[1][b]).sum::<f64>() / near.len() as f64;

    let seed = derive_seed(spec.seed, 1000);
    let mut rng = crate::particles::replica_rng(seed, 0);
    let sigma = equilibrium_sigma2(&p)?.sqrt();
    let ens = ParticleEnsemble::sample_spatial(spec.agents, &density, phi0, sigma, seed, &mut rng)?;
    let mut scheme = SimScheme::new(SchemeKind::CollisionMC, default_collision_dt(&p, spec.agents, true))?;
    let t_end = spec.interface_t_prime / (eps * eps);
    let (ens, _) = run_particles(ens, &p, &mut scheme, t_end, t_end, None, &mut rng)?;
    let pos = ens.positions.as_ref().expect("spatial ensemble");
    let picked: Vec<f64> = pos
        .iter()
        .zip(&ens.opinions)
        .filter(|(&a, _)| near.contains(&(((a * n as f64) as usize).min(n - 1))))
        .map(|(_, &v)| v)
        .collect();
    let (particle_value, particle_se) = mean_and_se(&picked);
    Ok(InterfaceCheck {
        epsilon: eps,
        t_prime: spec.interface_t_prime,
        macro_value,
        particle_value,
        particle_se,
        signs_agree: macro_value.signum() == particle_value.signum(),
    })
}
