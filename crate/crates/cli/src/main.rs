//! `opk`: command-line driver writing CSV traces/tables and `summary.json`.

use std::f64::consts::TAU;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use opk_core::config::{parse_config, parse_override_args, RunConfig, KEYS};
use opk_core::experiments::{
    crossover_experiment, entropy_audit, kinetic_vs_macro, param_header, particle_vs_kinetic, phase_scan,
    variance_vs_kappa, CrossoverSpec, EntropyAuditSpec, ExperimentKind, KineticVsMacroSpec, ParticleVsKineticSpec,
    PhaseScanSpec, VarianceVsKappaSpec,
};
use opk_core::kinetic::{default_grid, EquilibrationRule, KineticSolver, KineticState, RunOptions};
use opk_core::macro_pde::{consensus_time, Boundary, FaceMean, MacroGrid, MacroSolver, MacroState, DEFAULT_RHO_MIN};
use opk_core::model::{analytic_summary, equilibrium_sigma2, RateMode};
use opk_core::particles::{
    default_collision_dt, replica_rng, run_particles, ParticleEnsemble, SchemeKind, SimScheme, DEFAULT_SDE_DT,
};
use opk_core::trace::{kinetic_table, macro_table, particle_table, Table};
use opk_core::{Error, Params, Result};
use serde_json::{json, Value};

#[derive(Parser)]
#[command(name = "opk", version, about = "Kinetic opinion dynamics: analytic values, solvers and experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct RunArgs {
    /// `key=value` configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides as `--key value` or `--key=value`.
    #[arg(trailing_var_arg = true, allow_hyphen_values = true)]
    overrides: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Print closed-form equilibrium, threshold and diffusion values as JSON.
    Analytic(RunArgs),
    /// Homogeneous kinetic Fokker–Planck run.
    KineticRun(RunArgs),
    /// Particle simulation (one ensemble).
    ParticleRun(RunArgs),
    /// Macroscopic mean-opinion equation with a static density.
    MacroRun(RunArgs),
    /// Run an experiment: variance-vs-kappa, phase-scan, crossover,
    /// particle-vs-kinetic, kinetic-vs-macro or entropy-audit.
    Experiment {
        kind: String,
        #[command(flatten)]
        args: RunArgs,
    },
    /// List configuration keys with their defaults.
    Keys,
}

/// Outcome of a command that ran to completion but may flag a numerical failure.
struct Outcome {
    summary: Value,
    failure: Option<String>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn load(args: &RunArgs) -> Result<RunConfig> {
    let overrides = parse_override_args(&args.overrides)?;
    parse_config(args.config.as_deref(), &overrides)
}

fn run(command: Command) -> Result<ExitCode> {
    let (name, cfg, outcome) = match command {
        Command::Keys => {
            for (k, d, doc) in KEYS {
                println!("{k:<14} {d:<10} {doc}");
            }
            return Ok(ExitCode::SUCCESS);
        }
        Command::Analytic(args) => {
            let cfg = load(&args)?;
            let out = analytic(&cfg)?;
            println!("{}", serde_json::to_string_pretty(&out.summary).expect("json"));
            ("analytic".to_string(), cfg, out)
        }
        Command::KineticRun(args) => {
            let cfg = load(&args)?;
            let out = kinetic_run(&cfg)?;
            ("kinetic-run".to_string(), cfg, out)
        }
        Command::ParticleRun(args) => {
            let cfg = load(&args)?;
            let out = particle_run(&cfg)?;
            ("particle-run".to_string(), cfg, out)
        }
        Command::MacroRun(args) => {
            let cfg = load(&args)?;
            let out = macro_run(&cfg)?;
            ("macro-run".to_string(), cfg, out)
        }
        Command::Experiment { kind, args } => {
            let kind: ExperimentKind = kind.parse()?;
            let cfg = load(&args)?;
            let out = experiment(kind, &cfg)?;
            (format!("experiment {kind}"), cfg, out)
        }
    };
    write_summary(&cfg, &name, &outcome.summary)?;
    match outcome.failure {
        Some(msg) => {
            eprintln!("numerical failure: {msg}");
            Ok(ExitCode::from(3))
        }
        None => Ok(ExitCode::SUCCESS),
    }
}

fn out_path(cfg: &RunConfig, file: &str) -> Result<PathBuf> {
    let dir = cfg.out_dir()?;
    fs::create_dir_all(&dir)?;
    Ok(dir.join(file))
}

/// Writes `table` with the resolved parameters and explicit config entries prepended to its header.
fn write_table(cfg: &RunConfig, p: &Params, file: &str, mut table: Table) -> Result<PathBuf> {
    let mut header = param_header(p);
    for (k, v) in cfg.entries() {
        if !header.iter().any(|(hk, _)| *hk == k) {
            header.push((k, v));
        }
    }
    for (k, v) in std::mem::take(&mut table.params) {
        if !header.iter().any(|(hk, _)| *hk == k) {
            header.push((k, v));
        }
    }
    table.params = header;
    let path = out_path(cfg, file)?;
    table.write(fs::File::create(&path)?)?;
    Ok(path)
}

fn write_summary(cfg: &RunConfig, command: &str, results: &Value) -> Result<()> {
    let config: serde_json::Map<String, Value> = cfg.entries().into_iter().map(|(k, v)| (k, Value::String(v))).collect();
    let params = match cfg.params() {
        Ok(p) => param_header(&p).into_iter().map(|(k, v)| (k, Value::String(v))).collect(),
        Err(_) => serde_json::Map::new(),
    };
    let doc = json!({ "command": command, "config": config, "params": params, "results": results });
    let path = out_path(cfg, "summary.json")?;
    fs::write(path, serde_json::to_string_pretty(&doc).expect("json") + "\n")?;
    Ok(())
}

fn file_name(path: &Path) -> String {
    path.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default()
}

fn analytic(cfg: &RunConfig) -> Result<Outcome> {
    let p = cfg.params()?;
    let s = analytic_summary(&p)?;
    Ok(Outcome { summary: serde_json::to_value(s).expect("json"), failure: None })
}

fn kinetic_run(cfg: &RunConfig) -> Result<Outcome> {
    let p = cfg.params()?;
    let ic = cfg.initial_condition()?;
    let grid = default_grid(&p, &ic, cfg.get("cells")?)?;
    let solver = KineticSolver::new(&p, grid)?;
    let mut opts = RunOptions::new(cfg.get("t_end")?, cfg.get("trace_every")?);
    opts.dt = cfg.get_opt("dt")?;
    let equilibrate = cfg.get_bool("equilibrate")?;
    if equilibrate {
        opts.equilibration = Some(EquilibrationRule::standard(&p));
    }
    let run = solver.run_to_time(KineticState::from_initial(grid, &ic), &opts)?;
    let trace_file = write_table(cfg, &p, "kinetic.csv", kinetic_table(&run.trace))?;
    let mut profile = Table::new("kinetic-profile/1", &["phi", "f"]);
    for (x, f) in grid.nodes().into_iter().zip(&run.state.f) {
        profile.push(vec![x, *f]);
    }
    let profile_file = write_table(cfg, &p, "kinetic_profile.csv", profile)?;
    let m = run.state.moments()?;
    let analytic = equilibrium_sigma2(&p).ok();
    let summary = json!({
        "trace": file_name(&trace_file),
        "profile": file_name(&profile_file),
        "t_end": run.state.t,
        "steps": run.steps,
        "mass": m.mass,
        "mean": m.mean,
        "variance": m.variance,
        "sigma2_analytic": analytic,
        "variance_rel_err": analytic.map(|a| (m.variance - a).abs() / a),
        "gaussian_fit_distance": run.state.gaussian_fit_distance()?,
        "equilibrated_at": run.equilibrated_at,
        "saturated": run.saturated,
        "clipped": run.state.clipped,
    });
    let failure = (equilibrate && run.saturated).then(|| "run saturated its domain while equilibration was required".into());
    Ok(Outcome { summary, failure })
}

fn particle_run(cfg: &RunConfig) -> Result<Outcome> {
    let p = cfg.params()?;
    let kind: SchemeKind = cfg.get("scheme")?;
    let agents: usize = cfg.get("agents")?;
    let seed: u64 = cfg.get("seed")?;
    let spatial = cfg.get_bool("spatial")?;
    let mut rng = replica_rng(seed, 0);
    let ens = if spatial {
        let sigma = equilibrium_sigma2(&p)?.sqrt();
        let amp: f64 = cfg.get("amplitude")?;
        ParticleEnsemble::sample_spatial(agents, &cfg.density()?, |a| amp * (TAU * a).sin(), sigma, seed, &mut rng)?
    } else {
        ParticleEnsemble::sample(agents, &cfg.initial_condition()?, seed, &mut rng)?
    };
    let dt = match cfg.get_opt("dt")? {
        Some(dt) => dt,
        None => match kind {
            SchemeKind::CollisionMC => default_collision_dt(&p, agents, spatial),
            SchemeKind::MeanFieldSDE => DEFAULT_SDE_DT,
        },
    };
    let mut scheme = SimScheme::new(kind, dt)?;
    let bins = spatial.then(|| cfg.get("bins")).transpose()?;
    let (ens, trace) = run_particles(ens, &p, &mut scheme, cfg.get("t_end")?, cfg.get("trace_every")?, bins, &mut rng)?;
    let file = write_table(cfg, &p, "particle.csv", particle_table(&trace))?;
    let summary = json!({
        "trace": file_name(&file),
        "scheme": kind.as_str(),
        "dt": dt,
        "agents": agents,
        "t_end": ens.t,
        "mean": ens.mean(),
        "variance": ens.variance(),
        "sigma2_analytic": equilibrium_sigma2(&p).ok(),
        "rejection_cap_warnings": scheme.rejection_cap_warnings,
    });
    Ok(Outcome { summary, failure: None })
}

fn macro_run(cfg: &RunConfig) -> Result<Outcome> {
    let p = cfg.params()?;
    let boundary: Boundary = cfg.get("boundary")?;
    let face: FaceMean = cfg.get("face_mean")?;
    let grid = MacroGrid::new(cfg.get("macro_cells")?, boundary)?;
    let density = cfg.density()?;
    let amp: f64 = cfg.get("amplitude")?;
    let phi0: Box<dyn Fn(f64) -> f64> = match cfg.raw("phi0")?.as_str() {
        "sine" => Box::new(move |a| amp * (TAU * a).sin()),
        "constant" => Box::new(move |_| amp),
        "front" => Box::new(move |a| amp * ((a - 0.5) / 0.05).tanh()),
        other => return Err(Error::Config(format!("unknown phi0 '{other}'"))),
    };
    let state = MacroState::from_fn(grid, |a| density.density(a), phi0)?;
    let c = opk_core::model::diffusion_coefficient(&p, &p.kernel_spec())?;
    let solver = MacroSolver::new(grid, &state.rho, p.rate_mode, c, face, DEFAULT_RHO_MIN)?;
    let scale = state.conserved_scale(p.rate_mode);
    let (end, trace) = solver.run(state, cfg.get("t_end")?, cfg.get("trace_every")?, cfg.get_opt("dt")?)?;
    let file = write_table(cfg, &p, "macro.csv", macro_table(&trace))?;
    let mut field = Table::new("macro-field/1", &["alpha", "rho", "phi"]);
    for (i, a) in grid.centers::<f64>().into_iter().enumerate() {
        field.push(vec![a, end.rho[i], end.phi[i]]);
    }
    let field_file = write_table(cfg, &p, "macro_field.csv", field)?;
    let first = trace.first().expect("trace has the initial row");
    let tol: f64 = cfg.get("tol_fraction")?;
    let consensus = consensus_time(&trace, tol)?;
    let summary = json!({
        "trace": file_name(&file),
        "field": file_name(&field_file),
        "c_diff": c,
        "stable_dt": solver.stable_dt(),
        "conserved_rel_drift": if scale > 0.0 { (end.conserved(p.rate_mode) - first.conserved).abs() / scale } else { 0.0 },
        // Round-off once the field has flattened can lift the entropy by an ulp.
        "entropy_non_increasing": trace.windows(2).all(|w| w[1].entropy <= w[0].entropy + 1e-12 * first.entropy),
        "final_amplitude": end.amplitude(p.rate_mode),
        "consensus_time": consensus.time(),
        "consensus_censored": consensus.time().is_none(),
        "tol_fraction": tol,
    });
    Ok(Outcome { summary, failure: None })
}

fn modes_for(cfg: &RunConfig) -> Result<Vec<RateMode>> {
    Ok(if cfg.is_set("rate_mode") { vec![cfg.get("rate_mode")?] } else { RateMode::ALL.to_vec() })
}

fn experiment(kind: ExperimentKind, cfg: &RunConfig) -> Result<Outcome> {
    let p = cfg.params()?;
    let file = format!("{kind}.csv");
    let t_max_gamma: Option<f64> = cfg.get_opt("t_max_gamma")?;
    let checkpoints: Option<usize> = cfg.get_opt("checkpoints")?;
    let (table, summary, failure) = match kind {
        ExperimentKind::VarianceVsKappa => {
            let mut spec = VarianceVsKappaSpec { base: p, modes: modes_for(cfg)?, ..Default::default() };
            spec.cells = if cfg.is_set("cells") { cfg.get("cells")? } else { spec.cells };
            spec.kappas = cfg.get_list("kappas")?.unwrap_or(spec.kappas);
            spec.t_max_gamma = t_max_gamma.unwrap_or(spec.t_max_gamma);
            let out = variance_vs_kappa(&spec)?;
            (out.table.clone(), serde_json::to_value(&out).expect("json"), None)
        }
        ExperimentKind::PhaseScan => {
            let mut spec = PhaseScanSpec::around_critical(p);
            spec.cells = if cfg.is_set("cells") { cfg.get("cells")? } else { spec.cells };
            spec.kappas = cfg.get_list("kappas")?.unwrap_or(spec.kappas);
            spec.t_max_gamma = t_max_gamma.unwrap_or(spec.t_max_gamma);
            let out = phase_scan(&spec)?;
            (out.table.clone(), serde_json::to_value(&out).expect("json"), None)
        }
        ExperimentKind::Crossover => {
            let mut spec = CrossoverSpec { base: p, ..Default::default() };
            spec.cells = if cfg.is_set("macro_cells") { cfg.get("macro_cells")? } else { spec.cells };
            spec.rhos = cfg.get_list("rhos")?.unwrap_or(spec.rhos);
            spec.tol_fraction = cfg.get("tol_fraction")?;
            let out = crossover_experiment(&spec)?;
            (out.table.clone(), serde_json::to_value(&out).expect("json"), None)
        }
        ExperimentKind::ParticleVsKinetic => {
            let mut spec = ParticleVsKineticSpec { base: p, modes: modes_for(cfg)?, ..Default::default() };
            if cfg.is_set("agents") {
                spec.agents = cfg.get("agents")?;
            }
            if cfg.is_set("replicas") {
                spec.replicas = cfg.get("replicas")?;
            }
            if cfg.is_set("seed") {
                spec.seed = cfg.get("seed")?;
            }
            if cfg.is_set("t_end") {
                spec.t_end = cfg.get("t_end")?;
            }
            if cfg.is_set("scheme") {
                spec.schemes = vec![cfg.get("scheme")?];
            }
            spec.checkpoints = checkpoints.unwrap_or(spec.checkpoints);
            let out = particle_vs_kinetic(&spec)?;
            (out.table.clone(), serde_json::to_value(&out).expect("json"), None)
        }
        ExperimentKind::KineticVsMacro => {
            let mut spec = KineticVsMacroSpec { base: p, modes: modes_for(cfg)?, ..Default::default() };
            if cfg.is_set("agents") {
                spec.agents = cfg.get("agents")?;
            }
            if cfg.is_set("seed") {
                spec.seed = cfg.get("seed")?;
            }
            if cfg.is_set("bins") {
                spec.bins = cfg.get("bins")?;
            }
            spec.epsilons = cfg.get_list("epsilons")?.unwrap_or(spec.epsilons);
            spec.checkpoints = checkpoints.unwrap_or(spec.checkpoints);
            let out = kinetic_vs_macro(&spec)?;
            (out.table.clone(), serde_json::to_value(&out).expect("json"), None)
        }
        ExperimentKind::EntropyAudit => {
            let mut spec = EntropyAuditSpec { base: p, ..Default::default() };
            spec.cells = if cfg.is_set("macro_cells") { cfg.get("macro_cells")? } else { spec.cells };
            let out = entropy_audit(&spec)?;
            let failure = (!out.monotone).then(|| "entropy increased along a macro trajectory".to_string());
            (out.table.clone(), serde_json::to_value(&out).expect("json"), failure)
        }
    };
    let path = write_table(cfg, &p, &file, table)?;
    let mut summary = summary;
    summary["table"] = Value::String(file_name(&path));
    Ok(Outcome { summary, failure })
}
