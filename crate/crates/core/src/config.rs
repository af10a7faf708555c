//! Flat `key=value` run configuration: a file (one pair per line, `#`
//! comments) merged with command-line overrides. Every key must be known.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::kinetic::InitialCondition;
use crate::macro_pde::DensityPreset;
use crate::model::{ModelParams, NoiseLaw, RateMode};
use crate::spatial::KernelShape;
use crate::Params;

/// Environment variable overriding the output directory.
pub const OUT_DIR_ENV: &str = "OPK_OUT_DIR";

/// Recognized keys with their defaults and meaning.
pub const KEYS: &[(&str, &str, &str)] = &[
    ("gamma", "0.05", "consensus strength, 0 < gamma <= 1/2"),
    ("kappa", "0.5", "noise-to-consensus ratio"),
    ("zeta", "1.0", "opinion interaction scale"),
    ("rate_mode", "symmetric", "symmetric | nonsymmetric (alias: mode)"),
    ("epsilon", "0.05", "spatial interaction range"),
    ("spatial_dim", "1", "spatial dimension"),
    ("noise", "gaussian", "gaussian | uniform"),
    ("kernel", "gaussian", "spatial kernel: gaussian | indicator"),
    ("seed", "1", "master seed"),
    ("out_dir", "out", "output directory (overridden by OPK_OUT_DIR)"),
    ("t_end", "200", "run length"),
    ("trace_every", "10", "trace interval"),
    ("dt", "", "fixed time step; empty picks a stable or default step"),
    ("cells", "256", "kinetic grid cells"),
    ("initial", "bimodal", "kinetic initial condition: wide | narrow | shifted | bimodal | skewed"),
    ("equilibrate", "false", "stop kinetic runs once the equilibration rule fires"),
    ("scheme", "collision", "particle scheme: collision | sde"),
    ("agents", "10000", "number of agents"),
    ("replicas", "16", "particle replicas"),
    ("bins", "32", "spatial bins for field estimates"),
    ("spatial", "false", "particle runs on the torus with uniform positions"),
    ("macro_cells", "128", "macro grid cells"),
    ("boundary", "periodic", "macro boundary: periodic | zero-flux"),
    ("face_mean", "harmonic", "face average of rho^2: harmonic | arithmetic"),
    ("density", "uniform", "macro density: uniform | step | gauss-bump | two-cluster"),
    ("rho0", "1.0", "uniform density level"),
    ("phi0", "sine", "macro initial opinion: sine | constant | front"),
    ("amplitude", "1.0", "initial opinion amplitude"),
    ("tol_fraction", "0.01", "consensus amplitude fraction"),
    ("kappas", "", "experiment kappa sweep (space or comma separated)"),
    ("rhos", "", "experiment density sweep"),
    ("epsilons", "", "experiment epsilon sweep"),
    ("t_max_gamma", "", "experiment run cap in units of 1/gamma"),
    ("checkpoints", "", "experiment checkpoints"),
];

fn canonical(key: &str) -> String {
    let k = key.trim().trim_start_matches("--").replace('-', "_");
    match k.as_str() {
        "mode" => "rate_mode".to_string(),
        _ => k,
    }
}

fn default_of(key: &str) -> Option<&'static str> {
    KEYS.iter().find(|(k, _, _)| *k == key).map(|(_, d, _)| *d)
}

/// Merged configuration; values are kept as strings until asked for.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunConfig {
    values: BTreeMap<String, String>,
}

impl RunConfig {
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let key = canonical(key);
        if default_of(&key).is_none() {
            return Err(Error::Config(format!("unknown key '{key}'")));
        }
        self.values.insert(key, value.trim().to_string());
        Ok(())
    }

    /// Adds `key=value` lines; blank lines and `#` comments are skipped.
    pub fn merge_text(&mut self, text: &str) -> Result<()> {
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key=value, got '{line}'", n + 1)))?;
            self.set(k, v)?;
        }
        Ok(())
    }

    /// Explicitly set keys and values in key order.
    pub fn entries(&self) -> Vec<(String, String)> {
        self.values.iter().map(|(k, v)| (k.clone(), v.clone())).collect()
    }

    pub fn is_set(&self, key: &str) -> bool {
        self.values.get(&canonical(key)).is_some_and(|v| !v.is_empty())
    }

    /// Raw value with the documented default filled in.
    pub fn raw(&self, key: &str) -> Result<String> {
        let key = canonical(key);
        let default = default_of(&key).ok_or_else(|| Error::Config(format!("unknown key '{key}'")))?;
        Ok(self.values.get(&key).cloned().unwrap_or_else(|| default.to_string()))
    }

    pub fn get<V: FromStr>(&self, key: &str) -> Result<V> {
        let raw = self.raw(key)?;
        raw.parse()
            .map_err(|_| Error::Config(format!("{key}: cannot parse '{raw}' as {}", std::any::type_name::<V>())))
    }

    /// `None` when the value is empty.
    pub fn get_opt<V: FromStr>(&self, key: &str) -> Result<Option<V>> {
        if self.raw(key)?.is_empty() {
            Ok(None)
        } else {
            self.get(key).map(Some)
        }
    }

    pub fn get_list(&self, key: &str) -> Result<Option<Vec<f64>>> {
        let raw = self.raw(key)?;
        if raw.is_empty() {
            return Ok(None);
        }
        raw.split(|c: char| c == ',' || c.is_whitespace())
            .filter(|s| !s.is_empty())
            .map(|s| s.parse::<f64>().map_err(|_| Error::Config(format!("{key}: cannot parse '{s}' as a number"))))
            .collect::<Result<Vec<_>>>()
            .map(Some)
    }

    pub fn get_bool(&self, key: &str) -> Result<bool> {
        match self.raw(key)?.to_ascii_lowercase().as_str() {
            "true" | "1" | "yes" => Ok(true),
            "false" | "0" | "no" => Ok(false),
            other => Err(Error::Config(format!("{key}: expected a boolean, got '{other}'"))),
        }
    }

    /// Validated model parameters.
    pub fn params(&self) -> Result<Params> {
        let p = ModelParams {
            gamma: self.get("gamma")?,
            kappa: self.get("kappa")?,
            zeta: self.get("zeta")?,
            rate_mode: self.get::<RateMode>("rate_mode")?,
            epsilon: self.get("epsilon")?,
            spatial_dim: self.get("spatial_dim")?,
            noise_law: self.get::<NoiseLaw>("noise")?,
            kernel: self.get::<KernelShape>("kernel")?,
        };
        p.validate()
    }

    pub fn initial_condition(&self) -> Result<InitialCondition<f64>> {
        let name = self.raw("initial")?;
        InitialCondition::presets()
            .into_iter()
            .find(|(n, _)| *n == name)
            .map(|(_, ic)| ic)
            .ok_or_else(|| Error::Config(format!("unknown initial condition '{name}'")))
    }

    pub fn density(&self) -> Result<DensityPreset<f64>> {
        let rho0: f64 = self.get("rho0")?;
        Ok(match self.raw("density")?.as_str() {
            "uniform" => DensityPreset::Uniform(rho0),
            "step" => DensityPreset::Step { low: 0.5 * rho0, high: 1.5 * rho0, edges: (0.0, 0.5) },
            "gauss-bump" => DensityPreset::GaussBump { base: 0.5 * rho0, amplitude: 1.5 * rho0, center: 0.3, width: 0.1 },
            "two-cluster" => {
                DensityPreset::TwoCluster { base: 0.3 * rho0, amplitude: rho0, centers: (0.25, 0.75), width: 0.08 }
            }
            other => return Err(Error::Config(format!("unknown density '{other}'"))),
        })
    }

    /// `OPK_OUT_DIR` if set, else `out_dir`.
    pub fn out_dir(&self) -> Result<PathBuf> {
        match std::env::var(OUT_DIR_ENV) {
            Ok(dir) if !dir.is_empty() => Ok(PathBuf::from(dir)),
            _ => Ok(PathBuf::from(self.raw("out_dir")?)),
        }
    }
}

/// Splits `--key value` and `--key=value` arguments into pairs.
pub fn parse_override_args(args: &[String]) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    let mut it = args.iter();
    while let Some(arg) = it.next() {
        let flag = arg
            .strip_prefix("--")
            .ok_or_else(|| Error::Config(format!("expected --key value, got '{arg}'")))?;
        match flag.split_once('=') {
            Some((k, v)) => out.push((k.to_string(), v.to_string())),
            None => {
                let v = it.next().ok_or_else(|| Error::Config(format!("missing value for --{flag}")))?;
                out.push((flag.to_string(), v.clone()));
            }
        }
    }
    Ok(out)
}

/// Reads `file` (if any), then applies `overrides` on top.
pub fn parse_config(file: Option<&Path>, overrides: &[(String, String)]) -> Result<RunConfig> {
    let mut cfg = RunConfig::default();
    if let Some(path) = file {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        cfg.merge_text(&text)?;
    }
    for (k, v) in overrides {
        cfg.set(k, v)?;
    }
    Ok(cfg)
}
