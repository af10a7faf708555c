use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::kinetic::InitialCondition;
use crate::macro_pde::DensityPreset;
use crate::model::{NoiseLaw, NoiseSpec};
use crate::num::{lit, to_f64, Real};

/// Agents' opinions and, in spatial runs, their fixed positions on the unit torus.
#[derive(Debug, Clone, PartialEq)]
pub struct ParticleEnsemble<T> {
    pub opinions: Vec<T>,
    pub positions: Option<Vec<T>>,
    pub seed: u64,
    pub t: T,
}

impl<T: Real> ParticleEnsemble<T> {
    pub fn new(opinions: Vec<T>, positions: Option<Vec<T>>, seed: u64) -> Result<Self> {
        if opinions.len() < 2 {
            return Err(Error::InvalidParam("ensemble needs at least 2 agents".into()));
        }
        if let Some(pos) = &positions {
            if pos.len() != opinions.len() {
                return Err(Error::InvalidParam("positions and opinions differ in length".into()));
            }
            if pos.iter().any(|&a| !(a >= T::zero() && a < T::one())) {
                return Err(Error::InvalidParam("positions must lie in [0, 1)".into()));
            }
        }
        Ok(ParticleEnsemble { opinions, positions, seed, t: T::zero() })
    }

    /// `n` opinions drawn from a Gaussian mixture.
    pub fn sample<R: Rng>(n: usize, ic: &InitialCondition<T>, seed: u64, rng: &mut R) -> Result<Self> {
        let opinions = (0..n).map(|_| sample_mixture(ic, rng)).collect();
        Self::new(opinions, None, seed)
    }

    /// `n` agents on the torus with positions drawn from `density` (by
    /// rejection) and opinions `N(phi0(α), sigma²)`.
    pub fn sample_spatial<R: Rng>(
        n: usize,
        density: &DensityPreset<T>,
        phi0: impl Fn(T) -> T,
        sigma: T,
        seed: u64,
        rng: &mut R,
    ) -> Result<Self> {
        let top = to_f64(density.max_value());
        if !(top > 0.0) {
            return Err(Error::InvalidParam("density must be positive somewhere".into()));
        }
        let mut positions = Vec::with_capacity(n);
        let mut opinions = Vec::with_capacity(n);
        while positions.len() < n {
            let a: f64 = rng.random();
            let u: f64 = rng.random();
            if u * top >= to_f64(density.density(lit(a))) {
                continue;
            }
            let z: f64 = rng.sample(StandardNormal);
            positions.push(lit(a));
            opinions.push(phi0(lit(a)) + sigma * lit(z));
        }
        Self::new(opinions, Some(positions), seed)
    }

    pub fn len(&self) -> usize {
        self.opinions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.opinions.is_empty()
    }

    pub fn is_spatial(&self) -> bool {
        self.positions.is_some()
    }

    pub fn mean(&self) -> T {
        let n = lit::<T>(self.len() as f64);
        self.opinions.iter().copied().sum::<T>() / n
    }

    /// Unbiased sample variance of the opinions.
    pub fn variance(&self) -> T {
        let m = self.mean();
        let n = lit::<T>(self.len() as f64 - 1.0);
        self.opinions.iter().map(|&x| (x - m) * (x - m)).sum::<T>() / n
    }
}

pub fn sample_mixture<T: Real, R: Rng>(ic: &InitialCondition<T>, rng: &mut R) -> T {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    let mut chosen = ic.components.last().expect("non-empty mixture");
    for c in &ic.components {
        acc += to_f64(c.0);
        if u < acc {
            chosen = c;
            break;
        }
    }
    let z: f64 = rng.sample(StandardNormal);
    chosen.2 + chosen.1 * lit(z)
}

/// Generator for replica `replica` of a run seeded with `master_seed`:
/// a shared key with one ChaCha stream per replica.
pub fn replica_rng(master_seed: u64, replica: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(replica);
    rng
}

/// One draw of the interaction noise `η`.
pub fn sample_noise<T: Real, R: Rng>(noise: &NoiseSpec<T>, rng: &mut R) -> T {
    match noise.law {
        NoiseLaw::Gaussian => {
            let z: f64 = rng.sample(StandardNormal);
            noise.variance.sqrt() * lit(z)
        }
        NoiseLaw::Uniform => {
            let u: f64 = rng.random();
            noise.uniform_half_width() * lit(2.0 * u - 1.0)
        }
    }
}

/// The interaction rule `φ_i' = φ_i + γ(φ_j − φ_i) + η`; only agent `i` moves.
#[inline]
pub fn interact<T: Real>(phi_i: T, phi_j: T, gamma: T, eta: T) -> T {
    phi_i + gamma * (phi_j - phi_i) + eta
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum SchemeKind {
    /// Direct-simulation Monte Carlo of the binary jump process.
    CollisionMC,
    /// Euler–Maruyama discretization of the mean-field SDE.
    MeanFieldSDE,
}

impl SchemeKind {
    pub fn as_str(self) -> &'static str {
        match self {
            SchemeKind::CollisionMC => "collision",
            SchemeKind::MeanFieldSDE => "sde",
        }
    }
}

impl std::str::FromStr for SchemeKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "collision" | "collisionmc" | "mc" => Ok(SchemeKind::CollisionMC),
            "sde" | "meanfieldsde" | "mean-field-sde" => Ok(SchemeKind::MeanFieldSDE),
            other => Err(Error::Config(format!("unknown particle scheme '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimScheme<T> {
    pub kind: SchemeKind,
    pub dt: T,
    /// Partner draws that exhausted the rejection budget and fell back to
    /// exact categorical sampling.
    pub rejection_cap_warnings: usize,
}

impl<T: Real> SimScheme<T> {
    pub fn new(kind: SchemeKind, dt: T) -> Result<Self> {
        if !(dt > T::zero()) || !dt.is_finite() {
            return Err(Error::InvalidParam("dt must be positive".into()));
        }
        Ok(SimScheme { kind, dt, rejection_cap_warnings: 0 })
    }
}

/// Histogram estimate of the density `ρ̂` and bin-mean opinion `φ̂` on the torus.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldEstimate<T> {
    pub rho: Vec<T>,
    /// `None` for empty bins.
    pub phi: Vec<Option<T>>,
    pub counts: Vec<usize>,
}

impl<T: Real> FieldEstimate<T> {
    pub fn empty_bins(&self) -> usize {
        self.counts.iter().filter(|&&c| c == 0).count()
    }

    /// `φ̂` with NaN marking empty bins.
    pub fn phi_or_nan(&self) -> Vec<T> {
        self.phi.iter().map(|v| v.unwrap_or_else(T::nan)).collect()
    }
}

pub fn estimate_fields<T: Real>(ens: &ParticleEnsemble<T>, bins: usize) -> Result<FieldEstimate<T>> {
    let pos = ens
        .positions
        .as_ref()
        .ok_or_else(|| Error::InvalidParam("field estimates need a spatial ensemble".into()))?;
    if bins < 4 {
        return Err(Error::InvalidParam("at least 4 bins are required".into()));
    }
    let mut counts = vec![0usize; bins];
    let mut sums = vec![T::zero(); bins];
    for (&a, &phi) in pos.iter().zip(&ens.opinions) {
        let k = ((to_f64(a) * bins as f64) as usize).min(bins - 1);
        counts[k] += 1;
        sums[k] = sums[k] + phi;
    }
    let n = ens.len() as f64;
    let rho = counts.iter().map(|&c| lit(c as f64 * bins as f64 / n)).collect();
    let phi = counts
        .iter()
        .zip(&sums)
        .map(|(&c, &s)| if c > 0 { Some(s / lit(c as f64)) } else { None })
        .collect();
    Ok(FieldEstimate { rho, phi, counts })
}
