use rand::Rng;
use rand_distr::StandardNormal;

use super::ensemble::{ParticleEnsemble, SchemeKind, SimScheme};
use crate::error::{Error, Result};
use crate::kinetic::Convolver;
use crate::model::{interaction_rate, ModelParams, RateMode};
use crate::num::{denominator_floor, lit, to_f64, Real};

/// Ensembles up to this size use exact pairwise kernel sums.
pub const DIRECT_SUM_LIMIT: usize = 2048;
/// Grid spacing of the deposited kernel sums, in units of `ζ`.
pub const SUM_GRID_SPACING: f64 = 1.0 / 64.0;
pub const SUM_GRID_MAX_NODES: usize = 4096;

/// `S0_i = (1/N)Σ_j G(φ_j−φ_i)` and `S1_i = (1/N)Σ_j (φ_j−φ_i)G(φ_j−φ_i)`.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelSums<T> {
    pub s0: Vec<T>,
    pub s1: Vec<T>,
}

/// Exact `O(N²)` kernel sums.
pub fn kernel_sums_direct<T: Real>(phi: &[T], zeta: T) -> KernelSums<T> {
    let n = lit::<T>(phi.len() as f64);
    let mut s0 = Vec::with_capacity(phi.len());
    let mut s1 = Vec::with_capacity(phi.len());
    for &x in phi {
        let mut a = T::zero();
        let mut b = T::zero();
        for &y in phi {
            let g = interaction_rate(y - x, zeta);
            a = a + g;
            b = b + (y - x) * g;
        }
        s0.push(a / n);
        s1.push(b / n);
    }
    KernelSums { s0, s1 }
}

/// Kernel sums from cloud-in-cell deposition on a grid of spacing `ζ/64`,
/// a direct grid correlation and linear interpolation back to the agents.
/// Both transfer steps are second order in the spacing.
pub fn kernel_sums_gridded<T: Real>(phi: &[T], zeta: T) -> KernelSums<T> {
    let lo = phi.iter().copied().fold(T::infinity(), T::min);
    let hi = phi.iter().copied().fold(T::neg_infinity(), T::max);
    let span = (hi - lo).max(zeta * lit(1e-6));
    let mut h = zeta * lit(SUM_GRID_SPACING);
    let mut nodes = to_f64(span / h).ceil() as usize + 2;
    if nodes > SUM_GRID_MAX_NODES {
        nodes = SUM_GRID_MAX_NODES;
        h = span / lit((nodes - 2) as f64);
    }
    let inv_n = T::one() / lit(phi.len() as f64);
    let locate = |x: T| {
        let s = (x - lo) / h;
        let k = to_f64(s.floor()).max(0.0) as usize;
        let k = k.min(nodes - 2);
        (k, s - lit(k as f64))
    };
    let mut mass = vec![T::zero(); nodes];
    for &x in phi {
        let (k, frac) = locate(x);
        mass[k] = mass[k] + (T::one() - frac) * inv_n;
        mass[k + 1] = mass[k + 1] + frac * inv_n;
    }
    let conv = Convolver::unweighted(nodes, h, zeta);
    let (g0, pg) = conv.both(&mass);
    let mut s0 = Vec::with_capacity(phi.len());
    let mut s1 = Vec::with_capacity(phi.len());
    for &x in phi {
        let (k, frac) = locate(x);
        let w = T::one() - frac;
        s0.push(w * g0[k] + frac * g0[k + 1]);
        // The grid correlation carries (x_m − x_k); the sums need (φ_j − φ_i).
        s1.push(-(w * pg[k] + frac * pg[k + 1]));
    }
    KernelSums { s0, s1 }
}

pub fn kernel_sums<T: Real>(phi: &[T], zeta: T) -> KernelSums<T> {
    if phi.len() <= DIRECT_SUM_LIMIT {
        kernel_sums_direct(phi, zeta)
    } else {
        kernel_sums_gridded(phi, zeta)
    }
}

/// Drift and diffusion of every agent: `γ S1/H` and `√(γκ S0/H)` with
/// `H = 1` (symmetric) or `H = S0` (non-symmetric).
pub fn sde_coefficients<T: Real>(phi: &[T], p: &ModelParams<T>) -> Result<(Vec<T>, Vec<T>)> {
    let sums = kernel_sums(phi, p.zeta);
    let mut drift = Vec::with_capacity(phi.len());
    let mut diffusion = Vec::with_capacity(phi.len());
    let floor = denominator_floor::<T>();
    for (i, (&s0, &s1)) in sums.s0.iter().zip(&sums.s1).enumerate() {
        let h = match p.rate_mode {
            RateMode::Symmetric => T::one(),
            RateMode::NonSymmetric => {
                if s0 < floor {
                    return Err(Error::IsolatedAgent { agent: i, value: to_f64(s0) });
                }
                s0
            }
        };
        drift.push(p.gamma * s1 / h);
        let d2 = match p.rate_mode {
            RateMode::Symmetric => p.gamma * p.kappa * s0,
            RateMode::NonSymmetric => p.gamma * p.kappa,
        };
        diffusion.push(d2.max(T::zero()).sqrt());
    }
    Ok((drift, diffusion))
}

/// One Euler–Maruyama step of the mean-field SDE (homogeneous model).
pub fn sde_step<T: Real, R: Rng>(
    ens: &mut ParticleEnsemble<T>,
    p: &ModelParams<T>,
    scheme: &SimScheme<T>,
    rng: &mut R,
) -> Result<()> {
    if scheme.kind != SchemeKind::MeanFieldSDE {
        return Err(Error::InvalidParam("sde_step needs the MeanFieldSDE scheme".into()));
    }
    if ens.is_spatial() {
        return Err(Error::InvalidParam("the mean-field SDE is implemented for homogeneous ensembles".into()));
    }
    let (drift, diffusion) = sde_coefficients(&ens.opinions, p)?;
    let dt = scheme.dt;
    let sqrt_dt = dt.sqrt();
    for ((x, &a), &b) in ens.opinions.iter_mut().zip(&drift).zip(&diffusion) {
        let z: f64 = rng.sample(StandardNormal);
        *x = *x + a * dt + b * sqrt_dt * lit(z);
    }
    ens.t = ens.t + dt;
    Ok(())
}
