use rand::Rng;

use super::ensemble::{interact, sample_noise, ParticleEnsemble, SchemeKind, SimScheme};
use crate::error::{Error, Result};
use crate::model::{interaction_rate, ModelParams, RateMode};
use crate::num::{lit, to_f64, Real};
use crate::spatial::SpatialKernelSpec;

/// Partner proposals tried before falling back to exact categorical sampling.
pub const REJECTION_CAP: usize = 10_000;

/// Pair weight `W_ij = G_ζ(φ_i − φ_j)`, times the wrapped `F_ε(α_i − α_j)` in spatial runs.
struct PairWeight<'a, T> {
    zeta: T,
    epsilon: f64,
    kernel: SpatialKernelSpec,
    positions: Option<&'a [T]>,
    /// Upper bound of `W` over all pairs.
    max: T,
}

impl<'a, T: Real> PairWeight<'a, T> {
    fn new(p: &ModelParams<T>, positions: Option<&'a [T]>) -> Result<Self> {
        let kernel = p.kernel_spec();
        let epsilon = to_f64(p.epsilon);
        let max = match positions {
            Some(_) => {
                if p.spatial_dim != 1 {
                    return Err(Error::InvalidParam("spatial particle runs support spatial_dim = 1 only".into()));
                }
                lit(kernel.wrapped_max(epsilon))
            }
            None => T::one(),
        };
        Ok(PairWeight { zeta: p.zeta, epsilon, kernel, positions, max })
    }

    #[inline]
    fn weight(&self, phi: &[T], i: usize, j: usize) -> T {
        let g = interaction_rate(phi[i] - phi[j], self.zeta);
        match self.positions {
            Some(pos) => g * lit(self.kernel.wrapped(self.epsilon, to_f64(pos[i] - pos[j]))),
            None => g,
        }
    }
}

/// Largest per-step acceptance probability of the scheme, which must not exceed 1.
pub fn max_acceptance<T: Real>(p: &ModelParams<T>, n: usize, spatial: bool, dt: T) -> T {
    match p.rate_mode {
        RateMode::Symmetric => {
            let bound = if spatial { lit(p.kernel_spec().wrapped_max(to_f64(p.epsilon))) } else { T::one() };
            dt * bound
        }
        RateMode::NonSymmetric => dt * lit(n as f64 / (n as f64 - 1.0)),
    }
}

/// Step giving a maximal acceptance probability of 0.2.
pub fn default_collision_dt<T: Real>(p: &ModelParams<T>, n: usize, spatial: bool) -> T {
    lit::<T>(0.2) / (max_acceptance(p, n, spatial, T::one()))
}

/// One synchronous direct-simulation step of the binary interaction process.
///
/// Every agent reads the pre-step opinions. Symmetric rate: a uniform partner
/// `j ≠ i` is accepted with probability `dt·W_ij`. Non-symmetric rate: with
/// probability `dt·N/(N−1)` a candidate `k` is drawn from all agents with
/// probability `W_ik/Σ_l W_il`, and `i` interacts when `k ≠ i`; this gives each
/// partner `j` the probability `dt·W_ij/((N−1)H_i)` with `H_i = (1/N)Σ_l W_il`,
/// without forming `H_i`.
pub fn collision_step<T: Real, R: Rng>(
    ens: &mut ParticleEnsemble<T>,
    p: &ModelParams<T>,
    scheme: &mut SimScheme<T>,
    rng: &mut R,
) -> Result<()> {
    if scheme.kind != SchemeKind::CollisionMC {
        return Err(Error::InvalidParam("collision_step needs the CollisionMC scheme".into()));
    }
    let n = ens.len();
    let dt = scheme.dt;
    let spatial = ens.is_spatial();
    let prob = max_acceptance(p, n, spatial, dt);
    if prob > T::one() {
        return Err(Error::AcceptanceOverflow {
            probability: to_f64(prob),
            max_dt: to_f64(dt / prob),
        });
    }
    let snapshot = ens.opinions.clone();
    let weights = PairWeight::new(p, ens.positions.as_deref())?;
    let noise = p.noise();
    let prob_f = to_f64(prob);
    for i in 0..n {
        let u: f64 = rng.random();
        if u >= prob_f {
            continue;
        }
        let partner = match p.rate_mode {
            RateMode::Symmetric => {
                let mut j = rng.random_range(0..n - 1);
                if j >= i {
                    j += 1;
                }
                // u < dt·W_max already; accept with the remaining ratio W/W_max.
                let w = weights.weight(&snapshot, i, j);
                if lit::<T>(u) < dt * w {
                    Some(j)
                } else {
                    None
                }
            }
            RateMode::NonSymmetric => {
                let k = draw_weighted_partner(&snapshot, i, &weights, rng, &mut scheme.rejection_cap_warnings);
                (k != i).then_some(k)
            }
        };
        if let Some(j) = partner {
            let eta = sample_noise(&noise, rng);
            ens.opinions[i] = interact(snapshot[i], snapshot[j], p.gamma, eta);
        }
    }
    ens.t = ens.t + dt;
    Ok(())
}

/// Draws `k` with probability `W_ik / Σ_l W_il` (self included).
fn draw_weighted_partner<T: Real, R: Rng>(
    phi: &[T],
    i: usize,
    weights: &PairWeight<'_, T>,
    rng: &mut R,
    warnings: &mut usize,
) -> usize {
    let n = phi.len();
    for _ in 0..REJECTION_CAP {
        let k = rng.random_range(0..n);
        let v: f64 = rng.random();
        if lit::<T>(v) * weights.max < weights.weight(phi, i, k) {
            return k;
        }
    }
    *warnings += 1;
    let w: Vec<f64> = (0..n).map(|k| to_f64(weights.weight(phi, i, k))).collect();
    let total: f64 = w.iter().sum();
    let target = rng.random::<f64>() * total;
    let mut acc = 0.0;
    for (k, wk) in w.iter().enumerate() {
        acc += wk;
        if target < acc {
            return k;
        }
    }
    i
}
