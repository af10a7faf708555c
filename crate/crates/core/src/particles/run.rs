use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::collision::collision_step;
use super::ensemble::{estimate_fields, replica_rng, ParticleEnsemble, SchemeKind, SimScheme};
use super::sde::sde_step;
use crate::error::{Error, Result};
use crate::model::ModelParams;
use crate::num::{lit, Real};
use crate::trace::ParticleRecord;

pub fn step_particles<T: Real, R: Rng>(
    ens: &mut ParticleEnsemble<T>,
    p: &ModelParams<T>,
    scheme: &mut SimScheme<T>,
    rng: &mut R,
) -> Result<()> {
    match scheme.kind {
        SchemeKind::CollisionMC => collision_step(ens, p, scheme, rng),
        SchemeKind::MeanFieldSDE => sde_step(ens, p, scheme, rng),
    }
}

pub fn record<T: Real>(ens: &ParticleEnsemble<T>, bins: Option<usize>) -> Result<ParticleRecord<T>> {
    let bins = match bins {
        Some(b) if ens.is_spatial() => {
            let est = estimate_fields(ens, b)?;
            Some((est.rho.clone(), est.phi_or_nan()))
        }
        _ => None,
    };
    Ok(ParticleRecord { t: ens.t, mean: ens.mean(), variance: ens.variance(), bins })
}

/// Steps to `t_end`, recording at every multiple of `trace_every`. The step
/// before a recording time is shortened to land on it.
pub fn run_particles<T: Real, R: Rng>(
    mut ens: ParticleEnsemble<T>,
    p: &ModelParams<T>,
    scheme: &mut SimScheme<T>,
    t_end: T,
    trace_every: T,
    bins: Option<usize>,
    rng: &mut R,
) -> Result<(ParticleEnsemble<T>, Vec<ParticleRecord<T>>)> {
    if !(trace_every > T::zero()) {
        return Err(Error::InvalidParam("trace interval must be positive".into()));
    }
    let p = p.validate()?;
    let mut trace = vec![record(&ens, bins)?];
    let base_dt = scheme.dt;
    let tiny = base_dt * lit(1e-9);
    let mut k = 1usize;
    loop {
        let target = (trace_every * lit(k as f64)).min(t_end);
        while ens.t < target - tiny {
            scheme.dt = base_dt.min(target - ens.t);
            let res = step_particles(&mut ens, &p, scheme, rng);
            scheme.dt = base_dt;
            res?;
        }
        ens.t = target;
        trace.push(record(&ens, bins)?);
        if target >= t_end {
            break;
        }
        k += 1;
    }
    Ok((ens, trace))
}

/// Runs `replicas` independent jobs in parallel, each with its own stream of
/// the master seed; results come back in replica order.
pub fn run_replicas<R, F>(replicas: usize, master_seed: u64, job: F) -> Result<Vec<R>>
where
    R: Send,
    F: Fn(usize, &mut ChaCha8Rng) -> Result<R> + Sync,
{
    (0..replicas)
        .into_par_iter()
        .map(|r| {
            let mut rng = replica_rng(master_seed, r as u64);
            job(r, &mut rng)
        })
        .collect()
}
