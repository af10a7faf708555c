use std::collections::VecDeque;

use super::convolve::Convolver;
use super::grid::OpinionGrid;
use super::operator::{q_from_fields, residual_from_conv, ConvolvedFields};
use super::state::{InitialCondition, KineticState};
use crate::error::{Error, Result};
use crate::model::{equilibrium_sigma2_for, validate_params, ModelParams, RateMode};
use crate::num::{lit, to_f64, Real};
use crate::trace::KineticRecord;

/// Fraction of the explicit stability limit used for the time step.
pub const CFL_SAFETY: f64 = 0.4;
/// Boundary mass fraction above which a run is flagged as saturating its domain.
pub const SATURATION_FRACTION: f64 = 1e-8;
pub const DEFAULT_CELLS: usize = 512;

/// Half-width `L = 8·max(σ_s, σ_a, ζ, σ₀)` of the opinion domain, counting
/// only the equilibrium widths that exist for `κ`.
pub fn domain_half_width<T: Real>(p: &ModelParams<T>, initial_sigma: T) -> T {
    let mut w = p.zeta.max(initial_sigma);
    for mode in RateMode::ALL {
        if let Ok(s2) = equilibrium_sigma2_for(p.zeta, p.kappa, mode) {
            w = w.max(s2.sqrt());
        }
    }
    lit::<T>(8.0) * w
}

/// Grid sized for `p` and an initial condition, centered on its mean.
pub fn default_grid<T: Real>(p: &ModelParams<T>, ic: &InitialCondition<T>, cells: usize) -> Result<OpinionGrid<T>> {
    let half = domain_half_width(p, ic.std_dev()) + ic.spread();
    OpinionGrid::centered(ic.mean(), half, cells)
}

/// Stop rule: relative variance change below `rel_change` across `window` time units.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EquilibrationRule<T> {
    pub rel_change: T,
    pub window: T,
}

impl<T: Real> EquilibrationRule<T> {
    /// `1e-5` over `5/γ`.
    pub fn standard(p: &ModelParams<T>) -> Self {
        EquilibrationRule { rel_change: lit(1e-5), window: lit::<T>(5.0) / p.gamma }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunOptions<T> {
    pub t_end: T,
    pub trace_every: T,
    /// Fixed step; `None` picks the stable step from the current fields.
    pub dt: Option<T>,
    pub equilibration: Option<EquilibrationRule<T>>,
    /// Stop as soon as the boundary band holds more than [`SATURATION_FRACTION`].
    pub stop_on_saturation: bool,
}

impl<T: Real> RunOptions<T> {
    pub fn new(t_end: T, trace_every: T) -> Self {
        RunOptions { t_end, trace_every, dt: None, equilibration: None, stop_on_saturation: true }
    }
}

#[derive(Debug, Clone)]
pub struct KineticRun<T> {
    pub state: KineticState<T>,
    pub trace: Vec<KineticRecord<T>>,
    pub saturated: bool,
    pub equilibrated_at: Option<T>,
    pub steps: usize,
}

/// Explicit Heun integrator for `∂_t f = Q(f)` on a fixed grid.
#[derive(Debug, Clone)]
pub struct KineticSolver<T> {
    params: ModelParams<T>,
    grid: OpinionGrid<T>,
    conv: Convolver<T>,
    finite_gamma: bool,
}

impl<T: Real> KineticSolver<T> {
    pub fn new(params: &ModelParams<T>, grid: OpinionGrid<T>) -> Result<Self> {
        let params = validate_params(*params)?;
        let conv = Convolver::new(&grid, params.zeta);
        Ok(KineticSolver { params, grid, conv, finite_gamma: false })
    }

    /// Keeps the `O(γ)` diffusion term of the jump process that the grazing
    /// limit drops (see [`ConvolvedFields::add_finite_gamma`]).
    pub fn with_finite_gamma(mut self, on: bool) -> Result<Self> {
        if on && !(self.params.kappa > T::zero()) {
            return Err(Error::InvalidParam("the finite-gamma correction needs kappa > 0".into()));
        }
        self.finite_gamma = on;
        Ok(self)
    }

    pub fn params(&self) -> &ModelParams<T> {
        &self.params
    }

    pub fn grid(&self) -> &OpinionGrid<T> {
        &self.grid
    }

    pub fn fields(&self, f: &[T]) -> Result<ConvolvedFields<T>> {
        let mut fields = ConvolvedFields::compute(&self.conv, &self.grid, f, self.params.rate_mode)?;
        if self.finite_gamma {
            fields.add_finite_gamma(&self.conv, f, &self.params)?;
        }
        Ok(fields)
    }

    pub fn rhs(&self, f: &[T]) -> Result<Vec<T>> {
        let fields = self.fields(f)?;
        Ok(q_from_fields(&self.grid, &self.params, &fields, f))
    }

    /// Largest step allowed by the diffusive limit `0.4Δφ²/(γκ max B)` and the
    /// advective limit `0.4Δφ/(γ max|A|)`.
    pub fn stable_dt(&self, fields: &ConvolvedFields<T>) -> T {
        let safety = lit::<T>(CFL_SAFETY);
        let dx = self.grid.dx;
        let g = self.params.gamma;
        let diff = g * self.params.kappa * fields.max_diffusion();
        let adv = g * fields.max_drift();
        let mut dt = T::infinity();
        if diff > T::zero() {
            dt = dt.min(safety * dx * dx / diff);
        }
        if adv > T::zero() {
            dt = dt.min(safety * dx / adv);
        }
        dt
    }

    fn check_state(&self, state: &KineticState<T>) -> Result<()> {
        if state.grid != self.grid {
            return Err(Error::InvalidParam("state grid differs from solver grid".into()));
        }
        Ok(())
    }

    /// Advances by `dt` with the fields of the current state already known.
    fn advance(&self, state: &mut KineticState<T>, fields: &ConvolvedFields<T>, dt: T) -> Result<()> {
        if dt == T::zero() {
            return Ok(());
        }
        let limit = self.stable_dt(fields);
        if dt > limit {
            return Err(Error::Cfl { dt: to_f64(dt), limit: to_f64(limit) });
        }
        let k1 = q_from_fields(&self.grid, &self.params, fields, &state.f);
        let stage: Vec<T> = state.f.iter().zip(&k1).map(|(&f, &k)| f + dt * k).collect();
        let k2 = self.rhs(&stage)?;
        let half = lit::<T>(0.5);
        for ((f, &s), &k) in state.f.iter_mut().zip(&stage).zip(&k2) {
            let next = half * (*f + s + dt * k);
            if next < T::zero() {
                state.clipped += 1;
                *f = T::zero();
            } else {
                *f = next;
            }
        }
        state.t = state.t + dt;
        Ok(())
    }

    /// One Heun step of size `dt`.
    pub fn step(&self, state: &mut KineticState<T>, dt: T) -> Result<()> {
        self.check_state(state)?;
        let fields = self.fields(&state.f)?;
        self.advance(state, &fields, dt)
    }

    /// Trace row at the state's current time.
    pub fn record(&self, state: &KineticState<T>) -> Result<KineticRecord<T>> {
        let m = state.moments()?;
        let residual = if self.params.kappa > T::zero() {
            let (g, _) = self.conv.both(&state.f);
            residual_from_conv(&self.grid, &self.params, &state.f, &g)?
        } else {
            T::nan()
        };
        Ok(KineticRecord { t: state.t, mass: m.mass, mean: m.mean, variance: m.variance, residual })
    }

    pub fn run_to_time(&self, mut state: KineticState<T>, opts: &RunOptions<T>) -> Result<KineticRun<T>> {
        self.check_state(&state)?;
        if !(opts.trace_every > T::zero()) {
            return Err(Error::InvalidParam("trace interval must be positive".into()));
        }
        let mut trace = vec![self.record(&state)?];
        let mut next_trace = state.t + opts.trace_every;
        let mut history: VecDeque<(T, T)> = VecDeque::new();
        let mut saturated = false;
        let mut equilibrated_at = None;
        let mut steps = 0usize;
        let tiny = opts.t_end.abs().max(T::one()) * lit(1e-12);
        while state.t < opts.t_end - tiny {
            let fields = self.fields(&state.f)?;
            let stable = self.stable_dt(&fields);
            let mut dt = opts.dt.unwrap_or(stable);
            let target = next_trace.min(opts.t_end);
            let mut hits_target = false;
            if state.t + dt >= target - tiny {
                dt = target - state.t;
                hits_target = true;
            }
            self.advance(&mut state, &fields, dt)?;
            steps += 1;
            if hits_target {
                state.t = target;
            }
            if hits_target && target == next_trace {
                trace.push(self.record(&state)?);
                next_trace = next_trace + opts.trace_every;
            }
            if let Some(rule) = opts.equilibration {
                let var = state.moments()?.variance;
                history.push_back((state.t, var));
                while history.len() > 1 && state.t - history[1].0 >= rule.window {
                    history.pop_front();
                }
                let (t0, v0) = history[0];
                if state.t - t0 >= rule.window && ((var - v0) / var).abs() < rule.rel_change {
                    equilibrated_at = Some(state.t);
                }
            }
            if state.boundary_mass_fraction() > lit(SATURATION_FRACTION) {
                saturated = true;
            }
            if equilibrated_at.is_some() || (saturated && opts.stop_on_saturation) {
                break;
            }
        }
        if trace.last().map(|r| r.t) != Some(state.t) {
            trace.push(self.record(&state)?);
        }
        Ok(KineticRun { state, trace, saturated, equilibrated_at, steps })
    }
}

/// Convenience wrapper: one step with a fresh solver.
pub fn step<T: Real>(state: &KineticState<T>, p: &ModelParams<T>, dt: T) -> Result<KineticState<T>> {
    let solver = KineticSolver::new(p, state.grid)?;
    let mut next = state.clone();
    solver.step(&mut next, dt)?;
    Ok(next)
}

/// Convenience wrapper around [`KineticSolver::run_to_time`].
pub fn run_to_time<T: Real>(
    state: KineticState<T>,
    p: &ModelParams<T>,
    t_end: T,
    trace_every: T,
) -> Result<(KineticState<T>, Vec<KineticRecord<T>>)> {
    let solver = KineticSolver::new(p, state.grid)?;
    let run = solver.run_to_time(state, &RunOptions::new(t_end, trace_every))?;
    Ok((run.state, run.trace))
}
