use super::grid::{Boundary, FaceMean, MacroGrid};
use crate::error::{Error, Result};
use crate::model::{diffusion_coefficient, ModelParams, RateMode};
use crate::num::{lit, to_f64, Real};
use crate::trace::MacroRecord;

pub const DEFAULT_RHO_MIN: f64 = 1e-3;
pub const MACRO_CFL_SAFETY: f64 = 0.4;

/// Static density and evolving mean opinion on a cell grid.
#[derive(Debug, Clone, PartialEq)]
pub struct MacroState<T> {
    pub grid: MacroGrid,
    pub rho: Vec<T>,
    pub phi: Vec<T>,
    pub t: T,
}

impl<T: Real> MacroState<T> {
    pub fn new(grid: MacroGrid, rho: Vec<T>, phi: Vec<T>) -> Result<Self> {
        if rho.len() != grid.cells || phi.len() != grid.cells {
            return Err(Error::InvalidParam("rho and phi need one value per cell".into()));
        }
        if phi.iter().chain(&rho).any(|v| !v.is_finite()) {
            return Err(Error::InvalidParam("rho and phi must be finite".into()));
        }
        Ok(MacroState { grid, rho, phi, t: T::zero() })
    }

    pub fn from_fn(grid: MacroGrid, rho: impl Fn(T) -> T, phi: impl Fn(T) -> T) -> Result<Self> {
        let centers = grid.centers::<T>();
        let r = centers.iter().map(|&a| rho(a)).collect();
        let p = centers.iter().map(|&a| phi(a)).collect();
        Self::new(grid, r, p)
    }

    fn weight(&self, i: usize, mode: RateMode) -> T {
        match mode {
            RateMode::Symmetric => self.rho[i],
            RateMode::NonSymmetric => self.rho[i] * self.rho[i],
        }
    }

    /// `Σρφ Δα` (symmetric) or `Σρ²φ Δα` (non-symmetric).
    pub fn conserved(&self, mode: RateMode) -> T {
        let dx = self.grid.dx::<T>();
        (0..self.grid.cells).map(|i| self.weight(i, mode) * self.phi[i]).sum::<T>() * dx
    }

    /// `Σ|ρφ|Δα` or `Σ|ρ²φ|Δα`, the scale for relative conservation errors.
    pub fn conserved_scale(&self, mode: RateMode) -> T {
        let dx = self.grid.dx::<T>();
        (0..self.grid.cells).map(|i| (self.weight(i, mode) * self.phi[i]).abs()).sum::<T>() * dx
    }

    /// `Σρφ² Δα` or `Σρ²φ² Δα`.
    pub fn entropy(&self, mode: RateMode) -> T {
        let dx = self.grid.dx::<T>();
        (0..self.grid.cells).map(|i| self.weight(i, mode) * self.phi[i] * self.phi[i]).sum::<T>() * dx
    }

    /// The weighted mean `φ̄_w` preserved by the mode's dynamics.
    pub fn weighted_mean(&self, mode: RateMode) -> T {
        let total: T = (0..self.grid.cells).map(|i| self.weight(i, mode)).sum();
        self.conserved(mode) / (total * self.grid.dx::<T>())
    }

    /// `max|φ − φ̄_w|`.
    pub fn amplitude(&self, mode: RateMode) -> T {
        let lo = self.phi.iter().fold(T::infinity(), |a, &v| a.min(v));
        let hi = self.phi.iter().fold(T::neg_infinity(), |a, &v| a.max(v));
        let m = self.weighted_mean(mode).max(lo).min(hi);
        (hi - m).max(m - lo)
    }
}

pub fn conserved_quantity<T: Real>(state: &MacroState<T>, mode: RateMode) -> T {
    state.conserved(mode)
}

pub fn entropy<T: Real>(state: &MacroState<T>, mode: RateMode) -> T {
    state.entropy(mode)
}

/// Finite-volume solver for `∂_t(ρφ) = C ∇·(ρ²∇φ)` (symmetric) or
/// `∂_t φ = (C/ρ²) ∇·(ρ²∇φ)` (non-symmetric) with static `ρ`.
#[derive(Debug, Clone)]
pub struct MacroSolver<T> {
    grid: MacroGrid,
    mode: RateMode,
    coefficient: T,
    rho: Vec<T>,
    /// `ρ²` on face `i+½`; zero on closed boundary faces.
    face_rho2: Vec<T>,
}

impl<T: Real> MacroSolver<T> {
    pub fn new(grid: MacroGrid, rho: &[T], mode: RateMode, coefficient: T, face_mean: FaceMean, rho_min: T) -> Result<Self> {
        if rho.len() != grid.cells {
            return Err(Error::InvalidParam("rho needs one value per cell".into()));
        }
        if !(coefficient > T::zero()) || !coefficient.is_finite() {
            return Err(Error::InvalidParam("diffusion coefficient must be positive".into()));
        }
        if let Some((cell, &r)) = rho.iter().enumerate().find(|(_, &r)| !(r >= rho_min)) {
            return Err(Error::DensityBelowFloor { cell, rho: to_f64(r), floor: to_f64(rho_min) });
        }
        let n = grid.cells;
        let face_rho2 = (0..n)
            .map(|i| {
                let j = (i + 1) % n;
                if grid.boundary == Boundary::ZeroFlux && j == 0 {
                    return T::zero();
                }
                let (a, b) = (rho[i] * rho[i], rho[j] * rho[j]);
                match face_mean {
                    FaceMean::Harmonic => lit::<T>(2.0) * a * b / (a + b),
                    FaceMean::Arithmetic => (a + b) * lit(0.5),
                }
            })
            .collect();
        Ok(MacroSolver { grid, mode, coefficient, rho: rho.to_vec(), face_rho2 })
    }

    /// Solver with `C = γ D c(ζ, κ)` from the model parameters.
    pub fn from_params(p: &ModelParams<T>, state: &MacroState<T>, face_mean: FaceMean) -> Result<Self> {
        let c = diffusion_coefficient(p, &p.kernel_spec())?;
        Self::new(state.grid, &state.rho, p.rate_mode, c, face_mean, lit(DEFAULT_RHO_MIN))
    }

    pub fn mode(&self) -> RateMode {
        self.mode
    }

    pub fn coefficient(&self) -> T {
        self.coefficient
    }

    /// `ρ²_f (φ_{i+1} − φ_i)/Δα` on every face.
    fn face_flux(&self, phi: &[T]) -> Vec<T> {
        let n = phi.len();
        let inv_dx = T::one() / self.grid.dx::<T>();
        (0..n).map(|i| self.face_rho2[i] * (phi[(i + 1) % n] - phi[i]) * inv_dx).collect()
    }

    /// `C ∇·(ρ²∇φ)` per cell.
    fn divergence(&self, phi: &[T]) -> Vec<T> {
        let n = phi.len();
        let flux = self.face_flux(phi);
        let scale = self.coefficient / self.grid.dx::<T>();
        (0..n).map(|i| scale * (flux[i] - flux[(i + n - 1) % n])).collect()
    }

    /// `∂_t φ` per cell.
    pub fn rate(&self, phi: &[T]) -> Vec<T> {
        let div = self.divergence(phi);
        div.iter()
            .zip(&self.rho)
            .map(|(&d, &r)| match self.mode {
                RateMode::Symmetric => d / r,
                RateMode::NonSymmetric => d / (r * r),
            })
            .collect()
    }

    pub fn stable_dt(&self) -> T {
        let n = self.grid.cells;
        let mut worst = T::zero();
        for i in 0..n {
            let face = self.face_rho2[i].max(self.face_rho2[(i + n - 1) % n]);
            let w = match self.mode {
                RateMode::Symmetric => self.rho[i],
                RateMode::NonSymmetric => self.rho[i] * self.rho[i],
            };
            worst = worst.max(self.coefficient * face / w);
        }
        let dx = self.grid.dx::<T>();
        lit::<T>(MACRO_CFL_SAFETY) * dx * dx / (lit::<T>(2.0) * worst)
    }

    /// Time derivative of the mode's entropy: `−2C Σ ρ²_f |∇φ|² Δα`.
    pub fn dissipation_rhs(&self, state: &MacroState<T>) -> T {
        let dx = self.grid.dx::<T>();
        let flux = self.face_flux(&state.phi);
        let n = state.phi.len();
        let sum: T = (0..n)
            .map(|i| {
                let grad = (state.phi[(i + 1) % n] - state.phi[i]) / dx;
                flux[i] * grad
            })
            .sum();
        -lit::<T>(2.0) * self.coefficient * sum * dx
    }

    fn check_state(&self, state: &MacroState<T>) -> Result<()> {
        if state.grid != self.grid || state.rho != self.rho {
            return Err(Error::InvalidParam("state grid or density differs from the solver's".into()));
        }
        Ok(())
    }

    /// One Heun step.
    pub fn step(&self, state: &mut MacroState<T>, dt: T) -> Result<()> {
        self.check_state(state)?;
        let limit = self.stable_dt();
        if dt > limit {
            return Err(Error::Cfl { dt: to_f64(dt), limit: to_f64(limit) });
        }
        if dt == T::zero() {
            return Ok(());
        }
        // Both modes add increments to φ so that constants stay fixed bit for bit;
        // `rate` already divides the conservative update by ρ or ρ².
        let half = lit::<T>(0.5);
        let k0 = self.rate(&state.phi);
        let phi1: Vec<T> = state.phi.iter().zip(&k0).map(|(&p, &k)| p + dt * k).collect();
        let k1 = self.rate(&phi1);
        for i in 0..state.phi.len() {
            state.phi[i] = state.phi[i] + half * dt * (k0[i] + k1[i]);
        }
        state.t = state.t + dt;
        Ok(())
    }

    pub fn record(&self, state: &MacroState<T>) -> MacroRecord<T> {
        MacroRecord {
            t: state.t,
            conserved: state.conserved(self.mode),
            entropy: state.entropy(self.mode),
            dissipation_rhs: self.dissipation_rhs(state),
            amplitude: state.amplitude(self.mode),
        }
    }

    /// Integrates to `t_end`, recording at every multiple of `trace_every`.
    /// `dt = None` uses the stable step.
    pub fn run(
        &self,
        mut state: MacroState<T>,
        t_end: T,
        trace_every: T,
        dt: Option<T>,
    ) -> Result<(MacroState<T>, Vec<MacroRecord<T>>)> {
        self.check_state(&state)?;
        if !(trace_every > T::zero()) {
            return Err(Error::InvalidParam("trace interval must be positive".into()));
        }
        let base = dt.unwrap_or_else(|| self.stable_dt());
        let mut trace = vec![self.record(&state)];
        let tiny = base * lit(1e-9);
        let mut k = 1usize;
        loop {
            let target = (trace_every * lit(k as f64)).min(t_end);
            while state.t < target - tiny {
                let h = base.min(target - state.t);
                self.step(&mut state, h)?;
            }
            state.t = target;
            trace.push(self.record(&state));
            if target >= t_end {
                break;
            }
            k += 1;
        }
        Ok((state, trace))
    }
}

impl<T: Real> MacroSolver<T> {
    /// Steps with the stable `dt` until the amplitude falls to `tol_fraction`
    /// of its initial value, interpolating inside the final step.
    pub fn run_until_consensus(&self, mut state: MacroState<T>, tol_fraction: T, t_max: T) -> Result<ConsensusTime<T>> {
        self.check_state(&state)?;
        let start = state.t;
        let a0 = state.amplitude(self.mode);
        let threshold = tol_fraction * a0;
        if a0 <= threshold || a0 == T::zero() {
            return Ok(ConsensusTime::Reached(T::zero()));
        }
        let dt = self.stable_dt();
        let mut prev = a0;
        while state.t - start < t_max {
            let h = dt.min(t_max - (state.t - start));
            let t_prev = state.t;
            self.step(&mut state, h)?;
            let a = state.amplitude(self.mode);
            if a <= threshold {
                let s = (prev - threshold) / (prev - a);
                return Ok(ConsensusTime::Reached(t_prev - start + s * h));
            }
            prev = a;
        }
        Ok(ConsensusTime::Censored { last_t: state.t - start, fraction: prev / a0 })
    }
}

/// One step with a fresh solver using `C = c_diff`.
pub fn step_macro<T: Real>(state: &MacroState<T>, mode: RateMode, c_diff: T, dt: T) -> Result<MacroState<T>> {
    let solver = MacroSolver::new(state.grid, &state.rho, mode, c_diff, FaceMean::Harmonic, lit(DEFAULT_RHO_MIN))?;
    let mut next = state.clone();
    solver.step(&mut next, dt)?;
    Ok(next)
}

pub fn dissipation_rhs<T: Real>(state: &MacroState<T>, mode: RateMode, c_diff: T) -> Result<T> {
    let solver = MacroSolver::new(state.grid, &state.rho, mode, c_diff, FaceMean::Harmonic, lit(DEFAULT_RHO_MIN))?;
    Ok(solver.dissipation_rhs(state))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ConsensusTime<T> {
    Reached(T),
    /// The amplitude never fell to the threshold; holds the last time and
    /// the amplitude fraction reached there.
    Censored { last_t: T, fraction: T },
}

impl<T: Real> ConsensusTime<T> {
    pub fn time(&self) -> Option<T> {
        match *self {
            ConsensusTime::Reached(t) => Some(t),
            ConsensusTime::Censored { .. } => None,
        }
    }
}

/// First time the amplitude falls to `tol_fraction` of its initial value,
/// interpolated linearly between trace rows.
pub fn consensus_time<T: Real>(trace: &[MacroRecord<T>], tol_fraction: T) -> Result<ConsensusTime<T>> {
    let first = trace.first().ok_or_else(|| Error::InvalidParam("empty trace".into()))?;
    let threshold = tol_fraction * first.amplitude;
    if first.amplitude <= threshold || first.amplitude == T::zero() {
        return Ok(ConsensusTime::Reached(first.t));
    }
    for w in trace.windows(2) {
        let (a, b) = (&w[0], &w[1]);
        if b.amplitude <= threshold {
            let s = (a.amplitude - threshold) / (a.amplitude - b.amplitude);
            return Ok(ConsensusTime::Reached(a.t + s * (b.t - a.t)));
        }
    }
    let last = trace.last().expect("non-empty");
    Ok(ConsensusTime::Censored { last_t: last.t, fraction: last.amplitude / first.amplitude })
}
