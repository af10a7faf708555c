use super::convolve::Convolver;
use super::grid::OpinionGrid;
use super::state::KineticState;
use crate::error::{Error, Result};
use crate::model::{gaussian_pdf, ModelParams, RateMode};
use crate::num::{denominator_floor, lit, to_f64, Real};

/// Mass fraction that floored cells may carry before the
/// non-symmetric denominator is reported as underflowed.
pub const UNDERFLOW_MASS_FRACTION: f64 = 1e-6;

/// Convolutions of `f` and the drift/diffusion coefficients built from them.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvolvedFields<T> {
    pub g_conv: Vec<T>,
    pub pg_conv: Vec<T>,
    /// `A_f`: `pg` (symmetric) or `pg / max(g, δ)` (non-symmetric).
    pub drift: Vec<T>,
    /// `B_f`: `g` (symmetric) or `g / max(g, δ)` (non-symmetric).
    pub diffusion: Vec<T>,
}

impl<T: Real> ConvolvedFields<T> {
    pub fn compute(conv: &Convolver<T>, grid: &OpinionGrid<T>, f: &[T], mode: RateMode) -> Result<Self> {
        let (g_conv, pg_conv) = conv.both(f);
        let (drift, diffusion) = match mode {
            RateMode::Symmetric => (pg_conv.clone(), g_conv.clone()),
            RateMode::NonSymmetric => {
                let floor = denominator_floor::<T>();
                let mut floored = T::zero();
                let mut total = T::zero();
                let mut drift = Vec::with_capacity(f.len());
                let mut diffusion = Vec::with_capacity(f.len());
                for i in 0..f.len() {
                    let m = grid.weight(i) * f[i].abs();
                    total = total + m;
                    if g_conv[i] < floor {
                        floored = floored + m;
                    }
                    let den = g_conv[i].max(floor);
                    drift.push(pg_conv[i] / den);
                    diffusion.push(g_conv[i] / den);
                }
                if total > T::zero() && to_f64(floored / total) > UNDERFLOW_MASS_FRACTION {
                    return Err(Error::DenominatorUnderflow { mass_fraction: to_f64(floored / total) });
                }
                (drift, diffusion)
            }
        };
        Ok(ConvolvedFields { g_conv, pg_conv, drift, diffusion })
    }

    /// Adds the second Kramers–Moyal term of the jump process, `γ²E[(ψ−φ)²]`
    /// at the interaction rate, to the diffusion: `B += (γ/κ)·((φ²G)*f)/den`
    /// with `den` as in the drift. The grazing limit drops this `O(γ)` term.
    pub fn add_finite_gamma(&mut self, conv: &Convolver<T>, f: &[T], p: &ModelParams<T>) -> Result<()> {
        if !(p.kappa > T::zero()) {
            return Err(Error::InvalidParam("the finite-gamma correction needs kappa > 0".into()));
        }
        let scale = p.gamma / p.kappa;
        let q = conv.second_moment(f);
        let floor = denominator_floor::<T>();
        for (i, b) in self.diffusion.iter_mut().enumerate() {
            let den = match p.rate_mode {
                RateMode::Symmetric => T::one(),
                RateMode::NonSymmetric => self.g_conv[i].max(floor),
            };
            *b = *b + scale * q[i] / den;
        }
        Ok(())
    }

    pub fn max_diffusion(&self) -> T {
        self.diffusion.iter().fold(T::zero(), |m, &b| m.max(b.abs()))
    }

    pub fn max_drift(&self) -> T {
        self.drift.iter().fold(T::zero(), |m, &a| m.max(a.abs()))
    }
}

/// `γ ∂_φ J` in conservative form with zero boundary flux, where the face flux is
/// `J_{i+½} = ½(a_i + a_{i+1}) + (κ/2)(d_{i+1} − d_i)/Δφ`.
///
/// `a` holds the advective flux at nodes and `d` the quantity under the derivative.
pub(crate) fn flux_divergence<T: Real>(grid: &OpinionGrid<T>, gamma: T, kappa: T, a: &[T], d: &[T]) -> Vec<T> {
    let n = a.len();
    let half = lit::<T>(0.5);
    let diff_coef = kappa * half / grid.dx;
    let mut out = vec![T::zero(); n];
    for i in 0..n - 1 {
        let j = half * (a[i] + a[i + 1]) + diff_coef * (d[i + 1] - d[i]);
        out[i] = out[i] + j;
        out[i + 1] = out[i + 1] - j;
    }
    for (i, o) in out.iter_mut().enumerate() {
        *o = *o * gamma / grid.weight(i);
    }
    out
}

/// `x/(eˣ − 1)`, continued to 1 at 0.
fn bernoulli<T: Real>(x: T) -> T {
    if x.abs() < lit(1e-4) {
        T::one() - x * lit(0.5) + x * x / lit(12.0)
    } else {
        x / x.exp_m1()
    }
}

/// `Q(f)` given precomputed fields.
///
/// Writing the flux as `J = v u + (κ/2) ∂_φ u` with `u = B f` and
/// `v = A/B`, each face uses the exponentially fitted (Scharfetter–Gummel)
/// flux `J = (κ/2Δφ)[β(−P) u_{i+1} − β(P) u_i]` with `P = 2vΔφ/κ` and
/// `β(x) = x/(eˣ−1)`. It matches the central flux to `O(Δφ²)` and keeps the
/// explicit update monotone at any cell Péclet number.
pub fn q_from_fields<T: Real>(grid: &OpinionGrid<T>, p: &ModelParams<T>, fields: &ConvolvedFields<T>, f: &[T]) -> Vec<T> {
    let n = f.len();
    let half = lit::<T>(0.5);
    let dx = grid.dx;
    let diff = p.kappa * half;
    let u: Vec<T> = fields.diffusion.iter().zip(f).map(|(&b, &y)| b * y).collect();
    let mut out = vec![T::zero(); n];
    for i in 0..n - 1 {
        let b_face = half * (fields.diffusion[i] + fields.diffusion[i + 1]);
        if !(b_face > T::zero()) {
            continue;
        }
        let v = half * (fields.drift[i] + fields.drift[i + 1]) / b_face;
        let j = if diff > T::zero() {
            let pe = v * dx / diff;
            diff / dx * (bernoulli(-pe) * u[i + 1] - bernoulli(pe) * u[i])
        } else if v > T::zero() {
            v * u[i + 1]
        } else {
            v * u[i]
        };
        out[i] = out[i] + j;
        out[i + 1] = out[i + 1] - j;
    }
    for (i, o) in out.iter_mut().enumerate() {
        *o = *o * p.gamma / grid.weight(i);
    }
    out
}

/// Grazing collision operator `Q(f) = γ ∂_φ{A_f f + (κ/2) ∂_φ(B_f f)}` at every node.
pub fn apply_q<T: Real>(state: &KineticState<T>, p: &ModelParams<T>) -> Result<Vec<T>> {
    let conv = Convolver::new(&state.grid, p.zeta);
    let fields = ConvolvedFields::compute(&conv, &state.grid, &state.f, p.rate_mode)?;
    Ok(q_from_fields(&state.grid, p, &fields, &state.f))
}

/// Potential, Gibbs density and log partition constant of a state.
#[derive(Debug, Clone, PartialEq)]
pub struct GibbsData<T> {
    /// `V_f = −ζ² log(G_ζ * f)`; `+∞` where the convolution vanishes.
    pub v_pot: Vec<T>,
    /// `M_f ∝ (G_ζ * f)^{2ζ²/κ}`, unit trapezoid mass.
    pub m_gibbs: Vec<T>,
    /// `log Z_f` for the normalization of `exp(−2V_f/κ)`.
    pub log_z: T,
}

pub fn gibbs_from_conv<T: Real>(grid: &OpinionGrid<T>, p: &ModelParams<T>, g_conv: &[T]) -> Result<GibbsData<T>> {
    if !(p.kappa > T::zero()) {
        return Err(Error::GibbsUndefined);
    }
    let z2 = p.zeta * p.zeta;
    let expo = lit::<T>(2.0) * z2 / p.kappa;
    let log_g: Vec<T> = g_conv.iter().map(|&g| if g > T::zero() { g.ln() } else { T::neg_infinity() }).collect();
    let top = log_g.iter().fold(T::neg_infinity(), |m, &x| m.max(x));
    if top == T::neg_infinity() {
        return Err(Error::ZeroMass);
    }
    let unnorm: Vec<T> = log_g.iter().map(|&l| (expo * (l - top)).exp()).collect();
    let z = grid.integrate(&unnorm);
    let m_gibbs = unnorm.iter().map(|&u| u / z).collect();
    let v_pot = log_g.iter().map(|&l| -z2 * l).collect();
    Ok(GibbsData { v_pot, m_gibbs, log_z: expo * top + z.ln() })
}

pub fn gibbs_measure<T: Real>(state: &KineticState<T>, p: &ModelParams<T>) -> Result<GibbsData<T>> {
    let conv = Convolver::new(&state.grid, p.zeta);
    let (g, _) = conv.both(&state.f);
    gibbs_from_conv(&state.grid, p, &g)
}

/// L¹ defect of the equilibrium identity: `‖(G*f)f − B M_f‖₁` with
/// `B = ∫(G*f)f` (symmetric) or `‖f − m M_f‖₁` with `m = ∫f` (non-symmetric).
pub fn residual_from_conv<T: Real>(grid: &OpinionGrid<T>, p: &ModelParams<T>, f: &[T], g_conv: &[T]) -> Result<T> {
    let gibbs = gibbs_from_conv(grid, p, g_conv)?;
    let defect: Vec<T> = match p.rate_mode {
        RateMode::Symmetric => {
            let gf: Vec<T> = g_conv.iter().zip(f).map(|(&g, &x)| g * x).collect();
            let b = grid.integrate(&gf);
            gf.iter().zip(&gibbs.m_gibbs).map(|(&h, &m)| (h - b * m).abs()).collect()
        }
        RateMode::NonSymmetric => {
            let mass = grid.integrate(f);
            f.iter().zip(&gibbs.m_gibbs).map(|(&x, &m)| (x - mass * m).abs()).collect()
        }
    };
    Ok(grid.integrate(&defect))
}

pub fn equilibrium_residual<T: Real>(state: &KineticState<T>, p: &ModelParams<T>) -> Result<T> {
    let conv = Convolver::new(&state.grid, p.zeta);
    let (g, _) = conv.both(&state.f);
    residual_from_conv(&state.grid, p, &state.f, &g)
}

/// Linearization of the non-symmetric operator around the Gaussian `F_{σ,μ}`.
#[derive(Debug, Clone)]
pub struct LinearizedOperator<T> {
    grid: OpinionGrid<T>,
    params: ModelParams<T>,
    conv: Convolver<T>,
    base: Vec<T>,
    base_g: Vec<T>,
    base_pg: Vec<T>,
}

impl<T: Real> LinearizedOperator<T> {
    pub fn new(grid: OpinionGrid<T>, sigma: T, mu: T, p: &ModelParams<T>) -> Result<Self> {
        if p.rate_mode != RateMode::NonSymmetric {
            return Err(Error::Linearization("only defined for the non-symmetric rate".into()));
        }
        if !(sigma > T::zero()) {
            return Err(Error::Linearization("base standard deviation must be positive".into()));
        }
        let conv = Convolver::new(&grid, p.zeta);
        let base: Vec<T> = grid.nodes().into_iter().map(|x| gaussian_pdf(sigma, mu, x)).collect();
        let (base_g, base_pg) = conv.both(&base);
        let floor = denominator_floor::<T>();
        if base_g.iter().any(|&g| g < floor) {
            return Err(Error::DenominatorUnderflow { mass_fraction: 0.0 });
        }
        Ok(LinearizedOperator { grid, params: *p, conv, base, base_g, base_pg })
    }

    pub fn grid(&self) -> &OpinionGrid<T> {
        &self.grid
    }

    /// `Lin_Q(g)` at every node.
    pub fn apply(&self, pert: &[T]) -> Vec<T> {
        let (gg, pgg) = self.conv.both(pert);
        let a: Vec<T> = (0..pert.len())
            .map(|i| {
                let (fb, gb, pb) = (self.base[i], self.base_g[i], self.base_pg[i]);
                pgg[i] * fb / gb + pb * pert[i] / gb - pb * gg[i] * fb / (gb * gb)
            })
            .collect();
        flux_divergence(&self.grid, self.params.gamma, self.params.kappa, &a, pert)
    }

    /// `χ(φ) = ∫_{φ_lo}^φ (G_ζ * F)` by cumulative trapezoid on the grid.
    pub fn invariant(&self) -> Vec<T> {
        let half = lit::<T>(0.5);
        let mut chi = Vec::with_capacity(self.base_g.len());
        let mut acc = T::zero();
        chi.push(acc);
        for w in self.base_g.windows(2) {
            acc = acc + half * (w[0] + w[1]) * self.grid.dx;
            chi.push(acc);
        }
        chi
    }
}

/// `Lin_Q(g)` around `F_{σ,μ}` (non-symmetric rate only).
pub fn apply_linearized_q<T: Real>(
    grid: &OpinionGrid<T>,
    perturbation: &[T],
    base: (T, T),
    p: &ModelParams<T>,
) -> Result<Vec<T>> {
    Ok(LinearizedOperator::new(*grid, base.0, base.1, p)?.apply(perturbation))
}
