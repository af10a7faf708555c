//! Model parameters and the closed-form analytic quantities of the
//! grazing-limit opinion model: equilibrium variances, critical noise
//! levels, macroscopic diffusion coefficients and the crossover density.

use std::fmt;
use std::str::FromStr;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::num::{lit, to_f64, Real};
use crate::spatial::{KernelShape, SpatialKernelSpec};

/// How the pair interaction rate is normalized.
///
/// `Symmetric` uses `H = 1`; `NonSymmetric` divides the pair rate by the
/// agent's mean kernel mass (`H = Id`), so isolated agents are pulled toward
/// nearby clusters without pulling back.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum RateMode {
    Symmetric,
    NonSymmetric,
}

impl RateMode {
    pub const ALL: [RateMode; 2] = [RateMode::Symmetric, RateMode::NonSymmetric];

    pub fn as_str(self) -> &'static str {
        match self {
            RateMode::Symmetric => "symmetric",
            RateMode::NonSymmetric => "nonsymmetric",
        }
    }
}

impl fmt::Display for RateMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for RateMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "symmetric" | "sym" => Ok(RateMode::Symmetric),
            "nonsymmetric" | "non-symmetric" | "asymmetric" | "asym" => Ok(RateMode::NonSymmetric),
            other => Err(Error::Config(format!("unknown rate mode '{other}'"))),
        }
    }
}

/// Law of the additive interaction noise `η`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum NoiseLaw {
    Gaussian,
    Uniform,
}

impl NoiseLaw {
    pub fn as_str(self) -> &'static str {
        match self {
            NoiseLaw::Gaussian => "gaussian",
            NoiseLaw::Uniform => "uniform",
        }
    }
}

impl FromStr for NoiseLaw {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "gaussian" | "normal" => Ok(NoiseLaw::Gaussian),
            "uniform" => Ok(NoiseLaw::Uniform),
            other => Err(Error::Config(format!("unknown noise law '{other}'"))),
        }
    }
}

/// Zero-mean interaction noise with variance `Σ² = κγ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseSpec<T> {
    pub law: NoiseLaw,
    pub variance: T,
}

impl<T: Real> NoiseSpec<T> {
    /// Half-width of the uniform law with the same variance.
    pub fn uniform_half_width(&self) -> T {
        (lit::<T>(3.0) * self.variance).sqrt()
    }
}

/// All scalar model constants.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelParams<T> {
    /// Consensus strength, `0 < γ ≤ 1/2`.
    pub gamma: T,
    /// Noise-to-consensus ratio `κ = Σ²/γ`.
    pub kappa: T,
    /// Opinion interaction scale.
    pub zeta: T,
    pub rate_mode: RateMode,
    /// Spatial interaction range (spatial model only).
    pub epsilon: T,
    pub spatial_dim: usize,
    pub noise_law: NoiseLaw,
    pub kernel: KernelShape,
}

impl<T: Real> ModelParams<T> {
    /// Parameters with the default Gaussian noise, Gaussian spatial kernel,
    /// `ε = 0.05` and `n = 1`.
    pub fn new(gamma: T, kappa: T, zeta: T, rate_mode: RateMode) -> Self {
        ModelParams {
            gamma,
            kappa,
            zeta,
            rate_mode,
            epsilon: lit(0.05),
            spatial_dim: 1,
            noise_law: NoiseLaw::Gaussian,
            kernel: KernelShape::Gaussian,
        }
    }

    pub fn with_mode(mut self, mode: RateMode) -> Self {
        self.rate_mode = mode;
        self
    }

    pub fn with_kappa(mut self, kappa: T) -> Self {
        self.kappa = kappa;
        self
    }

    pub fn with_epsilon(mut self, epsilon: T) -> Self {
        self.epsilon = epsilon;
        self
    }

    pub fn with_noise(mut self, law: NoiseLaw) -> Self {
        self.noise_law = law;
        self
    }

    /// Checks every parameter constraint, reporting the first violation.
    pub fn validate(self) -> Result<Self> {
        let finite = |name: &str, v: T| {
            if v.is_finite() {
                Ok(())
            } else {
                Err(Error::InvalidParam(format!("{name} must be finite")))
            }
        };
        finite("gamma", self.gamma)?;
        finite("kappa", self.kappa)?;
        finite("zeta", self.zeta)?;
        finite("epsilon", self.epsilon)?;
        if self.gamma <= T::zero() {
            return Err(Error::InvalidParam("gamma must be positive".into()));
        }
        if self.gamma > lit(0.5) {
            return Err(Error::InvalidParam("gamma exceeds 1/2".into()));
        }
        if self.zeta <= T::zero() {
            return Err(Error::InvalidParam("zeta must be positive".into()));
        }
        if self.kappa < T::zero() {
            return Err(Error::InvalidParam("kappa must be non-negative".into()));
        }
        if self.epsilon <= T::zero() {
            return Err(Error::InvalidParam("epsilon must be positive".into()));
        }
        if !(1..=2).contains(&self.spatial_dim) {
            return Err(Error::InvalidParam("spatial_dim must be 1 or 2".into()));
        }
        Ok(self)
    }

    /// Noise variance `Σ² = κγ`.
    pub fn sigma2_noise(&self) -> T {
        self.kappa * self.gamma
    }

    pub fn noise(&self) -> NoiseSpec<T> {
        NoiseSpec { law: self.noise_law, variance: self.sigma2_noise() }
    }

    pub fn kernel_spec(&self) -> SpatialKernelSpec {
        SpatialKernelSpec::new(self.kernel, self.spatial_dim)
    }

    pub fn critical_kappa(&self) -> T {
        critical_kappa(self.zeta, self.rate_mode)
    }

    pub fn is_subcritical(&self) -> bool {
        self.kappa < self.critical_kappa()
    }
}

/// Free-function form of [`ModelParams::validate`].
pub fn validate_params<T: Real>(p: ModelParams<T>) -> Result<ModelParams<T>> {
    p.validate()
}

/// Threshold on `κ` below which Gaussian equilibria exist:
/// `ζ²` (symmetric) or `2ζ²` (non-symmetric).
pub fn critical_kappa<T: Real>(zeta: T, mode: RateMode) -> T {
    let z2 = zeta * zeta;
    match mode {
        RateMode::Symmetric => z2,
        RateMode::NonSymmetric => z2 + z2,
    }
}

fn supercritical<T: Real>(kappa: T, zeta: T, mode: RateMode) -> Error {
    Error::SupercriticalKappa {
        kappa: to_f64(kappa),
        critical: to_f64(critical_kappa(zeta, mode)),
        mode,
    }
}

/// Variance of the Gaussian equilibrium for explicit `(ζ, κ, mode)`.
pub fn equilibrium_sigma2_for<T: Real>(zeta: T, kappa: T, mode: RateMode) -> Result<T> {
    if kappa >= critical_kappa(zeta, mode) {
        return Err(supercritical(kappa, zeta, mode));
    }
    if kappa <= T::zero() {
        return Ok(T::zero());
    }
    let z2 = zeta * zeta;
    let two = lit::<T>(2.0);
    Ok(match mode {
        RateMode::Symmetric => z2 / (two * (z2 / kappa - T::one())),
        RateMode::NonSymmetric => z2 / (two * z2 / kappa - T::one()),
    })
}

/// Variance `σ²` of the Gaussian equilibrium in the mode of `p`.
pub fn equilibrium_sigma2<T: Real>(p: &ModelParams<T>) -> Result<T> {
    equilibrium_sigma2_for(p.zeta, p.kappa, p.rate_mode)
}

/// `C/(γD)` evaluated from the equilibrium variance:
/// `ζ³/(2σ_s²+ζ²)^{3/2}` or `ζ²/(σ_a²+ζ²)`.
pub fn normalized_coefficient_from_variance<T: Real>(zeta: T, kappa: T, mode: RateMode) -> Result<T> {
    let s2 = equilibrium_sigma2_for(zeta, kappa, mode)?;
    let z2 = zeta * zeta;
    Ok(match mode {
        RateMode::Symmetric => {
            let w = lit::<T>(2.0) * s2 + z2;
            z2 * zeta / (w * w.sqrt())
        }
        RateMode::NonSymmetric => z2 / (s2 + z2),
    })
}

/// `C/(γD)` in the form written directly in `κ`:
/// `(√(ζ²−κ)/ζ)³` or `(2ζ²−κ)/(2ζ²)`.
pub fn normalized_coefficient_rewritten<T: Real>(zeta: T, kappa: T, mode: RateMode) -> Result<T> {
    if kappa >= critical_kappa(zeta, mode) {
        return Err(supercritical(kappa, zeta, mode));
    }
    let z2 = zeta * zeta;
    Ok(match mode {
        RateMode::Symmetric => {
            let r = (z2 - kappa).sqrt() / zeta;
            r * r * r
        }
        RateMode::NonSymmetric => (z2 + z2 - kappa) / (z2 + z2),
    })
}

/// Normalized diffusion coefficient `C/(γD)` in the mode of `p`.
pub fn normalized_diffusion_coefficient<T: Real>(p: &ModelParams<T>) -> Result<T> {
    normalized_coefficient_from_variance(p.zeta, p.kappa, p.rate_mode)
}

/// Macroscopic diffusion coefficient `C_s` or `C_a`, including `γD`.
pub fn diffusion_coefficient<T: Real>(p: &ModelParams<T>, kernel: &SpatialKernelSpec) -> Result<T> {
    let d = lit::<T>(kernel.diffusivity()?);
    Ok(p.gamma * d * normalized_diffusion_coefficient(p)?)
}

/// Density `ρ* = C_a/C_s` at which both rate models homogenize equally fast.
///
/// Needs `κ < ζ²` so that both coefficients exist; independent of `γD`.
pub fn crossover_density<T: Real>(p: &ModelParams<T>) -> Result<T> {
    let cs = normalized_coefficient_from_variance(p.zeta, p.kappa, RateMode::Symmetric)?;
    let ca = normalized_coefficient_from_variance(p.zeta, p.kappa, RateMode::NonSymmetric)?;
    Ok(ca / cs)
}

/// Headline analytic numbers for one parameter set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AnalyticSummary<T> {
    pub mode: RateMode,
    #[serde(rename = "sigma2")]
    pub sigma2_eq: T,
    pub kappa_crit: T,
    /// `C/(γD)`.
    pub c_norm: T,
    /// `C` including `γD`, in α-units² per unit time.
    pub c_diff: T,
    /// Spatial diffusivity `D` of the kernel.
    pub spatial_d: T,
    /// `C_a/C_s`; absent when `κ ≥ ζ²`.
    pub rho_star: Option<T>,
}

pub fn analytic_summary<T: Real>(p: &ModelParams<T>) -> Result<AnalyticSummary<T>> {
    let p = p.validate()?;
    let kernel = p.kernel_spec();
    let spatial_d = lit::<T>(kernel.diffusivity()?);
    let c_norm = normalized_diffusion_coefficient(&p)?;
    Ok(AnalyticSummary {
        mode: p.rate_mode,
        sigma2_eq: equilibrium_sigma2(&p)?,
        kappa_crit: p.critical_kappa(),
        c_norm,
        c_diff: p.gamma * spatial_d * c_norm,
        spatial_d,
        rho_star: crossover_density(&p).ok(),
    })
}

/// Normal density `F_{σ,μ}(x)`.
#[inline]
pub fn gaussian_pdf<T: Real>(sigma: T, mu: T, x: T) -> T {
    let z = (x - mu) / sigma;
    (-(z * z) / lit(2.0)).exp() / (sigma * T::TAU().sqrt())
}

/// Interaction kernel `G_ζ(d) = exp(−d²/(2ζ²))`.
#[inline]
pub fn interaction_rate<T: Real>(d: T, zeta: T) -> T {
    let z = d / zeta;
    (-(z * z) / lit(2.0)).exp()
}

/// `(G_ζ * F_{σ,μ})(φ) = √(2π)·ζ·F_{√(σ²+ζ²),μ}(φ)`.
pub fn gaussian_convolution_closed_form<T: Real>(sigma: T, zeta: T, mu: T, phi: T) -> T {
    let s = (sigma * sigma + zeta * zeta).sqrt();
    T::TAU().sqrt() * zeta * gaussian_pdf(s, mu, phi)
}

/// `((φG_ζ) * F_{σ,μ})(φ) = ζ²(φ−μ)/(σ²+ζ²) · (G_ζ * F_{σ,μ})(φ)`.
pub fn first_moment_convolution_closed_form<T: Real>(sigma: T, zeta: T, mu: T, phi: T) -> T {
    let z2 = zeta * zeta;
    z2 * (phi - mu) / (sigma * sigma + z2) * gaussian_convolution_closed_form(sigma, zeta, mu, phi)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::{assert_abs_diff_eq, assert_relative_eq};

    fn params(kappa: f64, zeta: f64, mode: RateMode) -> ModelParams<f64> {
        ModelParams::new(0.05, kappa, zeta, mode)
    }

    #[test]
    fn validation_accepts_defaults_and_reports_first_violation() {
        assert!(params(0.5, 1.0, RateMode::Symmetric).validate().is_ok());
        let mut p = params(0.5, 1.0, RateMode::Symmetric);
        p.gamma = 0.7;
        assert_eq!(p.validate(), Err(Error::InvalidParam("gamma exceeds 1/2".into())));
        let p = params(0.5, 0.0, RateMode::Symmetric);
        assert_eq!(p.validate(), Err(Error::InvalidParam("zeta must be positive".into())));
        let p = params(-0.1, 1.0, RateMode::Symmetric);
        assert!(p.validate().is_err());
        let mut p = params(0.5, 1.0, RateMode::Symmetric);
        p.spatial_dim = 3;
        assert!(p.validate().is_err());
    }

    #[test]
    fn equilibrium_variances() {
        let s = equilibrium_sigma2(&params(0.5, 1.0, RateMode::Symmetric)).unwrap();
        assert_relative_eq!(s, 0.5, max_relative = 1e-15);
        let a = equilibrium_sigma2(&params(0.5, 1.0, RateMode::NonSymmetric)).unwrap();
        assert_relative_eq!(a, 1.0 / 3.0, max_relative = 1e-15);
        assert!(equilibrium_sigma2(&params(1e-9, 1.0, RateMode::Symmetric)).unwrap() < 1e-8);
        assert_eq!(equilibrium_sigma2(&params(0.0, 1.0, RateMode::Symmetric)).unwrap(), 0.0);
        assert!(matches!(
            equilibrium_sigma2(&params(1.0, 1.0, RateMode::Symmetric)),
            Err(Error::SupercriticalKappa { .. })
        ));
    }

    #[test]
    fn critical_thresholds() {
        assert_eq!(critical_kappa(1.0, RateMode::Symmetric), 1.0);
        assert_eq!(critical_kappa(1.0, RateMode::NonSymmetric), 2.0);
        assert_eq!(critical_kappa(2.0, RateMode::Symmetric), 4.0);
    }

    #[test]
    fn diffusion_coefficients_closed_forms() {
        let cs = normalized_coefficient_from_variance(1.0, 0.5, RateMode::Symmetric).unwrap();
        assert_relative_eq!(cs, 0.5f64.powf(1.5), max_relative = 1e-14);
        assert_abs_diff_eq!(cs, 0.353553, epsilon = 1e-6);
        let ca = normalized_coefficient_from_variance(1.0, 0.5, RateMode::NonSymmetric).unwrap();
        assert_relative_eq!(ca, 0.75, max_relative = 1e-15);
        for mode in RateMode::ALL {
            let c0 = normalized_coefficient_from_variance(1.0, 0.0, mode).unwrap();
            assert_relative_eq!(c0, 1.0, max_relative = 1e-15);
        }
    }

    #[test]
    fn diffusion_coefficient_carries_gamma_d() {
        let p = params(0.5, 1.0, RateMode::Symmetric);
        // Gaussian 1D kernel has D = 1/2.
        let c = diffusion_coefficient(&p, &p.kernel_spec()).unwrap();
        assert_relative_eq!(c, 0.05 * 0.5 * 0.5f64.powf(1.5), max_relative = 1e-9);
    }

    #[test]
    fn crossover_values() {
        let r = crossover_density(&params(0.5, 1.0, RateMode::Symmetric)).unwrap();
        assert_relative_eq!(r, 0.75 / 0.5f64.powf(1.5), max_relative = 1e-14);
        assert_relative_eq!(r, 2.12132, max_relative = 1e-5);
        let r = crossover_density(&params(1.0, 2.0, RateMode::Symmetric)).unwrap();
        assert_relative_eq!(r, 1.34715, max_relative = 1e-5);
        let r = crossover_density(&params(0.0, 1.0, RateMode::Symmetric)).unwrap();
        assert_relative_eq!(r, 1.0, max_relative = 1e-15);
        // Needs both coefficients.
        assert!(crossover_density(&params(1.5, 1.0, RateMode::NonSymmetric)).is_err());
    }

    #[test]
    fn convolution_closed_form_values() {
        assert_relative_eq!(gaussian_convolution_closed_form(1.0, 1.0, 0.0, 0.0), 0.5f64.sqrt(), max_relative = 1e-15);
        assert_relative_eq!(gaussian_convolution_closed_form(0.0, 1.0, 0.0, 0.0), 1.0, max_relative = 1e-15);
        assert!(gaussian_convolution_closed_form(1.0, 1.0, 0.0, 60.0) < 1e-300);
    }

    #[test]
    fn interaction_rate_at_one_scale() {
        assert_relative_eq!(interaction_rate(1.0, 1.0), (-0.5f64).exp(), max_relative = 1e-15);
        assert_relative_eq!(interaction_rate(-1.0, 1.0), 0.606531, max_relative = 1e-6);
    }

    #[test]
    fn f32_variant_compiles_and_agrees() {
        let p = ModelParams::<f32>::new(0.05, 0.5, 1.0, RateMode::Symmetric);
        let s = equilibrium_sigma2(&p).unwrap();
        assert!((s - 0.5).abs() < 1e-6);
    }

    #[test]
    fn rate_mode_parses() {
        assert_eq!("nonsymmetric".parse::<RateMode>().unwrap(), RateMode::NonSymmetric);
        assert_eq!("Symmetric".parse::<RateMode>().unwrap(), RateMode::Symmetric);
        assert!("sideways".parse::<RateMode>().is_err());
    }
}
