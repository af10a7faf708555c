//! Spatial interaction kernels `F` and their diffusivity
//! `D = (1/2n)∫F(|α|)|α|² dα`.

use std::f64::consts::{PI, TAU};
use std::str::FromStr;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::quadrature::{integrate, integrate_to_infinity};

/// Tolerance on `|∫F − 1|` for a kernel to count as normalized.
pub const MASS_TOLERANCE: f64 = 1e-10;

/// A radially symmetric kernel on `ℝⁿ`, given by its profile `F(r)`.
pub trait RadialKernel {
    fn dim(&self) -> usize;

    fn profile(&self, r: f64) -> f64;

    /// Radius outside which the profile vanishes, when compactly supported.
    fn support(&self) -> Option<f64> {
        None
    }
}

/// Surface measure of the unit sphere in `ℝⁿ` (`2` for `n = 1`, `2π` for `n = 2`).
fn sphere_measure(dim: usize) -> f64 {
    match dim {
        1 => 2.0,
        2 => TAU,
        3 => 4.0 * PI,
        _ => panic!("unsupported dimension {dim}"),
    }
}

/// `∫_{ℝⁿ} F(|α|)|α|^p dα` by adaptive quadrature in the radius.
pub fn radial_moment<K: RadialKernel + ?Sized>(kernel: &K, power: i32) -> f64 {
    let n = kernel.dim();
    let integrand = |r: f64| kernel.profile(r) * r.powi(n as i32 - 1 + power);
    let q = match kernel.support() {
        Some(radius) => integrate(integrand, 0.0, radius, 1e-13, 1e-300),
        None => integrate_to_infinity(integrand, 0.0, 1e-13, 1e-300),
    };
    sphere_measure(n) * q.value
}

/// Total mass `∫F`.
pub fn kernel_mass<K: RadialKernel + ?Sized>(kernel: &K) -> f64 {
    radial_moment(kernel, 0)
}

/// Spatial diffusivity `D` of a unit-mass kernel.
pub fn spatial_diffusivity<K: RadialKernel + ?Sized>(kernel: &K) -> Result<f64> {
    let mass = kernel_mass(kernel);
    if (mass - 1.0).abs() > MASS_TOLERANCE {
        return Err(Error::NonNormalizedKernel { mass });
    }
    Ok(radial_moment(kernel, 2) / (2.0 * kernel.dim() as f64))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum KernelShape {
    /// Standard normal density.
    Gaussian,
    /// Uniform on the unit ball, scaled to unit mass.
    Indicator,
}

impl KernelShape {
    pub fn as_str(self) -> &'static str {
        match self {
            KernelShape::Gaussian => "gaussian",
            KernelShape::Indicator => "indicator",
        }
    }
}

impl FromStr for KernelShape {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "gaussian" | "normal" => Ok(KernelShape::Gaussian),
            "indicator" | "box" | "uniform" => Ok(KernelShape::Indicator),
            other => Err(Error::Config(format!("unknown kernel shape '{other}'"))),
        }
    }
}

/// One of the built-in unit-mass spatial kernels.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SpatialKernelSpec {
    pub shape: KernelShape,
    pub dim: usize,
}

impl SpatialKernelSpec {
    pub fn new(shape: KernelShape, dim: usize) -> Self {
        SpatialKernelSpec { shape, dim }
    }

    pub fn diffusivity(&self) -> Result<f64> {
        spatial_diffusivity(self)
    }

    /// `F_ε(α) = ε⁻ⁿ F(|α|/ε)`.
    pub fn scaled(&self, epsilon: f64, r: f64) -> f64 {
        self.profile(r.abs() / epsilon) / epsilon.powi(self.dim as i32)
    }

    /// One-dimensional `F_ε` periodized over the unit torus.
    pub fn wrapped(&self, epsilon: f64, d: f64) -> f64 {
        let d = d - d.round();
        // Gaussian images beyond 12ε contribute below e^{-72} relative.
        let reach = match self.shape {
            KernelShape::Gaussian => 12.0 * epsilon,
            KernelShape::Indicator => epsilon,
        };
        let lo = (-reach - d).ceil() as i64;
        let hi = (reach - d).floor() as i64;
        (lo..=hi).map(|m| self.scaled(epsilon, d + m as f64)).sum()
    }

    /// Largest value of the wrapped `F_ε` (attained at zero separation).
    pub fn wrapped_max(&self, epsilon: f64) -> f64 {
        self.wrapped(epsilon, 0.0)
    }
}

impl RadialKernel for SpatialKernelSpec {
    fn dim(&self) -> usize {
        self.dim
    }

    fn profile(&self, r: f64) -> f64 {
        match self.shape {
            KernelShape::Gaussian => (-0.5 * r * r).exp() / TAU.powf(self.dim as f64 / 2.0),
            KernelShape::Indicator => {
                if r <= 1.0 {
                    1.0 / unit_ball_volume(self.dim)
                } else {
                    0.0
                }
            }
        }
    }

    fn support(&self) -> Option<f64> {
        match self.shape {
            KernelShape::Gaussian => None,
            KernelShape::Indicator => Some(1.0),
        }
    }
}

fn unit_ball_volume(dim: usize) -> f64 {
    match dim {
        1 => 2.0,
        2 => PI,
        3 => 4.0 * PI / 3.0,
        _ => panic!("unsupported dimension {dim}"),
    }
}

/// Kernel defined by an arbitrary radial profile.
pub struct ProfileKernel<F> {
    pub dim: usize,
    pub profile: F,
    pub support: Option<f64>,
}

impl<F: Fn(f64) -> f64> RadialKernel for ProfileKernel<F> {
    fn dim(&self) -> usize {
        self.dim
    }

    fn profile(&self, r: f64) -> f64 {
        (self.profile)(r)
    }

    fn support(&self) -> Option<f64> {
        self.support
    }
}
