use serde::Serialize;

use super::grid::OpinionGrid;
use crate::error::{Error, Result};
use crate::model::gaussian_pdf;
use crate::num::{lit, Real};

/// Opinion density on a uniform grid.
#[derive(Debug, Clone, PartialEq)]
pub struct KineticState<T> {
    pub grid: OpinionGrid<T>,
    pub f: Vec<T>,
    pub t: T,
    /// Number of negative node values reset to zero so far.
    pub clipped: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Moments<T> {
    pub mass: T,
    pub mean: T,
    pub variance: T,
}

impl<T: Real> KineticState<T> {
    pub fn new(grid: OpinionGrid<T>, f: Vec<T>) -> Result<Self> {
        if f.len() != grid.len() {
            return Err(Error::InvalidParam(format!(
                "density has {} values for {} grid nodes",
                f.len(),
                grid.len()
            )));
        }
        Ok(KineticState { grid, f, t: T::zero(), clipped: 0 })
    }

    pub fn from_fn(grid: OpinionGrid<T>, density: impl Fn(T) -> T) -> Self {
        let f = grid.nodes().into_iter().map(density).collect();
        KineticState { grid, f, t: T::zero(), clipped: 0 }
    }

    pub fn from_initial(grid: OpinionGrid<T>, ic: &InitialCondition<T>) -> Self {
        Self::from_fn(grid, |x| ic.density(x))
    }

    pub fn mass(&self) -> T {
        self.grid.integrate(&self.f)
    }

    /// Trapezoid mass, mean and variance.
    pub fn moments(&self) -> Result<Moments<T>> {
        let mut m0 = T::zero();
        let mut m1 = T::zero();
        for (i, &fi) in self.f.iter().enumerate() {
            let w = self.grid.weight(i) * fi;
            m0 = m0 + w;
            m1 = m1 + w * self.grid.node(i);
        }
        if !(m0 > T::zero()) {
            return Err(Error::ZeroMass);
        }
        let mean = m1 / m0;
        let mut m2 = T::zero();
        for (i, &fi) in self.f.iter().enumerate() {
            let d = self.grid.node(i) - mean;
            m2 = m2 + self.grid.weight(i) * fi * d * d;
        }
        Ok(Moments { mass: m0, mean, variance: m2 / m0 })
    }

    /// Fraction of the mass held by the outer `1/32` of the nodes on each side.
    pub fn boundary_mass_fraction(&self) -> T {
        let n = self.f.len();
        let band = (n / 32).max(1);
        let mut edge = T::zero();
        for i in (0..band).chain(n - band..n) {
            edge = edge + self.grid.weight(i) * self.f[i];
        }
        let mass = self.mass();
        if mass > T::zero() {
            edge / mass
        } else {
            T::zero()
        }
    }

    /// Trapezoid L¹ distance to the Gaussian with the same mass, mean and variance.
    pub fn gaussian_fit_distance(&self) -> Result<T> {
        let m = self.moments()?;
        let sigma = m.variance.sqrt();
        let diff: Vec<T> = self
            .f
            .iter()
            .enumerate()
            .map(|(i, &fi)| (fi - m.mass * gaussian_pdf(sigma, m.mean, self.grid.node(i))).abs())
            .collect();
        Ok(self.grid.integrate(&diff) / m.mass)
    }
}

/// Initial opinion densities: Gaussian mixtures with unit total weight.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InitialCondition<T> {
    /// `(weight, sigma, mu)` per component.
    pub components: Vec<(T, T, T)>,
}

impl<T: Real> InitialCondition<T> {
    pub fn gaussian(sigma: T, mu: T) -> Self {
        InitialCondition { components: vec![(T::one(), sigma, mu)] }
    }

    /// Equal-weight pair of Gaussians at `mu ± offset`.
    pub fn bimodal(sigma: T, mu: T, offset: T) -> Self {
        let half = lit(0.5);
        InitialCondition { components: vec![(half, sigma, mu - offset), (half, sigma, mu + offset)] }
    }

    pub fn density(&self, x: T) -> T {
        self.components.iter().map(|&(w, s, m)| w * gaussian_pdf(s, m, x)).sum()
    }

    pub fn mean(&self) -> T {
        self.components.iter().map(|&(w, _, m)| w * m).sum()
    }

    /// Standard deviation of the mixture.
    pub fn std_dev(&self) -> T {
        let mean = self.mean();
        let second: T = self.components.iter().map(|&(w, s, m)| w * (s * s + (m - mean) * (m - mean))).sum();
        second.sqrt()
    }

    /// Largest distance from the mixture mean to a component mean.
    pub fn spread(&self) -> T {
        let mean = self.mean();
        self.components.iter().map(|&(_, _, m)| (m - mean).abs()).fold(T::zero(), T::max)
    }

    /// Five reference starting densities used by the equilibrium checks.
    pub fn presets() -> Vec<(&'static str, Self)> {
        let l = lit::<T>;
        vec![
            ("wide", Self::gaussian(l(1.2), l(0.0))),
            ("narrow", Self::gaussian(l(0.3), l(0.0))),
            ("shifted", Self::gaussian(l(0.8), l(0.75))),
            ("bimodal", Self::bimodal(l(0.6), l(0.0), l(1.0))),
            (
                "skewed",
                InitialCondition { components: vec![(l(0.7), l(0.5), l(-0.4)), (l(0.3), l(0.9), l(1.2))] },
            ),
        ]
    }
}
