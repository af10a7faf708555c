use std::str::FromStr;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::num::{lit, Real};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Boundary {
    Periodic,
    /// Closed interval with no flux through either end.
    ZeroFlux,
}

impl FromStr for Boundary {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "periodic" => Ok(Boundary::Periodic),
            "zero-flux" | "zeroflux" | "zero_flux" | "closed" => Ok(Boundary::ZeroFlux),
            other => Err(Error::Config(format!("unknown boundary '{other}'"))),
        }
    }
}

/// How `ρ²` is averaged onto cell faces.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum FaceMean {
    Harmonic,
    Arithmetic,
}

impl FromStr for FaceMean {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "harmonic" => Ok(FaceMean::Harmonic),
            "arithmetic" => Ok(FaceMean::Arithmetic),
            other => Err(Error::Config(format!("unknown face mean '{other}'"))),
        }
    }
}

/// `cells` equal cells covering `[0, 1)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MacroGrid {
    pub cells: usize,
    pub boundary: Boundary,
}

impl MacroGrid {
    pub fn new(cells: usize, boundary: Boundary) -> Result<Self> {
        if cells < 4 {
            return Err(Error::InvalidParam(format!("macro grid needs at least 4 cells, got {cells}")));
        }
        Ok(MacroGrid { cells, boundary })
    }

    pub fn periodic(cells: usize) -> Result<Self> {
        Self::new(cells, Boundary::Periodic)
    }

    pub fn dx<T: Real>(&self) -> T {
        T::one() / lit(self.cells as f64)
    }

    pub fn center<T: Real>(&self, i: usize) -> T {
        (lit::<T>(i as f64) + lit(0.5)) * self.dx::<T>()
    }

    pub fn centers<T: Real>(&self) -> Vec<T> {
        (0..self.cells).map(|i| self.center(i)).collect()
    }
}

/// Static density profiles on `[0, 1)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum DensityPreset<T> {
    Uniform(T),
    /// `high` on `[edges.0, edges.1)`, `low` elsewhere.
    Step { low: T, high: T, edges: (T, T) },
    /// `base + amplitude·exp(−d²/2w²)` with periodic distance `d` to `center`.
    GaussBump { base: T, amplitude: T, center: T, width: T },
    /// Two equal bumps.
    TwoCluster { base: T, amplitude: T, centers: (T, T), width: T },
}

impl<T: Real> DensityPreset<T> {
    pub fn density(&self, a: T) -> T {
        let bump = |c: T, w: T| {
            let mut d = (a - c).abs();
            d = d.min(T::one() - d);
            (-(d * d) / (lit::<T>(2.0) * w * w)).exp()
        };
        match *self {
            DensityPreset::Uniform(r) => r,
            DensityPreset::Step { low, high, edges } => {
                if a >= edges.0 && a < edges.1 {
                    high
                } else {
                    low
                }
            }
            DensityPreset::GaussBump { base, amplitude, center, width } => base + amplitude * bump(center, width),
            DensityPreset::TwoCluster { base, amplitude, centers, width } => {
                base + amplitude * (bump(centers.0, width) + bump(centers.1, width))
            }
        }
    }

    /// Values at the cell centers.
    pub fn sample(&self, grid: &MacroGrid) -> Vec<T> {
        grid.centers::<T>().into_iter().map(|a| self.density(a)).collect()
    }

    /// False for the discontinuous step profile.
    pub fn is_smooth(&self) -> bool {
        !matches!(self, DensityPreset::Step { .. })
    }

    /// Largest value, used to sample positions by rejection.
    pub fn max_value(&self) -> T {
        match *self {
            DensityPreset::Uniform(r) => r,
            DensityPreset::Step { low, high, .. } => low.max(high),
            DensityPreset::GaussBump { base, amplitude, .. } => base + amplitude.max(T::zero()),
            DensityPreset::TwoCluster { base, amplitude, .. } => base + lit::<T>(2.0) * amplitude.max(T::zero()),
        }
    }
}
