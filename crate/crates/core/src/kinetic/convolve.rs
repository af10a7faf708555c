use super::grid::OpinionGrid;
use super::state::KineticState;
use crate::model::interaction_rate;
use crate::num::{dot2, lit, Real};

/// Which convolution of `f` with the interaction kernel to form.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Moment {
    /// `(G_ζ * f)(φ) = ∫ G_ζ(φ−ψ) f(ψ) dψ`.
    Plain,
    /// `((φG_ζ) * f)(φ) = ∫ (φ−ψ) G_ζ(φ−ψ) f(ψ) dψ`.
    FirstMoment,
    /// `((φ²G_ζ) * f)(φ) = ∫ (φ−ψ)² G_ζ(φ−ψ) f(ψ) dψ`.
    SecondMoment,
}

/// Direct trapezoid convolution on a fixed grid.
///
/// Kernel samples are stored reversed so each output node is a contiguous
/// dot product.
#[derive(Debug, Clone)]
pub struct Convolver<T> {
    nodes: usize,
    rev_g: Vec<T>,
    rev_p: Vec<T>,
    rev_q: Vec<T>,
    weights: Vec<T>,
}

impl<T: Real> Convolver<T> {
    pub fn new(grid: &OpinionGrid<T>, zeta: T) -> Self {
        let n = grid.len();
        let mut rev_g = Vec::with_capacity(2 * n - 1);
        let mut rev_p = Vec::with_capacity(2 * n - 1);
        let mut rev_q = Vec::with_capacity(2 * n - 1);
        for s in 0..2 * n - 1 {
            let d = grid.dx * lit((n as f64 - 1.0) - s as f64);
            let g = interaction_rate(d, zeta);
            rev_g.push(g);
            rev_p.push(d * g);
            rev_q.push(d * d * g);
        }
        Convolver { nodes: n, rev_g, rev_p, rev_q, weights: grid.weights() }
    }

    /// Plain discrete correlation `Σ_j K(x_i − x_j) u_j` on `nodes` equispaced
    /// points, without quadrature weights.
    pub fn unweighted(nodes: usize, dx: T, zeta: T) -> Self {
        let grid = OpinionGrid { lo: T::zero(), dx, cells: nodes - 1 };
        let mut conv = Self::new(&grid, zeta);
        conv.weights = vec![T::one(); nodes];
        conv
    }

    pub fn nodes(&self) -> usize {
        self.nodes
    }

    /// Returns `(G_ζ * f, (φG_ζ) * f)` at every node.
    pub fn both(&self, f: &[T]) -> (Vec<T>, Vec<T>) {
        let n = self.nodes;
        assert_eq!(f.len(), n, "density length does not match grid");
        let u: Vec<T> = f.iter().zip(&self.weights).map(|(&fi, &w)| fi * w).collect();
        let mut g = Vec::with_capacity(n);
        let mut pg = Vec::with_capacity(n);
        for i in 0..n {
            let s = n - 1 - i;
            let (a, b) = dot2(&self.rev_g[s..s + n], &self.rev_p[s..s + n], &u);
            g.push(a);
            pg.push(b);
        }
        (g, pg)
    }

    /// `(φ²G_ζ) * f` at every node.
    pub fn second_moment(&self, f: &[T]) -> Vec<T> {
        let n = self.nodes;
        assert_eq!(f.len(), n, "density length does not match grid");
        let u: Vec<T> = f.iter().zip(&self.weights).map(|(&fi, &w)| fi * w).collect();
        (0..n)
            .map(|i| {
                let s = n - 1 - i;
                self.rev_q[s..s + n].iter().zip(&u).fold(T::zero(), |acc, (&k, &x)| acc + k * x)
            })
            .collect()
    }

    pub fn apply(&self, f: &[T], moment: Moment) -> Vec<T> {
        match moment {
            Moment::Plain => self.both(f).0,
            Moment::FirstMoment => self.both(f).1,
            Moment::SecondMoment => self.second_moment(f),
        }
    }
}

/// One-off convolution of a state's density.
pub fn convolve<T: Real>(state: &KineticState<T>, zeta: T, moment: Moment) -> Vec<T> {
    Convolver::new(&state.grid, zeta).apply(&state.f, moment)
}
