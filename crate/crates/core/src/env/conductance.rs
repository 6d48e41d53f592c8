use std::sync::Arc;

use smallvec::SmallVec;

use super::field::EnvironmentField;
use crate::lattice::{Point, MAX_DIM};

/// A potential V on Z^d. The walk only ever sees V through this trait.
pub trait Potential: Sync {
    fn dim(&self) -> usize;
    fn potential(&self, x: &Point) -> f64;
}

impl Potential for EnvironmentField {
    fn dim(&self) -> usize {
        EnvironmentField::dim(self)
    }

    #[inline]
    fn potential(&self, x: &Point) -> f64 {
        EnvironmentField::potential(self, x)
    }
}

impl<P: Potential + ?Sized> Potential for &P {
    fn dim(&self) -> usize {
        (**self).dim()
    }

    #[inline]
    fn potential(&self, x: &Point) -> f64 {
        (**self).potential(x)
    }
}

impl<P: Potential + ?Sized + Send> Potential for Arc<P> {
    fn dim(&self) -> usize {
        (**self).dim()
    }

    #[inline]
    fn potential(&self, x: &Point) -> f64 {
        (**self).potential(x)
    }
}

/// V identically zero: simple random walk.
#[derive(Clone, Copy, Debug)]
pub struct FlatPotential(pub usize);

impl Potential for FlatPotential {
    fn dim(&self) -> usize {
        self.0
    }

    fn potential(&self, _: &Point) -> f64 {
        0.0
    }
}

/// Potential given by a closure; handy for hand-built test landscapes.
pub struct FnPotential<F> {
    d: usize,
    f: F,
}

impl<F: Fn(&Point) -> f64 + Sync> FnPotential<F> {
    pub fn new(d: usize, f: F) -> Self {
        FnPotential { d, f }
    }
}

impl<F: Fn(&Point) -> f64 + Sync> Potential for FnPotential<F> {
    fn dim(&self) -> usize {
        self.d
    }

    fn potential(&self, x: &Point) -> f64 {
        (self.f)(x)
    }
}

/// Base potential with the sign of V flipped at a single site.
pub struct Negated<P> {
    pub base: P,
    pub site: Point,
}

impl<P: Potential> Potential for Negated<P> {
    fn dim(&self) -> usize {
        self.base.dim()
    }

    fn potential(&self, x: &Point) -> f64 {
        let v = self.base.potential(x);
        if *x == self.site {
            -v
        } else {
            v
        }
    }
}

/// Where the network lives. `Reflecting(k)` keeps only the edges with both
/// ends in `B_k`; the walk then stays in the box and capacitances are
/// recomputed from the surviving edges.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Domain {
    Lattice,
    Reflecting(u32),
}

impl Domain {
    #[inline]
    pub fn contains(&self, x: &Point) -> bool {
        match self {
            Domain::Lattice => true,
            Domain::Reflecting(k) => x.norm() <= *k,
        }
    }
}

/// Transition probabilities of one site, in the neighbour order of
/// [`Point::neighbors`].
pub type StepDistribution = SmallVec<[(Point, f64); 2 * MAX_DIM]>;

/// The electrical network `pi(x,y) = exp(-(V(x)+V(y))/2)` over a potential.
pub struct ConductanceView<P> {
    potential: P,
    domain: Domain,
}

impl<P: Potential> ConductanceView<P> {
    pub fn new(potential: P) -> Self {
        ConductanceView {
            potential,
            domain: Domain::Lattice,
        }
    }

    pub fn reflecting(potential: P, radius: u32) -> Self {
        ConductanceView {
            potential,
            domain: Domain::Reflecting(radius),
        }
    }

    pub fn domain(&self) -> Domain {
        self.domain
    }

    pub fn dim(&self) -> usize {
        self.potential.dim()
    }

    pub fn potential_source(&self) -> &P {
        &self.potential
    }

    #[inline]
    pub fn potential(&self, x: &Point) -> f64 {
        self.potential.potential(x)
    }

    #[inline]
    pub fn is_edge(&self, x: &Point, y: &Point) -> bool {
        let diff: i32 = x.coords().iter().zip(y.coords()).map(|(a, b)| (a - b).abs()).sum();
        diff == 1 && self.domain.contains(x) && self.domain.contains(y)
    }

    /// `pi(x,y)`; zero when `x`, `y` are not adjacent inside the domain.
    pub fn conductance(&self, x: &Point, y: &Point) -> f64 {
        if !self.is_edge(x, y) {
            return 0.0;
        }
        (-(self.potential(x) + self.potential(y)) / 2.0).exp()
    }

    /// `pi(x) = sum_y pi(x,y)`.
    pub fn capacitance(&self, x: &Point) -> f64 {
        if !self.domain.contains(x) {
            return 0.0;
        }
        let vx = self.potential(x);
        x.neighbors()
            .filter(|y| self.domain.contains(y))
            .map(|y| (-(vx + self.potential(&y)) / 2.0).exp())
            .sum()
    }

    /// `log pi(x)`, stable for deep potentials.
    pub fn log_capacitance(&self, x: &Point) -> f64 {
        let vx = self.potential(x);
        let vs: SmallVec<[f64; 2 * MAX_DIM]> = x
            .neighbors()
            .filter(|y| self.domain.contains(y))
            .map(|y| self.potential(&y))
            .collect();
        let vmin = vs.iter().copied().fold(f64::INFINITY, f64::min);
        let s: f64 = vs.iter().map(|v| (-(v - vmin) / 2.0).exp()).sum();
        -(vx + vmin) / 2.0 + s.ln()
    }

    /// Transition probabilities out of `x`. Computed from potential
    /// differences so that large |V| does not overflow.
    pub fn step_distribution(&self, x: &Point) -> StepDistribution {
        let mut out: StepDistribution = SmallVec::new();
        let mut vmin = f64::INFINITY;
        for y in x.neighbors() {
            if self.domain.contains(&y) {
                let v = self.potential(&y);
                vmin = vmin.min(v);
                out.push((y, v));
            } else {
                out.push((y, f64::INFINITY));
            }
        }
        let mut total = 0.0;
        for (_, w) in out.iter_mut() {
            *w = if w.is_finite() { (-(*w - vmin) / 2.0).exp() } else { 0.0 };
            total += *w;
        }
        for (_, w) in out.iter_mut() {
            *w /= total;
        }
        out
    }

    pub fn step_prob(&self, x: &Point, y: &Point) -> f64 {
        self.step_distribution(x)
            .iter()
            .find(|(z, _)| z == y)
            .map(|(_, p)| *p)
            .unwrap_or(0.0)
    }
}
