use nalgebra::{DMatrix, DVector};
use rustc_hash::FxHashMap;
use serde::{Deserialize, Serialize};
use smallvec::SmallVec;

use crate::env::{ConductanceView, Potential};
use crate::error::{Error, Result};
use crate::lattice::{self, Point, MAX_DIM};

type Row = SmallVec<[(usize, f64); 2 * MAX_DIM]>;

/// The walk restricted to the box `B_K` with reflecting walls: edges leaving
/// the box are removed and capacitances recomputed. Sites of `B_{K-1}` keep
/// their lattice capacitance, so constant-capacitance sets there stay
/// constant. Transition rows and reference weights are stored separately so
/// that the dynamics can be perturbed while the weights are not.
#[derive(Clone, Debug)]
pub struct FiniteChain {
    d: usize,
    radius: u32,
    sites: Vec<Point>,
    index: FxHashMap<Point, usize>,
    rows: Vec<Row>,
    weights: Vec<f64>,
}

impl FiniteChain {
    pub fn reflecting<P: Potential>(potential: P, radius: u32) -> Self {
        let d = potential.dim();
        let view = ConductanceView::reflecting(potential, radius);
        Self::build(d, radius, &view, &view)
    }

    /// Rows from `dynamics`, reference weights from `reference`.
    pub fn with_reference<P: Potential, Q: Potential>(dynamics: P, reference: Q, radius: u32) -> Self {
        let d = dynamics.dim();
        let dyn_view = ConductanceView::reflecting(dynamics, radius);
        let ref_view = ConductanceView::reflecting(reference, radius);
        Self::build(d, radius, &dyn_view, &ref_view)
    }

    fn build<P: Potential, Q: Potential>(
        d: usize,
        radius: u32,
        dynamics: &ConductanceView<P>,
        reference: &ConductanceView<Q>,
    ) -> Self {
        let sites: Vec<Point> = lattice::ball(d, radius).collect();
        let index: FxHashMap<Point, usize> = sites.iter().enumerate().map(|(i, p)| (*p, i)).collect();
        let rows = sites
            .iter()
            .map(|x| {
                dynamics
                    .step_distribution(x)
                    .into_iter()
                    .filter(|(_, p)| *p > 0.0)
                    .map(|(y, p)| (index[&y], p))
                    .collect()
            })
            .collect();
        let weights = sites.iter().map(|x| reference.capacitance(x)).collect();
        FiniteChain {
            d,
            radius,
            sites,
            index,
            rows,
            weights,
        }
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn radius(&self) -> u32 {
        self.radius
    }

    pub fn len(&self) -> usize {
        self.sites.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sites.is_empty()
    }

    pub fn sites(&self) -> &[Point] {
        &self.sites
    }

    pub fn site(&self, i: usize) -> Point {
        self.sites[i]
    }

    pub fn index_of(&self, x: &Point) -> Option<usize> {
        self.index.get(x).copied()
    }

    pub fn indices_of(&self, xs: &[Point]) -> Result<Vec<usize>> {
        xs.iter()
            .map(|x| {
                self.index_of(x)
                    .ok_or_else(|| Error::InvalidInstance(format!("site {x} outside the chain")))
            })
            .collect()
    }

    pub fn weight(&self, i: usize) -> f64 {
        self.weights[i]
    }

    pub fn row(&self, i: usize) -> &[(usize, f64)] {
        &self.rows[i]
    }

    pub fn prob(&self, i: usize, j: usize) -> f64 {
        self.rows[i]
            .iter()
            .find(|(k, _)| *k == j)
            .map(|(_, p)| *p)
            .unwrap_or(0.0)
    }

    pub fn max_row_error(&self) -> f64 {
        self.rows
            .iter()
            .map(|r| (r.iter().map(|(_, p)| p).sum::<f64>() - 1.0).abs())
            .fold(0.0, f64::max)
    }

    /// Largest relative violation of `w(x)p(x,y) = w(y)p(y,x)`.
    pub fn detailed_balance_residual(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for (i, r) in self.rows.iter().enumerate() {
            for &(j, p) in r {
                let a = self.weights[i] * p;
                let b = self.weights[j] * self.prob(j, i);
                worst = worst.max((a - b).abs() / a.max(b));
            }
        }
        worst
    }

    pub fn dense(&self) -> DMatrix<f64> {
        let n = self.len();
        let mut m = DMatrix::zeros(n, n);
        for (i, r) in self.rows.iter().enumerate() {
            for &(j, p) in r {
                m[(i, j)] = p;
            }
        }
        m
    }
}

/// `h = 1` on the target, `0` on the avoided set and harmonic elsewhere.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HittingSolution {
    pub target: Vec<usize>,
    pub avoid: Vec<usize>,
    pub values: Vec<f64>,
    /// Max-norm harmonicity residual on free states.
    pub residual: f64,
}

pub fn solve_hitting(chain: &FiniteChain, target: &[usize], avoid: &[usize]) -> Result<HittingSolution> {
    let n = chain.len();
    let mut fixed = vec![None; n];
    for &a in avoid {
        fixed[a] = Some(0.0);
    }
    for &t in target {
        if fixed[t].is_some() {
            return Err(Error::InvalidInstance("target and avoided sets overlap".into()));
        }
        fixed[t] = Some(1.0);
    }
    let free: Vec<usize> = (0..n).filter(|i| fixed[*i].is_none()).collect();
    let mut pos = vec![usize::MAX; n];
    for (k, &i) in free.iter().enumerate() {
        pos[i] = k;
    }
    let m = free.len();
    let mut a = DMatrix::<f64>::identity(m, m);
    let mut b = DVector::<f64>::zeros(m);
    for (k, &i) in free.iter().enumerate() {
        for &(j, p) in chain.row(i) {
            match fixed[j] {
                Some(v) => b[k] += p * v,
                None => a[(k, pos[j])] -= p,
            }
        }
    }
    let sol = a.lu().solve(&b).ok_or(Error::SingularSystem)?;
    let mut values: Vec<f64> = fixed.iter().map(|f| f.unwrap_or(0.0)).collect();
    for (k, &i) in free.iter().enumerate() {
        values[i] = sol[k];
    }
    let residual = free
        .iter()
        .map(|&i| {
            let avg: f64 = chain.row(i).iter().map(|&(j, p)| p * values[j]).sum();
            (values[i] - avg).abs()
        })
        .fold(0.0, f64::max);
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::SingularSystem);
    }
    Ok(HittingSolution {
        target: target.to_vec(),
        avoid: avoid.to_vec(),
        values,
        residual,
    })
}

/// The chain killed on entering `A`: Green's function of the complement and
/// the return kernel `H(z,v) = P_z(X_{T_A^+} = v)` on `A`.
pub struct KilledChain<'c> {
    chain: &'c FiniteChain,
    a: Vec<usize>,
    in_a: Vec<bool>,
    pos: Vec<usize>,
    /// `G = (I - Q)^{-1}` over the complement of `A`.
    green: DMatrix<f64>,
    /// `exits[(w, j)] = P_w(X_{T_A} = a[j])` for `w` in the complement.
    exits: DMatrix<f64>,
}

impl<'c> KilledChain<'c> {
    pub fn new(chain: &'c FiniteChain, a: &[usize]) -> Result<Self> {
        if a.is_empty() {
            return Err(Error::InvalidInstance("empty target set".into()));
        }
        let n = chain.len();
        let mut in_a = vec![false; n];
        for &i in a {
            in_a[i] = true;
        }
        let comp: Vec<usize> = (0..n).filter(|i| !in_a[*i]).collect();
        let mut pos = vec![usize::MAX; n];
        for (k, &i) in comp.iter().enumerate() {
            pos[i] = k;
        }
        let m = comp.len();
        let mut iq = DMatrix::<f64>::identity(m, m);
        let mut to_a = DMatrix::<f64>::zeros(m, a.len());
        for (k, &i) in comp.iter().enumerate() {
            for &(j, p) in chain.row(i) {
                if in_a[j] {
                    let col = a.iter().position(|v| *v == j).expect("member of A");
                    to_a[(k, col)] += p;
                } else {
                    iq[(k, pos[j])] -= p;
                }
            }
        }
        let (green, exits) = if m == 0 {
            (DMatrix::zeros(0, 0), DMatrix::zeros(0, a.len()))
        } else {
            let lu = iq.lu();
            let green = lu.try_inverse().ok_or(Error::SingularSystem)?;
            let exits = &green * &to_a;
            (green, exits)
        };
        if green.iter().any(|v| !v.is_finite()) {
            return Err(Error::SingularSystem);
        }
        Ok(KilledChain {
            chain,
            a: a.to_vec(),
            in_a,
            pos,
            green,
            exits,
        })
    }

    pub fn set(&self) -> &[usize] {
        &self.a
    }

    pub fn contains(&self, i: usize) -> bool {
        self.in_a[i]
    }

    /// `G(w, x)` for `w`, `x` outside `A`: expected visits to `x` at times
    /// `>= 0` before `T_A`, starting from `w`.
    pub fn green(&self, w: usize, x: usize) -> f64 {
        self.green[(self.pos[w], self.pos[x])]
    }

    /// `P_w(X_{T_A} = a[j])`, with `T_A` the entrance time at times `>= 0`.
    fn exit(&self, w: usize, j: usize) -> f64 {
        if self.in_a[w] {
            (self.a[j] == w) as u8 as f64
        } else {
            self.exits[(self.pos[w], j)]
        }
    }

    /// Return kernel `H(z, v)` over `A`, indexed in the order of the set.
    pub fn return_kernel(&self) -> DMatrix<f64> {
        let k = self.a.len();
        let mut h = DMatrix::zeros(k, k);
        for (r, &z) in self.a.iter().enumerate() {
            for &(w, p) in self.chain.row(z) {
                for c in 0..k {
                    h[(r, c)] += p * self.exit(w, c);
                }
            }
        }
        h
    }

    /// `sum_w P(z, w) G(w, x)` for `z` in `A` and `x` outside: the mean local
    /// time of `x` during one excursion from `z`.
    fn excursion_green(&self, z: usize, x: usize) -> f64 {
        self.chain
            .row(z)
            .iter()
            .filter(|(w, _)| !self.in_a[*w])
            .map(|&(w, p)| p * self.green(w, x))
            .sum()
    }

    /// Joint moments of `L = L(x, T_A^+)` and the return point from each
    /// start in `A`: `(m1[z][v], m2[z][v]) = (E_z[L; X_T = v], E_z[L^2; X_T = v])`.
    pub fn excursion_moments(&self, x: usize) -> (DMatrix<f64>, DMatrix<f64>) {
        let k = self.a.len();
        let mut m1 = DMatrix::zeros(k, k);
        let mut m2 = DMatrix::zeros(k, k);
        if self.in_a[x] {
            // L = 1{X_T = x}
            let h = self.return_kernel();
            let c = self.a.iter().position(|v| *v == x).expect("member");
            for r in 0..k {
                m1[(r, c)] = h[(r, c)];
                m2[(r, c)] = h[(r, c)];
            }
            return (m1, m2);
        }
        let gxx = self.green(x, x);
        for (r, &z) in self.a.iter().enumerate() {
            let g = self.excursion_green(z, x);
            for c in 0..k {
                let hv = self.exit(x, c);
                m1[(r, c)] = g * hv;
                m2[(r, c)] = g * hv * (2.0 * gxx - 1.0);
            }
        }
        (m1, m2)
    }

    /// `E_z L(x, T_{A,l})` and `E_z L(x, T_{A,l})^2` for each `z` in `A`,
    /// composed excursion by excursion with the strong Markov property.
    pub fn multi_excursion_moments(&self, x: usize, l: usize) -> (DVector<f64>, DVector<f64>) {
        let k = self.a.len();
        let h = self.return_kernel();
        let (m1, m2) = self.excursion_moments(x);
        let ones = DVector::from_element(k, 1.0);
        let e1 = &m1 * &ones;
        let e2 = &m2 * &ones;
        let mut first = DVector::zeros(k);
        let mut second = DVector::zeros(k);
        for _ in 0..l {
            let next_second = &e2 + 2.0 * (&m1 * &first) + &h * &second;
            let next_first = &e1 + &h * &first;
            first = next_first;
            second = next_second;
        }
        (first, second)
    }
}
