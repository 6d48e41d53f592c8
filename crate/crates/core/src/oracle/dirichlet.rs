use serde::{Deserialize, Serialize};

use super::chain::{solve_hitting, FiniteChain};
use super::verify::{Check, Report};
use crate::env::{ConductanceView, Potential};
use crate::error::{Error, Result};
use crate::lattice::{self, Point};

/// `sum_{y in C_{k+1}} sum_{z in C_k, |y-z|=1} exp(-V(y)/2 - V(z)/2)`: each
/// boundary edge of `B_k` counted once.
pub fn cut_conductance<P: Potential>(potential: P, k: u32) -> f64 {
    let view = ConductanceView::new(potential);
    lattice::shell(view.dim(), k)
        .map(|z| {
            z.neighbors()
                .filter(|y| y.norm() == k + 1)
                .map(|y| view.conductance(&z, &y))
                .sum::<f64>()
        })
        .sum()
}

/// `Phi(h_k) = sum_{y,z} pi(y) p(y,z) (h_k(y) - h_k(z))^2` over ordered
/// pairs, for the indicator `h_k` of `B_k`. Twice [`cut_conductance`].
pub fn dirichlet_energy<P: Potential>(potential: P, k: u32) -> f64 {
    2.0 * cut_conductance(potential, k)
}

/// Straight path from `z` along an axis carrying its norm, out to `C_{k+1}`.
pub fn canonical_outward_path(z: &Point, k: u32) -> Vec<Point> {
    let (axis, sign) = leading_axis(z);
    let mut path = vec![*z];
    let mut cur = *z;
    while cur.norm() <= k {
        cur = cur.step(axis, sign);
        path.push(cur);
    }
    path
}

/// Monotone path from `z` (outside `B_k`) to `C_k`: first bring every other
/// coordinate into `[-k, k]` while the leading one holds the norm, then walk
/// the leading coordinate in.
pub fn canonical_inward_path(z: &Point, k: u32) -> Vec<Point> {
    let (axis, sign) = leading_axis(z);
    let mut path = vec![*z];
    let mut cur = *z;
    let k = k as i32;
    for i in (0..z.dim()).filter(|i| *i != axis) {
        while cur.coord(i).abs() > k {
            cur = cur.step(i, -cur.coord(i).signum());
            path.push(cur);
        }
    }
    while cur.coord(axis).abs() > k {
        cur = cur.step(axis, -sign);
        path.push(cur);
    }
    path
}

fn leading_axis(z: &Point) -> (usize, i32) {
    let n = z.norm() as i32;
    let axis = (0..z.dim()).find(|i| z.coord(*i).abs() == n).unwrap_or(0);
    let sign = if z.coord(axis) < 0 { -1 } else { 1 };
    (axis, sign)
}

/// Checks nearest-neighbor steps, self-avoidance, the start, that the end
/// lies in `end_shell` and that every earlier point satisfies `region`.
fn validate_path(path: &[Point], z: &Point, end_shell: u32, region: impl Fn(u32) -> bool) -> Result<()> {
    let bad = |m: &str| Err(Error::PathInvalid(m.into()));
    if path.len() < 2 {
        return bad("path needs at least one step");
    }
    if path[0] != *z {
        return bad("path does not start at z");
    }
    for w in path.windows(2) {
        let dist: i32 = w[0]
            .coords()
            .iter()
            .zip(w[1].coords())
            .map(|(a, b)| (a - b).abs())
            .sum();
        if w[0].dim() != w[1].dim() || dist != 1 {
            return bad("consecutive points are not neighbors");
        }
    }
    let mut seen = path.to_vec();
    seen.sort();
    seen.dedup();
    if seen.len() != path.len() {
        return bad("path is not self-avoiding");
    }
    let (last, body) = path.split_last().expect("non-empty");
    if last.norm() != end_shell {
        return bad("path ends off the target shell");
    }
    if body.iter().any(|p| !region(p.norm())) {
        return bad("path leaves the allowed region");
    }
    Ok(())
}

/// Smallest conductance along a path.
fn path_bottleneck<P: Potential>(view: &ConductanceView<P>, path: &[Point]) -> f64 {
    path.windows(2)
        .map(|w| view.conductance(&w[0], &w[1]))
        .fold(f64::INFINITY, f64::min)
}

/// `P_z(T_z^+ > T_target)` in the chain.
fn escape(chain: &FiniteChain, z: &Point, target: u32) -> Result<f64> {
    let zi = chain
        .index_of(z)
        .ok_or_else(|| Error::InvalidInstance(format!("{z} outside the chain")))?;
    let t: Vec<usize> = (0..chain.len()).filter(|i| chain.site(*i).norm() == target).collect();
    let h = solve_hitting(chain, &t, &[zi])?;
    Ok(chain.row(zi).iter().map(|&(w, p)| p * h.values[w]).sum())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DirichletTerms {
    pub escape: f64,
    pub capacitance: f64,
    pub cut: f64,
    pub path_len: usize,
    pub bottleneck: f64,
}

/// Escape from `z` in `B_k` to `C_{k+1}` against the energy upper bound and
/// the path lower bound. The chain on `B_{k+1}` is exact here since
/// `C_{k+1}` absorbs.
pub fn outward_terms<P: Potential>(potential: P, k: u32, z: &Point, path: Option<&[Point]>) -> Result<DirichletTerms> {
    let zb = z.norm();
    if zb > k {
        return Err(Error::InvalidInstance(format!("{z} lies outside B_{k}")));
    }
    let path = match path {
        Some(p) => p.to_vec(),
        None => canonical_outward_path(z, k),
    };
    validate_path(&path, z, k + 1, |n| n >= zb && n <= k)?;
    let view = ConductanceView::new(&potential);
    let chain = FiniteChain::reflecting(&potential, k + 1);
    Ok(DirichletTerms {
        escape: escape(&chain, z, k + 1)?,
        capacitance: view.capacitance(z),
        cut: cut_conductance(&potential, k),
        path_len: path.len() - 1,
        bottleneck: path_bottleneck(&view, &path),
    })
}

/// Escape from `z` outside `B_k` into `B_k`, computed on `B_{|z|+1}` with
/// reflecting walls. Removing edges only lowers the effective conductance,
/// so a lower bound that holds here holds on the lattice.
pub fn inward_terms<P: Potential>(potential: P, k: u32, z: &Point, path: Option<&[Point]>) -> Result<DirichletTerms> {
    let zb = z.norm();
    if zb <= k {
        return Err(Error::InvalidInstance(format!("{z} lies inside B_{k}")));
    }
    let path = match path {
        Some(p) => p.to_vec(),
        None => canonical_inward_path(z, k),
    };
    validate_path(&path, z, k, |n| n > k && n <= zb)?;
    let view = ConductanceView::new(&potential);
    let chain = FiniteChain::reflecting(&potential, zb + 1);
    Ok(DirichletTerms {
        escape: escape(&chain, z, k)?,
        capacitance: view.capacitance(z),
        cut: cut_conductance(&potential, k),
        path_len: path.len() - 1,
        bottleneck: path_bottleneck(&view, &path),
    })
}

/// Upper bound `Phi(h_k) / (2 pi(z))` and the path lower bound
/// `inf pi(e) / (2 m pi(z))` for `z` in `B_k`; for `z` outside `B_k` only
/// the inward path bound applies. Without a path the canonical one is used.
pub fn dirichlet_bounds<P: Potential>(potential: P, k: u32, z: &Point, path: Option<&[Point]>) -> Result<Report> {
    let inst = format!("d={} k={k} z={z}", z.dim());
    let mut checks = Vec::new();
    if z.norm() <= k {
        let t = outward_terms(&potential, k, z, path)?;
        let energy = 2.0 * t.cut;
        checks.push(Check::upper(
            "escape_upper",
            &inst,
            t.escape,
            energy / (2.0 * t.capacitance),
        ));
        checks.push(Check::info(
            "escape_upper_single_sum",
            &inst,
            t.escape,
            t.cut / (2.0 * t.capacitance),
            1.0,
        ));
        let lower = t.bottleneck / (2.0 * t.path_len as f64 * t.capacitance);
        checks.push(Check::lower("escape_lower_outward", &inst, t.escape, lower));
    } else {
        let t = inward_terms(&potential, k, z, path)?;
        let lower = t.bottleneck / (2.0 * t.path_len as f64 * t.capacitance);
        checks.push(Check::lower("escape_lower_inward", &inst, t.escape, lower));
    }
    Ok(Report { checks })
}
