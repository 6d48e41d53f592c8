use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::chain::{solve_hitting, FiniteChain, KilledChain};
use crate::error::{Error, Result};
use crate::lattice::Point;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckKind {
    /// `|lhs - rhs| / scale <= tol`
    Equality,
    /// `lhs <= rhs`
    UpperBound,
    /// `lhs >= rhs`
    LowerBound,
    /// Reported for reference, never fails.
    Informational,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub instance: String,
    pub kind: CheckKind,
    pub lhs: f64,
    pub rhs: f64,
    /// Relative gap for equalities, signed slack (`>= 0` is good) for bounds.
    pub gap: f64,
    pub pass: bool,
}

pub const EQUALITY_TOL: f64 = 1e-9;
/// Rounding allowance for bounds, relative to the bound.
const BOUND_TOL: f64 = 1e-12;

impl Check {
    pub fn equality(name: &str, instance: &str, lhs: f64, rhs: f64, scale: f64) -> Self {
        let gap = (lhs - rhs).abs() / scale.abs().max(f64::MIN_POSITIVE);
        Check {
            name: name.into(),
            instance: instance.into(),
            kind: CheckKind::Equality,
            lhs,
            rhs,
            gap,
            pass: gap <= EQUALITY_TOL,
        }
    }

    pub fn upper(name: &str, instance: &str, lhs: f64, rhs: f64) -> Self {
        let gap = rhs - lhs;
        Check {
            name: name.into(),
            instance: instance.into(),
            kind: CheckKind::UpperBound,
            lhs,
            rhs,
            gap,
            pass: gap >= -BOUND_TOL * rhs.abs().max(1.0),
        }
    }

    pub fn lower(name: &str, instance: &str, lhs: f64, rhs: f64) -> Self {
        let gap = lhs - rhs;
        Check {
            name: name.into(),
            instance: instance.into(),
            kind: CheckKind::LowerBound,
            lhs,
            rhs,
            gap,
            pass: gap >= -BOUND_TOL * rhs.abs().max(1.0),
        }
    }

    pub fn info(name: &str, instance: &str, lhs: f64, rhs: f64, scale: f64) -> Self {
        let gap = (lhs - rhs).abs() / scale.abs().max(f64::MIN_POSITIVE);
        Check {
            name: name.into(),
            instance: instance.into(),
            kind: CheckKind::Informational,
            lhs,
            rhs,
            gap,
            pass: true,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub checks: Vec<Check>,
}

impl Report {
    pub fn pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn failures(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.pass)
    }

    pub fn extend(&mut self, other: Report) {
        self.checks.extend(other.checks);
    }

    pub fn named<'a>(&'a self, name: &'a str) -> impl Iterator<Item = &'a Check> + 'a {
        self.checks.iter().filter(move |c| c.name == name)
    }
}

/// Common weight of a set, or an error if the weights differ.
fn constant_weight(chain: &FiniteChain, a: &[usize]) -> Result<f64> {
    let w = chain.weight(a[0]);
    if a.iter().any(|&i| (chain.weight(i) - w).abs() > 1e-12 * w) {
        return Err(Error::InvalidInstance("set does not have constant capacitance".into()));
    }
    Ok(w)
}

fn label(chain: &FiniteChain, a: &[usize], x: usize) -> String {
    format!(
        "d={} K={} |A|={} A0={} x={}",
        chain.dim(),
        chain.radius(),
        a.len(),
        chain.site(a[0]),
        chain.site(x)
    )
}

/// Sums of mean local times over starts in `A`: the first two identities
/// for one and several excursions.
pub fn verify_moment_identities(chain: &FiniteChain, a: &[usize], x: usize, a2: Option<&[usize]>) -> Result<Report> {
    let wa = constant_weight(chain, a)?;
    let killed = KilledChain::new(chain, a)?;
    let inst = label(chain, a, x);
    let mut report = Report::default();
    let rhs1 = chain.weight(x) / wa;

    let single = |t: usize| -> f64 { killed.multi_excursion_moments(t, 1).0.sum() };
    let one = single(x);
    report
        .checks
        .push(Check::equality("excursion_mean", &inst, one, rhs1, rhs1));
    // Same quantity through hitting probabilities:
    // E_z L(x, T_A^+) = P_z(T_x < T_A^+) / P_x(T_x^+ > T_A^+).
    if !killed.contains(x) {
        let to_x = solve_hitting(chain, &[x], a)?;
        let escape = solve_hitting(chain, a, &[x])?;
        let p_esc: f64 = chain.row(x).iter().map(|&(w, p)| p * escape.values[w]).sum();
        let via: f64 = a
            .iter()
            .map(|&z| chain.row(z).iter().map(|&(w, p)| p * to_x.values[w]).sum::<f64>() / p_esc)
            .sum();
        report
            .checks
            .push(Check::equality("excursion_mean_hitting_route", &inst, via, rhs1, rhs1));
    }
    for l in [1usize, 2, 5] {
        let lhs = killed.multi_excursion_moments(x, l).0.sum();
        let rhs = l as f64 * rhs1;
        report
            .checks
            .push(Check::equality(&format!("excursion_mean_l{l}"), &inst, lhs, rhs, rhs));
        if l == 5 {
            report
                .checks
                .push(Check::equality("excursion_mean_linearity", &inst, lhs, 5.0 * one, lhs));
        }
    }
    if let Some(b) = a2 {
        let wb = constant_weight(chain, b)?;
        for l in [1usize, 2, 5] {
            let lhs: f64 = b.iter().map(|&v| killed.multi_excursion_moments(v, l).0.sum()).sum();
            let rhs = l as f64 * b.len() as f64 * wb / wa;
            let name = if l == 1 {
                "excursion_mean_cross".to_string()
            } else {
                format!("excursion_mean_cross_l{l}")
            };
            report.checks.push(Check::equality(&name, &inst, lhs, rhs, rhs));
        }
    }
    Ok(report)
}

/// Exact values behind the variance bound.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VarianceTerms {
    /// `sum_y E_y[(L - pi(z)/(|A| pi(x)))^2]`
    pub centered: f64,
    /// `sum_y E_y[L^2]`
    pub second_moment: f64,
    /// `P_z(T_z^+ > T_A)`
    pub escape: f64,
    /// `pi(z) / pi(x)`
    pub ratio: f64,
}

pub fn variance_terms(chain: &FiniteChain, a: &[usize], z: usize) -> Result<VarianceTerms> {
    let wa = constant_weight(chain, a)?;
    let killed = KilledChain::new(chain, a)?;
    if killed.contains(z) {
        return Err(Error::InvalidInstance("z must lie outside A".into()));
    }
    let ratio = chain.weight(z) / wa;
    let (first, second) = killed.multi_excursion_moments(z, 1);
    let c = ratio / a.len() as f64;
    let centered: f64 = first
        .iter()
        .zip(second.iter())
        .map(|(m1, m2)| m2 - 2.0 * c * m1 + c * c)
        .sum();
    let esc = solve_hitting(chain, a, &[z])?;
    let escape: f64 = chain.row(z).iter().map(|&(w, p)| p * esc.values[w]).sum();
    Ok(VarianceTerms {
        centered,
        second_moment: second.sum(),
        escape,
        ratio,
    })
}

/// The variance bound, the exact second-moment identity
/// `sum_y E_y L^2 = (pi(z)/pi(x)) (2/P - 1)`, and (for reference) the
/// two-term expression `(pi(z)/pi(x)) (1/P + 1)`.
pub fn verify_variance_bound(chain: &FiniteChain, a: &[usize], z: usize) -> Result<Report> {
    let t = variance_terms(chain, a, z)?;
    let inst = label(chain, a, z);
    let bound = 2.0 * t.ratio / t.escape;
    let exact = t.ratio * (2.0 / t.escape - 1.0);
    let stated = t.ratio * (1.0 / t.escape + 1.0);
    Ok(Report {
        checks: vec![
            Check::upper("variance_bound", &inst, t.centered, bound),
            Check::equality("variance_second_moment", &inst, t.second_moment, exact, exact),
            Check::info("variance_two_term_stated", &inst, t.second_moment, stated, stated),
        ],
    })
}

/// As [`verify_variance_bound`] with `z` given as a site. A site outside the
/// chain is never visited, so its local time vanishes and the bound holds.
pub fn verify_variance_bound_at(chain: &FiniteChain, a: &[usize], z: &Point) -> Result<Report> {
    match chain.index_of(z) {
        Some(i) => verify_variance_bound(chain, a, i),
        None => {
            let inst = format!("{} z={z} (unreachable)", label(chain, a, a[0]));
            Ok(Report {
                checks: vec![Check::upper("variance_bound", &inst, 0.0, f64::INFINITY)],
            })
        }
    }
}

/// Centered excursion means `E_v[L(x,T_A^+)] - e_x/|A|` over `v` in `A`.
fn centered_means(killed: &KilledChain, x: usize) -> (DVector<f64>, f64) {
    let means = killed.multi_excursion_moments(x, 1).0;
    let e = means.sum();
    let k = means.len() as f64;
    (means.map(|m| m - e / k), e)
}

/// Exact values behind the second-moment decomposition.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecompositionTerms {
    /// `sum_z E_z[(L(x, T_{A,l}) - l e_x/|A|)^2]`, by excursion composition.
    pub lhs: f64,
    /// `l` times the single-excursion centered second moment.
    pub diagonal: f64,
    /// `2 sum_{i=1}^{l-1} (l-i) E^T H^{i-1} E`
    pub cross_shifted: f64,
    /// `2 sum_{i=1}^{l-1} (l-i) E^T H^i E`
    pub cross_stated: f64,
    /// `sum_v E_v`, zero by the first identities.
    pub centered_sum: f64,
    pub e_x: f64,
}

pub fn decomposition_terms(chain: &FiniteChain, a: &[usize], x: usize, l: usize) -> Result<DecompositionTerms> {
    constant_weight(chain, a)?;
    let killed = KilledChain::new(chain, a)?;
    if killed.contains(x) {
        return Err(Error::InvalidInstance("x must lie outside A".into()));
    }
    let k = a.len() as f64;
    let (ebar, e_x) = centered_means(&killed, x);
    let (first, second) = killed.multi_excursion_moments(x, l);
    let c = l as f64 * e_x / k;
    let lhs: f64 = first
        .iter()
        .zip(second.iter())
        .map(|(m1, m2)| m2 - 2.0 * c * m1 + c * c)
        .sum();
    let (f1, s1) = killed.multi_excursion_moments(x, 1);
    let c1 = e_x / k;
    let single: f64 = f1
        .iter()
        .zip(s1.iter())
        .map(|(m1, m2)| m2 - 2.0 * c1 * m1 + c1 * c1)
        .sum();
    let h = killed.return_kernel();
    let mut power = DMatrix::<f64>::identity(a.len(), a.len());
    let (mut shifted, mut stated) = (0.0, 0.0);
    for i in 1..l {
        let w = 2.0 * (l - i) as f64;
        shifted += w * ebar.dot(&(&power * &ebar));
        power = &power * &h;
        stated += w * ebar.dot(&(&power * &ebar));
    }
    Ok(DecompositionTerms {
        lhs,
        diagonal: l as f64 * single,
        cross_shifted: shifted,
        cross_stated: stated,
        centered_sum: ebar.sum(),
        e_x,
    })
}

/// The second-moment decomposition over `l` excursions. The stated form
/// pairs consecutive centered means through `H^i`; the exact expansion
/// uses `H^{i-1}`. Both are checked.
pub fn verify_second_moment_decomposition(chain: &FiniteChain, a: &[usize], x: usize, l: usize) -> Result<Report> {
    let t = decomposition_terms(chain, a, x, l)?;
    let inst = format!("{} l={l}", label(chain, a, x));
    let scale = t.lhs.abs().max(t.diagonal.abs());
    Ok(Report {
        checks: vec![
            Check::equality("decomposition_stated", &inst, t.lhs, t.diagonal + t.cross_stated, scale),
            Check::equality("decomposition_exact", &inst, t.lhs, t.diagonal + t.cross_shifted, scale),
            Check::equality("centered_means_sum", &inst, t.centered_sum, 0.0, t.e_x),
        ],
    })
}

/// Largest `|P_{u0}(X_{T_{A,l}} = u) - 1/|A||` and the average over `u0`.
pub fn mixing_deviation(chain: &FiniteChain, a: &[usize], l: usize) -> Result<(f64, f64)> {
    constant_weight(chain, a)?;
    let killed = KilledChain::new(chain, a)?;
    let h = killed.return_kernel();
    let k = a.len();
    let mut p = DMatrix::<f64>::identity(k, k);
    for _ in 0..l {
        p = &p * &h;
    }
    let u = 1.0 / k as f64;
    let worst = p.iter().map(|v| (v - u).abs()).fold(0.0, f64::max);
    let avg = (0..k)
        .map(|c| (p.column(c).sum() / k as f64 - u).abs())
        .fold(0.0, f64::max);
    Ok((worst, avg))
}

pub fn verify_mixing_lemma(chain: &FiniteChain, a: &[usize], l: usize) -> Result<Report> {
    let (worst, avg) = mixing_deviation(chain, a, l)?;
    let inst = format!("{} l={l}", label(chain, a, a[0]));
    let bound = (1.0 - 1.0 / a.len() as f64).powi(l as i32);
    Ok(Report {
        checks: vec![
            Check::upper("mixing_bound", &inst, worst, bound),
            Check::equality("mixing_uniform_start", &inst, avg, 0.0, 1.0),
        ],
    })
}
