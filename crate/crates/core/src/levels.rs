//! Level sets of the capacitance on a shell. A site `x` on `C_k` is
//! described by its signature: the offsets `a_0 = |x| + delta_x - k` and
//! `a_l = |y_l| + delta_{y_l} - k` over the 2d neighbours, with the
//! neighbour offsets sorted. The capacitance is then
//! `pi = exp(-S_{k+a_0}/2) * sum_l exp(-S_{k+a_l}/2)`.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use smallvec::SmallVec;

use crate::env::{ConductanceView, DeltaLaw, EnvironmentField, Series};
use crate::error::{Error, Result};
use crate::lattice::{self, Point, MAX_DIM};

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Signature {
    pub a0: i32,
    /// Sorted neighbour offsets.
    pub neighbors: SmallVec<[i32; 2 * MAX_DIM]>,
}

impl Signature {
    pub fn new(a0: i32, mut neighbors: SmallVec<[i32; 2 * MAX_DIM]>) -> Self {
        neighbors.sort_unstable();
        Signature { a0, neighbors }
    }

    /// Signature of a site in a concrete environment. Offsets are clamped so
    /// that `k + a >= 0`, matching `V = S_0` for negative indices.
    pub fn of_site(field: &EnvironmentField, x: &Point) -> Self {
        let k = x.norm() as i64;
        let off = |p: &Point| (field.potential_index(p) - k) as i32;
        Signature::new(off(x), x.neighbors().map(|y| off(&y)).collect())
    }

    /// Largest absolute offset.
    pub fn max_abs_offset(&self) -> i32 {
        self.neighbors
            .iter()
            .chain(std::iter::once(&self.a0))
            .map(|a| a.abs())
            .max()
            .unwrap_or(0)
    }

    /// Capacitance value at level `k` of a series, with every exponent
    /// shifted by `reference`: `exp(-(S_{k+a0}-ref)/2) sum exp(-(S_{k+a}-ref)/2)`.
    /// Equal offsets are grouped and weighted by their multiplicity.
    pub fn evaluate_relative<S: Series + ?Sized>(&self, s: &S, k: i64, reference: f64) -> f64 {
        let head = (-(s.s(k + self.a0 as i64) - reference) / 2.0).exp();
        let mut sum = 0.0;
        let mut i = 0;
        let nb = &self.neighbors;
        while i < nb.len() {
            let mut j = i + 1;
            while j < nb.len() && nb[j] == nb[i] {
                j += 1;
            }
            let mult = (j - i) as f64;
            sum += mult * (-(s.s(k + nb[i] as i64) - reference) / 2.0).exp();
            i = j;
        }
        head * sum
    }

    pub fn evaluate<S: Series + ?Sized>(&self, s: &S, k: i64) -> f64 {
        self.evaluate_relative(s, k, 0.0)
    }
}

/// One level set `C_k^j`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LevelClass {
    pub index: usize,
    pub signature: Signature,
    pub value: f64,
    pub count: u64,
    pub face_interior_count: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub members: Option<Vec<Point>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LevelSetPartition {
    pub k: u32,
    pub d: usize,
    pub total: u64,
    /// Classes ordered by signature.
    pub classes: Vec<LevelClass>,
    /// Number of distinct capacitance values among the classes. Two
    /// signatures can give the same value for particular S.
    pub distinct_values: usize,
    /// Largest relative gap between a member's directly computed
    /// capacitance and its class value, when checked.
    pub max_value_mismatch: Option<f64>,
}

#[derive(Clone, Copy, Debug, Default)]
pub struct PartitionOptions {
    pub keep_members: bool,
    pub check_values: bool,
}

impl LevelSetPartition {
    pub fn class_of(&self, signature: &Signature) -> Option<&LevelClass> {
        self.classes
            .binary_search_by(|c| c.signature.cmp(signature))
            .ok()
            .map(|i| &self.classes[i])
    }
}

pub fn partition_shell(field: &EnvironmentField, k: u32, opts: PartitionOptions) -> LevelSetPartition {
    let mut groups: BTreeMap<Signature, (u64, u64, Vec<Point>)> = BTreeMap::new();
    let view = ConductanceView::new(field);
    let mut mismatch: f64 = 0.0;
    let mut total = 0;
    for x in lattice::shell(field.dim(), k) {
        let sig = Signature::of_site(field, &x);
        if opts.check_values {
            let direct = view.capacitance(&x);
            let via = sig.evaluate(field, k as i64);
            mismatch = mismatch.max((direct - via).abs() / direct.abs().max(f64::MIN_POSITIVE));
        }
        let face = x.is_face_interior() as u64;
        let e = groups.entry(sig).or_insert((0, 0, Vec::new()));
        e.0 += 1;
        e.1 += face;
        if opts.keep_members {
            e.2.push(x);
        }
        total += 1;
    }
    let classes: Vec<LevelClass> = groups
        .into_iter()
        .enumerate()
        .map(|(index, (signature, (count, face, members)))| LevelClass {
            index,
            value: signature.evaluate(field, k as i64),
            signature,
            count,
            face_interior_count: face,
            members: opts.keep_members.then_some(members),
        })
        .collect();
    let mut values: Vec<f64> = classes.iter().map(|c| c.value).collect();
    values.sort_by(f64::total_cmp);
    values.dedup();
    LevelSetPartition {
        k,
        d: field.dim(),
        total,
        distinct_values: values.len(),
        classes,
        max_value_mismatch: opts.check_values.then_some(mismatch),
    }
}

/// Empirical frequency of one face-interior signature.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProportionEntry {
    pub signature: Signature,
    pub count: u64,
    pub p_hat: f64,
    pub std_error: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProportionEstimate {
    pub shells: Vec<u32>,
    pub sites: u64,
    pub classes: Vec<ProportionEntry>,
}

/// Frequencies of face-interior signatures pooled over the given shells.
/// Shells must satisfy `k > max|delta| + 1` so that no offset is clamped.
pub fn estimate_proportions(field: &EnvironmentField, shells: &[u32]) -> Result<ProportionEstimate> {
    let floor = field.spec().delta_law.max_abs() as u32 + 1;
    if let Some(k) = shells.iter().find(|k| **k <= floor) {
        return Err(Error::InvalidConfig(format!(
            "shell {k} is too small for an unclamped proportion estimate (need > {floor})"
        )));
    }
    let mut counts: BTreeMap<Signature, u64> = BTreeMap::new();
    let mut sites = 0u64;
    for &k in shells {
        for x in lattice::shell(field.dim(), k).filter(Point::is_face_interior) {
            *counts.entry(Signature::of_site(field, &x)).or_insert(0) += 1;
            sites += 1;
        }
    }
    let n = sites.max(1) as f64;
    let classes = counts
        .into_iter()
        .map(|(signature, count)| {
            let p = count as f64 / n;
            ProportionEntry {
                signature,
                count,
                p_hat: p,
                std_error: (p * (1.0 - p) / n).sqrt(),
            }
        })
        .collect();
    Ok(ProportionEstimate {
        shells: shells.to_vec(),
        sites,
        classes,
    })
}

/// A face-interior class with its probability under the delta law.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelClass {
    pub signature: Signature,
    pub probability: f64,
}

/// The list of face-interior classes `(p_j, signature_j)` shared by the
/// quenched comparator and the annealed limit.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassModel {
    pub d: usize,
    pub classes: Vec<ModelClass>,
}

/// Refuse enumerations beyond this many delta configurations.
const MAX_ENUMERATION: u64 = 50_000_000;

impl ClassModel {
    /// Exact class probabilities by brute force over all delta values of a
    /// face-interior site and its 2d neighbours: the site itself, the outer
    /// neighbour (offset `+1`), the inner neighbour (offset `-1`) and the
    /// `2d-2` lateral neighbours on the same shell (offset 0).
    pub fn exact(d: usize, delta_law: &DeltaLaw) -> Result<Self> {
        delta_law.validate()?;
        let support = delta_law.support();
        let slots = 2 * d + 1;
        let total = (support.len() as u64).checked_pow(slots as u32).unwrap_or(u64::MAX);
        if total > MAX_ENUMERATION {
            return Err(Error::InvalidConfig(format!(
                "{total} delta configurations is too many to enumerate"
            )));
        }
        let mut base: SmallVec<[i32; 2 * MAX_DIM + 1]> = SmallVec::new();
        base.push(0);
        base.push(1);
        base.push(-1);
        base.extend(std::iter::repeat_n(0, 2 * d - 2));
        let mut probs: BTreeMap<Signature, f64> = BTreeMap::new();
        let mut digits = vec![0usize; slots];
        loop {
            let mut p = 1.0;
            let offs: SmallVec<[i32; 2 * MAX_DIM + 1]> = digits
                .iter()
                .zip(&base)
                .map(|(&i, b)| {
                    p *= support[i].1;
                    b + support[i].0
                })
                .collect();
            let sig = Signature::new(offs[0], offs[1..].iter().copied().collect());
            *probs.entry(sig).or_insert(0.0) += p;
            // odometer
            let mut pos = 0;
            loop {
                if pos == slots {
                    let classes = probs
                        .into_iter()
                        .map(|(signature, probability)| ModelClass { signature, probability })
                        .collect();
                    return Ok(ClassModel { d, classes });
                }
                digits[pos] += 1;
                if digits[pos] < support.len() {
                    break;
                }
                digits[pos] = 0;
                pos += 1;
            }
        }
    }

    pub fn from_estimate(d: usize, est: &ProportionEstimate) -> Self {
        ClassModel {
            d,
            classes: est
                .classes
                .iter()
                .map(|c| ModelClass {
                    signature: c.signature.clone(),
                    probability: c.p_hat,
                })
                .collect(),
        }
    }

    pub fn max_abs_offset(&self) -> i32 {
        self.classes
            .iter()
            .map(|c| c.signature.max_abs_offset())
            .max()
            .unwrap_or(0)
    }

    pub fn total_probability(&self) -> f64 {
        self.classes.iter().map(|c| c.probability).sum()
    }

    pub fn position(&self, sig: &Signature) -> Option<usize> {
        self.classes.binary_search_by(|c| c.signature.cmp(sig)).ok()
    }
}

/// A face-interior class under Bernoulli(p) offsets, indexed by
/// `delta_x = i0`, outer offset `i1 = 1 + delta`, inner offset
/// `i2 = -1 + delta` and the number `cnt` of lateral neighbours with delta 1.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BernoulliClass {
    pub i0: i32,
    pub i1: i32,
    pub i2: i32,
    pub cnt: u32,
    pub probability: f64,
    pub signature: Signature,
}

fn binomial(n: u32, k: u32) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Closed-form list of the Bernoulli face-interior classes.
pub fn bernoulli_enumeration(d: usize, p: f64) -> Vec<BernoulliClass> {
    let q = 1.0 - p;
    let bern = |one: bool| if one { p } else { q };
    let lateral = 2 * d as u32 - 2;
    let mut out = Vec::new();
    for i0 in 0..=1 {
        for i1 in 1..=2 {
            for i2 in -1..=0 {
                for cnt in 0..=lateral {
                    let probability = bern(i0 == 1)
                        * bern(i1 == 2)
                        * bern(i2 == 0)
                        * binomial(lateral, cnt)
                        * p.powi(cnt as i32)
                        * q.powi((lateral - cnt) as i32);
                    let mut nb: SmallVec<[i32; 2 * MAX_DIM]> = SmallVec::new();
                    nb.push(i1);
                    nb.push(i2);
                    nb.extend(std::iter::repeat_n(1, cnt as usize));
                    nb.extend(std::iter::repeat_n(0, (lateral - cnt) as usize));
                    out.push(BernoulliClass {
                        i0,
                        i1,
                        i2,
                        cnt,
                        probability,
                        signature: Signature::new(i0, nb),
                    });
                }
            }
        }
    }
    out
}

/// The class count stated alongside the closed-form Bernoulli limit.
pub fn stated_bernoulli_class_count(d: usize) -> usize {
    8 * (2 * d - 2)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::{EnvironmentSpec, IncrementLaw, ListedSeries};
    use proptest::prelude::*;
    use std::collections::HashSet;

    fn field(seed: u64, delta: DeltaLaw, d: usize) -> EnvironmentField {
        EnvironmentField::new(EnvironmentSpec {
            d,
            increment_law: IncrementLaw::Rademacher,
            delta_law: delta,
            seed,
        })
        .unwrap()
    }

    #[test]
    fn zero_delta_two_dimensions_has_face_and_corner_classes() {
        let f = field(3, DeltaLaw::Zero, 2);
        for k in 2..12 {
            let part = partition_shell(
                &f,
                k,
                PartitionOptions {
                    keep_members: true,
                    check_values: true,
                },
            );
            assert_eq!(part.classes.len(), 2, "k = {k}");
            let mut counts: Vec<u64> = part.classes.iter().map(|c| c.count).collect();
            counts.sort();
            assert_eq!(counts, vec![4, 4 * (2 * k as u64 - 1)]);
            assert!(part.max_value_mismatch.unwrap() < 1e-12);
        }
    }

    #[test]
    fn signature_evaluation_groups_equal_offsets() {
        let s = ListedSeries {
            start: -3,
            values: vec![0.5, -1.0, 2.0, 0.0, 1.0, -2.0, 3.0],
        };
        let sig = Signature::new(0, SmallVec::from_slice(&[1, 0, 0, -1]));
        let e = |k: i64| (-s.s(k) / 2.0).exp();
        let expect = e(1) * (2.0 * e(1) + e(0) + e(2));
        assert!((sig.evaluate(&s, 1) - expect).abs() < 1e-15);
    }

    #[test]
    fn relative_evaluation_is_a_rescaling() {
        let f = field(5, DeltaLaw::Bernoulli { p: 0.5 }, 2);
        let x = Point::new(&[9, 4]);
        let sig = Signature::of_site(&f, &x);
        let r: f64 = 3.0;
        let a = sig.evaluate(&f, 9) * r.exp();
        let b = sig.evaluate_relative(&f, 9, r);
        assert!((a - b).abs() < 1e-12 * a);
    }

    #[test]
    fn bernoulli_enumeration_counts_and_probabilities() {
        for d in 2..=4 {
            let classes = bernoulli_enumeration(d, 0.3);
            assert_eq!(classes.len(), 8 * (2 * d - 1));
            let sigs: HashSet<&Signature> = classes.iter().map(|c| &c.signature).collect();
            assert_eq!(sigs.len(), classes.len(), "signatures are distinct");
            let total: f64 = classes.iter().map(|c| c.probability).sum();
            assert!((total - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn brute_force_agrees_with_closed_form_bernoulli() {
        for d in 1..=3 {
            let p = 0.37;
            let model = ClassModel::exact(d, &DeltaLaw::Bernoulli { p }).unwrap();
            let closed = bernoulli_enumeration(d, p);
            assert_eq!(model.classes.len(), closed.len());
            for c in &closed {
                let j = model.position(&c.signature).expect("class present");
                assert!((model.classes[j].probability - c.probability).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn zero_delta_model_is_a_single_class() {
        let m = ClassModel::exact(2, &DeltaLaw::Zero).unwrap();
        assert_eq!(m.classes.len(), 1);
        assert_eq!(
            m.classes[0].signature,
            Signature::new(0, SmallVec::from_slice(&[-1, 0, 0, 1]))
        );
        assert_eq!(m.classes[0].probability, 1.0);
    }

    #[test]
    fn proportions_converge_to_exact_model() {
        let f = field(17, DeltaLaw::Bernoulli { p: 0.5 }, 2);
        let shells: Vec<u32> = (200..260).collect();
        let est = estimate_proportions(&f, &shells).unwrap();
        let model = ClassModel::exact(2, &DeltaLaw::Bernoulli { p: 0.5 }).unwrap();
        assert_eq!(est.classes.len(), model.classes.len());
        let sum: f64 = est.classes.iter().map(|c| c.p_hat).sum();
        assert!((sum - 1.0).abs() < 1e-12);
        for e in &est.classes {
            let p = model.classes[model.position(&e.signature).unwrap()].probability;
            // Neighbouring face sites share deltas, so allow a wide band.
            assert!((e.p_hat - p).abs() < 8.0 * e.std_error.max(1e-3), "{e:?} vs {p}");
        }
        assert!(estimate_proportions(&f, &[1]).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn partition_is_exhaustive_and_consistent(seed in any::<u64>(), k in 0u32..9, d in 1usize..=3) {
            let f = field(seed, DeltaLaw::Bernoulli { p: 0.5 }, d);
            let part = partition_shell(&f, k, PartitionOptions { keep_members: true, check_values: true });
            prop_assert_eq!(part.total, lattice::shell_size(d, k));
            let sum: u64 = part.classes.iter().map(|c| c.count).sum();
            prop_assert_eq!(sum, part.total);
            let mut seen = HashSet::new();
            for c in &part.classes {
                prop_assert!(c.value > 0.0);
                for x in c.members.as_ref().unwrap() {
                    prop_assert!(seen.insert(*x));
                    prop_assert_eq!(x.norm(), k);
                }
            }
            prop_assert!(part.max_value_mismatch.unwrap() < 1e-12);
        }
    }
}
