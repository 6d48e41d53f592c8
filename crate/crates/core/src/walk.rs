//! The reversible walk, its local-time ledger and hitting-time records.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rustc_hash::{FxHashMap, FxHashSet};
use serde::{Deserialize, Serialize};
use smallvec::SmallVec;

use crate::env::{ConductanceView, Potential};
use crate::error::{Error, Result};
use crate::lattice::Point;

/// Cached cumulative step distribution of one site. The last entry (always
/// 1) is implicit.
type Cdf = SmallVec<[f64; 4]>;

/// Sites beyond this many cached kernels trigger a cache reset.
const KERNEL_CACHE_LIMIT: usize = 1 << 22;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct WalkState {
    pub position: Point,
    pub steps: u64,
}

/// Per-site and per-shell visit counts. Local time counts visits at steps
/// `1..=n`; the starting position at step 0 is not counted.
#[derive(Clone, Debug, Default)]
pub struct LocalTimeLedger {
    sites: FxHashMap<Point, u64>,
    shells: Vec<u64>,
    total: u64,
}

impl LocalTimeLedger {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn record(&mut self, x: &Point) {
        *self.sites.entry(*x).or_insert(0) += 1;
        let k = x.norm() as usize;
        if k >= self.shells.len() {
            self.shells.resize(k + 1, 0);
        }
        self.shells[k] += 1;
        self.total += 1;
    }

    pub fn site(&self, x: &Point) -> u64 {
        self.sites.get(x).copied().unwrap_or(0)
    }

    pub fn shell(&self, k: u32) -> u64 {
        self.shells.get(k as usize).copied().unwrap_or(0)
    }

    /// Shell counts indexed by k, trailing empty shells trimmed.
    pub fn shells(&self) -> &[u64] {
        &self.shells
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn visited_sites(&self) -> usize {
        self.sites.len()
    }

    pub fn sites(&self) -> impl Iterator<Item = (&Point, &u64)> {
        self.sites.iter()
    }

    /// Local time of a set of sites.
    pub fn set<'a>(&self, xs: impl IntoIterator<Item = &'a Point>) -> u64 {
        xs.into_iter().map(|x| self.site(x)).sum()
    }

    /// The `n` most visited sites, ties broken by point order.
    pub fn top_sites(&self, n: usize) -> Vec<(Point, u64)> {
        let mut v: Vec<(Point, u64)> = self.sites.iter().map(|(p, c)| (*p, *c)).collect();
        v.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
        v.truncate(n);
        v
    }

    pub fn merge(&mut self, other: &LocalTimeLedger) {
        for (x, c) in &other.sites {
            *self.sites.entry(*x).or_insert(0) += c;
        }
        if other.shells.len() > self.shells.len() {
            self.shells.resize(other.shells.len(), 0);
        }
        for (a, b) in self.shells.iter_mut().zip(&other.shells) {
            *a += b;
        }
        self.total += other.total;
    }

    /// Site counts, shell counts and the total agree with one another.
    pub fn is_consistent(&self) -> bool {
        let mut shells = vec![0u64; self.shells.len()];
        let mut total = 0;
        for (x, c) in &self.sites {
            let k = x.norm() as usize;
            if k >= shells.len() {
                return false;
            }
            shells[k] += c;
            total += c;
        }
        shells == self.shells && total == self.total && self.shells.iter().sum::<u64>() == total
    }
}

/// A set the walk can be asked to hit.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum HittingTarget {
    Site {
        point: Point,
    },
    Shell {
        k: u32,
    },
    /// Sites with `|x| > k`.
    OutsideBall {
        k: u32,
    },
    Set {
        points: FxHashSet<Point>,
    },
}

impl HittingTarget {
    #[inline]
    pub fn contains(&self, x: &Point) -> bool {
        match self {
            HittingTarget::Site { point } => point == x,
            HittingTarget::Shell { k } => x.norm() == *k,
            HittingTarget::OutsideBall { k } => x.norm() > *k,
            HittingTarget::Set { points } => points.contains(x),
        }
    }
}

/// Successive hitting times `T_{A,1} < T_{A,2} < ...` of a target, recorded
/// up to a requested number of occurrences. `T_{A,0} = 0`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HittingRecord {
    pub target: HittingTarget,
    pub wanted: usize,
    pub times: Vec<u64>,
}

impl HittingRecord {
    pub fn new(target: HittingTarget, wanted: usize) -> Self {
        HittingRecord {
            target,
            wanted,
            times: Vec::new(),
        }
    }

    #[inline]
    fn observe(&mut self, x: &Point, step: u64) {
        if self.times.len() < self.wanted && self.target.contains(x) {
            self.times.push(step);
        }
    }

    /// `T_{A,p}`, or `None` if it did not happen during the run.
    pub fn time(&self, p: usize) -> Option<u64> {
        if p == 0 {
            Some(0)
        } else {
            self.times.get(p - 1).copied()
        }
    }

    pub fn complete(&self) -> bool {
        self.times.len() >= self.wanted
    }
}

/// A single trajectory of the reversible walk on a conductance view.
pub struct Walker<'v, P> {
    view: &'v ConductanceView<P>,
    state: WalkState,
    rng: ChaCha8Rng,
    kernels: FxHashMap<Point, Cdf>,
}

impl<'v, P: Potential> Walker<'v, P> {
    pub fn new(view: &'v ConductanceView<P>, start: Point, seed: u64) -> Self {
        assert_eq!(start.dim(), view.dim(), "start point dimension");
        Walker {
            view,
            state: WalkState {
                position: start,
                steps: 0,
            },
            rng: ChaCha8Rng::seed_from_u64(seed),
            kernels: FxHashMap::default(),
        }
    }

    pub fn state(&self) -> WalkState {
        self.state
    }

    pub fn position(&self) -> Point {
        self.state.position
    }

    /// Move to `x` and reset the step counter, keeping the RNG stream and
    /// the kernel cache.
    pub fn restart_at(&mut self, x: Point) {
        self.state = WalkState { position: x, steps: 0 };
    }

    pub fn rng_mut(&mut self) -> &mut ChaCha8Rng {
        &mut self.rng
    }

    fn kernel(&mut self, x: &Point) -> &Cdf {
        if self.kernels.len() >= KERNEL_CACHE_LIMIT && !self.kernels.contains_key(x) {
            self.kernels.clear();
        }
        let view = self.view;
        self.kernels.entry(*x).or_insert_with(|| {
            let dist = view.step_distribution(x);
            let mut acc = 0.0;
            let mut cdf = Cdf::new();
            for (_, p) in dist.iter().take(dist.len() - 1) {
                acc += p;
                cdf.push(acc);
            }
            cdf
        })
    }

    #[inline]
    pub fn step(&mut self) -> Point {
        let x = self.state.position;
        let u: f64 = self.rng.gen();
        let cdf = self.kernel(&x);
        let mut i = cdf.len();
        for (j, c) in cdf.iter().enumerate() {
            if u < *c {
                i = j;
                break;
            }
        }
        let next = x.step(i / 2, if i.is_multiple_of(2) { 1 } else { -1 });
        self.state.position = next;
        self.state.steps += 1;
        next
    }

    /// Advance `n` steps, recording local time and hitting times.
    pub fn run(&mut self, n: u64, mut ledger: Option<&mut LocalTimeLedger>, watches: &mut [HittingRecord]) {
        for _ in 0..n {
            let x = self.step();
            if let Some(l) = ledger.as_deref_mut() {
                l.record(&x);
            }
            for w in watches.iter_mut() {
                w.observe(&x, self.state.steps);
            }
        }
    }

    /// Run until the walk is in `target` at some step `>= 1`; returns the
    /// number of steps taken.
    pub fn run_until(&mut self, target: &HittingTarget, budget: u64) -> Result<u64> {
        for k in 1..=budget {
            let x = self.step();
            if target.contains(&x) {
                return Ok(k);
            }
        }
        Err(Error::Unreached { budget })
    }
}

/// Monte Carlo estimate of `sum_{z in A} E_z L(x, T_A^+)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExcursionEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub repetitions: u64,
}

/// Each repetition starts at a uniform point of `a`, runs until the first
/// return to `a`, and counts visits to `x` at steps `1..=T_A^+`. The sample
/// value is `|A|` times that count, so the mean estimates the sum over
/// starting points.
pub fn excursion_local_time<P: Potential>(
    view: &ConductanceView<P>,
    a: &[Point],
    x: Point,
    repetitions: u64,
    budget: u64,
    seed: u64,
) -> Result<ExcursionEstimate> {
    if a.is_empty() || repetitions < 2 {
        return Err(Error::InvalidConfig(
            "excursion estimate needs a non-empty set and >= 2 repetitions".into(),
        ));
    }
    let set: FxHashSet<Point> = a.iter().copied().collect();
    let mut walker = Walker::new(view, a[0], seed);
    let scale = a.len() as f64;
    let (mut sum, mut sum_sq) = (0.0, 0.0);
    for _ in 0..repetitions {
        let start = a[walker.rng_mut().gen_range(0..a.len())];
        walker.restart_at(start);
        let mut count = 0u64;
        loop {
            if walker.state.steps >= budget {
                return Err(Error::Unreached { budget });
            }
            let y = walker.step();
            if y == x {
                count += 1;
            }
            if set.contains(&y) {
                break;
            }
        }
        let v = scale * count as f64;
        sum += v;
        sum_sq += v * v;
    }
    let n = repetitions as f64;
    let mean = sum / n;
    let var = ((sum_sq - n * mean * mean) / (n - 1.0)).max(0.0);
    Ok(ExcursionEstimate {
        mean,
        std_error: (var / n).sqrt(),
        repetitions,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::{DeltaLaw, EnvironmentField, EnvironmentSpec, FlatPotential, IncrementLaw};
    use proptest::prelude::*;

    fn field(seed: u64) -> EnvironmentField {
        EnvironmentField::new(EnvironmentSpec {
            d: 2,
            increment_law: IncrementLaw::Rademacher,
            delta_law: DeltaLaw::Bernoulli { p: 0.5 },
            seed,
        })
        .unwrap()
    }

    #[test]
    fn single_step_frequencies_match_kernel() {
        let f = field(9);
        let view = ConductanceView::new(&f);
        let x = Point::new(&[2, 1]);
        let dist = view.step_distribution(&x);
        let n = 200_000;
        let mut counts = vec![0u64; dist.len()];
        let mut w = Walker::new(&view, x, 5);
        for _ in 0..n {
            w.restart_at(x);
            let y = w.step();
            let i = dist.iter().position(|(z, _)| *z == y).unwrap();
            counts[i] += 1;
        }
        for (c, (_, p)) in counts.iter().zip(&dist) {
            let freq = *c as f64 / n as f64;
            let se = (p * (1.0 - p) / n as f64).sqrt();
            assert!((freq - p).abs() < 5.0 * se, "{freq} vs {p}");
        }
    }

    #[test]
    fn walk_is_deterministic_given_seed() {
        let f = field(2);
        let view = ConductanceView::new(&f);
        let mut a = Walker::new(&view, Point::origin(2), 77);
        let mut b = Walker::new(&view, Point::origin(2), 77);
        for _ in 0..5000 {
            assert_eq!(a.step(), b.step());
        }
    }

    #[test]
    fn hitting_times_increase_and_lie_in_target() {
        let view = ConductanceView::new(FlatPotential(2));
        let mut w = Walker::new(&view, Point::origin(2), 3);
        let target = HittingTarget::Shell { k: 1 };
        let mut rec = [HittingRecord::new(target.clone(), 10)];
        let mut ledger = LocalTimeLedger::new();
        w.run(10_000, Some(&mut ledger), &mut rec);
        assert!(rec[0].complete());
        assert_eq!(rec[0].time(0), Some(0));
        assert_eq!(rec[0].time(1), Some(1));
        for p in 1..10 {
            assert!(rec[0].time(p).unwrap() < rec[0].time(p + 1).unwrap());
        }
        assert_eq!(rec[0].time(11), None);
        assert!(ledger.is_consistent());
        assert_eq!(ledger.total(), 10_000);
    }

    #[test]
    fn unreached_target_is_an_error() {
        let view = ConductanceView::reflecting(FlatPotential(1), 3);
        let mut w = Walker::new(&view, Point::origin(1), 1);
        let r = w.run_until(&HittingTarget::Shell { k: 5 }, 1000);
        assert!(matches!(r, Err(Error::Unreached { budget: 1000 })));
    }

    #[test]
    fn reflecting_walk_stays_in_box() {
        let f = field(4);
        let view = ConductanceView::reflecting(&f, 2);
        let mut w = Walker::new(&view, Point::origin(2), 8);
        for _ in 0..20_000 {
            assert!(w.step().norm() <= 2);
        }
    }

    #[test]
    fn excursion_estimate_simple_walk() {
        // Simple walk on Z from A = {0}: every excursion visits 1 at most
        // finitely often and E_0 L(1, T_0^+) = 1 by reversibility.
        let view = ConductanceView::reflecting(FlatPotential(1), 4);
        let est = excursion_local_time(&view, &[Point::new(&[0])], Point::new(&[1]), 40_000, 1_000_000, 1).unwrap();
        assert!((est.mean - 1.0).abs() < 4.0 * est.std_error, "{est:?}");
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn ledger_totals_match_steps(seed in any::<u64>(), n in 1u64..3000) {
            let f = field(seed);
            let view = ConductanceView::new(&f);
            let mut w = Walker::new(&view, Point::origin(2), seed ^ 1);
            let mut ledger = LocalTimeLedger::new();
            w.run(n, Some(&mut ledger), &mut []);
            prop_assert_eq!(ledger.total(), n);
            prop_assert!(ledger.is_consistent());
            let mut other = LocalTimeLedger::new();
            w.run(n, Some(&mut other), &mut []);
            ledger.merge(&other);
            prop_assert_eq!(ledger.total(), 2 * n);
            prop_assert!(ledger.is_consistent());
        }
    }
}
