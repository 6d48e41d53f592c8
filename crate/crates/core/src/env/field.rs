use std::sync::{Arc, RwLock};

use serde::{Deserialize, Serialize};

use super::law::{DeltaLaw, IncrementLaw};
use crate::error::{Error, Result};
use crate::lattice::{Point, MAX_DIM};
use crate::rng::{hash_coords, unit_f64, TAG_DELTA, TAG_ETA};

/// Everything needed to regenerate an environment bit for bit.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnvironmentSpec {
    pub d: usize,
    pub increment_law: IncrementLaw,
    pub delta_law: DeltaLaw,
    pub seed: u64,
}

impl EnvironmentSpec {
    pub fn validate(&self) -> Result<()> {
        if !(1..=MAX_DIM).contains(&self.d) {
            return Err(Error::InvalidSpec(format!(
                "dimension {} outside the supported range 1..={MAX_DIM}",
                self.d
            )));
        }
        self.increment_law.validate()?;
        self.delta_law.validate()
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        EnvironmentSpec { seed, ..self.clone() }
    }
}

/// A one-dimensional profile indexed by Z. Implemented by the environment
/// walk S and by sampled limit paths.
pub trait Series {
    fn s(&self, k: i64) -> f64;
}

#[derive(Debug, Default)]
struct STable {
    // pos[k] = S_k, neg[j] = S_{-(j+1)}
    pos: Vec<f64>,
    neg: Vec<f64>,
}

impl STable {
    #[inline]
    fn get(&self, k: i64) -> Option<f64> {
        if k >= 0 {
            self.pos.get(k as usize).copied()
        } else {
            self.neg.get((-k - 1) as usize).copied()
        }
    }
}

/// The environment: the two-sided walk S (grown lazily and cached) and the
/// per-site offsets delta (recomputed from the seed on demand).
#[derive(Debug)]
pub struct EnvironmentField {
    spec: EnvironmentSpec,
    prefix: Vec<f64>,
    table: RwLock<Arc<STable>>,
}

const INITIAL_LEN: usize = 1024;

impl EnvironmentField {
    pub fn new(spec: EnvironmentSpec) -> Result<Self> {
        Self::with_prefix(spec, Vec::new())
    }

    /// Field whose `S_0, S_1, ...` start with the given values; later
    /// indices continue with seeded increments. `prefix[0]` must be 0.
    pub fn with_prefix(spec: EnvironmentSpec, prefix: Vec<f64>) -> Result<Self> {
        spec.validate()?;
        if prefix.first().is_some_and(|v| *v != 0.0) {
            return Err(Error::InvalidSpec("a scripted S must start with S_0 = 0".into()));
        }
        if prefix.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidSpec("scripted S values must be finite".into()));
        }
        let field = EnvironmentField {
            spec,
            prefix,
            table: RwLock::new(Arc::new(STable::default())),
        };
        field.ensure(INITIAL_LEN as i64);
        field.ensure(-(INITIAL_LEN as i64));
        Ok(field)
    }

    pub fn spec(&self) -> &EnvironmentSpec {
        &self.spec
    }

    pub fn dim(&self) -> usize {
        self.spec.d
    }

    #[inline]
    fn eta(&self, k: i64) -> f64 {
        self.spec
            .increment_law
            .sample(unit_f64(hash_coords(self.spec.seed, TAG_ETA, &[k])))
    }

    fn ensure(&self, k: i64) {
        if self.table.read().expect("s-table lock").get(k).is_some() {
            return;
        }
        let mut guard = self.table.write().expect("s-table lock");
        if guard.get(k).is_some() {
            return;
        }
        let old = &**guard;
        let mut pos = old.pos.clone();
        let mut neg = old.neg.clone();
        if k >= 0 {
            let want = (k as usize + 1).max(2 * pos.len()).max(INITIAL_LEN);
            if pos.is_empty() {
                pos.push(0.0);
            }
            while pos.len() < want {
                let i = pos.len();
                let next = match self.prefix.get(i) {
                    Some(v) => *v,
                    None => pos[i - 1] + self.eta(i as i64),
                };
                pos.push(next);
            }
        } else {
            let want = ((-k) as usize).max(2 * neg.len()).max(INITIAL_LEN);
            while neg.len() < want {
                // S_{-(j+1)} = S_{-j} - eta_{-j}
                let j = neg.len() as i64;
                let prev = if j == 0 { 0.0 } else { neg[j as usize - 1] };
                neg.push(prev - self.eta(-j));
            }
        }
        *guard = Arc::new(STable { pos, neg });
    }

    /// `S_k`, extending the cached table if needed.
    #[inline]
    pub fn s_value(&self, k: i64) -> f64 {
        if let Some(v) = self.table.read().expect("s-table lock").get(k) {
            return v;
        }
        self.ensure(k);
        self.table.read().expect("s-table lock").get(k).expect("table extended")
    }

    #[inline]
    pub fn delta(&self, x: &Point) -> i32 {
        debug_assert_eq!(x.dim(), self.spec.d);
        let mut buf = [0i64; MAX_DIM];
        for (b, c) in buf.iter_mut().zip(x.coords()) {
            *b = *c as i64;
        }
        let bits = hash_coords(self.spec.seed, TAG_DELTA, &buf[..x.dim()]);
        self.spec.delta_law.sample(unit_f64(bits))
    }

    /// Index of S read by the potential at `x`: `max(|x| + delta_x, 0)`.
    #[inline]
    pub fn potential_index(&self, x: &Point) -> i64 {
        (x.norm() as i64 + self.delta(x) as i64).max(0)
    }

    /// `V(x) = S_{|x| + delta_x}` when that index is non-negative, else 0.
    #[inline]
    pub fn potential(&self, x: &Point) -> f64 {
        self.s_value(self.potential_index(x))
    }

    /// Number of cached S values on each side.
    pub fn cached_len(&self) -> (usize, usize) {
        let t = self.table.read().expect("s-table lock");
        (t.neg.len(), t.pos.len())
    }
}

impl Series for EnvironmentField {
    #[inline]
    fn s(&self, k: i64) -> f64 {
        self.s_value(k)
    }
}

/// An explicitly listed series; indices outside the list read as `+inf` so
/// that their Boltzmann weight vanishes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ListedSeries {
    pub start: i64,
    pub values: Vec<f64>,
}

impl Series for ListedSeries {
    fn s(&self, k: i64) -> f64 {
        let i = k - self.start;
        if i < 0 {
            return f64::INFINITY;
        }
        self.values.get(i as usize).copied().unwrap_or(f64::INFINITY)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn spec(seed: u64, delta: DeltaLaw) -> EnvironmentSpec {
        EnvironmentSpec {
            d: 2,
            increment_law: IncrementLaw::Rademacher,
            delta_law: delta,
            seed,
        }
    }

    #[test]
    fn rejects_bad_dimension() {
        let mut s = spec(1, DeltaLaw::Zero);
        s.d = 9;
        assert!(matches!(EnvironmentField::new(s), Err(Error::InvalidSpec(_))));
    }

    #[test]
    fn s_is_anchored_and_integer_valued() {
        let f = EnvironmentField::new(spec(7, DeltaLaw::Zero)).unwrap();
        assert_eq!(f.s_value(0), 0.0);
        for k in -50..50 {
            let step = f.s_value(k + 1) - f.s_value(k);
            assert!(step == 1.0 || step == -1.0);
        }
    }

    #[test]
    fn potential_at_origin_with_zero_delta() {
        let f = EnvironmentField::new(spec(3, DeltaLaw::Zero)).unwrap();
        assert_eq!(f.potential(&Point::origin(2)), 0.0);
        let x = Point::new(&[3, -1]);
        assert_eq!(f.potential(&x), f.s_value(3));
    }

    #[test]
    fn negative_index_clamps_to_s0() {
        let law = DeltaLaw::FiniteSupport {
            values: vec![-5],
            probs: vec![1.0],
        };
        let f = EnvironmentField::new(spec(3, law)).unwrap();
        assert_eq!(f.potential(&Point::new(&[2, 1])), 0.0);
        assert_eq!(f.potential(&Point::new(&[7, 1])), f.s_value(2));
    }

    #[test]
    fn cache_growth_is_transparent() {
        let f = EnvironmentField::new(spec(11, DeltaLaw::Zero)).unwrap();
        let far = f.s_value(100_000);
        let near = f.s_value(-70_000);
        let g = EnvironmentField::new(spec(11, DeltaLaw::Zero)).unwrap();
        assert_eq!(g.s_value(-70_000), near);
        assert_eq!(g.s_value(100_000), far);
        assert!(f.cached_len().1 > 100_000);
    }

    #[test]
    fn scripted_prefix() {
        let f = EnvironmentField::with_prefix(spec(1, DeltaLaw::Zero), vec![0.0, -1.0, -2.0]).unwrap();
        assert_eq!(f.s_value(2), -2.0);
        assert!((f.s_value(3) + 2.0).abs() == 1.0);
        assert!(EnvironmentField::with_prefix(spec(1, DeltaLaw::Zero), vec![1.0]).is_err());
    }

    #[test]
    fn bernoulli_delta_frequency() {
        let f = EnvironmentField::new(spec(5, DeltaLaw::Bernoulli { p: 0.3 })).unwrap();
        let n = 40_000;
        let ones: i32 = (0..n).map(|i| f.delta(&Point::new(&[i, 17]))).sum();
        let freq = ones as f64 / n as f64;
        // 5 standard errors
        assert!((freq - 0.3).abs() < 5.0 * (0.21f64 / n as f64).sqrt(), "{freq}");
    }

    proptest! {
        #[test]
        fn environment_is_a_pure_function_of_the_seed(seed in any::<u64>(), k in -3000i64..3000,
                                                      a in -40i32..40, b in -40i32..40) {
            let s = spec(seed, DeltaLaw::Bernoulli { p: 0.5 });
            let f = EnvironmentField::new(s.clone()).unwrap();
            let g = EnvironmentField::new(s).unwrap();
            // Query g in a different order before comparing.
            let _ = g.s_value(-k);
            let x = Point::new(&[a, b]);
            prop_assert_eq!(f.s_value(k).to_bits(), g.s_value(k).to_bits());
            prop_assert_eq!(f.delta(&x), g.delta(&x));
            prop_assert_eq!(f.potential(&x).to_bits(), g.potential(&x).to_bits());
        }

        #[test]
        fn increments_are_consistent_across_zero(seed in any::<u64>(), k in -200i64..200) {
            let f = EnvironmentField::new(spec(seed, DeltaLaw::Zero)).unwrap();
            let d = f.s_value(k + 1) - f.s_value(k);
            prop_assert!(d == 1.0 || d == -1.0);
        }
    }
}
