//! The walk conditioned to stay non-negative on the right of 0 and strictly
//! positive on the left, and the limit occupation profile built from it.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::env::{IncrementLaw, Series};
use crate::error::{Error, Result};
use crate::levels::{bernoulli_enumeration, ClassModel};
use crate::rng::{stream, TAG_LIMIT};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SamplerKind {
    /// Doob transform with `h(x) = x + 1`; exact for ±1 increments.
    ExactHTransform,
    /// Rejection of unconstrained paths that violate the sign constraint
    /// within `horizon` steps.
    RejectionFiniteHorizon { horizon: usize },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SamplerOptions {
    /// Horizon for rejection; defaults to the path radius.
    pub horizon: Option<usize>,
    pub max_attempts: u64,
    /// Use rejection even when the exact transform is available.
    pub force_rejection: bool,
}

impl Default for SamplerOptions {
    fn default() -> Self {
        SamplerOptions {
            horizon: None,
            max_attempts: 10_000_000,
            force_rejection: false,
        }
    }
}

/// `S̄_i` for `i in [-W, W]`. Indices outside the window read as `+inf`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConditionedPath {
    radius: usize,
    /// `S̄_{-1}, ..., S̄_{-W}`
    left: Vec<f64>,
    /// `S̄_0, ..., S̄_W`
    right: Vec<f64>,
    sampler: SamplerKind,
}

impl ConditionedPath {
    /// A path from explicit values; `right[0]` is `S̄_0`.
    pub fn from_values(left: Vec<f64>, right: Vec<f64>, sampler: SamplerKind) -> Result<Self> {
        if right.is_empty() || right.len() != left.len() + 1 {
            return Err(Error::InvalidConfig(
                "path needs W left values and W+1 right values".into(),
            ));
        }
        Ok(ConditionedPath {
            radius: left.len(),
            left,
            right,
            sampler,
        })
    }

    pub fn radius(&self) -> usize {
        self.radius
    }

    pub fn sampler(&self) -> &SamplerKind {
        &self.sampler
    }

    pub fn get(&self, i: i64) -> Option<f64> {
        if i >= 0 {
            self.right.get(i as usize).copied()
        } else {
            self.left.get((-i - 1) as usize).copied()
        }
    }

    pub fn right(&self) -> &[f64] {
        &self.right
    }

    pub fn left(&self) -> &[f64] {
        &self.left
    }

    /// Right side `>= 0`, left side `> 0`, `S̄_0 = 0`.
    pub fn satisfies_constraints(&self) -> bool {
        self.right[0] == 0.0 && self.right.iter().all(|v| *v >= 0.0) && self.left.iter().all(|v| *v > 0.0)
    }
}

impl Series for ConditionedPath {
    #[inline]
    fn s(&self, k: i64) -> f64 {
        self.get(k).unwrap_or(f64::INFINITY)
    }
}

/// `len` steps of the ±1 walk from 0 under the transform `h(x) = x + 1`:
/// from `x` the walk moves up with probability `(x+2)/(2(x+1))`. The result
/// starts with the value 0.
pub fn h_transform_walk(rng: &mut ChaCha8Rng, len: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(len + 1);
    let mut x: u64 = 0;
    out.push(0.0);
    for _ in 0..len {
        let up = (x + 2) as f64 / (2 * (x + 1)) as f64;
        if rng.gen::<f64>() < up {
            x += 1;
        } else {
            x -= 1;
        }
        out.push(x as f64);
    }
    out
}

/// Partial sums `0, s_1, ..., s_len` of increments `sign * eta`, redrawn
/// until `s_1..s_horizon` stay `>= 0` (or `> 0` when `strict`).
pub fn rejection_walk(
    law: &IncrementLaw,
    sign: f64,
    rng: &mut ChaCha8Rng,
    len: usize,
    horizon: usize,
    strict: bool,
    max_attempts: u64,
) -> Result<Vec<f64>> {
    let horizon = horizon.max(len);
    let mut out = Vec::with_capacity(len + 1);
    for _ in 0..max_attempts {
        out.clear();
        out.push(0.0);
        let mut s = 0.0;
        let mut ok = true;
        for k in 1..=horizon {
            s += sign * law.sample(rng.gen::<f64>());
            if s < 0.0 || (strict && s == 0.0) {
                ok = false;
                break;
            }
            if k <= len {
                out.push(s);
            }
        }
        if ok {
            return Ok(out);
        }
    }
    Err(Error::RejectionBudgetExceeded { attempts: max_attempts })
}

/// Sample `S̄` on `[-radius, radius]`. Right and left sides use separate
/// streams, so a larger radius with the same seed extends the same path
/// when the exact transform is used.
pub fn sample_conditioned(
    law: &IncrementLaw,
    radius: usize,
    seed: u64,
    opts: &SamplerOptions,
) -> Result<ConditionedPath> {
    law.validate()?;
    if radius == 0 {
        return Err(Error::InvalidConfig("path radius must be positive".into()));
    }
    let mut right_rng = stream(seed, TAG_LIMIT, 0);
    let mut left_rng = stream(seed, TAG_LIMIT, 1);
    if *law == IncrementLaw::Rademacher && !opts.force_rejection {
        let right = h_transform_walk(&mut right_rng, radius);
        // Reading leftwards from the first minimum, the walk must step to 1
        // and then stay >= 1 forever: 1 + an h-transformed walk from 0.
        let left = h_transform_walk(&mut left_rng, radius - 1)
            .into_iter()
            .map(|v| v + 1.0)
            .collect();
        return Ok(ConditionedPath {
            radius,
            left,
            right,
            sampler: SamplerKind::ExactHTransform,
        });
    }
    let horizon = opts.horizon.unwrap_or(radius).max(radius);
    let right = rejection_walk(law, 1.0, &mut right_rng, radius, horizon, false, opts.max_attempts)?;
    let mut left = rejection_walk(law, -1.0, &mut left_rng, radius, horizon, true, opts.max_attempts)?;
    left.remove(0);
    Ok(ConditionedPath {
        radius,
        left,
        right,
        sampler: SamplerKind::RejectionFiniteHorizon { horizon },
    })
}

/// Normalized profile `Pi(i)` for `|i| <= k`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LimitProfile {
    pub k: usize,
    /// `Pi(-k), ..., Pi(k)`
    pub values: Vec<f64>,
    /// Largest `Pi(i)` over the whole normalization window.
    pub sup: f64,
    pub argmax: i64,
    /// Radius of the normalization window.
    pub inner_radius: usize,
    pub normalizer: f64,
    /// `2d sum exp(-S̄_x/2)` over the outer margin of the path, relative to
    /// the normalizer.
    pub tail: f64,
}

impl LimitProfile {
    pub fn at(&self, i: i64) -> Option<f64> {
        let j = i + self.k as i64;
        (j >= 0).then(|| self.values.get(j as usize).copied()).flatten()
    }
}

fn profile_from(
    path: &ConditionedPath,
    d: usize,
    amax: usize,
    k: usize,
    tol: f64,
    f: impl Fn(i64) -> f64,
) -> Result<LimitProfile> {
    let w = path.radius;
    if amax >= w {
        return Err(Error::InvalidConfig(format!(
            "path radius {w} too small for offsets up to {amax}"
        )));
    }
    let inner = w - amax;
    if k > inner {
        return Err(Error::InvalidConfig(format!(
            "profile radius {k} exceeds usable window {inner}"
        )));
    }
    let r = inner as i64;
    let weights: Vec<f64> = (-r..=r).map(&f).collect();
    let normalizer: f64 = weights.iter().sum();
    if !(normalizer.is_finite() && normalizer > 0.0) {
        return Err(Error::NumericRange { shell: 0 });
    }
    let margin: f64 = (inner as i64 + 1..=w as i64)
        .flat_map(|x| [x, -x])
        .map(|x| (-path.s(x) / 2.0).exp())
        .sum();
    let tail = 2.0 * d as f64 * margin / normalizer;
    if tail > tol {
        return Err(Error::TailNotConverged { tail, tol });
    }
    let (mut sup, mut argmax) = (f64::NEG_INFINITY, 0);
    for (i, w) in (-r..=r).zip(&weights) {
        if *w > sup {
            sup = *w;
            argmax = i;
        }
    }
    let off = (r - k as i64) as usize;
    let values = weights[off..off + 2 * k + 1].iter().map(|w| w / normalizer).collect();
    Ok(LimitProfile {
        k,
        values,
        sup: sup / normalizer,
        argmax,
        inner_radius: inner,
        normalizer,
        tail,
    })
}

/// `Pi(i) = sum_j p_j pi^j_i / sum_l sum_j p_j pi^j_l` with `pi^j_i` the
/// class signatures evaluated on the path.
pub fn limit_profile(path: &ConditionedPath, model: &ClassModel, k: usize, tol: f64) -> Result<LimitProfile> {
    let total = model.total_probability();
    if (total - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidConfig(format!("class probabilities sum to {total}")));
    }
    let amax = model.max_abs_offset() as usize;
    profile_from(path, model.d, amax, k, tol, |i| {
        model
            .classes
            .iter()
            .fold(0.0, |acc, c| acc + c.probability * c.signature.evaluate(path, i))
    })
}

/// Closed form for `delta = 0`:
/// `Pi(l) ∝ e_l ((2d-2) e_l + e_{l-1} + e_{l+1})` with `e_i = exp(-S̄_i/2)`.
pub fn trivial_profile(path: &ConditionedPath, d: usize, k: usize, tol: f64) -> Result<LimitProfile> {
    let e = |i: i64| (-(path.s(i) - 0.0) / 2.0).exp();
    profile_from(path, d, 1, k, tol, |l| {
        e(l) * ((2 * d - 2) as f64 * e(l) + e(l - 1) + e(l + 1))
    })
}

/// Closed form for Bernoulli(p) offsets:
/// `Gamma_i = sum p^B e_{i+i0} (e_{i+i1} + e_{i+i2} + cnt e_{i+1} + (2d-2-cnt) e_i)`.
pub fn bernoulli_profile(path: &ConditionedPath, d: usize, p: f64, k: usize, tol: f64) -> Result<LimitProfile> {
    let classes = bernoulli_enumeration(d, p);
    let e = |i: i64| (-path.s(i) / 2.0).exp();
    profile_from(path, d, 2, k, tol, |i| {
        classes
            .iter()
            .map(|c| {
                let cnt = c.cnt as f64;
                let rest = (2 * d - 2) as f64 - cnt;
                c.probability
                    * e(i + c.i0 as i64)
                    * (e(i + c.i1 as i64) + e(i + c.i2 as i64) + cnt * e(i + 1) + rest * e(i))
            })
            .sum()
    })
}

/// One-dimensional form with explicit offsets:
/// `Pi(i) ∝ e_{i+δ_i} (e_{i-1+δ_{i-1}} + e_{i+1+δ_{i+1}})`.
pub fn d1_profile(
    path: &ConditionedPath,
    delta: impl Fn(i64) -> i32,
    max_abs_delta: usize,
    k: usize,
    tol: f64,
) -> Result<LimitProfile> {
    let e = |i: i64| (-path.s(i + delta(i) as i64) / 2.0).exp();
    profile_from(path, 1, max_abs_delta + 1, k, tol, |i| e(i) * (e(i - 1) + e(i + 1)))
}

/// Sample paths until the profile tail is below `tol`, doubling the radius
/// up to `max_radius`.
pub fn converged_profile(
    law: &IncrementLaw,
    model: &ClassModel,
    radius: usize,
    max_radius: usize,
    seed: u64,
    k: usize,
    tol: f64,
    opts: &SamplerOptions,
) -> Result<(ConditionedPath, LimitProfile)> {
    let mut w = radius;
    loop {
        let path = sample_conditioned(law, w, seed, opts)?;
        match limit_profile(&path, model, k, tol) {
            Ok(p) => return Ok((path, p)),
            Err(Error::TailNotConverged { .. }) if w < max_radius => w = (2 * w).min(max_radius),
            Err(e) => return Err(e),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::DeltaLaw;
    use crate::rng::stream;
    use proptest::prelude::*;

    #[test]
    fn h_transform_first_steps() {
        // From 0 the walk must step to 1; from 1 it goes up w.p. 3/4.
        let n = 200_000;
        let mut ups = 0;
        let mut rng = stream(1, 0, 0);
        for _ in 0..n {
            let p = h_transform_walk(&mut rng, 2);
            assert_eq!(p[1], 1.0);
            ups += (p[2] == 2.0) as u32;
        }
        let f = ups as f64 / n as f64;
        assert!((f - 0.75).abs() < 5.0 * (0.1875f64 / n as f64).sqrt(), "{f}");
    }

    #[test]
    fn left_side_starts_one_two() {
        let p = sample_conditioned(&IncrementLaw::Rademacher, 50, 3, &SamplerOptions::default()).unwrap();
        assert_eq!(p.get(-1), Some(1.0));
        assert_eq!(p.get(-2), Some(2.0));
        assert_eq!(p.get(0), Some(0.0));
        assert_eq!(p.get(1), Some(1.0));
        assert!(p.satisfies_constraints());
        assert_eq!(p.get(51), None);
        assert_eq!(p.s(-51), f64::INFINITY);
    }

    #[test]
    fn exact_paths_extend_with_radius() {
        let a = sample_conditioned(&IncrementLaw::Rademacher, 100, 9, &SamplerOptions::default()).unwrap();
        let b = sample_conditioned(&IncrementLaw::Rademacher, 400, 9, &SamplerOptions::default()).unwrap();
        for i in -100..=100 {
            assert_eq!(a.get(i), b.get(i));
        }
    }

    #[test]
    fn flat_path_gives_uniform_profile() {
        let w = 20;
        let path = ConditionedPath::from_values(vec![0.0; w], vec![0.0; w + 1], SamplerKind::ExactHTransform).unwrap();
        let prof = trivial_profile(&path, 2, 5, f64::INFINITY).unwrap();
        let r = prof.inner_radius as f64;
        for v in &prof.values {
            assert!((v - 1.0 / (2.0 * r + 1.0)).abs() < 1e-15);
        }
        assert!(matches!(
            trivial_profile(&path, 2, 5, 1e-6),
            Err(Error::TailNotConverged { .. })
        ));
    }

    #[test]
    fn zero_delta_reduces_bitwise_to_closed_form() {
        for d in 1..=4 {
            let model = ClassModel::exact(d, &DeltaLaw::Zero).unwrap();
            for seed in 0..5 {
                let path =
                    sample_conditioned(&IncrementLaw::Rademacher, 3000, seed, &SamplerOptions::default()).unwrap();
                let a = limit_profile(&path, &model, 10, 1e-6).unwrap();
                let b = trivial_profile(&path, d, 10, 1e-6).unwrap();
                for (x, y) in a.values.iter().zip(&b.values) {
                    assert_eq!(x.to_bits(), y.to_bits());
                }
                assert_eq!(a.sup.to_bits(), b.sup.to_bits());
            }
        }
    }

    #[test]
    fn bernoulli_closed_form_matches_general_pipeline() {
        for d in 2..=3 {
            let p = 0.4;
            let model = ClassModel::exact(d, &DeltaLaw::Bernoulli { p }).unwrap();
            let path = sample_conditioned(&IncrementLaw::Rademacher, 3000, 4, &SamplerOptions::default()).unwrap();
            let a = limit_profile(&path, &model, 10, 1e-6).unwrap();
            let b = bernoulli_profile(&path, d, p, 10, 1e-6).unwrap();
            for (x, y) in a.values.iter().zip(&b.values) {
                assert!((x - y).abs() <= 1e-12 * y, "{x} {y}");
            }
        }
    }

    #[test]
    fn one_dimensional_form_matches_model_for_zero_delta() {
        let model = ClassModel::exact(1, &DeltaLaw::Zero).unwrap();
        let path = sample_conditioned(&IncrementLaw::Rademacher, 2000, 5, &SamplerOptions::default()).unwrap();
        let a = limit_profile(&path, &model, 8, 1e-6).unwrap();
        let b = d1_profile(&path, |_| 0, 0, 8, 1e-6).unwrap();
        for (x, y) in a.values.iter().zip(&b.values) {
            assert!((x - y).abs() <= 1e-14 * y);
        }
    }

    #[test]
    fn rejection_sampler_respects_constraints() {
        let law = IncrementLaw::UniformSymmetric { max: 2 };
        let opts = SamplerOptions {
            horizon: Some(300),
            ..Default::default()
        };
        let p = sample_conditioned(&law, 200, 1, &opts).unwrap();
        assert!(p.satisfies_constraints());
        assert!(matches!(
            p.sampler(),
            SamplerKind::RejectionFiniteHorizon { horizon: 300 }
        ));
        let two = IncrementLaw::TwoPoint { low: -1.0, high: 3.0 };
        let q = sample_conditioned(&two, 50, 1, &SamplerOptions::default()).unwrap();
        assert!(q.satisfies_constraints());
        let tight = SamplerOptions {
            horizon: Some(100_000),
            max_attempts: 3,
            force_rejection: true,
        };
        assert!(matches!(
            sample_conditioned(&IncrementLaw::Rademacher, 10, 2, &tight),
            Err(Error::RejectionBudgetExceeded { attempts: 3 })
        ));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn profiles_are_subprobabilities(seed in any::<u64>(), p in 0.05f64..0.95) {
            let model = ClassModel::exact(2, &DeltaLaw::Bernoulli { p }).unwrap();
            let (path, prof) = converged_profile(&IncrementLaw::Rademacher, &model, 2000, 64_000, seed, 15, 1e-6,
                                                 &SamplerOptions::default()).unwrap();
            prop_assert!(path.satisfies_constraints());
            prop_assert!(prof.values.iter().all(|v| *v >= 0.0));
            prop_assert!(prof.values.iter().sum::<f64>() <= 1.0 + 1e-12);
            prop_assert!(prof.sup >= prof.values.iter().copied().fold(0.0, f64::max));
            prop_assert!(prof.sup <= 1.0);
        }
    }
}
