//! Valley landmarks of the environment: the exit level `M_n`, the bottom
//! `m_n`, the obstacle height `Delta_n`, the three good-environment
//! conditions, and the quenched occupation ratios.

use std::ops::RangeInclusive;

use serde::{Deserialize, Serialize};

use crate::env::EnvironmentField;
use crate::error::{Error, Result};
use crate::lattice::{self, Point};
use crate::levels::{partition_shell, ClassModel, PartitionOptions, Signature};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LandmarkParams {
    /// Exponent slack in the window `(log n)^{2±eps}`.
    pub epsilon: f64,
    /// Tolerance of condition (1); derived from the laws when `None`.
    pub c_const: Option<f64>,
    /// Give up on `M_n` beyond this index.
    pub scan_limit: u64,
}

impl Default for LandmarkParams {
    fn default() -> Self {
        LandmarkParams {
            epsilon: 0.2,
            c_const: None,
            scan_limit: 10_000_000,
        }
    }
}

/// `max|eta| (max|delta| + 1) + max|eta|`.
pub fn default_c_const(field: &EnvironmentField) -> f64 {
    let eta = field.spec().increment_law.max_abs();
    let delta = field.spec().delta_law.max_abs() as f64;
    eta * (delta + 1.0) + eta
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnConditions {
    pub c1: bool,
    pub c2: bool,
    pub c3: bool,
    /// Extremes of `V(y) - V(x) - log n - sqrt(log n)` over `x in C_{m_n}`,
    /// `y in C_{M_n}`.
    pub c1_range: (f64, f64),
    pub c_const: f64,
    pub window_low: f64,
    pub window_high: f64,
    pub ratio_bound: f64,
    pub epsilon_n: f64,
    pub delta_bound: f64,
}

impl AnConditions {
    pub fn all(&self) -> bool {
        self.c1 && self.c2 && self.c3
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ValleyLandmarks {
    pub n: u64,
    pub log_n: f64,
    pub threshold: f64,
    #[serde(rename = "M_n")]
    pub big_m: u64,
    pub m_n: u64,
    #[serde(rename = "Delta_n")]
    pub delta_n: f64,
    pub s_min: f64,
    pub epsilon: f64,
    pub a_n: AnConditions,
}

impl ValleyLandmarks {
    /// Window radius `floor((log n)^{2-eps})`.
    pub fn window(&self) -> u64 {
        self.log_n.powf(2.0 - self.epsilon).floor() as u64
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "outcome", rename_all = "snake_case")]
pub enum LandmarkOutcome {
    Found(ValleyLandmarks),
    /// The minimum of S over `[0, M_n]` is attained only at 0.
    NoValley {
        n: u64,
        #[serde(rename = "M_n")]
        big_m: u64,
        threshold: f64,
    },
}

impl LandmarkOutcome {
    pub fn landmarks(&self) -> Option<&ValleyLandmarks> {
        match self {
            LandmarkOutcome::Found(l) => Some(l),
            LandmarkOutcome::NoValley { .. } => None,
        }
    }
}

/// Minimum and maximum of V over the shell `C_k`. The shell is scanned
/// until both extreme values permitted by the delta support have been
/// seen, so the result is exact while usually touching only a few sites.
pub fn shell_potential_range(field: &EnvironmentField, k: u32) -> (f64, f64) {
    let support = field.spec().delta_law.support();
    let (mut lo_possible, mut hi_possible) = (f64::INFINITY, f64::NEG_INFINITY);
    for (e, _) in &support {
        let v = field.s_value((k as i64 + *e as i64).max(0));
        lo_possible = lo_possible.min(v);
        hi_possible = hi_possible.max(v);
    }
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for x in lattice::shell(field.dim(), k) {
        let v = field.potential(&x);
        lo = lo.min(v);
        hi = hi.max(v);
        if lo == lo_possible && hi == hi_possible {
            break;
        }
    }
    (lo, hi)
}

pub fn find_landmarks(field: &EnvironmentField, n: u64, params: &LandmarkParams) -> Result<LandmarkOutcome> {
    if n < 3 {
        return Err(Error::InvalidConfig(format!("time horizon n = {n} must be at least 3")));
    }
    landmarks_for_log(field, n, (n as f64).ln(), params)
}

/// As [`find_landmarks`] with `log n` supplied directly.
pub fn landmarks_for_log(
    field: &EnvironmentField,
    n: u64,
    log_n: f64,
    params: &LandmarkParams,
) -> Result<LandmarkOutcome> {
    if !(log_n > 1.0) {
        return Err(Error::InvalidConfig(format!("log n = {log_n} must exceed 1")));
    }
    if !(params.epsilon > 0.0 && params.epsilon < 2.0) {
        return Err(Error::InvalidConfig(format!(
            "epsilon = {} must lie in (0, 2)",
            params.epsilon
        )));
    }
    let threshold = log_n + log_n.sqrt();

    // M_n: first k > 0 whose rise above the running minimum reaches the threshold.
    let mut run_min = field.s_value(0);
    let mut big_m = None;
    for k in 1..=params.scan_limit {
        let s = field.s_value(k as i64);
        run_min = run_min.min(s);
        if s - run_min >= threshold {
            big_m = Some(k);
            break;
        }
    }
    let big_m = big_m.ok_or(Error::ScanBudgetExceeded {
        limit: params.scan_limit,
    })?;

    let s_min = (0..=big_m)
        .map(|i| field.s_value(i as i64))
        .fold(f64::INFINITY, f64::min);
    let Some(m_n) = (1..=big_m).find(|&k| field.s_value(k as i64) == s_min) else {
        return Ok(LandmarkOutcome::NoValley { n, big_m, threshold });
    };

    let ranges: Vec<(f64, f64)> = (0..=big_m).map(|k| shell_potential_range(field, k as u32)).collect();
    // Outward from the origin to C_{m_n}: max V(C_l) - min V(C_k), k <= l.
    let mut run = f64::INFINITY;
    let mut d1 = f64::NEG_INFINITY;
    for &(lo, hi) in &ranges[..=m_n as usize] {
        run = run.min(lo);
        d1 = d1.max(hi - run);
    }
    // Inward from C_{M_n} to C_{m_n}: max V(C_k) - min V(C_l), k <= l.
    let mut run = f64::INFINITY;
    let mut d2 = f64::NEG_INFINITY;
    for &(lo, hi) in ranges[m_n as usize..].iter().rev() {
        run = run.min(lo);
        d2 = d2.max(hi - run);
    }
    let delta_n = d1.max(d2);

    let c_const = params.c_const.unwrap_or_else(|| default_c_const(field));
    let (m_lo, m_hi) = ranges[m_n as usize];
    let (big_lo, big_hi) = ranges[big_m as usize];
    let c1_range = (big_lo - m_hi - threshold, big_hi - m_lo - threshold);
    let c1 = c1_range.0 >= -c_const && c1_range.1 <= c_const;

    let eps = params.epsilon;
    let window_low = log_n.powf(2.0 - eps);
    let window_high = log_n.powf(2.0 + eps);
    let ratio_bound = log_n.powf(eps);
    let in_window = |v: u64| window_low <= v as f64 && v as f64 <= window_high;
    let c2 = in_window(m_n) && in_window(big_m) && (big_m as f64 / m_n as f64) <= ratio_bound;

    let epsilon_n = log_n.ln().powi(2) / log_n;
    let delta_bound = log_n * (1.0 - epsilon_n);
    let c3 = delta_n <= delta_bound;

    Ok(LandmarkOutcome::Found(ValleyLandmarks {
        n,
        log_n,
        threshold,
        big_m,
        m_n,
        delta_n,
        s_min,
        epsilon: eps,
        a_n: AnConditions {
            c1,
            c2,
            c3,
            c1_range,
            c_const,
            window_low,
            window_high,
            ratio_bound,
            epsilon_n,
            delta_bound,
        },
    }))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassRatio {
    pub signature: Signature,
    pub count: u64,
    #[serde(rename = "R")]
    pub r: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OffsetRatios {
    pub l: i64,
    pub shell: u64,
    /// `sum_j R^j_{m_n+l}` over the realized classes.
    #[serde(rename = "R")]
    pub r_total: f64,
    /// `sum_j R~^j_{m_n+l}` over the model classes.
    #[serde(rename = "Rtilde")]
    pub r_tilde_total: f64,
    pub classes: Vec<ClassRatio>,
    /// `R~^j` per model class, in model order.
    pub model: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuenchedRatios {
    pub n: u64,
    pub m_n: u64,
    #[serde(rename = "M_n")]
    pub big_m: u64,
    pub window: u64,
    /// `S_{m_n}`, the common exponent shift.
    pub reference: f64,
    /// `sum_{x in B_{M_n}} pi(x) exp(S_{m_n})`.
    pub ball_weight: f64,
    /// `sum_{|i| <= W} sum_j p_j pi~^j_{m_n+i}`.
    pub window_weight: f64,
    /// Sum of `R^j_p` over `p <= M_n` and all classes.
    pub ball_total: f64,
    /// Largest relative gap between shifted and unshifted ratios.
    pub shift_gap: f64,
    pub offsets: Vec<OffsetRatios>,
}

/// Ratios `R^j_p = |C_p^j| pi_p^j / sum_{B_{M_n}} pi` and
/// `R~^j_p = p_j pi^j_p / sum_{|i|<=W} sum_j p_j pi^j_{m_n+i}`, both
/// computed with every weight multiplied by `exp(S_{m_n})`.
pub fn quenched_ratios(
    field: &EnvironmentField,
    landmarks: &ValleyLandmarks,
    offsets: RangeInclusive<i64>,
    model: &ClassModel,
) -> Result<QuenchedRatios> {
    let m = landmarks.m_n as i64;
    let reference = field.s_value(m);
    let opts = PartitionOptions::default();

    let mut ball_weight = 0.0;
    let mut ball_raw = 0.0;
    for p in 0..=landmarks.big_m {
        for c in partition_shell(field, p as u32, opts).classes {
            ball_weight += c.count as f64 * c.signature.evaluate_relative(field, p as i64, reference);
            ball_raw += c.count as f64 * c.value;
        }
    }
    check_range(ball_weight, landmarks.big_m)?;

    let w = landmarks.window() as i64;
    let model_weight = |r: i64| -> f64 {
        model
            .classes
            .iter()
            .map(|c| c.probability * c.signature.evaluate_relative(field, r, reference))
            .sum()
    };
    let window_weight: f64 = (-w..=w).filter(|i| m + i >= 0).map(|i| model_weight(m + i)).sum();
    check_range(window_weight, landmarks.m_n)?;

    let mut shift_gap: f64 = 0.0;
    let mut ball_total = 0.0;
    let mut out = Vec::new();
    for l in offsets {
        let p = m + l;
        if p < 0 {
            continue;
        }
        let part = partition_shell(field, p as u32, opts);
        let mut classes = Vec::with_capacity(part.classes.len());
        let mut r_total = 0.0;
        for c in &part.classes {
            let shifted = c.signature.evaluate_relative(field, p, reference);
            check_range(shifted, p as u64)?;
            let r = c.count as f64 * shifted / ball_weight;
            let raw = c.count as f64 * c.value / ball_raw;
            if raw.is_finite() && raw > 0.0 {
                shift_gap = shift_gap.max((r - raw).abs() / raw);
            }
            r_total += r;
            classes.push(ClassRatio {
                signature: c.signature.clone(),
                count: c.count,
                r,
            });
        }
        let model_r: Vec<f64> = model
            .classes
            .iter()
            .map(|c| c.probability * c.signature.evaluate_relative(field, p, reference) / window_weight)
            .collect();
        out.push(OffsetRatios {
            l,
            shell: p as u64,
            r_total,
            r_tilde_total: model_r.iter().sum(),
            classes,
            model: model_r,
        });
    }
    for p in 0..=landmarks.big_m {
        if let Some(o) = out.iter().find(|o| o.shell == p) {
            ball_total += o.r_total;
        } else {
            let part = partition_shell(field, p as u32, opts);
            ball_total += part
                .classes
                .iter()
                .map(|c| c.count as f64 * c.signature.evaluate_relative(field, p as i64, reference))
                .sum::<f64>()
                / ball_weight;
        }
    }
    Ok(QuenchedRatios {
        n: landmarks.n,
        m_n: landmarks.m_n,
        big_m: landmarks.big_m,
        window: w as u64,
        reference,
        ball_weight,
        window_weight,
        ball_total,
        shift_gap,
        offsets: out,
    })
}

fn check_range(v: f64, shell: u64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::NumericRange { shell })
    }
}

/// Signature of a visited site, for grouping local time by class.
pub fn site_signature(field: &EnvironmentField, x: &Point) -> Signature {
    Signature::of_site(field, x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::{DeltaLaw, EnvironmentSpec, IncrementLaw};
    use proptest::prelude::*;

    fn spec(seed: u64, delta: DeltaLaw) -> EnvironmentSpec {
        EnvironmentSpec {
            d: 2,
            increment_law: IncrementLaw::Rademacher,
            delta_law: delta,
            seed,
        }
    }

    /// `S_k = -k` for `k <= 5`, then `S_k = -10 + k` up to index 40.
    fn staircase() -> EnvironmentField {
        let prefix: Vec<f64> = (0..=40)
            .map(|k| if k <= 5 { -(k as f64) } else { k as f64 - 10.0 })
            .collect();
        EnvironmentField::with_prefix(spec(1, DeltaLaw::Zero), prefix).unwrap()
    }

    fn staircase_at_log4(f: &EnvironmentField) -> LandmarkOutcome {
        landmarks_for_log(f, 55, 4.0, &LandmarkParams::default()).unwrap()
    }

    #[test]
    fn staircase_landmarks() {
        let f = staircase();
        let out = staircase_at_log4(&f);
        let l = out.landmarks().unwrap();
        assert_eq!(l.threshold, 6.0);
        assert_eq!(l.big_m, 11);
        assert_eq!(l.m_n, 5);
        assert_eq!(l.s_min, -5.0);
        // V = S_k on shells: going out to C_5 only descends, coming in from
        // C_11 descends too; the obstacle is the spread within shells (0).
        assert_eq!(l.delta_n, 0.0);
    }

    #[test]
    fn staircase_threshold_is_exactly_six() {
        // With log n = 4 exactly the threshold is 6: S_11 - S_5 = 6.
        let f = staircase();
        let s = |k: i64| f.s_value(k);
        assert_eq!(s(11) - s(5), 6.0);
        assert!(s(10) - s(5) < 6.0);
    }

    #[test]
    fn integer_horizon_near_log4() {
        // log 55 = 4.007 puts the threshold just above 6, so M_n moves to 12.
        let f = staircase();
        let out = find_landmarks(&f, 55, &LandmarkParams::default()).unwrap();
        assert_eq!(out.landmarks().unwrap().big_m, 12);
        let out = find_landmarks(&f, 54, &LandmarkParams::default()).unwrap();
        assert_eq!(out.landmarks().unwrap().big_m, 11);
    }

    #[test]
    fn monotone_increasing_s_has_no_valley() {
        let prefix: Vec<f64> = (0..200).map(|k| k as f64).collect();
        let f = EnvironmentField::with_prefix(spec(1, DeltaLaw::Zero), prefix).unwrap();
        let out = find_landmarks(&f, 1000, &LandmarkParams::default()).unwrap();
        assert!(matches!(out, LandmarkOutcome::NoValley { big_m: 10, .. }), "{out:?}");
    }

    #[test]
    fn scan_budget() {
        let prefix: Vec<f64> = (0..200).map(|k| -(k as f64)).collect();
        let f = EnvironmentField::with_prefix(spec(1, DeltaLaw::Zero), prefix).unwrap();
        let params = LandmarkParams {
            scan_limit: 150,
            ..Default::default()
        };
        assert!(matches!(
            find_landmarks(&f, 1000, &params),
            Err(Error::ScanBudgetExceeded { limit: 150 })
        ));
        assert!(find_landmarks(&f, 2, &params).is_err());
    }

    #[test]
    fn staircase_ratios_peak_at_the_floor() {
        let f = staircase();
        let out = staircase_at_log4(&f);
        let l = out.landmarks().unwrap();
        let model = ClassModel::exact(2, &DeltaLaw::Zero).unwrap();
        let q = quenched_ratios(&f, l, -5..=6, &model).unwrap();
        assert!((q.ball_total - 1.0).abs() < 1e-12);
        assert!(q.shift_gap < 1e-10);
        let face = |o: &OffsetRatios| {
            o.classes
                .iter()
                .filter(|c| c.count > 4)
                .map(|c| c.r)
                .next()
                .unwrap_or(0.0)
        };
        let floor = q.offsets.iter().find(|o| o.l == 0).unwrap();
        // With delta = 0 the face class at shell p has weight
        // (8p-4) e^{-S_p/2}(e^{-S_{p-1}/2} + 2e^{-S_p/2} + e^{-S_{p+1}/2}).
        let w = |p: i64| {
            let e = |k: i64| (-f.s_value(k) / 2.0).exp();
            (8 * p - 4) as f64 * e(p) * (e(p - 1) + 2.0 * e(p) + e(p + 1))
        };
        for o in &q.offsets {
            if o.shell >= 2 {
                assert!(face(floor) >= face(o) || o.l == 0, "l = {}", o.l);
                let expect = face(floor) * w(o.shell as i64) / w(5);
                assert!((face(o) - expect).abs() < 1e-12, "l = {}", o.l);
            }
            for c in &o.classes {
                assert!((0.0..=1.0).contains(&c.r));
            }
        }
    }

    /// Independent oracle: full shell scans and a quadratic loop over shell
    /// pairs.
    fn delta_n_brute(f: &EnvironmentField, m: u64, big_m: u64) -> f64 {
        let vals: Vec<Vec<f64>> = (0..=big_m)
            .map(|k| lattice::shell(2, k as u32).map(|x| f.potential(&x)).collect())
            .collect();
        let mut best = f64::NEG_INFINITY;
        for k in 0..=m as usize {
            for l in k..=m as usize {
                for a in &vals[k] {
                    for b in &vals[l] {
                        best = best.max(b - a);
                    }
                }
            }
        }
        for k in m as usize..=big_m as usize {
            for l in k..=big_m as usize {
                for a in &vals[k] {
                    for b in &vals[l] {
                        best = best.max(a - b);
                    }
                }
            }
        }
        best
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(40))]
        #[test]
        fn landmarks_match_definitions(seed in any::<u64>(), n in 10u64..400) {
            let f = EnvironmentField::new(spec(seed, DeltaLaw::Bernoulli { p: 0.5 })).unwrap();
            let out = find_landmarks(&f, n, &LandmarkParams::default()).unwrap();
            let t = (n as f64).ln() + (n as f64).ln().sqrt();
            let s = |k: u64| f.s_value(k as i64);
            let rise = |k: u64| s(k) - (0..=k).map(s).fold(f64::INFINITY, f64::min);
            match out {
                LandmarkOutcome::Found(l) => {
                    prop_assert!(rise(l.big_m) >= t);
                    prop_assert!((1..l.big_m).all(|k| rise(k) < t));
                    prop_assert!(l.m_n <= l.big_m && l.m_n >= 1);
                    prop_assert_eq!(s(l.m_n), l.s_min);
                    prop_assert!((1..l.m_n).all(|k| s(k) > l.s_min));
                    prop_assert!(l.delta_n >= 0.0);
                    if l.big_m <= 25 {
                        prop_assert_eq!(l.delta_n, delta_n_brute(&f, l.m_n, l.big_m));
                    }
                }
                LandmarkOutcome::NoValley { big_m, .. } => {
                    prop_assert!((1..=big_m).all(|k| s(k) > 0.0));
                }
            }
        }

        #[test]
        fn shell_ranges_are_exact(seed in any::<u64>(), k in 0u32..30) {
            let f = EnvironmentField::new(spec(seed, DeltaLaw::Bernoulli { p: 0.5 })).unwrap();
            let (lo, hi) = shell_potential_range(&f, k);
            let vals: Vec<f64> = lattice::shell(2, k).map(|x| f.potential(&x)).collect();
            prop_assert_eq!(lo, vals.iter().copied().fold(f64::INFINITY, f64::min));
            prop_assert_eq!(hi, vals.iter().copied().fold(f64::NEG_INFINITY, f64::max));
        }
    }
}
