use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Law of the i.i.d. increments `eta_k` of the two-sided walk S.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum IncrementLaw {
    /// ±1 with probability 1/2 each.
    Rademacher,
    /// Uniform on `{-max, ..., max}`.
    UniformSymmetric { max: i32 },
    /// Two atoms `low < 0 < high`, weighted so the mean is zero.
    TwoPoint { low: f64, high: f64 },
}

impl IncrementLaw {
    pub fn validate(&self) -> Result<()> {
        match *self {
            IncrementLaw::Rademacher => Ok(()),
            IncrementLaw::UniformSymmetric { max } if max >= 1 => Ok(()),
            IncrementLaw::UniformSymmetric { max } => Err(Error::InvalidSpec(format!(
                "uniform_symmetric needs max >= 1, got {max}"
            ))),
            IncrementLaw::TwoPoint { low, high } => {
                if low < 0.0 && high > 0.0 && low.is_finite() && high.is_finite() {
                    Ok(())
                } else {
                    Err(Error::InvalidSpec(format!(
                        "two_point needs low < 0 < high, got ({low}, {high})"
                    )))
                }
            }
        }
    }

    /// Draw an increment from a uniform `u` in `[0, 1)`.
    #[inline]
    pub fn sample(&self, u: f64) -> f64 {
        match *self {
            IncrementLaw::Rademacher => {
                if u < 0.5 {
                    -1.0
                } else {
                    1.0
                }
            }
            IncrementLaw::UniformSymmetric { max } => {
                let width = (2 * max + 1) as f64;
                let j = ((u * width) as i32).min(2 * max);
                (j - max) as f64
            }
            IncrementLaw::TwoPoint { low, high } => {
                let p_high = -low / (high - low);
                if u < p_high {
                    high
                } else {
                    low
                }
            }
        }
    }

    /// Atoms and their probabilities.
    pub fn atoms(&self) -> Vec<(f64, f64)> {
        match *self {
            IncrementLaw::Rademacher => vec![(-1.0, 0.5), (1.0, 0.5)],
            IncrementLaw::UniformSymmetric { max } => {
                let p = 1.0 / (2 * max + 1) as f64;
                (-max..=max).map(|v| (v as f64, p)).collect()
            }
            IncrementLaw::TwoPoint { low, high } => {
                let p_high = -low / (high - low);
                vec![(low, 1.0 - p_high), (high, p_high)]
            }
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.atoms().iter().map(|(v, _)| v.abs()).fold(0.0, f64::max)
    }

    pub fn variance(&self) -> f64 {
        self.atoms().iter().map(|(v, p)| v * v * p).sum()
    }
}

/// Law of the i.i.d. integer offsets `delta_x`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DeltaLaw {
    Zero,
    /// 1 with probability `p`, else 0.
    Bernoulli {
        p: f64,
    },
    FiniteSupport {
        values: Vec<i32>,
        probs: Vec<f64>,
    },
}

impl DeltaLaw {
    pub fn validate(&self) -> Result<()> {
        match self {
            DeltaLaw::Zero => Ok(()),
            DeltaLaw::Bernoulli { p } => {
                if (0.0..=1.0).contains(p) {
                    Ok(())
                } else {
                    Err(Error::InvalidSpec(format!("bernoulli p must be in [0,1], got {p}")))
                }
            }
            DeltaLaw::FiniteSupport { values, probs } => {
                if values.is_empty() || values.len() != probs.len() {
                    return Err(Error::InvalidSpec(
                        "finite_support needs equally long, non-empty values and probs".into(),
                    ));
                }
                if probs.iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
                    return Err(Error::InvalidSpec("finite_support probs must be >= 0".into()));
                }
                let total: f64 = probs.iter().sum();
                if (total - 1.0).abs() > 1e-9 {
                    return Err(Error::InvalidSpec(format!(
                        "finite_support probs sum to {total}, expected 1"
                    )));
                }
                let mut sorted = values.clone();
                sorted.sort_unstable();
                sorted.dedup();
                if sorted.len() != values.len() {
                    return Err(Error::InvalidSpec("finite_support values must be distinct".into()));
                }
                Ok(())
            }
        }
    }

    #[inline]
    pub fn sample(&self, u: f64) -> i32 {
        match self {
            DeltaLaw::Zero => 0,
            DeltaLaw::Bernoulli { p } => (u < *p) as i32,
            DeltaLaw::FiniteSupport { values, probs } => {
                let mut acc = 0.0;
                for (v, p) in values.iter().zip(probs) {
                    acc += p;
                    if u < acc {
                        return *v;
                    }
                }
                // Rounding left a sliver above the cumulative sum.
                *values
                    .iter()
                    .zip(probs)
                    .rev()
                    .find(|(_, p)| **p > 0.0)
                    .map(|(v, _)| v)
                    .unwrap_or(&values[values.len() - 1])
            }
        }
    }

    /// Values with positive probability, in increasing order.
    pub fn support(&self) -> Vec<(i32, f64)> {
        let mut out: Vec<(i32, f64)> = match self {
            DeltaLaw::Zero => vec![(0, 1.0)],
            DeltaLaw::Bernoulli { p } => vec![(0, 1.0 - p), (1, *p)],
            DeltaLaw::FiniteSupport { values, probs } => values.iter().copied().zip(probs.iter().copied()).collect(),
        };
        out.retain(|(_, p)| *p > 0.0);
        out.sort_by_key(|(v, _)| *v);
        out
    }

    pub fn max_abs(&self) -> i32 {
        self.support().iter().map(|(v, _)| v.abs()).max().unwrap_or(0)
    }
}
