//! Empirical distribution functions and the two-sample Kolmogorov-Smirnov
//! distance.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Sorted sample; `F(t) = #{x <= t} / n`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Ecdf {
    sorted: Vec<f64>,
}

impl Ecdf {
    pub fn new(mut sample: Vec<f64>) -> Result<Self> {
        if sample.is_empty() {
            return Err(Error::InvalidConfig("empty sample".into()));
        }
        if sample.iter().any(|x| x.is_nan()) {
            return Err(Error::InvalidConfig("sample contains NaN".into()));
        }
        sample.sort_by(f64::total_cmp);
        Ok(Ecdf { sorted: sample })
    }

    pub fn len(&self) -> usize {
        self.sorted.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sorted.is_empty()
    }

    pub fn sample(&self) -> &[f64] {
        &self.sorted
    }

    pub fn eval(&self, t: f64) -> f64 {
        self.sorted.partition_point(|x| *x <= t) as f64 / self.len() as f64
    }

    /// Smallest sample value `x` with `F(x) >= q`.
    pub fn quantile(&self, q: f64) -> f64 {
        let n = self.len();
        let i = ((q.clamp(0.0, 1.0) * n as f64).ceil() as usize).clamp(1, n);
        self.sorted[i - 1]
    }

    pub fn mean(&self) -> f64 {
        self.sorted.iter().sum::<f64>() / self.len() as f64
    }

    /// `(x, F(x))` at each distinct sample value.
    pub fn steps(&self) -> Vec<(f64, f64)> {
        let n = self.len() as f64;
        let mut out: Vec<(f64, f64)> = Vec::new();
        for (i, x) in self.sorted.iter().enumerate() {
            let f = (i + 1) as f64 / n;
            match out.last_mut() {
                Some(last) if last.0 == *x => last.1 = f,
                _ => out.push((*x, f)),
            }
        }
        out
    }
}

/// `sup_t |F(t) - G(t)|`, evaluated at every jump of either function.
pub fn ks_distance(a: &Ecdf, b: &Ecdf) -> f64 {
    let (xs, ys) = (a.sample(), b.sample());
    let (n, m) = (xs.len() as f64, ys.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut d: f64 = 0.0;
    while i < xs.len() && j < ys.len() {
        let t = xs[i].min(ys[j]);
        while i < xs.len() && xs[i] <= t {
            i += 1;
        }
        while j < ys.len() && ys[j] <= t {
            j += 1;
        }
        d = d.max((i as f64 / n - j as f64 / m).abs());
    }
    d
}

/// Asymptotic critical value `c(alpha) sqrt((n+m)/(nm))` of the two-sample
/// test.
pub fn ks_critical(n: usize, m: usize, alpha: f64) -> f64 {
    let c = (-(alpha / 2.0).ln() / 2.0).sqrt();
    c * ((n + m) as f64 / (n as f64 * m as f64)).sqrt()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub count: usize,
    pub mean: f64,
    pub std_dev: f64,
    pub min: f64,
    pub max: f64,
}

impl Summary {
    pub fn of(xs: &[f64]) -> Option<Self> {
        if xs.is_empty() {
            return None;
        }
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let var = if xs.len() > 1 {
            xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)
        } else {
            0.0
        };
        Some(Summary {
            count: xs.len(),
            mean,
            std_dev: var.sqrt(),
            min: xs.iter().copied().fold(f64::INFINITY, f64::min),
            max: xs.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        })
    }
}
