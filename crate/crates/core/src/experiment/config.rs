use serde::{Deserialize, Serialize};

use crate::env::{EnvironmentField, EnvironmentSpec};
use crate::error::{Error, Result};
use crate::rng::{derive_seed, TAG_ENV, TAG_WALK};

/// Walk seeds of one environment occupy a block of this many indices.
pub const WALK_STRIDE: u64 = 1 << 20;

fn default_offsets() -> i64 {
    2
}
fn default_scan() -> u64 {
    5000
}
fn default_limit_samples() -> usize {
    2000
}
fn default_limit_radius() -> usize {
    64
}
fn default_limit_max_radius() -> usize {
    1 << 15
}
fn default_tail_tol() -> f64 {
    1e-4
}
fn default_pass_threshold() -> f64 {
    0.6
}

/// Shared by the quenched and annealed runs. `environment.seed` is the
/// master seed; per-replica seeds are derived from it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub environment: EnvironmentSpec,
    /// Replaces the start of `S_0, S_1, ...` in every environment.
    #[serde(default)]
    pub prefix: Option<Vec<f64>>,
    pub n: u64,
    /// Environments that must pass the good-environment check (quenched),
    /// or environment replicas (annealed).
    pub environments: usize,
    #[serde(default = "one")]
    pub walks_per_environment: usize,
    /// Profile radius `k_w`.
    pub window: usize,
    pub delta: f64,
    pub epsilon: f64,
    /// Quenched offsets `l` in `[-offsets, offsets]`.
    #[serde(default = "default_offsets")]
    pub offsets: i64,
    #[serde(default = "default_scan")]
    pub max_environment_scan: u64,
    /// Annealed horizons; `[n]` when empty.
    #[serde(default)]
    pub horizons: Vec<u64>,
    #[serde(default = "default_limit_samples")]
    pub limit_samples: usize,
    #[serde(default = "default_limit_radius")]
    pub limit_radius: usize,
    #[serde(default = "default_limit_max_radius")]
    pub limit_max_radius: usize,
    #[serde(default = "default_tail_tol")]
    pub tail_tol: f64,
    /// Calibration: minimum pass rate for the quenched verdict.
    #[serde(default = "default_pass_threshold")]
    pub pass_threshold: f64,
    #[serde(default)]
    pub threads: Option<usize>,
}

fn one() -> usize {
    1
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        self.environment.validate()?;
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if self.n < 1000 || self.horizons.iter().any(|h| *h < 1000) {
            return bad("time horizons must be at least 1000".into());
        }
        if self.environments == 0 || self.walks_per_environment == 0 || self.limit_samples == 0 {
            return bad("replica counts must be positive".into());
        }
        for (name, v) in [
            ("delta", self.delta),
            ("epsilon", self.epsilon),
            ("pass_threshold", self.pass_threshold),
        ] {
            if !(v > 0.0 && v < 1.0) {
                return bad(format!("{name} = {v} must lie in (0, 1)"));
            }
        }
        if self.offsets < 0 {
            return bad("offsets must be non-negative".into());
        }
        if self.threads == Some(0) {
            return bad("threads must be positive".into());
        }
        Ok(())
    }

    pub fn horizons(&self) -> Vec<u64> {
        if self.horizons.is_empty() {
            vec![self.n]
        } else {
            self.horizons.clone()
        }
    }

    pub fn environment_seed(&self, index: u64) -> u64 {
        derive_seed(self.environment.seed, TAG_ENV, index)
    }

    pub fn walk_seed(&self, environment: u64, walk: u64) -> u64 {
        derive_seed(self.environment.seed, TAG_WALK, environment * WALK_STRIDE + walk)
    }

    pub fn field(&self, index: u64) -> Result<EnvironmentField> {
        let spec = self.environment.with_seed(self.environment_seed(index));
        EnvironmentField::with_prefix(spec, self.prefix.clone().unwrap_or_default())
    }
}

/// Run `f` on a pool of `threads` workers, or on the global pool.
pub fn with_pool<T: Send>(threads: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    match threads {
        None => Ok(f()),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| Error::InvalidConfig(format!("thread pool: {e}")))?;
            Ok(pool.install(f))
        }
    }
}
