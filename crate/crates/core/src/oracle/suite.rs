use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::chain::FiniteChain;
use super::dirichlet::dirichlet_bounds;
use super::verify::{
    verify_mixing_lemma, verify_moment_identities, verify_second_moment_decomposition, verify_variance_bound, Check,
    Report,
};
use crate::env::{ConductanceView, DeltaLaw, EnvironmentField, EnvironmentSpec, IncrementLaw, Negated};
use crate::error::{Error, Result};
use crate::lattice::{self, Point};
use crate::levels::{partition_shell, PartitionOptions};
use crate::rng::{derive_seed, stream, TAG_ORACLE, TAG_WALK};
use crate::walk::excursion_local_time;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SuiteConfig {
    pub seed: u64,
    pub dims: Vec<usize>,
    pub radii: Vec<u32>,
    pub seeds_per_case: u64,
    pub increment_law: IncrementLaw,
    pub delta_law: DeltaLaw,
    pub decomposition_ls: Vec<usize>,
    pub mixing_ls: Vec<usize>,
    /// Flip the sign of V at one site in the dynamics only.
    pub mutate: bool,
}

impl Default for SuiteConfig {
    fn default() -> Self {
        SuiteConfig {
            seed: 1,
            dims: vec![1, 2, 3],
            radii: vec![2, 3],
            seeds_per_case: 20,
            increment_law: IncrementLaw::Rademacher,
            delta_law: DeltaLaw::Bernoulli { p: 0.5 },
            decomposition_ls: vec![2, 3, 4],
            mixing_ls: vec![1, 2, 5, 10],
            mutate: false,
        }
    }
}

impl SuiteConfig {
    fn field(&self, d: usize, index: u64) -> Result<EnvironmentField> {
        EnvironmentField::new(EnvironmentSpec {
            d,
            increment_law: self.increment_law.clone(),
            delta_law: self.delta_law.clone(),
            seed: derive_seed(self.seed, TAG_ORACLE, index),
        })
    }

    fn cases(&self) -> Vec<(u64, usize, u32)> {
        let mut out = Vec::new();
        for &d in &self.dims {
            for &k in &self.radii {
                for _ in 0..self.seeds_per_case {
                    out.push((out.len() as u64, d, k));
                }
            }
        }
        out
    }
}

/// Members of one level-set class in a random shell of `1..radius`.
fn random_class<R: Rng>(field: &EnvironmentField, radius: u32, rng: &mut R) -> Vec<Point> {
    let k = rng.gen_range(1..radius);
    let part = partition_shell(
        field,
        k,
        PartitionOptions {
            keep_members: true,
            check_values: false,
        },
    );
    let class = part.classes.choose(rng).expect("shells are non-empty");
    class.members.clone().expect("members kept")
}

/// One randomized instance: a level set `A`, a second level set, and a site
/// outside `A`.
pub struct Instance {
    pub field: EnvironmentField,
    pub a: Vec<Point>,
    pub a2: Vec<Point>,
    pub x: Point,
    pub radius: u32,
}

pub fn instance(cfg: &SuiteConfig, index: u64, d: usize, radius: u32) -> Result<Instance> {
    if radius < 2 {
        return Err(Error::InvalidConfig("suite radius must be at least 2".into()));
    }
    let field = cfg.field(d, index)?;
    let mut rng = stream(cfg.seed, TAG_ORACLE, index);
    let a = random_class(&field, radius, &mut rng);
    let a2 = random_class(&field, radius, &mut rng);
    let outside: Vec<Point> = lattice::ball(d, radius)
        .filter(|p| !a.contains(p) && (!cfg.mutate || field.potential(p) != 0.0))
        .collect();
    let x = *outside
        .choose(&mut rng)
        .ok_or_else(|| Error::InvalidInstance("no site available outside A".into()))?;
    Ok(Instance {
        field,
        a,
        a2,
        x,
        radius,
    })
}

fn run_instance(cfg: &SuiteConfig, index: u64, d: usize, radius: u32) -> Result<Report> {
    let inst = instance(cfg, index, d, radius)?;
    let chain = if cfg.mutate {
        let bad = Negated {
            base: &inst.field,
            site: inst.x,
        };
        FiniteChain::with_reference(bad, &inst.field, radius)
    } else {
        FiniteChain::reflecting(&inst.field, radius)
    };
    let a = chain.indices_of(&inst.a)?;
    let a2 = chain.indices_of(&inst.a2)?;
    let x = chain.indices_of(&[inst.x])?[0];
    let mut report = verify_moment_identities(&chain, &a, x, Some(&a2))?;
    report.extend(verify_moment_identities(&chain, &a, a[0], None)?);
    report.extend(verify_variance_bound(&chain, &a, x)?);
    for &l in &cfg.decomposition_ls {
        report.extend(verify_second_moment_decomposition(&chain, &a, x, l)?);
    }
    for &l in &cfg.mixing_ls {
        report.extend(verify_mixing_lemma(&chain, &a, l)?);
    }
    Ok(report)
}

/// Every identity and bound on every configured instance. Instances run in
/// parallel; the report keeps the configured order.
pub fn run_suite(cfg: &SuiteConfig) -> Result<Report> {
    let parts: Vec<Result<Report>> = cfg
        .cases()
        .into_par_iter()
        .map(|(i, d, k)| run_instance(cfg, i, d, k))
        .collect();
    let mut report = Report::default();
    for p in parts {
        report.extend(p?);
    }
    Ok(report)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DirichletSuiteConfig {
    pub seed: u64,
    pub d: usize,
    pub max_k: u32,
    pub instances: u64,
    pub increment_law: IncrementLaw,
    pub delta_law: DeltaLaw,
}

impl Default for DirichletSuiteConfig {
    fn default() -> Self {
        DirichletSuiteConfig {
            seed: 2,
            d: 2,
            max_k: 3,
            instances: 20,
            increment_law: IncrementLaw::Rademacher,
            delta_law: DeltaLaw::Bernoulli { p: 0.5 },
        }
    }
}

/// Random `(k, z)` pairs, each checked with one site inside `B_k` and one
/// in `B_{k+2}` outside it, along canonical paths.
pub fn run_dirichlet_suite(cfg: &DirichletSuiteConfig) -> Result<Report> {
    let parts: Vec<Result<Report>> = (0..cfg.instances)
        .into_par_iter()
        .map(|i| {
            let field = EnvironmentField::new(EnvironmentSpec {
                d: cfg.d,
                increment_law: cfg.increment_law.clone(),
                delta_law: cfg.delta_law.clone(),
                seed: derive_seed(cfg.seed, TAG_ORACLE, i),
            })?;
            let mut rng = stream(cfg.seed, TAG_ORACLE, i);
            let k = rng.gen_range(1..=cfg.max_k);
            let inner: Vec<Point> = lattice::ball(cfg.d, k).collect();
            let outer: Vec<Point> = lattice::ball(cfg.d, k + 2).filter(|p| p.norm() > k).collect();
            let mut r = dirichlet_bounds(&field, k, inner.choose(&mut rng).expect("non-empty"), None)?;
            r.extend(dirichlet_bounds(
                &field,
                k,
                outer.choose(&mut rng).expect("non-empty"),
                None,
            )?);
            Ok(r)
        })
        .collect();
    let mut report = Report::default();
    for p in parts {
        report.extend(p?);
    }
    Ok(report)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct McComparison {
    pub instance: String,
    pub exact: f64,
    pub estimate: f64,
    pub std_error: f64,
    /// `|estimate - exact| / std_error`
    pub z_score: f64,
}

/// Simulated `sum_{z in A} E_z L(x, T_A^+)` against the exact value on the
/// suite's instances, with the walk confined to the same box.
pub fn monte_carlo_consistency(
    cfg: &SuiteConfig,
    configurations: usize,
    repetitions: u64,
) -> Result<Vec<McComparison>> {
    let all = cfg.cases();
    let stride = (all.len() / configurations.max(1)).max(1);
    let cases: Vec<_> = all.into_iter().step_by(stride).take(configurations).collect();
    cases
        .into_par_iter()
        .map(|(i, d, radius)| {
            let inst = instance(cfg, i, d, radius)?;
            let chain = FiniteChain::reflecting(&inst.field, radius);
            let a = chain.indices_of(&inst.a)?;
            let x = chain.indices_of(&[inst.x])?[0];
            let killed = super::chain::KilledChain::new(&chain, &a)?;
            let exact = killed.multi_excursion_moments(x, 1).0.sum();
            let view = ConductanceView::reflecting(&inst.field, radius);
            let est = excursion_local_time(
                &view,
                &inst.a,
                inst.x,
                repetitions,
                1 << 40,
                derive_seed(cfg.seed, TAG_WALK, i),
            )?;
            let se = est.std_error.max(f64::MIN_POSITIVE);
            Ok(McComparison {
                instance: format!("d={d} K={radius} |A|={} x={}", inst.a.len(), inst.x),
                exact,
                estimate: est.mean,
                std_error: est.std_error,
                z_score: (est.mean - exact).abs() / se,
            })
        })
        .collect()
}

/// Checks named `name` that failed, for summaries.
pub fn failures_named<'a>(report: &'a Report, name: &'a str) -> impl Iterator<Item = &'a Check> + 'a {
    report.failures().filter(move |c| c.name == name)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> SuiteConfig {
        SuiteConfig {
            dims: vec![2],
            radii: vec![2],
            seeds_per_case: 3,
            ..SuiteConfig::default()
        }
    }

    #[test]
    fn identities_hold_on_small_suite() {
        let r = run_suite(&small()).unwrap();
        for name in [
            "excursion_mean",
            "excursion_mean_cross",
            "excursion_mean_l5",
            "excursion_mean_cross_l5",
            "variance_bound",
            "decomposition_exact",
            "centered_means_sum",
        ] {
            assert!(r.named(name).count() > 0, "{name}");
            assert_eq!(failures_named(&r, name).count(), 0, "{name}");
        }
    }

    #[test]
    fn suite_is_deterministic() {
        let a = serde_json::to_string(&run_suite(&small()).unwrap()).unwrap();
        let b = serde_json::to_string(&run_suite(&small()).unwrap()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn mutation_is_detected() {
        let cfg = SuiteConfig {
            mutate: true,
            ..small()
        };
        let r = run_suite(&cfg).unwrap();
        assert!(failures_named(&r, "excursion_mean").count() > 0);
    }
}
