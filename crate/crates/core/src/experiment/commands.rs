//! Configurations and runners behind the smaller CLI subcommands.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::with_pool;
use crate::env::{ConductanceView, DeltaLaw, EnvironmentField, EnvironmentSpec};
use crate::error::{Error, Result};
use crate::lattice::{self, Point};
use crate::levels::{
    bernoulli_enumeration, estimate_proportions, partition_shell, stated_bernoulli_class_count, BernoulliClass,
    ClassModel, LevelSetPartition, PartitionOptions, ProportionEstimate,
};
use crate::oracle::{
    monte_carlo_consistency, run_dirichlet_suite, run_suite, CheckKind, DirichletSuiteConfig, McComparison, Report,
    SuiteConfig,
};
use crate::rng::{derive_seed, TAG_WALK};
use crate::valley::{find_landmarks, LandmarkOutcome, LandmarkParams};
use crate::walk::{HittingRecord, HittingTarget, LocalTimeLedger, Walker};

fn field_of(spec: &EnvironmentSpec, prefix: &Option<Vec<f64>>) -> Result<EnvironmentField> {
    EnvironmentField::with_prefix(spec.clone(), prefix.clone().unwrap_or_default())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnvDumpConfig {
    pub environment: EnvironmentSpec,
    #[serde(default)]
    pub prefix: Option<Vec<f64>>,
    /// Sites of `B_radius` are listed.
    pub radius: u32,
    /// `S_k` is listed for `k` in `[s_from, s_to]`.
    pub s_from: i64,
    pub s_to: i64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SiteRow {
    pub site: String,
    pub norm: u32,
    pub delta: i32,
    pub index: i64,
    #[serde(rename = "V")]
    pub v: f64,
    pub capacitance: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnvDump {
    pub config: EnvDumpConfig,
    pub s: Vec<(i64, f64)>,
    pub sites: Vec<SiteRow>,
}

pub fn env_dump(cfg: &EnvDumpConfig) -> Result<EnvDump> {
    if cfg.s_from > cfg.s_to {
        return Err(Error::InvalidConfig("s_from must not exceed s_to".into()));
    }
    let field = field_of(&cfg.environment, &cfg.prefix)?;
    let view = ConductanceView::new(&field);
    let s = (cfg.s_from..=cfg.s_to).map(|k| (k, field.s_value(k))).collect();
    let sites = lattice::ball(field.dim(), cfg.radius)
        .map(|x| SiteRow {
            site: x.to_string(),
            norm: x.norm(),
            delta: field.delta(&x),
            index: field.potential_index(&x),
            v: field.potential(&x),
            capacitance: view.capacitance(&x),
        })
        .collect();
    Ok(EnvDump {
        config: cfg.clone(),
        s,
        sites,
    })
}

fn one() -> usize {
    1
}
fn twenty() -> usize {
    20
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WalkRunConfig {
    pub environment: EnvironmentSpec,
    #[serde(default)]
    pub prefix: Option<Vec<f64>>,
    pub n: u64,
    #[serde(default = "one")]
    pub walks: usize,
    #[serde(default)]
    pub start: Option<Point>,
    /// Master seed of the trajectories.
    pub seed: u64,
    #[serde(default = "twenty")]
    pub top_sites: usize,
    #[serde(default)]
    pub hitting: Vec<HittingTarget>,
    #[serde(default = "one")]
    pub hits_wanted: usize,
    #[serde(default)]
    pub threads: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WalkSummary {
    pub walk: u64,
    pub seed: u64,
    pub final_position: Point,
    pub visited_sites: usize,
    pub shells: Vec<u64>,
    pub top_sites: Vec<(Point, u64)>,
    pub hitting: Vec<HittingRecord>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WalkRunReport {
    pub config: WalkRunConfig,
    pub walks: Vec<WalkSummary>,
}

pub fn walk_run(cfg: &WalkRunConfig) -> Result<WalkRunReport> {
    if cfg.walks == 0 {
        return Err(Error::InvalidConfig("walks must be positive".into()));
    }
    let field = field_of(&cfg.environment, &cfg.prefix)?;
    let start = cfg.start.unwrap_or_else(|| Point::origin(field.dim()));
    if start.dim() != field.dim() {
        return Err(Error::InvalidConfig("start point has the wrong dimension".into()));
    }
    let view = ConductanceView::new(&field);
    let walks = with_pool(cfg.threads, || {
        (0..cfg.walks as u64)
            .into_par_iter()
            .map(|w| {
                let seed = derive_seed(cfg.seed, TAG_WALK, w);
                let mut walker = Walker::new(&view, start, seed);
                let mut ledger = LocalTimeLedger::new();
                let mut watches: Vec<HittingRecord> = cfg
                    .hitting
                    .iter()
                    .map(|t| HittingRecord::new(t.clone(), cfg.hits_wanted))
                    .collect();
                walker.run(cfg.n, Some(&mut ledger), &mut watches);
                WalkSummary {
                    walk: w,
                    seed,
                    final_position: walker.position(),
                    visited_sites: ledger.visited_sites(),
                    shells: ledger.shells().to_vec(),
                    top_sites: ledger.top_sites(cfg.top_sites),
                    hitting: watches,
                }
            })
            .collect()
    })?;
    Ok(WalkRunReport {
        config: cfg.clone(),
        walks,
    })
}

#[derive(Debug, Serialize)]
pub struct ShellRow {
    pub walk: u64,
    pub shell: usize,
    pub local_time: u64,
}

pub fn shell_rows(report: &WalkRunReport) -> Vec<ShellRow> {
    report
        .walks
        .iter()
        .flat_map(|w| {
            w.shells.iter().enumerate().map(move |(k, c)| ShellRow {
                walk: w.walk,
                shell: k,
                local_time: *c,
            })
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LevelsetsConfig {
    pub environment: EnvironmentSpec,
    #[serde(default)]
    pub prefix: Option<Vec<f64>>,
    pub shells: Vec<u32>,
    #[serde(default)]
    pub keep_members: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BernoulliSummary {
    pub classes: Vec<BernoulliClass>,
    pub count: usize,
    pub stated_count: usize,
    pub probability_sum: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LevelsetsReport {
    pub config: LevelsetsConfig,
    pub partitions: Vec<LevelSetPartition>,
    /// Pooled over the configured shells large enough for an estimate.
    pub proportions: Option<ProportionEstimate>,
    pub model: ClassModel,
    pub bernoulli: Option<BernoulliSummary>,
}

pub fn levelsets(cfg: &LevelsetsConfig) -> Result<LevelsetsReport> {
    let field = field_of(&cfg.environment, &cfg.prefix)?;
    let opts = PartitionOptions {
        keep_members: cfg.keep_members,
        check_values: true,
    };
    let partitions = cfg.shells.iter().map(|k| partition_shell(&field, *k, opts)).collect();
    let floor = cfg.environment.delta_law.max_abs() as u32 + 1;
    let big: Vec<u32> = cfg.shells.iter().copied().filter(|k| *k > floor).collect();
    let proportions = if big.is_empty() {
        None
    } else {
        Some(estimate_proportions(&field, &big)?)
    };
    let d = cfg.environment.d;
    let bernoulli = match cfg.environment.delta_law {
        DeltaLaw::Bernoulli { p } => {
            let classes = bernoulli_enumeration(d, p);
            Some(BernoulliSummary {
                count: classes.iter().filter(|c| c.probability > 0.0).count(),
                stated_count: stated_bernoulli_class_count(d),
                probability_sum: classes.iter().map(|c| c.probability).sum(),
                classes,
            })
        }
        _ => None,
    };
    Ok(LevelsetsReport {
        config: cfg.clone(),
        partitions,
        proportions,
        model: ClassModel::exact(d, &cfg.environment.delta_law)?,
        bernoulli,
    })
}

#[derive(Debug, Serialize)]
pub struct ClassRow {
    pub shell: u32,
    pub signature: String,
    pub count: u64,
    pub face_interior_count: u64,
    pub value: f64,
}

pub fn class_rows(report: &LevelsetsReport) -> Vec<ClassRow> {
    report
        .partitions
        .iter()
        .flat_map(|p| {
            p.classes.iter().map(move |c| ClassRow {
                shell: p.k,
                signature: format!("{:?}", c.signature),
                count: c.count,
                face_interior_count: c.face_interior_count,
                value: c.value,
            })
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LandmarksConfig {
    pub environment: EnvironmentSpec,
    #[serde(default)]
    pub prefix: Option<Vec<f64>>,
    pub n: u64,
    /// Environments with seeds derived from `environment.seed`; 0 means
    /// the given seed only.
    #[serde(default)]
    pub environments: u64,
    #[serde(default)]
    pub params: LandmarkParams,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LandmarkRecord {
    pub index: u64,
    pub seed: u64,
    pub outcome: Option<LandmarkOutcome>,
    pub scan_exceeded: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LandmarksReport {
    pub config: LandmarksConfig,
    pub records: Vec<LandmarkRecord>,
    pub found: u64,
    pub an_passed: u64,
    pub an_fraction: f64,
}

pub fn landmarks(cfg: &LandmarksConfig) -> Result<LandmarksReport> {
    let seeds: Vec<(u64, u64)> = if cfg.environments == 0 {
        vec![(0, cfg.environment.seed)]
    } else {
        (0..cfg.environments)
            .map(|i| (i, derive_seed(cfg.environment.seed, crate::rng::TAG_ENV, i)))
            .collect()
    };
    let records: Vec<LandmarkRecord> = seeds
        .into_par_iter()
        .map(|(index, seed)| {
            let field = field_of(&cfg.environment.with_seed(seed), &cfg.prefix)?;
            match find_landmarks(&field, cfg.n, &cfg.params) {
                Ok(o) => Ok(LandmarkRecord {
                    index,
                    seed,
                    outcome: Some(o),
                    scan_exceeded: false,
                }),
                Err(Error::ScanBudgetExceeded { .. }) => Ok(LandmarkRecord {
                    index,
                    seed,
                    outcome: None,
                    scan_exceeded: true,
                }),
                Err(e) => Err(e),
            }
        })
        .collect::<Result<_>>()?;
    let found = records
        .iter()
        .filter(|r| r.outcome.as_ref().is_some_and(|o| o.landmarks().is_some()))
        .count() as u64;
    let an_passed = records
        .iter()
        .filter(|r| {
            r.outcome
                .as_ref()
                .and_then(|o| o.landmarks())
                .is_some_and(|l| l.a_n.all())
        })
        .count() as u64;
    let an_fraction = an_passed as f64 / records.len() as f64;
    Ok(LandmarksReport {
        config: cfg.clone(),
        records,
        found,
        an_passed,
        an_fraction,
    })
}

fn thirty() -> usize {
    30
}
fn mc_reps() -> u64 {
    20_000
}
fn four() -> f64 {
    4.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OracleConfig {
    #[serde(default)]
    pub suite: SuiteConfig,
    #[serde(default)]
    pub dirichlet: DirichletSuiteConfig,
    #[serde(default = "thirty")]
    pub mc_configurations: usize,
    #[serde(default = "mc_reps")]
    pub mc_repetitions: u64,
    /// Largest accepted `|estimate - exact| / std_error`.
    #[serde(default = "four")]
    pub mc_z_limit: f64,
    #[serde(default)]
    pub threads: Option<usize>,
}

impl Default for OracleConfig {
    fn default() -> Self {
        OracleConfig {
            suite: SuiteConfig::default(),
            dirichlet: DirichletSuiteConfig::default(),
            mc_configurations: thirty(),
            mc_repetitions: mc_reps(),
            mc_z_limit: four(),
            threads: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckSummary {
    pub name: String,
    pub kind: CheckKind,
    pub total: usize,
    pub failed: usize,
    /// Largest relative gap for equalities, smallest slack for bounds.
    pub worst: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OracleReport {
    pub config: OracleConfig,
    pub summary: Vec<CheckSummary>,
    pub identities: Report,
    pub dirichlet: Report,
    pub monte_carlo: Vec<McComparison>,
    pub monte_carlo_pass: bool,
    pub pass: bool,
}

pub fn summarize(report: &Report) -> Vec<CheckSummary> {
    let mut out: Vec<CheckSummary> = Vec::new();
    for c in &report.checks {
        let idx = match out.iter().position(|s| s.name == c.name) {
            Some(i) => i,
            None => {
                let worst = if c.kind == CheckKind::Equality || c.kind == CheckKind::Informational {
                    0.0
                } else {
                    f64::INFINITY
                };
                out.push(CheckSummary {
                    name: c.name.clone(),
                    kind: c.kind,
                    total: 0,
                    failed: 0,
                    worst,
                });
                out.len() - 1
            }
        };
        let s = &mut out[idx];
        s.total += 1;
        s.failed += !c.pass as usize;
        s.worst = match c.kind {
            CheckKind::Equality | CheckKind::Informational => s.worst.max(c.gap),
            _ => s.worst.min(c.gap),
        };
    }
    out
}

pub fn run_oracle(cfg: &OracleConfig) -> Result<OracleReport> {
    with_pool(cfg.threads, || {
        let identities = run_suite(&cfg.suite)?;
        let dirichlet = run_dirichlet_suite(&cfg.dirichlet)?;
        let monte_carlo = monte_carlo_consistency(&cfg.suite, cfg.mc_configurations, cfg.mc_repetitions)?;
        let monte_carlo_pass = monte_carlo.iter().all(|m| m.z_score <= cfg.mc_z_limit);
        let mut summary = summarize(&identities);
        summary.extend(summarize(&dirichlet));
        let pass = identities.pass() && dirichlet.pass() && monte_carlo_pass;
        Ok(OracleReport {
            config: cfg.clone(),
            summary,
            identities,
            dirichlet,
            monte_carlo,
            monte_carlo_pass,
            pass,
        })
    })?
}
