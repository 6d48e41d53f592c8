use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{with_pool, ExperimentConfig};
use crate::env::{ConductanceView, EnvironmentField};
use crate::error::{Error, Result};
use crate::lattice::Point;
use crate::levels::{partition_shell, ClassModel, PartitionOptions, Signature};
use crate::valley::{
    find_landmarks, quenched_ratios, LandmarkOutcome, LandmarkParams, QuenchedRatios, ValleyLandmarks,
};
use crate::walk::{LocalTimeLedger, Walker};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnvironmentOutcome {
    NoValley,
    ScanExceeded,
    AnFailed,
    Passed,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnvironmentRecord {
    pub index: u64,
    pub seed: u64,
    pub outcome: EnvironmentOutcome,
    #[serde(rename = "M_n")]
    pub big_m: Option<u64>,
    pub m_n: Option<u64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OffsetRecord {
    pub l: i64,
    pub shell: u64,
    /// `L(C_{m_n+l}, n) / n`
    pub fraction: f64,
    #[serde(rename = "R")]
    pub r: f64,
    #[serde(rename = "Rtilde")]
    pub r_tilde: f64,
    /// `|fraction - R| <= delta R`
    pub within_band: bool,
    pub within_band_tilde: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassRecord {
    pub signature: Signature,
    pub count: u64,
    pub local_time: u64,
    /// `L(C^j) / L(C^i)` for the dominant class `i`.
    pub observed_ratio: Option<f64>,
    /// `p_j pi^j / (p_i pi^i)`
    pub predicted_ratio: f64,
    pub within: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuenchedReplica {
    pub environment: u64,
    pub walk: u64,
    pub walk_seed: u64,
    pub m_n: u64,
    #[serde(rename = "M_n")]
    pub big_m: u64,
    pub offsets: Vec<OffsetRecord>,
    /// `sum_{|i| <= W} L(C_{m_n+i}, n) / n`
    pub window_fraction: f64,
    pub band_pass: bool,
    pub dominant: Option<Signature>,
    pub classes: Vec<ClassRecord>,
    pub class_pass: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PassedEnvironment {
    pub index: u64,
    pub landmarks: ValleyLandmarks,
    pub ratios: QuenchedRatios,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuenchedReport {
    pub config: ExperimentConfig,
    pub model: ClassModel,
    pub scanned: u64,
    pub no_valley: u64,
    pub scan_exceeded: u64,
    pub an_failed: u64,
    pub passed: u64,
    pub environments: Vec<EnvironmentRecord>,
    pub passed_environments: Vec<PassedEnvironment>,
    pub replicas: Vec<QuenchedReplica>,
    /// Fraction of replicas inside the `l = 0` band.
    pub band_pass_rate: Option<f64>,
    pub class_pass_rate: Option<f64>,
    /// Calibration constant the rates are compared against.
    pub pass_threshold: f64,
    /// Window fractions at most 1 and every ledger consistent.
    pub hard_checks_pass: bool,
    /// Both rates reach the threshold; `None` without replicas.
    pub verdict: Option<bool>,
}

fn rate(xs: impl Iterator<Item = bool>) -> Option<f64> {
    let (mut k, mut n) = (0usize, 0usize);
    for x in xs {
        n += 1;
        k += x as usize;
    }
    (n > 0).then(|| k as f64 / n as f64)
}

/// Classes of `C_{m_n}` with their local times, compared with the dominant
/// model class through `p_j pi^j / (p_i pi^i)`.
fn class_records(
    field: &EnvironmentField,
    ledger: &LocalTimeLedger,
    ratios: &QuenchedRatios,
    model: &ClassModel,
    delta: f64,
) -> (Option<Signature>, Vec<ClassRecord>) {
    let m = ratios.m_n;
    let part = partition_shell(
        field,
        m as u32,
        PartitionOptions {
            keep_members: true,
            check_values: false,
        },
    );
    let weighted: Vec<Option<f64>> = part
        .classes
        .iter()
        .map(|c| {
            model.position(&c.signature).map(|j| {
                model.classes[j].probability * c.signature.evaluate_relative(field, m as i64, ratios.reference)
            })
        })
        .collect();
    let Some((dom, dom_w)) = weighted
        .iter()
        .enumerate()
        .filter_map(|(i, w)| w.map(|w| (i, w)))
        .max_by(|a, b| a.1.total_cmp(&b.1))
    else {
        return (None, Vec::new());
    };
    let local: Vec<u64> = part
        .classes
        .iter()
        .map(|c| c.members.as_ref().map_or(0, |ms| ledger.set(ms.iter())))
        .collect();
    let records = part
        .classes
        .iter()
        .zip(&weighted)
        .zip(&local)
        .enumerate()
        .filter_map(|(i, ((c, w), lt))| {
            let w = (*w)?;
            let predicted = w / dom_w;
            let observed = (local[dom] > 0).then(|| *lt as f64 / local[dom] as f64);
            Some(ClassRecord {
                signature: c.signature.clone(),
                count: c.count,
                local_time: *lt,
                observed_ratio: observed,
                predicted_ratio: predicted,
                within: i == dom || observed.is_some_and(|o| (o - predicted).abs() <= delta),
            })
        })
        .collect();
    (Some(part.classes[dom].signature.clone()), records)
}

fn run_replica(
    cfg: &ExperimentConfig,
    field: &EnvironmentField,
    env: &PassedEnvironment,
    model: &ClassModel,
    walk: u64,
) -> (QuenchedReplica, bool) {
    let d = cfg.environment.d;
    let seed = cfg.walk_seed(env.index, walk);
    let view = ConductanceView::new(field);
    let mut walker = Walker::new(&view, Point::origin(d), seed);
    let mut ledger = LocalTimeLedger::new();
    walker.run(cfg.n, Some(&mut ledger), &mut []);
    let n = cfg.n as f64;
    let r = &env.ratios;
    let offsets: Vec<OffsetRecord> = r
        .offsets
        .iter()
        .map(|o| {
            let fraction = ledger.shell(o.shell as u32) as f64 / n;
            OffsetRecord {
                l: o.l,
                shell: o.shell,
                fraction,
                r: o.r_total,
                r_tilde: o.r_tilde_total,
                within_band: (fraction - o.r_total).abs() <= cfg.delta * o.r_total,
                within_band_tilde: (fraction - o.r_tilde_total).abs() <= cfg.delta * o.r_tilde_total,
            }
        })
        .collect();
    let w = r.window as i64;
    let m = r.m_n as i64;
    let window_fraction: f64 = (-w..=w)
        .filter(|i| m + i >= 0)
        .map(|i| ledger.shell((m + i) as u32) as f64)
        .sum::<f64>()
        / n;
    let band_pass = offsets.iter().find(|o| o.l == 0).is_some_and(|o| o.within_band);
    let (dominant, classes) = class_records(field, &ledger, r, model, cfg.delta);
    let class_pass = dominant.is_some() && classes.iter().all(|c| c.within);
    let ok = ledger.is_consistent() && window_fraction <= 1.0;
    let replica = QuenchedReplica {
        environment: env.index,
        walk,
        walk_seed: seed,
        m_n: r.m_n,
        big_m: r.big_m,
        offsets,
        window_fraction,
        band_pass,
        dominant,
        classes,
        class_pass,
    };
    (replica, ok)
}

/// Scan environments in index order until `environments` of them pass the
/// good-environment check, then run the walks on each in parallel.
pub fn run_quenched(cfg: &ExperimentConfig) -> Result<QuenchedReport> {
    cfg.validate()?;
    let model = ClassModel::exact(cfg.environment.d, &cfg.environment.delta_law)?;
    let params = LandmarkParams {
        epsilon: cfg.epsilon,
        ..LandmarkParams::default()
    };
    let mut records = Vec::new();
    let mut passed = Vec::new();
    let mut fields = Vec::new();
    let (mut no_valley, mut exceeded, mut an_failed) = (0, 0, 0);
    for index in 0..cfg.max_environment_scan {
        if passed.len() >= cfg.environments {
            break;
        }
        let field = cfg.field(index)?;
        let (outcome, lm) = match find_landmarks(&field, cfg.n, &params) {
            Ok(LandmarkOutcome::NoValley { .. }) => (EnvironmentOutcome::NoValley, None),
            Err(Error::ScanBudgetExceeded { .. }) => (EnvironmentOutcome::ScanExceeded, None),
            Err(e) => return Err(e),
            Ok(LandmarkOutcome::Found(l)) if l.a_n.all() => (EnvironmentOutcome::Passed, Some(l)),
            Ok(LandmarkOutcome::Found(l)) => (EnvironmentOutcome::AnFailed, Some(l)),
        };
        match outcome {
            EnvironmentOutcome::NoValley => no_valley += 1,
            EnvironmentOutcome::ScanExceeded => exceeded += 1,
            EnvironmentOutcome::AnFailed => an_failed += 1,
            EnvironmentOutcome::Passed => {}
        }
        records.push(EnvironmentRecord {
            index,
            seed: cfg.environment_seed(index),
            outcome,
            big_m: lm.as_ref().map(|l| l.big_m),
            m_n: lm.as_ref().map(|l| l.m_n),
        });
        if outcome == EnvironmentOutcome::Passed {
            let landmarks = lm.expect("passed environments have landmarks");
            let ratios = quenched_ratios(&field, &landmarks, -cfg.offsets..=cfg.offsets, &model)?;
            passed.push(PassedEnvironment {
                index,
                landmarks,
                ratios,
            });
            fields.push(field);
        }
    }
    let jobs: Vec<(usize, u64)> = (0..passed.len())
        .flat_map(|e| (0..cfg.walks_per_environment as u64).map(move |w| (e, w)))
        .collect();
    let results: Vec<(QuenchedReplica, bool)> = with_pool(cfg.threads, || {
        jobs.par_iter()
            .map(|&(e, w)| run_replica(cfg, &fields[e], &passed[e], &model, w))
            .collect()
    })?;
    let hard = results.iter().all(|(_, ok)| *ok);
    let replicas: Vec<QuenchedReplica> = results.into_iter().map(|(r, _)| r).collect();
    let band_pass_rate = rate(replicas.iter().map(|r| r.band_pass));
    let class_pass_rate = rate(replicas.iter().map(|r| r.class_pass));
    let verdict = band_pass_rate
        .zip(class_pass_rate)
        .map(|(b, c)| b >= cfg.pass_threshold && c >= cfg.pass_threshold);
    Ok(QuenchedReport {
        config: cfg.clone(),
        model,
        scanned: records.len() as u64,
        no_valley,
        scan_exceeded: exceeded,
        an_failed,
        passed: passed.len() as u64,
        environments: records,
        passed_environments: passed,
        replicas,
        band_pass_rate,
        class_pass_rate,
        pass_threshold: cfg.pass_threshold,
        hard_checks_pass: hard,
        verdict,
    })
}

/// One CSV row per replica and offset.
#[derive(Debug, Serialize)]
pub struct OffsetRow {
    pub environment: u64,
    pub walk: u64,
    pub l: i64,
    pub shell: u64,
    pub fraction: f64,
    #[serde(rename = "R")]
    pub r: f64,
    #[serde(rename = "Rtilde")]
    pub r_tilde: f64,
    pub within_band: bool,
}

pub fn offset_rows(report: &QuenchedReport) -> Vec<OffsetRow> {
    report
        .replicas
        .iter()
        .flat_map(|r| {
            r.offsets.iter().map(move |o| OffsetRow {
                environment: r.environment,
                walk: r.walk,
                l: o.l,
                shell: o.shell,
                fraction: o.fraction,
                r: o.r,
                r_tilde: o.r_tilde,
                within_band: o.within_band,
            })
        })
        .collect()
}
