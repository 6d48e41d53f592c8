use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{with_pool, ExperimentConfig};
use crate::conditioned::{bernoulli_profile, converged_profile, trivial_profile, LimitProfile, SamplerOptions};
use crate::env::{ConductanceView, DeltaLaw};
use crate::error::Result;
use crate::lattice::Point;
use crate::levels::ClassModel;
use crate::rng::{derive_seed, TAG_LIMIT};
use crate::stats::{ks_critical, ks_distance, Ecdf, Summary};
use crate::valley::{find_landmarks, LandmarkParams};
use crate::walk::{LocalTimeLedger, Walker};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProfilePoint {
    pub i: i64,
    /// Mean of `L(C_{m_n+i}, n) / n` over replicas with a valley.
    pub empirical: Option<f64>,
    /// Mean of the sampled `Pi(i)`.
    pub limit: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WalkReplica {
    pub environment: u64,
    pub walk_seed: u64,
    /// `sup_l L(C_l, n) / n`
    pub sup: f64,
    pub argmax_shell: u64,
    pub m_n: Option<u64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HorizonResult {
    pub n: u64,
    pub replicas: Vec<WalkReplica>,
    pub summary: Summary,
    pub ks: f64,
    /// Asymptotic 5% critical value for the two sample sizes.
    pub ks_critical: f64,
    pub profile: Vec<ProfilePoint>,
    pub profile_replicas: usize,
    pub profile_max_gap: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LimitSample {
    pub seed: u64,
    pub radius: usize,
    pub sup: f64,
    pub argmax: i64,
    pub tail: f64,
}

/// The general profile against a closed form on the same paths.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClosedFormCheck {
    pub formula: String,
    pub max_abs_diff: f64,
    pub bitwise_equal: bool,
    pub pass: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnnealedReport {
    pub config: ExperimentConfig,
    pub model: ClassModel,
    pub limit: Vec<LimitSample>,
    pub limit_summary: Summary,
    pub horizons: Vec<HorizonResult>,
    /// KS distance strictly decreasing along the horizons.
    pub ks_trend_decreasing: bool,
    pub cdfs_proper: bool,
    pub closed_form: Option<ClosedFormCheck>,
    pub hard_checks_pass: bool,
}

fn proper(e: &Ecdf) -> bool {
    let s = e.steps();
    s.windows(2).all(|w| w[0].0 < w[1].0 && w[0].1 <= w[1].1)
        && s.last().is_some_and(|l| l.1 == 1.0)
        && e.sample().iter().all(|x| (0.0..=1.0).contains(x))
}

fn closed_form(
    cfg: &ExperimentConfig,
    paths: &[(crate::conditioned::ConditionedPath, LimitProfile)],
) -> Result<Option<ClosedFormCheck>> {
    let d = cfg.environment.d;
    let (formula, exact_required) = match cfg.environment.delta_law {
        DeltaLaw::Zero => ("trivial", true),
        DeltaLaw::Bernoulli { .. } => ("bernoulli", false),
        _ => return Ok(None),
    };
    let mut max_diff: f64 = 0.0;
    let mut bitwise = true;
    for (path, general) in paths {
        let special = match cfg.environment.delta_law {
            DeltaLaw::Zero => trivial_profile(path, d, cfg.window, f64::INFINITY)?,
            DeltaLaw::Bernoulli { p } => bernoulli_profile(path, d, p, cfg.window, f64::INFINITY)?,
            _ => unreachable!(),
        };
        for (a, b) in general
            .values
            .iter()
            .zip(&special.values)
            .chain([(&general.sup, &special.sup)])
        {
            max_diff = max_diff.max((a - b).abs());
            bitwise &= a.to_bits() == b.to_bits();
        }
    }
    let pass = if exact_required { bitwise } else { max_diff <= 1e-12 };
    Ok(Some(ClosedFormCheck {
        formula: formula.into(),
        max_abs_diff: max_diff,
        bitwise_equal: bitwise,
        pass,
    }))
}

fn walk_replica(cfg: &ExperimentConfig, n: u64, index: u64) -> Result<(WalkReplica, Option<Vec<f64>>)> {
    let field = cfg.field(index)?;
    let view = ConductanceView::new(&field);
    let seed = cfg.walk_seed(index, 0);
    let mut walker = Walker::new(&view, Point::origin(cfg.environment.d), seed);
    let mut ledger = LocalTimeLedger::new();
    walker.run(n, Some(&mut ledger), &mut []);
    let (argmax, top) = ledger
        .shells()
        .iter()
        .enumerate()
        .fold((0, 0), |best, (k, c)| if *c > best.1 { (k, *c) } else { best });
    let params = LandmarkParams {
        epsilon: cfg.epsilon,
        ..LandmarkParams::default()
    };
    let m_n = match find_landmarks(&field, n, &params) {
        Ok(o) => o.landmarks().map(|l| l.m_n),
        Err(crate::Error::ScanBudgetExceeded { .. }) => None,
        Err(e) => return Err(e),
    };
    let k = cfg.window as i64;
    let profile = m_n.map(|m| {
        (-k..=k)
            .map(|i| {
                let s = m as i64 + i;
                if s < 0 {
                    0.0
                } else {
                    ledger.shell(s as u32) as f64 / n as f64
                }
            })
            .collect()
    });
    let rep = WalkReplica {
        environment: index,
        walk_seed: seed,
        sup: top as f64 / n as f64,
        argmax_shell: argmax as u64,
        m_n,
    };
    Ok((rep, profile))
}

/// Empirical law of `sup_l L(C_l, n)/n` at each horizon against sampled
/// `sup_i Pi(i)`, with the same environments and walk seeds at every
/// horizon.
pub fn run_annealed(cfg: &ExperimentConfig) -> Result<AnnealedReport> {
    cfg.validate()?;
    let model = ClassModel::exact(cfg.environment.d, &cfg.environment.delta_law)?;
    let law = cfg.environment.increment_law.clone();
    with_pool(cfg.threads, || -> Result<AnnealedReport> {
        let opts = SamplerOptions::default();
        let paths: Vec<_> = (0..cfg.limit_samples as u64)
            .into_par_iter()
            .map(|i| {
                let seed = derive_seed(cfg.environment.seed, TAG_LIMIT, i);
                converged_profile(
                    &law,
                    &model,
                    cfg.limit_radius,
                    cfg.limit_max_radius,
                    seed,
                    cfg.window,
                    cfg.tail_tol,
                    &opts,
                )
                .map(|(p, prof)| (seed, p, prof))
            })
            .collect::<Result<_>>()?;
        let limit: Vec<LimitSample> = paths
            .iter()
            .map(|(seed, p, prof)| LimitSample {
                seed: *seed,
                radius: p.radius(),
                sup: prof.sup,
                argmax: prof.argmax,
                tail: prof.tail,
            })
            .collect();
        let limit_ecdf = Ecdf::new(limit.iter().map(|s| s.sup).collect())?;
        let k = cfg.window as i64;
        let limit_profile: Vec<f64> = (0..=2 * k as usize)
            .map(|j| paths.iter().map(|(_, _, prof)| prof.values[j]).sum::<f64>() / paths.len() as f64)
            .collect();
        let pairs: Vec<_> = paths.into_iter().map(|(_, p, prof)| (p, prof)).collect();
        let closed = closed_form(cfg, &pairs)?;

        let mut horizons = Vec::new();
        let mut cdfs_proper = proper(&limit_ecdf);
        for n in cfg.horizons() {
            let reps: Vec<(WalkReplica, Option<Vec<f64>>)> = (0..cfg.environments as u64)
                .into_par_iter()
                .map(|r| walk_replica(cfg, n, r))
                .collect::<Result<_>>()?;
            let sups: Vec<f64> = reps.iter().map(|(r, _)| r.sup).collect();
            let ecdf = Ecdf::new(sups.clone())?;
            cdfs_proper &= proper(&ecdf);
            let (replicas, profiles): (Vec<WalkReplica>, Vec<Option<Vec<f64>>>) = reps.into_iter().unzip();
            let with_valley: Vec<&Vec<f64>> = profiles.iter().flatten().collect();
            let profile: Vec<ProfilePoint> = (-k..=k)
                .enumerate()
                .map(|(j, i)| ProfilePoint {
                    i,
                    empirical: (!with_valley.is_empty())
                        .then(|| with_valley.iter().map(|p| p[j]).sum::<f64>() / with_valley.len() as f64),
                    limit: limit_profile[j],
                })
                .collect();
            let profile_max_gap = profile
                .iter()
                .filter_map(|p| p.empirical.map(|e| (e - p.limit).abs()))
                .reduce(f64::max);
            horizons.push(HorizonResult {
                n,
                summary: Summary::of(&sups).expect("non-empty"),
                ks: ks_distance(&ecdf, &limit_ecdf),
                ks_critical: ks_critical(ecdf.len(), limit_ecdf.len(), 0.05),
                replicas,
                profile_replicas: with_valley.len(),
                profile,
                profile_max_gap,
            });
        }
        let ks_trend_decreasing = horizons.windows(2).all(|w| w[1].ks < w[0].ks);
        let hard = cdfs_proper && closed.as_ref().is_none_or(|c| c.pass);
        Ok(AnnealedReport {
            config: cfg.clone(),
            model,
            limit_summary: Summary::of(&limit.iter().map(|s| s.sup).collect::<Vec<_>>()).expect("non-empty"),
            limit,
            horizons,
            ks_trend_decreasing,
            cdfs_proper,
            closed_form: closed,
            hard_checks_pass: hard,
        })
    })?
}

#[derive(Debug, Serialize)]
pub struct CdfRow {
    pub source: String,
    pub value: f64,
    pub cdf: f64,
}

pub fn cdf_rows(report: &AnnealedReport) -> Result<Vec<CdfRow>> {
    let mut rows = Vec::new();
    let mut push = |source: String, xs: Vec<f64>| -> Result<()> {
        for (value, cdf) in Ecdf::new(xs)?.steps() {
            rows.push(CdfRow {
                source: source.clone(),
                value,
                cdf,
            });
        }
        Ok(())
    };
    push("limit".into(), report.limit.iter().map(|s| s.sup).collect())?;
    for h in &report.horizons {
        push(format!("n={}", h.n), h.replicas.iter().map(|r| r.sup).collect())?;
    }
    Ok(rows)
}

#[derive(Debug, Serialize)]
pub struct ProfileRow {
    pub n: u64,
    pub i: i64,
    pub empirical: Option<f64>,
    pub limit: f64,
}

pub fn profile_rows(report: &AnnealedReport) -> Vec<ProfileRow> {
    report
        .horizons
        .iter()
        .flat_map(|h| {
            h.profile.iter().map(move |p| ProfileRow {
                n: h.n,
                i: p.i,
                empirical: p.empirical,
                limit: p.limit,
            })
        })
        .collect()
}
