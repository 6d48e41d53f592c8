use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use rwre::experiment::{self, io};
use rwre::Result;

#[derive(Parser)]
#[command(
    name = "rwre",
    version,
    about = "Reversible random walk in a radially layered random environment"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Io {
    /// JSON configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Environment inspection.
    Env {
        #[command(subcommand)]
        action: EnvAction,
    },
    /// Trajectories.
    Walk {
        #[command(subcommand)]
        action: WalkAction,
    },
    /// Level-set partitions of shells and the class model.
    Levelsets(Io),
    /// Valley landmarks and the good-environment check.
    Landmarks(Io),
    /// Quenched occupation ratios against simulated local times.
    Quenched(Io),
    /// Annealed supremum law against the conditioned-walk limit.
    Annealed(Io),
    /// Exact identity and bound suite (built-in defaults without --config).
    Oracle(Io),
}

#[derive(Subcommand)]
enum EnvAction {
    Dump(Io),
}

#[derive(Subcommand)]
enum WalkAction {
    Run(Io),
}

fn config<T: serde::de::DeserializeOwned>(io: &Io) -> Result<T> {
    match &io.config {
        Some(p) => io::read_json(p),
        None => Err(rwre::Error::InvalidConfig("--config is required".into())),
    }
}

fn json<T: Serialize>(out: &Path, name: &str, value: &T) -> Result<()> {
    io::write_json(&out.join(name), value)
}

fn csv<R: Serialize>(out: &Path, name: &str, rows: impl IntoIterator<Item = R>) -> Result<()> {
    io::write_csv(&out.join(name), rows)
}

#[derive(Serialize)]
struct SRow {
    k: i64,
    s: f64,
}

#[derive(Serialize)]
struct LandmarkRow {
    index: u64,
    seed: u64,
    outcome: &'static str,
    #[serde(rename = "M_n")]
    big_m: Option<u64>,
    m_n: Option<u64>,
    #[serde(rename = "Delta_n")]
    delta_n: Option<f64>,
    c1: Option<bool>,
    c2: Option<bool>,
    c3: Option<bool>,
}

/// Returns whether every hard check passed.
fn run(cmd: Command) -> Result<bool> {
    match cmd {
        Command::Env {
            action: EnvAction::Dump(io),
        } => {
            let dump = experiment::env_dump(&config(&io)?)?;
            json(&io.out, "env.json", &dump)?;
            csv(&io.out, "sites.csv", &dump.sites)?;
            csv(&io.out, "s.csv", dump.s.iter().map(|(k, s)| SRow { k: *k, s: *s }))?;
            println!("{} sites, {} S values", dump.sites.len(), dump.s.len());
            Ok(true)
        }
        Command::Walk {
            action: WalkAction::Run(io),
        } => {
            let report = experiment::walk_run(&config(&io)?)?;
            json(&io.out, "walk.json", &report)?;
            csv(&io.out, "shells.csv", experiment::shell_rows(&report))?;
            println!("{} walks of {} steps", report.walks.len(), report.config.n);
            Ok(true)
        }
        Command::Levelsets(io) => {
            let report = experiment::levelsets(&config(&io)?)?;
            json(&io.out, "levelsets.json", &report)?;
            csv(&io.out, "classes.csv", experiment::class_rows(&report))?;
            for p in &report.partitions {
                println!(
                    "shell {}: {} classes, {} distinct values",
                    p.k,
                    p.classes.len(),
                    p.distinct_values
                );
            }
            Ok(true)
        }
        Command::Landmarks(io) => {
            let report = experiment::landmarks(&config(&io)?)?;
            json(&io.out, "landmarks.json", &report)?;
            let rows = report.records.iter().map(|r| {
                let lm = r.outcome.as_ref().and_then(|o| o.landmarks());
                LandmarkRow {
                    index: r.index,
                    seed: r.seed,
                    outcome: match (&r.outcome, lm) {
                        (None, _) => "scan_exceeded",
                        (Some(_), None) => "no_valley",
                        (Some(_), Some(l)) if l.a_n.all() => "passed",
                        _ => "an_failed",
                    },
                    big_m: lm.map(|l| l.big_m),
                    m_n: lm.map(|l| l.m_n),
                    delta_n: lm.map(|l| l.delta_n),
                    c1: lm.map(|l| l.a_n.c1),
                    c2: lm.map(|l| l.a_n.c2),
                    c3: lm.map(|l| l.a_n.c3),
                }
            });
            csv(&io.out, "landmarks.csv", rows)?;
            println!(
                "{} environments, {} with a valley, A_n fraction {:.4}",
                report.records.len(),
                report.found,
                report.an_fraction
            );
            Ok(true)
        }
        Command::Quenched(io) => {
            let report = experiment::run_quenched(&config(&io)?)?;
            json(&io.out, "quenched.json", &report)?;
            csv(&io.out, "offsets.csv", experiment::offset_rows(&report))?;
            println!(
                "scanned {} passed {} replicas {} band rate {:?} class rate {:?}",
                report.scanned,
                report.passed,
                report.replicas.len(),
                report.band_pass_rate,
                report.class_pass_rate
            );
            Ok(report.hard_checks_pass)
        }
        Command::Annealed(io) => {
            let report = experiment::run_annealed(&config(&io)?)?;
            json(&io.out, "annealed.json", &report)?;
            csv(&io.out, "cdf.csv", experiment::cdf_rows(&report)?)?;
            csv(&io.out, "profile.csv", experiment::profile_rows(&report))?;
            for h in &report.horizons {
                println!("n = {}: KS {:.4} (5% critical {:.4})", h.n, h.ks, h.ks_critical);
            }
            Ok(report.hard_checks_pass)
        }
        Command::Oracle(io) => {
            let cfg = match &io.config {
                Some(p) => io::read_json(p)?,
                None => experiment::OracleConfig::default(),
            };
            let report = experiment::run_oracle(&cfg)?;
            json(&io.out, "oracle.json", &report)?;
            csv(&io.out, "checks.csv", &report.summary)?;
            for s in &report.summary {
                println!("{:<28} {:>5}/{:<5} failed", s.name, s.failed, s.total);
            }
            Ok(report.pass)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
