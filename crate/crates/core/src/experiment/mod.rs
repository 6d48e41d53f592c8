//! End-to-end experiments and the runners behind the command line.

mod annealed;
mod commands;
mod config;
pub mod io;
mod quenched;

pub use annealed::{
    cdf_rows, profile_rows, run_annealed, AnnealedReport, CdfRow, ClosedFormCheck, HorizonResult, LimitSample,
    ProfilePoint, ProfileRow, WalkReplica,
};
pub use commands::{
    class_rows, env_dump, landmarks, levelsets, run_oracle, shell_rows, summarize, walk_run, BernoulliSummary,
    CheckSummary, ClassRow, EnvDump, EnvDumpConfig, LandmarkRecord, LandmarksConfig, LandmarksReport, LevelsetsConfig,
    LevelsetsReport, OracleConfig, OracleReport, ShellRow, SiteRow, WalkRunConfig, WalkRunReport, WalkSummary,
};
pub use config::{with_pool, ExperimentConfig, WALK_STRIDE};
pub use quenched::{
    offset_rows, run_quenched, ClassRecord, EnvironmentOutcome, EnvironmentRecord, OffsetRecord, OffsetRow,
    PassedEnvironment, QuenchedReplica, QuenchedReport,
};
