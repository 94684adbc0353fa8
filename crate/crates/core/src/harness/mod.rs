//! MDP assembly, training and evaluation loops, benchmark matrix and
//! result files.

mod config;
mod env;
mod experiment;
mod mdp;
mod metrics;
pub mod plot;
mod run;

pub use config::{preset_for, AgentKind, AgentSection, Config, HarnessConfig, SafetyConfig, ShieldSection};
pub use env::{EnvCursor, PlantEnv, StepRecord};
pub use experiment::{
    aggregate_curves, benchmark, benchmark_csv, pool_runtime, run_parallel, runtime_csv, summarize, train,
    write_curves, Cell, CellSummary, CurveRow,
};
pub use mdp::{build_observation, reward, Norms, RewardBreakdown, RewardParams};
pub use metrics::{mean_std, runtime_report, EpisodeMetrics, RuntimeStats};
pub use run::{
    build_safety, collect_safety_log, evaluate, AgentState, Checkpoint, CurvePoint, Policy, Run, RunContext,
    RunResult, RunState, TrainStats, CHECKPOINT_VERSION,
};
