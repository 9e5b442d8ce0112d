//! Experiment orchestration for mean-field Gibbs models: exact Sanov-type
//! rate checks, Monte Carlo rate estimation, inequality verification suites,
//! Wasserstein concentration reports and the `mfldp` CLI surface.

pub mod config;
pub mod converge;
pub mod events;
pub mod inequalities;
pub mod plot;
pub mod rate;
pub mod report;
pub mod runner;
pub mod sanov;

pub use config::{ExperimentConfig, ExperimentKind};
pub use converge::{convergence_report, ConvergenceReport, ConvergenceSampling};
pub use events::SimplexEvent;
pub use inequalities::{verify_inequalities, InequalityReport, InstanceCaps};
pub use rate::{estimate_rate, rate_target, RateSampling};
pub use runner::{run_experiment, RunError, RunOptions, RunOutcome};
pub use sanov::{sanov_exact_check, RateReport, RateRow};
