//! Scenario-driven Monte-Carlo harness.
//!
//! A scenario fixes the array, sources, signals, noise model and SNR list.
//! Trial `t` draws its signals and noise from
//! [`trial_seed`]`(base_seed, name, t)`, shared across SNRs, snapshot counts and
//! estimators, so every estimator sees the same realization and the SNR
//! sweep only rescales the noise.
//!
//! Estimates are matched to the truth by [`match_and_score`] before squaring.
//! RMSE pools trials and sources per axis. The CRB columns use the realized
//! source waveforms of each trial; with a room they are the free-field bound.

mod config;
mod output;
mod run;
mod score;

pub use config::{
    builtin_names, builtin_scenario, load_scenario, AcousticsConfig, ArrayConfig, EstimatorKind, NoiseConfig,
    NoiseModel, RoomConfig, ScenarioConfig, SignalConfig, SourceConfig,
};
pub use output::{emit_crb_csv, emit_csv, trials_header, write_crb, write_summary, write_trials, SUMMARY_HEADER};
pub use run::{
    crb_sweep, run_scenario, summarize, BenchReport, CrbRow, RunOptions, SummaryRow, TrialRecord, TrialStatus,
};
pub use score::{
    best_assignment, fnv1a64, match_and_score, splitmix64, trial_seed, wrapped_phi_error_deg, AngleError,
    MAX_MATCHED_SOURCES,
};
