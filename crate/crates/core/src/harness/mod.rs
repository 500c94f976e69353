//! Benchmark campaigns: instance families, repeated trials with summary
//! statistics, budget calibration and CSV output.

pub mod calibrate;
pub mod campaign;
pub mod instances;

pub use calibrate::{calibrate_budget, calibrate_with, geometric_grid, Calibration, CalibrationConfig, MetaSearch};
pub use campaign::{
    emit_csv, read_csv, run_algorithm, run_campaign, run_trial, wilson_lower, write_csv, Algorithm, AlgorithmSettings,
    CampaignResult, CampaignRow, Trial,
};
pub use instances::{make_instance, DistributionKind, DistributionSpec};
