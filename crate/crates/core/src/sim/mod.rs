//! Monte Carlo engine: exact dual paths, Euler primal paths and estimators.
//!
//! Every path draws from its own ChaCha stream derived from the run seed, and
//! per-path results are reduced in index order, so outputs do not depend on
//! the number of worker threads.

pub mod config;
pub mod estimators;
pub mod paths;
pub mod primal;
pub mod stats;

pub use config::PathConfig;
pub use estimators::{
    calibrate_y_star, estimate_value, estimate_value_with, lavs_hitting_study, occupancy_and_hitting,
    summarize_hits, value_and_calibration, BudgetReport, CalibrationReport, HitSample, HitSummary,
    HittingStudyRow, OccupancyReport, ValueReport,
};
pub use paths::{path_rng, simulate_dual, DualState};
pub use primal::{coupled_error, simulate_primal, PrimalState};
pub use stats::{Accumulator, Estimate};
