//! Standard-error estimation for large data by subsampling and the
//! bootstrap.
//!
//! Five estimators of SE² (the squared standard error of a statistic) share
//! one data model and one seeding scheme:
//!
//! | method | resampling                                            |
//! |--------|-------------------------------------------------------|
//! | AF     | none; delta-method formula                            |
//! | TB     | B size-N resamples of the full data                   |
//! | BLB    | R size-n subsets, B multinomial resamples each        |
//! | SB     | B size-n resamples, rescaled by n/N                   |
//! | SDB    | R size-n subsets, one multinomial resample each       |
//!
//! [`theory`] gives their leading-order MSE, and [`tuner`] picks BLB's
//! (B, R) for a CPU budget from a fitted cost model.
//!
//! ```
//! use subboot::{estimate_blb, DataSource, Dataset, RunOptions, Statistic};
//!
//! let data = Dataset::scalar((0..1000).map(|i| (i % 17) as f64).collect()).unwrap();
//! let est = estimate_blb(&DataSource::from(data), &Statistic::Mean, 100, 20, 10, RunOptions::seeded(7)).unwrap();
//! assert!(est.se2 > 0.0);
//! ```

pub mod calibration;
pub mod config;
pub mod cputime;
pub mod data;
pub mod error;
pub mod estimators;
pub mod experiments;
pub mod report;
pub mod resample;
pub mod rng;
pub mod source;
pub mod statistics;
pub mod theory;
pub mod tuner;

pub use data::{Dataset, Observation};
pub use error::{Error, Result};
pub use estimators::{
    estimate, estimate_af, estimate_blb, estimate_sb, estimate_sdb, estimate_tb, Execution, Hyperparams, Method,
    RunOptions, SeEstimate,
};
pub use rng::RngStream;
pub use source::{DataSource, DiskSource, TextFormat};
pub use statistics::{MomentSummary, Statistic, StatisticKind};
pub use theory::{theoretical_mse, MseBreakdown};
pub use tuner::{fit_cost_model, improve_specification, optimize_hyperparams, predict_time, CostModel, TimingRecord, TunedSpec};
