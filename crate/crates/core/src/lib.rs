//! Aggregation of long-term forecasts with expert advice.
//!
//! - [`aggregation`]: the aggregating algorithm for the square loss.
//! - [`longterm`]: delayed-feedback aggregation of forecast streams.
//! - [`regression`]: online smoothing regression over ridge experts.
//! - [`regret`]: regret bounds and numerical checks.
//! - [`harness`]: synthetic data, experiment drivers and CSV output.

pub mod aggregation;
pub mod error;
pub mod harness;
pub mod longterm;
pub mod pool;
pub mod regression;
pub mod regret;

pub use aggregation::{LossSpec, SubstitutionRule};
pub use error::{Error, Result};
pub use longterm::{AuxExpert, ConfidencePolicy, ExpertForecastStream, LongTermAggregator};
pub use regression::{RegressorConfig, SmoothingRegressor};
