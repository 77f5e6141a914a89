//! Day-ahead battery arbitrage scheduling.
//!
//! Builds one mixed-integer program per day (piecewise-linear charge
//! limits, degradation, grid costs), forecasts prices from rolling hourly
//! means and backtests predictive against hindsight-optimal scheduling.

pub mod battery;
mod error;
pub mod exec;
pub mod model;
pub mod oracle;
pub mod prices;
pub mod pwl;
pub mod simulate;
pub mod synth;

pub use error::{ArbError, ErrorKind, Result};

/// Hours in a trading day.
pub const HOURS: usize = 24;
/// EUR/MWh to EUR/Wh.
pub const PER_MWH_TO_PER_WH: f64 = 1e-6;
