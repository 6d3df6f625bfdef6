//! Backtesting and simulation toolkit for detecting free lunches with vanishing
//! risk (FLVRs) in a discounted total-return stock index.
//!
//! The pipeline, end to end:
//!
//! 1. [`market_data`] ingests an index series and a T-bill discount-rate
//!    series, rolls the rates into a savings account and discounts the index
//!    by it.
//! 2. [`activity`] computes the discretely observed activity time of the
//!    discounted index, estimates its unknown initial value by maximizing the
//!    R² of a linear trendline fitted to the first half of the sample, and
//!    extrapolates that trendline.
//! 3. [`azcb`] prices approximate zero-coupon bonds (AZCBs) off the activity
//!    time, runs the discrete self-financing hedge with optional proportional
//!    transaction costs, and reports hedge errors and potential-FLVR values.
//! 4. [`panel`] repeats the hedge experiment across a monthly grid of
//!    extreme-maturity contracts and runs a one-sided Student-t test of the
//!    null hypothesis that the mean FLVR is zero.
//! 5. [`sim`] simulates the benchmark-neutral index dynamics exactly (a
//!    dimension-4 squared Bessel process in activity time) and provides the
//!    Monte-Carlo oracle that validates the closed-form bond price, plus
//!    hedge-convergence experiments on synthetic paths.

pub mod activity;
pub mod azcb;
pub mod error;
pub mod market_data;
pub mod panel;
pub mod sim;
pub mod stats;

pub use error::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;
