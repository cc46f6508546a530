//! Learned sector universes: hierarchical clustering of firm fundamentals,
//! synthetic sector ETFs and GMV portfolio backtests for ranking them.

// Numeric kernels index explicitly to keep summation order fixed.
#![allow(clippy::needless_range_loop)]

pub mod backtest;
pub mod calendar;
pub mod hca;
pub mod ingest;
pub mod optimizer;
pub mod ranking;
pub mod setf;
pub mod synthetic;
pub mod universe;
