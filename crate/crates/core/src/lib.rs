//! Multi-strategy backtesting with a routed mixture of four trading experts.
//!
//! The crate is organised bottom-up: [`market_data`] and [`indicators`]
//! feed the eleven rule strategies in [`strategy`], which run through the
//! accounting engine in [`backtest`]. [`router`] allocates capital across
//! the four expert families and [`training`] fits the router and the
//! expert selectors with policy-gradient updates.

pub mod market_data;
pub mod indicators;
pub mod metrics;
pub mod strategy;
pub mod backtest;
pub mod regime;
pub mod config;
pub mod report;
pub mod router;
pub mod training;
pub mod baselines;
pub mod experiment;
pub mod commands;
