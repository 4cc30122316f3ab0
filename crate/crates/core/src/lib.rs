//! Tip-pool dynamics of DAG-based ledgers under tip-inflation attacks.
//!
//! The crate has two halves that check each other:
//!
//! - a discrete-event simulator ([`engine`]) that issues blocks as a Poisson
//!   process, lets honest issuers pick `k` parents uniformly from a pool
//!   that lags by the network delay `h`, and lets an adversary issue blocks
//!   that never approve tips ([`selection`]), with optional expiration of
//!   tips after `delta` ([`dag`]);
//! - closed-form and fixed-point predictions for the stationary pool size
//!   and the probability that a block expires ([`analytic`]).
//!
//! [`metrics`] turns runs into the numbers compared against the predictions.

pub mod analytic;
pub mod dag;
pub mod engine;
mod error;
pub mod metrics;
pub mod selection;

pub use error::{Error, Result};
