//! Restricted multi-armed bandits on a time grid.
//!
//! Arms are finite Markov chains that may only be switched away from at
//! certain states ([`model`]). For each arm the restricted index comes from
//! an optimal stopping problem with retirement ([`stopping`], [`index`]);
//! the index policy ([`policy`]) serves arms by carried index and keeps an
//! arm through every excursion above its lower envelope. Exact oracles
//! ([`oracle`]) and Monte Carlo ([`simulate`]) check the results.

pub mod cli;
pub mod error;
pub mod format;
pub mod index;
mod linalg;
pub mod model;
pub mod oracle;
pub mod policy;
pub mod simulate;
pub mod stopping;

pub use error::{Result, RmabError};
