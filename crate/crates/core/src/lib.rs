//! Participation game for energy-aware federated learning.
//!
//! Nodes pick a probability of joining each training round. The number of
//! participants per round is Poisson-Binomial, the number of rounds to
//! convergence is a fitted function of that count, and each node trades the
//! expected duration against its own participation cost and an
//! Age-of-Information incentive.
//!
//! - [`pbdist`]: Poisson-Binomial PMF and the duration expectation/gradient.
//! - [`empirics`]: embedded measurement tables and the fitted duration and
//!   energy-line models.
//! - [`game`]: utilities, best response, symmetric Nash equilibria, social
//!   optimum, Price of Anarchy and parameter sweeps.
//! - [`energy`]: per-node / per-round / per-run energy accounting and the
//!   802.11ax airtime calculator.
//! - [`simulate`]: seeded Monte-Carlo round simulator.
//! - [`config`]: TOML run configuration used by the `fedgame` binary.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod empirics;
pub mod energy;
mod error;
pub mod game;
pub mod pbdist;
pub mod simulate;

pub use error::{Error, Result};
