//! Desk-scale approximate dynamic programming laboratory.
//!
//! The crate is organised around a dense tabular MDP ([`mdp::TabularMdp`]) with exact
//! Bellman algebra, a set of benchmark environments ([`envs`]), Q-function
//! representations with weighted projection ([`approx`]), training-distribution
//! schemes including distribution correction ([`weighting`]), fitted Q-iteration
//! loops in exact, sampled and bandit modes ([`trainer`]) and oracle-based
//! measurement of value error, corrective feedback and error-bound slack
//! ([`diagnostics`]).
//!
//! State-action pairs are indexed `s * num_actions + a` everywhere.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod approx;
pub mod diagnostics;
pub mod envs;
mod error;
pub mod linalg;
pub mod mdp;
pub mod rng;
pub mod trainer;
pub mod weighting;

pub use error::{Error, Result};
