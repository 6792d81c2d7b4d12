//! Cost-sensitive classification with a feature-acquiring Q-learning agent.
//!
//! An episode reveals one sample's features one at a time, each at a cost,
//! until the agent commits to a class (or defers to an external classifier).
//! A dueling Q-network learns when to stop from replayed episodes.

// `!(x > 0.0)` deliberately rejects NaN along with non-positive values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod agent;
pub mod data;
pub mod env;
pub mod error;
pub mod harness;
pub mod nn;
pub mod pretrain;
pub mod replay;

pub use error::{Error, Result};
