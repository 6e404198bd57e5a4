//! Penalty-based bi-level machine unlearning at desk scale.
//!
//! The crate separates unlearning into an inner forgetting objective
//! (loss ascent on the forget set with a similarity-aware penalty that
//! decorrelates forget and retain gradients) and an outer utility
//! objective (retain loss plus a stationarity penalty on the inner
//! gradient). A two-loop optimizer alternates between the two. Around
//! that sit reference baselines (retrain, finetune, gradient ascent,
//! gradient difference), the evaluation-metric suite (UA/RA/TA,
//! membership-inference efficacy, difficulty indexing with rank
//! correlation, normalized overall scores), synthetic data generation
//! with retain/forget splitting, and a verification module that checks
//! the optimizer's convergence properties on closed-form quadratic
//! instances.
//!
//! The crate is `no_std`-compatible (with `alloc`); disable the default
//! `std` feature for embedded or sandboxed use. All computations are
//! deterministic given identical inputs and seeds on one platform.

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod baselines;
pub mod data;
pub mod error;
pub mod fd;
pub mod metrics;
pub mod objective;
pub mod optimizer;
pub mod problem;
pub mod sampler;
pub mod vector;
pub mod verify;

pub use error::{CoreError, Result};
pub use vector::ParameterVector;
