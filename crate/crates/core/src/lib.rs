//! Monte Carlo laboratory for critical branching processes with immigration
//! in an i.i.d. random environment.
//!
//! The crate simulates the pre-limit objects (environment, associated random
//! walk, population process and its random normalization) and samples the
//! limit objects (stable Lévy level process, two-sided conditioned
//! environments, the ratio `γ = Σ₂/Σ₁`) so that the two sides can be compared
//! with distributional tests.

pub mod bpire;
pub mod env_model;
pub mod error;
pub mod limit_process;
pub mod random_walk;
pub mod rng;
pub mod runner;
pub mod stats;

pub use error::{Error, Result};
