//! Neural parameter regression for 1-D initial boundary value problems.
//!
//! A hypernetwork maps a discretized initial condition to the parameters of a
//! small low-rank target network `u(t, x)`, trained with physics-informed
//! losses. The crate also provides reference solvers, a physics-informed
//! DeepONet baseline, error metrics and per-instance fine-tuning.

pub mod autodiff;
pub mod checkpoint;
pub mod deeponet;
pub mod error;
pub mod eval;
pub mod model;
pub mod nets;
pub mod problems;
pub mod reference;
pub mod training;

pub use error::{Error, Result};
