//! Weighted Birkhoff averages for quasiperiodic orbits.
//!
//! Averages taken with a smooth bump weight converge far faster than plain
//! time averages when the orbit is quasiperiodic. This crate provides the
//! weights and the averaging engine, rotation-number and Fourier-coefficient
//! estimators built on them, test systems with known answers, convergence
//! study tooling and the `quasiavg` command-line tool.

pub mod averaging;
pub mod cli;
pub mod compensated;
pub mod error;
pub mod fourier;
pub mod harness;
pub mod rotation;
pub mod systems;
pub mod weights;

pub use averaging::{average_schedule, weighted_average, CheckpointSchedule, ObservableTrace};
pub use error::{Error, ExitClass, Result};
pub use weights::{build_weights, eval_weight, WeightSpec, WeightVector};
