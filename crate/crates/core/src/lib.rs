//! Hybrid quantum-classical regression engine.
//!
//! The crate is organised bottom-up:
//!
//! - [`statesim`]: pure-state simulation (rotations, CNOT, Pauli-Z expectations).
//! - [`encoders`]: amplitude encoding via uniformly controlled `R_y` trees, and angle encoding.
//! - [`pqc`]: the strongly entangling circuit with adjoint and parameter-shift gradients.
//! - [`classical`]: dense layers, LeakyReLU, MSE/RMSE and Adam.
//! - [`hybrid`]: the FNN, angle-encoded and amplitude-encoded regressors and their training loop.
//! - [`noise`]: density-matrix simulation with depolarizing, damping, dephasing and readout error.
//! - [`eval`]: k-fold / leave-one-out plans, RMSE curve aggregation and Diebold-Mariano tests.
//! - [`data`]: CSV ingestion, scaling and the synthetic recovery-rate generator.
//! - [`checkpoint`]: the on-disk model container.
//!
//! Qubit 0 is the most significant bit of a basis-state index everywhere in the crate.

pub mod checkpoint;
pub mod classical;
pub mod data;
pub mod encoders;
pub mod error;
pub mod eval;
pub mod hybrid;
pub mod noise;
pub mod pqc;
pub mod statesim;

pub use error::{EncodingFailure, Error, Result};
