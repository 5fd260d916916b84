//! Quantum Monte Carlo integration engine.
//!
//! The crate is organised bottom-up:
//!
//! * [`qcore`]: circuits, simulation, rebasing and gate counting
//! * [`distloader`]: probability-distribution loading circuits and metrics
//! * [`pbuilder`]: reversible arithmetic and logic on loaded distributions
//! * [`fouriermc`]: Fourier-series QMCI estimators
//! * [`qae`]: amplitude estimation (PAM, MLQAE, IQAE, LCU)
//! * [`robustness`]: estimator statistics and amplitude sweeps
//! * [`resources`]: NISQ and fault-tolerant resource estimation
//! * [`cli`]: JSON-config command runners behind the `qmci` binary

pub mod cli;
pub mod distloader;
mod error;
pub mod fouriermc;
pub mod pbuilder;
pub mod qae;
pub mod qcore;
pub mod resources;
pub mod robustness;
pub(crate) mod util;

pub use error::{QmciError, Result};
