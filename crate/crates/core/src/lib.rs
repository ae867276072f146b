//! Transferable feedback policies for parametric optimal control.
//!
//! The pipeline: a direct-transcription oracle generates optimal
//! trajectories per task (`trajopt`), a function encoder learns neural
//! basis functions spanning the policy space (`encoder`), new tasks adapt
//! zero-shot by least-squares projection or an operator network
//! (`operator`), and closed-loop evaluation compares against the oracle
//! (`eval`).

pub mod autodiff;
pub mod cli;
pub mod config;
pub mod encoder;
pub mod error;
pub mod eval;
pub mod io;
pub mod linalg;
pub mod nn;
pub mod operator;
pub mod optim;
pub mod plot;
pub mod problems;
pub mod trajopt;

pub use error::{Error, Result};
