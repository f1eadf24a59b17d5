//! Kirkwood–Thomas perturbation series for ground states of gapped spin Hamiltonians.

pub mod cli;
pub mod clusters;
pub mod energy;
pub mod error;
pub mod kernel;
pub mod model;
pub mod oracle;
pub mod pauli;
pub mod random;
pub mod response;
pub mod scalar;
pub mod setalg;
pub mod solver;

pub use error::{Error, Result};
