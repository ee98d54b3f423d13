//! Spectral checks around strong subadditivity of von Neumann entropy for
//! tripartite density matrices, plus a constrained minimizer of the entropy
//! functional over abstract spectra.

pub mod cli;
pub mod conditions;
pub mod error;
pub mod minimizer;
pub mod spectra;
pub mod stategen;
pub mod tensor;

pub use error::{Error, Result};
