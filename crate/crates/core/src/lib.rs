//! Open-system dynamics of a qubit coupled to a chaotic spin bath: exact
//! propagation, the chaotic Kraus decomposition, and chaos diagnostics.

pub mod diagnostics;
pub mod dynamics;
pub mod error;
pub mod harness;
pub mod kraus;
pub mod linalg;
pub mod model;
pub mod parallel;
pub mod spectral;

pub use error::{Error, Result};
