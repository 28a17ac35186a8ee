//! Asymptotic BB84 secret-key rates when Alice's bit source is biased.
//!
//! The crate evaluates one-way key rates (direct and reverse reconciliation)
//! of a qubit channel given in Stokes form, completes partially observed
//! channels in the worst case, searches for the rate-maximizing bias, and
//! simulates the prepare-and-measure protocol to estimate channels from
//! matched and mismatched outcomes.

pub mod bb84sim;
pub mod channel;
pub mod cli;
pub mod entropy;
pub mod error;
pub mod exec;
mod fit;
pub mod keyrate;
pub mod linalg;
mod search;

pub use channel::{BlochVector, ChoiState, DensityMatrix, KrausSet, QubitChannel, TpcpDiagnostics};
pub use entropy::{Conditioning, JointDistribution, SourceDistribution};
pub use error::{Error, Result};
pub use exec::Execution;
pub use keyrate::{Direction, KeyRateReport, OmegaParams};
