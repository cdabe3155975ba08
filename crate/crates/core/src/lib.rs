//! Marginals and log-volume of polytopes `{x : S x = y, a <= x <= b}` by belief
//! propagation with truncated generalized Beta messages.
//!
//! The crate is organized bottom-up:
//!
//! * [`model`]: systems, factor graphs, file formats and preprocessing.
//! * [`beta`]: the message family and its moment/convolution kernels.
//! * [`bp`]: the message-passing engine, marginals, and Bethe entropy.
//! * [`oracle`]: hit-and-run sampling and exact small-dimension volumes.
//! * [`ensembles`]: random instance generators and experiment drivers.

pub mod beta;
pub mod bp;
pub mod ensembles;
mod error;
mod linalg;
pub mod model;
pub mod oracle;
pub mod quad;
pub mod rng;

pub use beta::BetaMessage;
pub use bp::{solve, BpConfig, BpState, EntropyReport, MarginalSet, Schedule, Solution};

pub use error::{Error, Result};
pub use model::{FactorGraph, LinearSystem, Term};
