//! LZ78-transformed sequential probability assignments and what they are
//! good for: lossless compression, min-log-loss classification, universal
//! discrete filtering through known memoryless channels, and causal
//! sequence generation.
//!
//! The pieces fit together as follows. [`spa::Spa`] is the sequential-model
//! contract; [`spa::DirichletSpa`] is the additive-perturbation instance
//! that every application here uses. [`transform::Lz78Spa`] lifts any
//! [`transform::InnerSpa`] family through an incremental-parsing prefix
//! tree ([`tree::Lz78Tree`]), one independent copy per node. The remaining
//! modules consume the resulting model through the `Spa` trait: an
//! arithmetic [`codec`], a per-class [`classify`] stack, the mismatched
//! Bayes [`filtering`] estimators, frozen-tree [`generation`], and the
//! exhaustive-KL / Wasserstein [`evaluation`] harnesses.

pub mod bench;
pub mod classify;
pub mod codec;
pub mod error;
pub mod evaluation;
pub mod filtering;
pub mod generation;
pub mod loss;
pub mod spa;
pub mod transform;
pub mod tree;
pub mod types;
mod wire;

pub use error::{Error, Result};
pub use loss::{empirical_entropy_mu0, log_loss, markov_entropy_mu_k, LogLossReport};
pub use spa::{DirichletSpa, Spa, UniformSpa};
pub use transform::{InnerSpa, Lz78Spa};
pub use tree::{Lz78Tree, ParseCursor};
pub use types::{Alphabet, Pmf, Sequence, Symbol};
