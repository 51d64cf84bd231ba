//! Costs, policy envelopes, experiments and the net value function.

pub mod cost;
pub mod envelope;
pub mod experiment;
pub mod mfunction;

pub use cost::{CostSpec, TabulatedCost};
pub use envelope::{upper_envelope, AffinePiece, PolicyEnvelope};
pub use experiment::{Atom, Experiment};
pub use mfunction::MFunction;

/// Default likelihood-ratio domain.
pub const DEFAULT_DOMAIN: (f64, f64) = (1e-4, 1e3);
