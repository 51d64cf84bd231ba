//! Optimal costly experiments in screening problems.
//!
//! The seller designs a likelihood-ratio experiment per report and a
//! post-signal allocation and transfer rule. For fixed Lagrange multipliers the
//! problem splits into one concavification per report; the multipliers are then
//! found by minimising the dual.

// `!(x > 0.0)` also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod concavify;
pub mod epd;
pub mod error;
mod lp;
pub mod model;
pub mod saddle;
pub mod scalar;
pub mod screening;
pub mod special;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub type CostSpec = model::CostSpec<f64>;
pub type AffinePiece = model::AffinePiece<f64>;
pub type PolicyEnvelope = model::PolicyEnvelope<f64>;
pub type Experiment = model::Experiment<f64>;
pub type Atom = model::Atom<f64>;
pub type MFunction = model::MFunction<f64>;
pub type ConcavifyResult = concavify::ConcavifyResult<f64>;
pub type ClosedFormKink = concavify::ClosedFormKink<f64>;
