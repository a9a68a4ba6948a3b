//! Reading-vector toolkit for chain-of-thought reasoning.
//!
//! The pipeline turns contrastive prompt pairs into per-layer concept
//! directions and puts them to work three ways:
//!
//! 1. **read** — render positive/negative CoT prompts ([`stimuli`]), capture
//!    last-token activation differences across a layer subset
//!    ([`populations`]), and extract one unit "reading vector" per layer via
//!    PCA ([`reading`]).
//! 2. **localize** — score every response prefix against the reading vectors
//!    and mark tokens where the score first dips below zero
//!    ([`localization`]).
//! 3. **steer** — inject scaled reading vectors into the residual stream
//!    during generation ([`control`]).
//!
//! Everything runs end to end on the deterministic toy transformer in
//! [`model`]; activation-dump files (see [`populations::dump`]) let the
//! reading and localization stages consume activations captured from models
//! hosted elsewhere. [`eval`] adds answer extraction, accuracy, and the
//! pairwise-difference robustness score used to compare prompt variants.
//!
//! The dense math in [`linalg`] is generic over the scalar type; the rest of
//! the crate works in `f64` through the [`Vector`] / [`SampleMatrix`]
//! aliases re-exported here.

pub mod control;
pub mod eval;
pub mod fixtures;
pub mod format;
pub mod linalg;
pub mod localization;
pub mod model;
pub mod populations;
pub mod reading;
pub mod rng;
pub mod stimuli;

pub use linalg::{LinalgError, SampleMatrix, Vector};
