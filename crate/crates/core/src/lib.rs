//! Monte Carlo and numerical laboratory for heavy-tailed perpetuities
//! `R = AR + B` and extremal recursions `R = max(AR, B)` in the critical case
//! `E|A|^a = 1` with regularly varying `B`.
//!
//! * [`regvar`]: slowly varying catalog, de Haan functions, laws for `B`.
//! * [`models`]: laws for `A`, calibration, the tilted step law, audits.
//! * [`simulate`]: samplers and deterministic parallel batches.
//! * [`renewal`]: renewal functions and the renewal-theoretic checks.
//! * [`analysis`]: tail estimates and first/second-order comparisons.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::excessive_precision, clippy::too_many_arguments)]

pub mod analysis;
pub mod error;
pub mod functional;
pub mod models;
pub mod quad;
pub mod regvar;
pub mod renewal;
pub mod rng;
pub mod simulate;
pub mod stats;

pub use error::{Assumption, Error, Result};
