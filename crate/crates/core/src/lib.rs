//! Digit-frequency sets of continued fractions: exact cylinder arithmetic,
//! block statistics of digit words, Markov measures, the finite-depth ratio
//! program behind the dimension estimate, and the forced-digit constructions.

// `!(x > 0.0)` also rejects NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cf;
pub mod constructions;
pub mod error;
pub mod markov;
pub mod numeric;
pub mod optimizer;
pub mod verify;
pub mod word_stats;

pub use cf::{BasicInterval, Convergent, CylinderWord};
pub use error::{Error, Result};
