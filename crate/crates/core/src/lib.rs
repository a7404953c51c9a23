//! Simulation of a four-step protocol that prepares a W-type entangled
//! coherent state of three spin ensembles coupled to superconducting cavities.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]
#![cfg_attr(test, allow(clippy::field_reassign_with_default))]

pub mod dynamics;
pub mod error;
pub mod experiments;
pub mod model;
pub mod oracles;
pub mod protocol;
pub mod tensor;

pub use error::{Error, Result};
pub use num_complex::Complex64 as C64;
