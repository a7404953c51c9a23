//! Operators and states on labeled tensor-product spaces.

pub mod linalg;
pub mod operator;
pub mod signature;
pub mod sparse;
pub mod state;

pub use operator::{embed, make_boson_ops, make_qubit_ops, Operator, QubitOps, Storage, EXCITED, GROUND};
pub use signature::SpaceSignature;
pub use sparse::CsrMatrix;
pub use state::{coherent_state, fidelity_pure_target, partial_trace, DensityMatrix, StateVector};
