//! The four-step preparation, its ideal states, measurement and state transfer.

pub mod engine;
pub mod plan;
pub mod states;
pub mod transfer;

pub use engine::{
    protocol_target, reduce_coupler, run_protocol, run_stage1, step_fidelity, Engine, ProtocolMode, ProtocolResult,
    TracePoint, BRUTE_DIM_LIMIT,
};
pub use plan::{alpha_of_t, beta_of_t, solve_t4, StepPlan};
pub use states::{
    block_ket, ideal_expansion, ideal_state_after_step, ideal_w_state, measure_intracavity_qubits, target_expansion,
    Frame, Measurement, QubitKet,
};
pub use transfer::{state_transfer, StateTransfer};
