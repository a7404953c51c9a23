//! Time evolution: integrators, master equation, channels and block composition.

pub mod channel;
mod dop853;
pub mod expansion;
pub mod integrator;
pub mod lindblad;

pub use channel::{extract_channel, QuantumChannel, Stage, StageChain};
pub use expansion::{
    apply_block_channels, compose_block_channels, expansion_expectation, expansion_overlap, KetExpansion,
    OperatorExpansion,
};
pub use integrator::{integrate, IntegrationStats, IntegratorConfig, Method, OdeSystem};
pub use lindblad::{
    evolve_ket, evolve_lindblad, evolve_operator, expm_action, mean_photon, propagate_exact, EvolutionResult,
    EvolutionTask, Generator, LindbladRhs, QuantumState, SchrodingerRhs,
};
