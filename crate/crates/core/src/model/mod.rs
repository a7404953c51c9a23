//! Parameters, Hamiltonians and dissipators of the cavity–qubit–ensemble model.

pub mod ensemble;
pub mod hamiltonians;
pub mod params;

pub use ensemble::{bright_state_coupling, build_micro_hamiltonian, collective_mode_check, EnsembleMicroModel};
pub use hamiltonians::{
    block_signature, blocks_signature, build_collapse_ops, build_h_eff, build_h_eff_td, build_h_i1, build_h_i2,
    build_h_i3, build_h_i4, build_h_i4_td, cavity_label, nve_label, qubit_label, stage1_signature, CollapseOp,
    TimeDependentHamiltonian, COUPLER,
};
pub use params::{mhz, rate_from_lifetime, to_mhz, BlockParams, SystemParams};
