//! Configuration, sweep commands and CSV output behind the command-line tool.

pub mod commands;
pub mod config;
pub mod table;

pub use commands::{
    cmd_bosonization, cmd_full_run, cmd_state_transfer, cmd_step_fidelity, cmd_sweep_d, cmd_time_trace, step_variable,
    trace_times,
};
pub use config::{parse_config_text, parse_override, EngineChoice, RunConfig, SweepSpec, KEYS};
pub use table::{fmt_sig, photon_columns, sweep_columns, sweep_table, SweepRecord, Table};
