//! Pipeline harness for the `invlearn` controller: configuration, the
//! collect/build/simulate/verify/report stages and their on-disk artifacts.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod pipeline;
pub mod verify;

pub use config::{ConfigError, Overrides, PlantId, RunConfig};
pub use pipeline::{build, collect, report, simulate, BuildOutput, RunRecord, RunResult};
pub use verify::{verify, Property, Status, VerifyReport};

/// Exit code for a failed property check or pipeline error.
pub const EXIT_FAILURE: i32 = 1;
/// Exit code for an invalid configuration.
pub const EXIT_CONFIG: i32 = 2;

/// Run `collect`, `build` and `simulate` in sequence.
pub fn run_all(cfg: &RunConfig) -> anyhow::Result<(BuildOutput, RunResult)> {
    collect(cfg)?;
    let built = build(cfg)?;
    let result = simulate(cfg)?;
    Ok((built, result))
}
