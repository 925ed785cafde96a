//! Library surface behind the `apd` binary, exposed so integration tests
//! can drive the commands directly.

pub mod checkpoint;
pub mod commands;
pub mod config;
pub mod experiment;
pub mod output;

pub use config::{ExperimentConfig, RawConfig};

/// Exit code classes: 0 success, 1 internal, 2 configuration, 3 data,
/// 4 audit failure.
pub fn exit_code_for(err: &apd_core::Error) -> i32 {
    use apd_core::Error;
    match err {
        Error::Config(_) | Error::Schedule(_) => 2,
        Error::Data(_)
        | Error::IdxFormat { .. }
        | Error::InvalidLabel { .. }
        | Error::DimensionMismatch { .. }
        | Error::Checkpoint(_)
        | Error::Diagnostic(_) => 3,
        Error::Io(_) => 1,
    }
}

pub const EXIT_AUDIT_FAILURE: i32 = 4;
