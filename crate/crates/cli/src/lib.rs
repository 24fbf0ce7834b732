//! IO, file formats and pipeline plumbing around `glotvec-core`.
//!
//! Everything that touches the filesystem, the clock or threads lives here;
//! the core crate stays `no_std`. The binary in `main.rs` wires these pieces
//! into subcommands.

pub mod commands;
pub mod exec;
pub mod formats;
pub mod kv;
pub mod manifest;
pub mod pipeline;

use std::fmt;

/// Process exit codes: 0 success, 2 usage, 3 numeric failure, 4 integrity
/// mismatch, 1 anything else.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Failure {
    Usage,
    Numeric,
    Integrity,
    Other,
}

impl Failure {
    pub fn exit_code(self) -> i32 {
        match self {
            Failure::Usage => 2,
            Failure::Numeric => 3,
            Failure::Integrity => 4,
            Failure::Other => 1,
        }
    }
}

/// Error wrapper that pins the exit code of a failed command.
#[derive(Debug)]
pub struct CodedError {
    pub failure: Failure,
    pub message: String,
}

impl fmt::Display for CodedError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.message)
    }
}

impl std::error::Error for CodedError {}

pub fn usage_error(message: impl Into<String>) -> anyhow::Error {
    CodedError {
        failure: Failure::Usage,
        message: message.into(),
    }
    .into()
}

pub fn integrity_error(message: impl Into<String>) -> anyhow::Error {
    CodedError {
        failure: Failure::Integrity,
        message: message.into(),
    }
    .into()
}

/// Maps an error chain to its exit code.
pub fn exit_code_for(err: &anyhow::Error) -> i32 {
    if let Some(coded) = err.downcast_ref::<CodedError>() {
        return coded.failure.exit_code();
    }
    if let Some(core_err) = err.downcast_ref::<glotvec_core::Error>() {
        return match core_err {
            glotvec_core::Error::NonFiniteLoss { .. } | glotvec_core::Error::NonFiniteGradient => {
                Failure::Numeric.exit_code()
            }
            _ => Failure::Other.exit_code(),
        };
    }
    Failure::Other.exit_code()
}
