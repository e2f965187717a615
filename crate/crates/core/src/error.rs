// SPDX-License-Identifier: Apache-2.0

use thiserror::Error;

use crate::params::RegimeViolation;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("parameters outside the theorem regime: {}", format_violations(.0))]
    RegimeViolation(Vec<RegimeViolation>),

    #[error("vector fits neither promise shape: {0}")]
    PromiseViolation(String),

    #[error("sketch requires integral weights, got {0}")]
    NonIntegerWeight(f64),

    #[error("corrupt sketch payload: {0}")]
    CorruptPayload(String),

    #[error("protocol error: {0}")]
    Protocol(String),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn corrupt(msg: impl Into<String>) -> Self {
        Error::CorruptPayload(msg.into())
    }
}

fn format_violations(v: &[RegimeViolation]) -> String {
    v.iter()
        .map(|r| r.to_string())
        .collect::<Vec<_>>()
        .join("; ")
}
