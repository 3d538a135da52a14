// SPDX-License-Identifier: Apache-2.0

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// A count, width or real-valued argument is outside its valid domain.
    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("noise calibration failed: {0}")]
    Calibration(String),

    #[error("enrollment rejected: {0}")]
    Enrollment(String),

    /// Key delivery aborted before any message left the control unit.
    #[error("key distribution aborted: unknown member {0}")]
    UnknownMember(String),

    #[error("rekey rejected: {0}")]
    Rekey(String),

    #[error("malformed message: {0}")]
    Decode(String),

    #[error("key recovery failed: {0}")]
    KeyRecovery(String),

    /// A sealed payload failed its authentication tag.
    #[error("authentication failed")]
    Authentication,

    #[error("dataset error: {0}")]
    Dataset(String),

    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn param<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Parameter(msg.into()))
}
