use std::io;

use anot_core::CoreError;

use crate::time::TimeCodec;

/// Problems with input data or model files. The CLI exits with 2 on these.
#[derive(Debug, thiserror::Error)]
pub enum DataError {
    #[error("line {line}: expected {expected} tab-separated fields, found {found}")]
    Fields { line: usize, expected: usize, found: usize },
    #[error("line {line}: {message}")]
    Line { line: usize, message: String },
    #[error("unreadable timestamp {0:?}")]
    Time(String),
    #[error("timestamp {label:?} is off the model's time grid ({codec})")]
    OffGrid { label: String, codec: TimeCodec },
    #[error("model file: {0}")]
    Model(String),
    #[error(transparent)]
    Core(#[from] CoreError),
    #[error(transparent)]
    Io(#[from] io::Error),
}

impl DataError {
    pub fn at(line: usize, e: impl std::fmt::Display) -> Self {
        DataError::Line { line, message: e.to_string() }
    }
}
