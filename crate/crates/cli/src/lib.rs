//! File formats, file- and HTTP-backed providers, and the batch commands
//! around `groundcheck-core`.
//!
//! All record files are line-delimited JSON: one object per line, blank
//! lines ignored, unknown fields ignored.

pub mod commands;
pub mod dataset;
pub mod embeddings;
pub mod fixtures;
pub mod jsonl;
pub mod judge;
pub mod manifest;
pub mod remote;
pub mod report;
pub mod trace;
pub mod validate;

use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum LoadError {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{}:{line}: malformed record: {message}", path.display())]
    Malformed {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error("{}:{line}: duplicate id {id:?}", path.display())]
    DuplicateId {
        path: PathBuf,
        line: usize,
        id: String,
    },
    #[error("{}:{line}: {message}", path.display())]
    Invalid {
        path: PathBuf,
        line: usize,
        message: String,
    },
}
