//! IO, synthetic data and experiment plumbing around `mvgan-core`.
//!
//! - [`format`]: the sparse multiview text format and distribution matrices.
//! - [`checkpoint`]: versioned parameter checkpoints.
//! - [`config`]: flat `key=value` configuration files.
//! - [`synth`]: Gaussian two-view task with a known Bayes accuracy.
//! - [`experiment`]: repeated split / train / evaluate runs and their CSV output.
//! - [`cli`]: the `mvgan` command-line tool.

pub mod checkpoint;
pub mod cli;
pub mod config;
pub mod error;
pub mod experiment;
pub mod format;
pub mod synth;

pub use error::{Error, Result};
