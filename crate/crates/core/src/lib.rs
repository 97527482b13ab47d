//! Multiview classification with missing views, learned as a three-player game.
//!
//! Two conditional generators complete a missing view from the observed one
//! and a shared discriminator either classifies a pair into one of `K` classes
//! or flags it as completed (the extra "fake" class at index `K`).
//!
//! The crate is `no_std` and only needs `alloc`. File formats, the CLI and the
//! synthetic data generator live in the `mvgan` companion crate.
//!
//! Module map:
//!
//! - [`nn`]: one-hidden-layer sigmoid networks, backprop, Adam.
//! - [`model`]: the generators, the discriminator and the decision rule.
//! - [`data`]: multiview examples and the full / view-1-missing / view-2-missing partition.
//! - [`train`]: the empirical losses, feature matching and the sequential training loop.
//! - [`theory`]: exact checks of the equilibrium analysis on discrete distributions.
//! - [`metrics`] and [`eval`]: accuracy / F1, test scenarios, the single-view baseline.
//! - [`gradcheck`]: central finite-difference checks of every analytical gradient.

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod data;
pub mod error;
pub mod eval;
pub mod gradcheck;
mod math;
pub mod metrics;
pub mod model;
pub mod nn;
pub mod theory;
pub mod train;

pub use data::{MultiviewExample, PartitionedDataset};
pub use error::{Error, Result};
pub use model::{Decision, TripartiteModel, View};
pub use nn::{AdamConfig, AdamState, ForwardTrace, Mlp, MlpGrads, OutputKind};
pub use train::{TrainConfig, TrainLog};

/// Deterministic random source used throughout the crate.
pub type SeededRng = rand_chacha::ChaCha8Rng;

/// Builds the crate's RNG from a 64-bit seed.
pub fn seeded_rng(seed: u64) -> SeededRng {
    use rand::SeedableRng;
    SeededRng::seed_from_u64(seed)
}
