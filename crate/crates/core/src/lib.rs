//! Collaborative gated fusion of pooled per-modality embeddings.
//!
//! Each active modality (text, audio, vision) is L2-normalized and projected
//! into a shared space. Every modality is then gated elementwise by a sigmoid
//! over the summed outputs of one pairwise gating network applied against each
//! of its partners, the gated states are summed, and a small MLP head
//! classifies the fused vector into two classes.
//!
//! The crate is `no_std` (it needs `alloc`) and carries no IO. File formats,
//! the parallel grid runner and the command-line tool live in the `gatefuse`
//! crate.

#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod data;
pub mod error;
pub mod metrics;
pub mod modality;
pub mod model;
pub mod numerics;
pub mod rng;
pub mod train;

pub use data::{EmbeddingRecord, Label, Manifest, ModalityEmbedding, ModalitySchema, Schema, Split, SplitCounts};
pub use error::{Error, Result};
pub use metrics::{ConfusionMatrix, MetricsReport};
pub use modality::{Modality, ModalitySet};
pub use model::{ForwardCache, FusionParams, Mode};

pub use train::{HyperGrid, TrainConfig, TrainHistory};
