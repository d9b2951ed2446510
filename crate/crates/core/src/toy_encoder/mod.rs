//! A minimal point-set encoder with hand-written gradients.
//!
//! The encoder runs a shared 3→64→128 ReLU network over every input
//! point, max-pools coordinate-wise across points, and maps the pooled
//! code through an affine layer to a 512-dimensional embedding, with a
//! linear classifier head and a two-layer reconstruction branch hanging
//! off the embedding. All gradients are hand-derived reverse-mode and
//! checked against finite differences; training is plain SGD with
//! momentum over balanced batches with online hard-negative mining, and
//! is bit-deterministic given its seed.

pub mod backward;
pub mod checkpoint;
pub mod model;
pub mod train;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum EncoderError {
    #[error("expected a cloud of {expected} points, got {found}")]
    CardinalityMismatch { expected: usize, found: usize },
    #[error("batch is empty")]
    EmptyBatch,
    #[error("dataset has {pairs} pairs; one batch needs {needed}")]
    DatasetTooSmall { pairs: usize, needed: usize },
    #[error(transparent)]
    Metric(#[from] crate::metric_learning::MetricError),
    #[error(transparent)]
    Sampling(#[from] crate::sampling::SamplingError),
    #[error("{path}: {source}")]
    File {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("bad checkpoint {path}: {message}")]
    BadCheckpoint { path: String, message: String },
}

pub use backward::{forward_backward, BatchItem, Grads};
pub use checkpoint::{checkpoint_bytes, load_checkpoint, save_checkpoint};
pub use model::{classify, encode, reconstruct, EncodeCache, EncoderDims, EncoderParams};
pub use train::{
    embed_for_retrieval, predict_class, retrieval_embedding, train, EpochRecord, TrainConfig,
    TrainDataset, TrainOutput, TrainPair,
};
