//! Command-line front end: procedural shapes, dataset builds, training
//! runs, and retrieval, all driven by one flat config file.
//!
//! The library half of this crate holds everything the `sketchkit` binary
//! does, so tests (and other tools) can call the same entry points
//! directly. All outputs are plain files under a run directory; reruns
//! with equal inputs produce byte-identical manifests and checkpoints.

pub mod commands;
pub mod config;
pub mod dataset;
pub mod procgen;
pub mod study;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Geom(#[from] sketchkit::geom::GeomError),
    #[error(transparent)]
    Io(#[from] sketchkit::io::IoError),
    #[error(transparent)]
    ChainOps(#[from] sketchkit::chain_ops::ChainOpsError),
    #[error(transparent)]
    Abstraction(#[from] sketchkit::abstraction::AbstractionError),
    #[error(transparent)]
    Sampling(#[from] sketchkit::sampling::SamplingError),
    #[error(transparent)]
    Render(#[from] sketchkit::depth_render::RenderError),
    #[error(transparent)]
    Metric(#[from] sketchkit::metric_learning::MetricError),
    #[error(transparent)]
    Encoder(#[from] sketchkit::toy_encoder::EncoderError),
    #[error("{path}: {source}")]
    File {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("config line {line}: {message}")]
    Config { line: usize, message: String },
    #[error("{0}")]
    BadArgs(String),
    #[error("class '{class}' has {count} items; stratified splitting needs at least 3")]
    ClassTooSmall { class: String, count: usize },
    #[error("split ratios sum to {sum}, expected 1")]
    BadRatios { sum: f64 },
    #[error("manifest check failed: {message}")]
    Manifest { message: String },
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl CliError {
    /// Stable machine-readable tag for the error report printed by the
    /// binary on failure.
    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Geom(_) => "geometry",
            CliError::Io(_) => "io",
            CliError::ChainOps(_) => "chain_ops",
            CliError::Abstraction(_) => "abstraction",
            CliError::Sampling(_) => "sampling",
            CliError::Render(_) => "render",
            CliError::Metric(_) => "metric",
            CliError::Encoder(_) => "encoder",
            CliError::File { .. } => "file",
            CliError::Config { .. } => "config",
            CliError::BadArgs(_) => "bad_args",
            CliError::ClassTooSmall { .. } => "class_too_small",
            CliError::BadRatios { .. } => "bad_ratios",
            CliError::Manifest { .. } => "manifest",
            CliError::Json(_) => "json",
        }
    }
}

/// Read a whole file, wrapping the OS error with the path.
pub(crate) fn read_text(path: &std::path::Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|source| CliError::File {
        path: path.display().to_string(),
        source,
    })
}

/// Write a whole file, creating parent directories first.
pub(crate) fn write_text(path: &std::path::Path, text: &str) -> Result<(), CliError> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|source| CliError::File {
            path: dir.display().to_string(),
            source,
        })?;
    }
    std::fs::write(path, text).map_err(|source| CliError::File {
        path: path.display().to_string(),
        source,
    })
}
