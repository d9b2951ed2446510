//! Toolkit for turning clean 3D curve networks into human-like abstract
//! sketches, sampling them into point clouds and depth maps, and training a
//! small cross-modal retrieval model on top of the result.
//!
//! The crate is split along the processing pipeline:
//!
//! * [`geom`] / [`io`] — the shared geometric vocabulary (chains, networks,
//!   strokes, meshes, clouds) and the plain-text formats they travel in.
//! * [`chain_ops`] — deterministic network clean-up: corner splitting, short
//!   chain removal, polyline simplification and over-sketch consolidation.
//! * [`abstraction`] — the controllable abstraction stage: Fréchet-distance
//!   clustering, stroke segmentation, seeded deformation and smoothing.
//! * [`sampling`] — mesh and sketch point sampling plus subsampling.
//! * [`depth_render`] — multi-view orthographic depth rendering of tube
//!   geometry.
//! * [`metric_learning`] — losses, batch construction, hard-negative mining
//!   and retrieval metrics.
//! * [`toy_encoder`] — a small, fully hand-differentiated point-cloud encoder
//!   used to exercise the learning stack end to end.
//!
//! All randomness flows through [`rng::RngStream`], which is seeded explicitly
//! and derives child streams with a stable hash, so every pipeline output is
//! reproducible bit for bit across runs and platforms.

pub mod abstraction;
pub mod chain_ops;
pub mod depth_render;
pub mod geom;
pub mod io;
pub mod metric_learning;
pub mod rng;
pub mod sampling;
pub mod toy_encoder;
