//! Controllable sketch abstraction.
//!
//! Turns a prepared curve network into a [`Sketch`] whose fidelity is
//! governed by a single level `l_a` in [0, 1]: at 0 the sketch is a faithful
//! smooth tracing of the network; at 1 chains are aggressively thinned and
//! strokes are strongly deformed. The stages run in a fixed order:
//!
//! 1. [`cluster_and_reduce`] — drop redundant chains, more of them at higher
//!    levels;
//! 2. [`split_into_strokes`] — cut chains into stroke-sized pieces at
//!    curvature spikes and drop tiny fragments;
//! 3. [`deform_stroke`] — seeded global transform plus tangent-orthogonal
//!    jitter, scaled by the level;
//! 4. [`finalize_stroke`] — endpoint overshoot, spline smoothing, uniform
//!    resampling.
//!
//! Every stochastic choice flows from one root seed; stroke `i` uses the
//! child stream `rng.derive(i)`, so generation is reproducible and could be
//! parallelized per stroke without changing the output.

mod cluster;
mod deform;
mod finalize;
mod frechet;
mod strokes;

pub use cluster::{cluster_and_reduce, cluster_and_reduce_indices, cluster_count};
pub use deform::deform_stroke;
pub use finalize::finalize_stroke;
pub use frechet::frechet_distance;
pub use strokes::split_into_strokes;

use crate::geom::{CurveNetwork, Sketch, Stroke};
use crate::rng::RngStream;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum AbstractionError {
    #[error("abstraction level {0} outside [0, 1]")]
    LevelOutOfRange(f64),
    #[error("no strokes survive abstraction of '{source_id}' at level {level}")]
    EmptySketch { source_id: String, level: f64 },
}

/// Knobs for the abstraction pipeline. All defaults reproduce the reference
/// behavior; `l_a` is the abstraction level the caller actually chooses.
#[derive(Debug, Clone, Copy)]
pub struct AbstractionParams {
    /// Abstraction level in [0, 1].
    pub l_a: f64,
    /// Deformation strength is drawn from U[0, t_max_factor · l_a].
    pub t_max_factor: f64,
    /// Rotation range ±rot_deg_per_t · t degrees, per axis.
    pub rot_deg_per_t: f64,
    /// Scale range 1 ± scale_per_t · t, per axis.
    pub scale_per_t: f64,
    /// Translation magnitude range [0, trans_radius_factor · s_max · t].
    pub trans_radius_factor: f64,
    /// Jitter disk radius range [0, jitter_factor · l_a · l_stroke].
    pub jitter_factor: f64,
    /// Overshoot range [0, extend_factor · s_max].
    pub extend_factor: f64,
    /// Strokes shorter than stroke_min_fraction · s_max are discarded.
    pub stroke_min_fraction: f64,
    /// Cluster-count falloff per unit level (the "0.8" in the count formula).
    pub cluster_keep_fraction: f64,
    /// Minimum cluster count (before capping at the chain count).
    pub cluster_floor: usize,
}

impl AbstractionParams {
    pub fn at_level(l_a: f64) -> Self {
        AbstractionParams {
            l_a,
            ..AbstractionParams::default()
        }
    }
}

impl Default for AbstractionParams {
    fn default() -> Self {
        AbstractionParams {
            l_a: 0.5,
            t_max_factor: 1.5,
            rot_deg_per_t: 10.0,
            scale_per_t: 0.1,
            trans_radius_factor: 1.0,
            jitter_factor: 0.1,
            extend_factor: 0.1,
            stroke_min_fraction: 0.2,
            cluster_keep_fraction: 0.8,
            cluster_floor: 10,
        }
    }
}

/// Generate the abstract sketch of a prepared network.
///
/// `source_id` is recorded in the sketch (and its file header) so sketches
/// remain traceable to their source shape. The sketch also records `l_a`
/// and the root seed of `rng`; rerunning with equal inputs reproduces the
/// sketch exactly.
pub fn generate_sketch(
    net: &CurveNetwork,
    source_id: &str,
    params: &AbstractionParams,
    rng: &RngStream,
) -> Result<Sketch, AbstractionError> {
    if !(0.0..=1.0).contains(&params.l_a) || !params.l_a.is_finite() {
        return Err(AbstractionError::LevelOutOfRange(params.l_a));
    }
    let s_max = net.s_max();
    let reduced = cluster_and_reduce(net.chains(), params);
    let raw_strokes: Vec<Stroke> = reduced
        .iter()
        .flat_map(|c| split_into_strokes(c, s_max, params))
        .collect();
    if raw_strokes.is_empty() {
        return Err(AbstractionError::EmptySketch {
            source_id: source_id.to_string(),
            level: params.l_a,
        });
    }
    let strokes: Vec<Stroke> = raw_strokes
        .iter()
        .enumerate()
        .map(|(i, stroke)| {
            let mut srng = rng.derive(i as u64);
            let deformed = deform_stroke(stroke, s_max, params, &mut srng);
            finalize_stroke(&deformed, s_max, params, &mut srng)
        })
        .collect();
    Ok(Sketch {
        strokes,
        abstraction: params.l_a,
        seed: rng.seed(),
        source_id: source_id.to_string(),
    })
}
