//! Segmentation of chains into drawable strokes.
//!
//! A person draws a long smooth chain in several strokes, lifting the pen
//! where the curve bends hardest. We approximate that by splitting a chain
//! at every vertex whose discrete curvature exceeds twice the chain's mean
//! curvature, then discarding pieces too short to register as strokes.

use super::AbstractionParams;
use crate::geom::{Chain, Stroke};

/// Discrete curvature at the interior vertices of a polyline: turning angle
/// divided by the mean of the two adjacent segment lengths. Straight-through
/// vertices measure zero.
fn interior_curvatures(chain: &Chain) -> Vec<f64> {
    let pts = chain.vertices();
    let mut out = Vec::with_capacity(pts.len().saturating_sub(2));
    for i in 1..pts.len() - 1 {
        let u = pts[i].sub(pts[i - 1]);
        let w = pts[i + 1].sub(pts[i]);
        let lu = u.norm();
        let lw = w.norm();
        let cos = (u.dot(w) / (lu * lw)).clamp(-1.0, 1.0);
        let turning = cos.acos();
        out.push(turning / (0.5 * (lu + lw)));
    }
    out
}

/// Split a chain at high-curvature vertices and keep only pieces of arc
/// length at least `stroke_min_fraction * s_max`. May return an empty list
/// when every piece is too short.
pub fn split_into_strokes(chain: &Chain, s_max: f64, params: &AbstractionParams) -> Vec<Stroke> {
    let pts = chain.vertices();
    let mut cut_after = Vec::new();
    if pts.len() > 2 {
        let kappa = interior_curvatures(chain);
        let mean = kappa.iter().sum::<f64>() / kappa.len() as f64;
        for (k, &x) in kappa.iter().enumerate() {
            if x > 2.0 * mean {
                cut_after.push(k + 1); // kappa[k] belongs to vertex k+1
            }
        }
    }
    let mut pieces: Vec<&[crate::geom::Point3]> = Vec::with_capacity(cut_after.len() + 1);
    let mut start = 0usize;
    for &cut in &cut_after {
        pieces.push(&pts[start..=cut]);
        start = cut;
    }
    pieces.push(&pts[start..]);

    let min_len = params.stroke_min_fraction * s_max;
    pieces
        .into_iter()
        .filter_map(|piece| {
            let stroke = Stroke::new(piece.to_vec()).ok()?;
            (stroke.arc_length() >= min_len).then_some(stroke)
        })
        .collect()
}
