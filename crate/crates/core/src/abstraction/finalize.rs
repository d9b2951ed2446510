//! Stroke finalization: overshoot and smoothing.
//!
//! Drawn strokes overshoot their intended endpoints slightly and never
//! follow a polyline's hard corners. Finalization extends both ends of a
//! stroke by a single random overshoot length, interpolates the vertices
//! with a centripetal Catmull–Rom spline, and resamples the result at
//! uniform arc length using the stroke's pre-extension mean segment spacing.

use super::AbstractionParams;
use crate::geom::{Point3, Stroke};
use crate::rng::RngStream;

/// Subdivisions per control-point span when flattening the spline; the
/// resampling step below works on this dense polyline.
const SPLINE_STEPS: usize = 32;

/// Centripetal Catmull–Rom evaluation on one span (Barry–Goldman form).
/// `p0..p3` are consecutive controls; the curve runs from `p1` to `p2` as
/// `u` goes 0 → 1.
fn catmull_rom_point(p0: Point3, p1: Point3, p2: Point3, p3: Point3, u: f64) -> Point3 {
    let alpha = 0.5; // centripetal
    let t0 = 0.0;
    let t1 = t0 + p0.dist(p1).powf(alpha);
    let t2 = t1 + p1.dist(p2).powf(alpha);
    let t3 = t2 + p2.dist(p3).powf(alpha);
    // Degenerate knot intervals cannot occur for valid strokes with
    // reflection phantoms, but guard the division anyway.
    let lerp = |a: Point3, b: Point3, ta: f64, tb: f64, t: f64| -> Point3 {
        if tb - ta <= 0.0 {
            return a;
        }
        let w = (t - ta) / (tb - ta);
        a.scale(1.0 - w).add(b.scale(w))
    };
    let t = t1 + u * (t2 - t1);
    let a1 = lerp(p0, p1, t0, t1, t);
    let a2 = lerp(p1, p2, t1, t2, t);
    let a3 = lerp(p2, p3, t2, t3, t);
    let b1 = lerp(a1, a2, t0, t2, t);
    let b2 = lerp(a2, a3, t1, t3, t);
    lerp(b1, b2, t1, t2, t)
}

/// Flatten an interpolating centripetal Catmull–Rom spline through `ctrl`
/// into a dense polyline. Endpoint behavior uses reflection phantoms
/// (`2·p0 − p1`), which keeps collinear inputs exactly collinear.
fn spline_flatten(ctrl: &[Point3]) -> Vec<Point3> {
    let n = ctrl.len();
    debug_assert!(n >= 2);
    let first_phantom = ctrl[0].scale(2.0).sub(ctrl[1]);
    let last_phantom = ctrl[n - 1].scale(2.0).sub(ctrl[n - 2]);
    let get = |i: isize| -> Point3 {
        if i < 0 {
            first_phantom
        } else if i as usize >= n {
            last_phantom
        } else {
            ctrl[i as usize]
        }
    };
    let mut out = Vec::with_capacity((n - 1) * SPLINE_STEPS + 1);
    out.push(ctrl[0]);
    for span in 0..n - 1 {
        let p0 = get(span as isize - 1);
        let p1 = ctrl[span];
        let p2 = ctrl[span + 1];
        let p3 = get(span as isize + 2);
        for step in 1..=SPLINE_STEPS {
            let u = step as f64 / SPLINE_STEPS as f64;
            out.push(catmull_rom_point(p0, p1, p2, p3, u));
        }
    }
    out
}

/// Uniform arc-length resampling of a polyline at spacing `h` (endpoints
/// included; the count is rounded so the actual spacing is as close to `h`
/// as possible).
fn resample_by_spacing(pts: &[Point3], h: f64) -> Vec<Point3> {
    let mut cum = Vec::with_capacity(pts.len());
    cum.push(0.0);
    for w in pts.windows(2) {
        cum.push(cum.last().unwrap() + w[0].dist(w[1]));
    }
    let total = *cum.last().unwrap();
    let count = ((total / h).round() as usize + 1).max(2);
    let mut out = Vec::with_capacity(count);
    let mut seg = 0usize;
    for k in 0..count {
        let target = total * k as f64 / (count - 1) as f64;
        while seg + 2 < cum.len() && cum[seg + 1] < target {
            seg += 1;
        }
        let seg_len = cum[seg + 1] - cum[seg];
        let t = if seg_len > 0.0 {
            ((target - cum[seg]) / seg_len).clamp(0.0, 1.0)
        } else {
            0.0
        };
        out.push(pts[seg].add(pts[seg + 1].sub(pts[seg]).scale(t)));
    }
    out
}

/// Extend, smooth and resample one stroke. A single overshoot length
/// `p ~ U[0, extend_factor · s_max]` is drawn per stroke and applied along
/// both end tangents; the smoothed curve is resampled at the stroke's
/// pre-extension mean segment spacing.
pub fn finalize_stroke(
    stroke: &Stroke,
    s_max: f64,
    params: &AbstractionParams,
    rng: &mut RngStream,
) -> Stroke {
    let pts = stroke.vertices();
    let h = stroke.arc_length() / (pts.len() - 1) as f64;
    let p = rng.uniform_in(0.0, params.extend_factor * s_max);

    let mut ctrl: Vec<Point3> = Vec::with_capacity(pts.len() + 2);
    if p > 0.0 {
        let start_dir = pts[0].sub(pts[1]).normalized().unwrap();
        ctrl.push(pts[0].add(start_dir.scale(p)));
    }
    ctrl.extend_from_slice(pts);
    if p > 0.0 {
        let end_dir = pts[pts.len() - 1]
            .sub(pts[pts.len() - 2])
            .normalized()
            .unwrap();
        ctrl.push(pts[pts.len() - 1].add(end_dir.scale(p)));
    }

    let dense = spline_flatten(&ctrl);
    let mut resampled = resample_by_spacing(&dense, h);
    resampled.dedup_by(|a, b| a.dist(*b) == 0.0);
    // Fall back to the extended control polygon if resampling ever
    // degenerates (it cannot for valid strokes, but stay total).
    Stroke::new(resampled).unwrap_or_else(|_| Stroke::new(ctrl).unwrap_or_else(|_| stroke.clone()))
}
