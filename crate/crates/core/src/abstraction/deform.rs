//! Seeded stroke deformation: the "mechanical inaccuracies" of a human hand.
//!
//! Each stroke draws a deformation strength `t ~ U[0, t_max_factor · l_a]`
//! and then, about its own centroid and in this order: per-axis scaling,
//! per-axis rotation, translation in a random direction, followed by
//! per-vertex jitter inside the disk orthogonal to the local tangent. At
//! `l_a = 0` the draw collapses to `t = 0` and the stroke is returned
//! unchanged, bit for bit.

use super::AbstractionParams;
use crate::geom::{Point3, Stroke};
use crate::rng::RngStream;

/// Unit tangents at every vertex: central differences inside, one-sided at
/// the ends.
pub(crate) fn stroke_tangents(pts: &[Point3]) -> Vec<Point3> {
    let n = pts.len();
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let d = if i == 0 {
            pts[1].sub(pts[0])
        } else if i == n - 1 {
            pts[n - 1].sub(pts[n - 2])
        } else {
            pts[i + 1].sub(pts[i - 1])
        };
        out.push(d.normalized().unwrap_or(Point3::new(1.0, 0.0, 0.0)));
    }
    out
}

/// An orthonormal pair spanning the plane orthogonal to `t`.
fn orthogonal_basis(t: Point3) -> (Point3, Point3) {
    // Pick the world axis least aligned with t to avoid near-parallel cross
    // products.
    let ax = t.x.abs();
    let ay = t.y.abs();
    let az = t.z.abs();
    let helper = if ax <= ay && ax <= az {
        Point3::new(1.0, 0.0, 0.0)
    } else if ay <= az {
        Point3::new(0.0, 1.0, 0.0)
    } else {
        Point3::new(0.0, 0.0, 1.0)
    };
    let e1 = t.cross(helper).normalized().unwrap();
    let e2 = t.cross(e1);
    (e1, e2)
}

fn rotation_about_axes(rx: f64, ry: f64, rz: f64) -> [[f64; 3]; 3] {
    let (sx, cx) = rx.sin_cos();
    let (sy, cy) = ry.sin_cos();
    let (sz, cz) = rz.sin_cos();
    // R = Rz * Ry * Rx, rotations applied about x, then y, then z.
    [
        [cz * cy, cz * sy * sx - sz * cx, cz * sy * cx + sz * sx],
        [sz * cy, sz * sy * sx + cz * cx, sz * sy * cx - cz * sx],
        [-sy, cy * sx, cy * cx],
    ]
}

fn mat_apply(m: &[[f64; 3]; 3], p: Point3) -> Point3 {
    Point3::new(
        m[0][0] * p.x + m[0][1] * p.y + m[0][2] * p.z,
        m[1][0] * p.x + m[1][1] * p.y + m[1][2] * p.z,
        m[2][0] * p.x + m[2][1] * p.y + m[2][2] * p.z,
    )
}

/// Deform a stroke at abstraction level `params.l_a`.
///
/// Draw order is fixed and documented: strength `t`; scales sx, sy, sz;
/// rotation angles rx, ry, rz; translation direction then magnitude; then
/// per vertex a jitter radius and an in-disk angle. A zero draw of `t`
/// (always the case at `l_a = 0`) returns the input unchanged.
pub fn deform_stroke(
    stroke: &Stroke,
    s_max: f64,
    params: &AbstractionParams,
    rng: &mut RngStream,
) -> Stroke {
    let t = rng.uniform_in(0.0, params.t_max_factor * params.l_a);
    if t == 0.0 {
        return stroke.clone();
    }
    let pts = stroke.vertices();
    let centroid = pts
        .iter()
        .fold(Point3::ZERO, |acc, p| acc.add(*p))
        .scale(1.0 / pts.len() as f64);

    let sx = rng.uniform_in(1.0 - params.scale_per_t * t, 1.0 + params.scale_per_t * t);
    let sy = rng.uniform_in(1.0 - params.scale_per_t * t, 1.0 + params.scale_per_t * t);
    let sz = rng.uniform_in(1.0 - params.scale_per_t * t, 1.0 + params.scale_per_t * t);
    let rot_max = (params.rot_deg_per_t * t).to_radians();
    let rx = rng.uniform_in(-rot_max, rot_max);
    let ry = rng.uniform_in(-rot_max, rot_max);
    let rz = rng.uniform_in(-rot_max, rot_max);
    let rot = rotation_about_axes(rx, ry, rz);
    let dir = rng.unit_direction();
    let dir = Point3::new(dir[0], dir[1], dir[2]);
    let magnitude = rng.uniform_in(0.0, params.trans_radius_factor * s_max * t);
    let translation = dir.scale(magnitude);

    let mut transformed: Vec<Point3> = pts
        .iter()
        .map(|&p| {
            let local = p.sub(centroid);
            let scaled = Point3::new(local.x * sx, local.y * sy, local.z * sz);
            mat_apply(&rot, scaled).add(centroid).add(translation)
        })
        .collect();

    // Jitter orthogonally to the local tangent of the transformed (but not
    // yet jittered) stroke, so recorded displacements have exactly zero
    // tangential component.
    let l_stroke = (stroke.arc_length() / s_max).min(1.0);
    let radius_max = params.jitter_factor * params.l_a * l_stroke;
    let tangents = stroke_tangents(&transformed);
    for (p, tangent) in transformed.iter_mut().zip(&tangents) {
        let r = rng.uniform_in(0.0, radius_max);
        let theta = rng.uniform_in(0.0, std::f64::consts::TAU);
        let (e1, e2) = orthogonal_basis(*tangent);
        let disp = e1.scale(r * theta.cos()).add(e2.scale(r * theta.sin()));
        *p = p.add(disp);
    }

    // Jitter draws are continuous, so a collapsed segment is measure-zero;
    // if it ever happens, fall back to the unjittered geometry rather than
    // emit an invalid stroke.
    Stroke::new(transformed).unwrap_or_else(|_| stroke.clone())
}
