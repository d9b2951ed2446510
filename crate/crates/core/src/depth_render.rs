//! Multi-view orthographic depth rendering.
//!
//! Objects are rendered from 12 virtual cameras circling the object every
//! 30° of azimuth at 30° elevation. Sketch strokes are first swept into
//! 8-sided tube meshes with rotation-minimizing frames so they rasterize
//! like wide ribbon lines. The renderer is a plain z-buffer over an
//! orthographic window fitted to the unit-normalized scene's bounding
//! sphere (radius √3/2), with depth mapped linearly to [0,1], near = 0,
//! background = 1. Everything here is deterministic: identical inputs give
//! bit-identical images.
//!
//! Images travel as 16-bit binary PGM (`P5`, maxval 65535, big-endian),
//! depth quantized as `round(d · 65535)`, under the filename pattern
//! `<id>_view<k>.pgm`.

use crate::geom::{Point3, Stroke, TriMesh};
use std::path::Path;
use thiserror::Error;

/// Radius of the circumscribed sphere of the normalized unit bounding box;
/// the orthographic window spans [-R, R]² and the depth range [-R, R].
pub const SCENE_RADIUS: f64 = 0.866_025_403_784_438_6; // sqrt(3)/2

/// Default tube radius as a fraction of the scene's `s_max`.
pub const TUBE_RADIUS_FRACTION: f64 = 0.01;

#[derive(Debug, Error)]
pub enum RenderError {
    #[error("{path}: {source}")]
    File {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("not a 16-bit binary PGM: {0}")]
    BadPgm(String),
}

/// Only orthographic projection is supported; the marker keeps the camera
/// description self-documenting in serialized form.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Projection {
    Orthographic,
}

#[derive(Debug, Clone, Copy)]
pub struct Camera {
    pub azimuth_deg: f64,
    pub elevation_deg: f64,
    pub projection: Projection,
    pub image_size: usize,
}

impl Camera {
    pub fn new(azimuth_deg: f64, elevation_deg: f64, image_size: usize) -> Self {
        Camera {
            azimuth_deg,
            elevation_deg,
            projection: Projection::Orthographic,
            image_size,
        }
    }

    /// Orthonormal view basis (right, up, back): `back` points from the
    /// scene toward the camera, Y-up world convention.
    pub fn basis(&self) -> (Point3, Point3, Point3) {
        let a = self.azimuth_deg.to_radians();
        let e = self.elevation_deg.to_radians();
        let back = Point3::new(a.sin() * e.cos(), e.sin(), a.cos() * e.cos());
        let right = Point3::new(a.cos(), 0.0, -a.sin());
        let up = back.cross(right);
        (right, up, back)
    }
}

/// The standard 12-camera rig: azimuths 0°..330° in 30° steps, 30°
/// elevation, 224×224 orthographic.
pub fn make_cameras() -> Vec<Camera> {
    (0..12)
        .map(|k| Camera::new(30.0 * k as f64, 30.0, 224))
        .collect()
}

/// A square depth image, row-major, top-left origin, values in [0,1]
/// (background 1).
#[derive(Debug, Clone, PartialEq)]
pub struct DepthImage {
    size: usize,
    depth: Vec<f64>,
}

impl DepthImage {
    pub fn new_background(size: usize) -> Self {
        DepthImage {
            size,
            depth: vec![1.0; size * size],
        }
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.depth[row * self.size + col]
    }

    pub fn values(&self) -> &[f64] {
        &self.depth
    }

    /// Pixels covered by geometry (depth < 1).
    pub fn covered(&self) -> usize {
        self.depth.iter().filter(|&&d| d < 1.0).count()
    }
}

/// An orthonormal pair spanning the plane orthogonal to `t`.
fn orthogonal_basis(t: Point3) -> (Point3, Point3) {
    let (ax, ay, az) = (t.x.abs(), t.y.abs(), t.z.abs());
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

const TUBE_SIDES: usize = 8;

/// Sweep a stroke into a watertight 8-sided tube.
///
/// Cross-section frames are propagated with the double-reflection
/// rotation-minimizing-frame method, so the tube never twists around its
/// axis. Ends are closed with pointed caps whose apexes extend `radius`
/// beyond the stroke endpoints along the end tangents.
pub fn tube_mesh(stroke: &Stroke, radius: f64) -> TriMesh {
    assert!(radius > 0.0, "tube radius must be positive");
    let pts = stroke.vertices();
    let n = pts.len();
    // Per-vertex unit tangents: central differences inside, one-sided ends.
    let mut tangents = Vec::with_capacity(n);
    for i in 0..n {
        let d = if i == 0 {
            pts[1].sub(pts[0])
        } else if i == n - 1 {
            pts[n - 1].sub(pts[n - 2])
        } else {
            pts[i + 1].sub(pts[i - 1])
        };
        tangents.push(d.normalized().unwrap_or(Point3::new(1.0, 0.0, 0.0)));
    }
    // Rotation-minimizing normals via double reflection.
    let mut normals = Vec::with_capacity(n);
    normals.push(orthogonal_basis(tangents[0]).0);
    for i in 0..n - 1 {
        let v1 = pts[i + 1].sub(pts[i]);
        let c1 = v1.dot(v1);
        let (ni, ti) = (normals[i], tangents[i]);
        let (r_l, t_l) = if c1 > 0.0 {
            (
                ni.sub(v1.scale(2.0 * v1.dot(ni) / c1)),
                ti.sub(v1.scale(2.0 * v1.dot(ti) / c1)),
            )
        } else {
            (ni, ti)
        };
        let v2 = tangents[i + 1].sub(t_l);
        let c2 = v2.dot(v2);
        let next = if c2 > 0.0 {
            r_l.sub(v2.scale(2.0 * v2.dot(r_l) / c2))
        } else {
            r_l
        };
        // Re-orthonormalize against accumulated numeric drift.
        let t_next = tangents[i + 1];
        let fixed = next.sub(t_next.scale(next.dot(t_next)));
        normals.push(fixed.normalized().unwrap_or(orthogonal_basis(t_next).0));
    }

    let mut vertices = Vec::with_capacity(n * TUBE_SIDES + 2);
    for i in 0..n {
        let b = tangents[i].cross(normals[i]);
        for j in 0..TUBE_SIDES {
            let phi = std::f64::consts::TAU * j as f64 / TUBE_SIDES as f64;
            let off = normals[i].scale(radius * phi.cos()).add(b.scale(radius * phi.sin()));
            vertices.push(pts[i].add(off));
        }
    }
    let start_apex = vertices.len();
    vertices.push(pts[0].sub(tangents[0].scale(radius)));
    let end_apex = vertices.len();
    vertices.push(pts[n - 1].add(tangents[n - 1].scale(radius)));

    let ring = |i: usize, j: usize| i * TUBE_SIDES + (j % TUBE_SIDES);
    let mut faces = Vec::with_capacity((n - 1) * TUBE_SIDES * 2 + TUBE_SIDES * 2);
    for i in 0..n - 1 {
        for j in 0..TUBE_SIDES {
            faces.push([ring(i, j), ring(i, j + 1), ring(i + 1, j)]);
            faces.push([ring(i, j + 1), ring(i + 1, j + 1), ring(i + 1, j)]);
        }
    }
    for j in 0..TUBE_SIDES {
        faces.push([start_apex, ring(0, j + 1), ring(0, j)]);
        faces.push([end_apex, ring(n - 1, j), ring(n - 1, j + 1)]);
    }
    // Extreme jitter could collapse a quad; dropping a zero-area face keeps
    // the mesh valid without visible effect.
    let valid: Vec<[usize; 3]> = faces
        .into_iter()
        .filter(|f| {
            crate::geom::triangle_area(vertices[f[0]], vertices[f[1]], vertices[f[2]]) > 0.0
        })
        .collect();
    TriMesh::new(vertices, valid).expect("tube construction yields a valid mesh")
}

/// Z-buffer rasterization of `mesh` from `camera`.
///
/// The window spans [-R, R]² around the origin with R = √3/2 (the unit
/// box's bounding sphere), pixel centers at half-integer coordinates,
/// top-left origin. Depth is `(R - z_cam) / 2R`, clamped to [0,1].
pub fn render_depth(mesh: &TriMesh, camera: &Camera) -> DepthImage {
    let size = camera.image_size;
    let mut img = DepthImage::new_background(size);
    let (right, up, back) = camera.basis();
    let r = SCENE_RADIUS;
    let scale = size as f64 / (2.0 * r);

    // Project every vertex once: (px, py) in pixel coordinates, d in [0,1].
    let projected: Vec<(f64, f64, f64)> = mesh
        .vertices
        .iter()
        .map(|&p| {
            let x = p.dot(right);
            let y = p.dot(up);
            let z = p.dot(back);
            let px = (x + r) * scale;
            let py = (r - y) * scale;
            let d = ((r - z) / (2.0 * r)).clamp(0.0, 1.0);
            (px, py, d)
        })
        .collect();

    for f in &mesh.faces {
        let (ax, ay, ad) = projected[f[0]];
        let (bx, by, bd) = projected[f[1]];
        let (cx, cy, cd) = projected[f[2]];
        let area2 = (bx - ax) * (cy - ay) - (by - ay) * (cx - ax);
        if area2.abs() < 1e-14 {
            continue; // edge-on in this view
        }
        let min_x = ax.min(bx).min(cx);
        let max_x = ax.max(bx).max(cx);
        let min_y = ay.min(by).min(cy);
        let max_y = ay.max(by).max(cy);
        // Pixel centers are at integer+0.5; cover the bbox conservatively.
        let c0 = ((min_x - 0.5).ceil().max(0.0)) as usize;
        let c1 = ((max_x - 0.5).floor().min(size as f64 - 1.0)) as isize;
        let r0 = ((min_y - 0.5).ceil().max(0.0)) as usize;
        let r1 = ((max_y - 0.5).floor().min(size as f64 - 1.0)) as isize;
        if c1 < c0 as isize || r1 < r0 as isize {
            continue;
        }
        let inv = 1.0 / area2;
        for row in r0..=(r1 as usize) {
            let py = row as f64 + 0.5;
            for col in c0..=(c1 as usize) {
                let px = col as f64 + 0.5;
                let w0 = ((bx - ax) * (py - ay) - (by - ay) * (px - ax)) * inv;
                let w1 = ((cx - bx) * (py - by) - (cy - by) * (px - bx)) * inv;
                let w2 = 1.0 - w0 - w1;
                // Boundary-inclusive coverage, winding-independent thanks
                // to the signed-area normalization.
                if w0 < -1e-12 || w1 < -1e-12 || w2 < -1e-12 {
                    continue;
                }
                // Affine (exact, orthographic) depth interpolation. The
                // edge functions above put w0 on vertex c, w1 on a, w2 on b.
                let d = (w0 * cd + w1 * ad + w2 * bd).clamp(0.0, 1.0);
                let cell = &mut img.depth[row * size + col];
                if d < *cell {
                    *cell = d;
                }
            }
        }
    }
    img
}

/// Write a depth image as 16-bit binary PGM (`P5`, maxval 65535,
/// big-endian), quantizing depth as `round(d·65535)`.
pub fn write_pgm16(path: &Path, img: &DepthImage) -> Result<(), RenderError> {
    let mut buf = Vec::with_capacity(20 + img.depth.len() * 2);
    buf.extend_from_slice(format!("P5\n{} {}\n65535\n", img.size, img.size).as_bytes());
    for &d in &img.depth {
        let q = (d * 65535.0).round() as u16;
        buf.extend_from_slice(&q.to_be_bytes());
    }
    std::fs::write(path, buf).map_err(|source| RenderError::File {
        path: path.display().to_string(),
        source,
    })
}

/// Read back a 16-bit binary PGM written by [`write_pgm16`].
pub fn read_pgm16(path: &Path) -> Result<DepthImage, RenderError> {
    let data = std::fs::read(path).map_err(|source| RenderError::File {
        path: path.display().to_string(),
        source,
    })?;
    let bad = |m: &str| RenderError::BadPgm(format!("{}: {m}", path.display()));
    // Header: three whitespace-separated tokens after the magic.
    if !data.starts_with(b"P5") {
        return Err(bad("missing P5 magic"));
    }
    let mut pos = 2usize;
    let mut fields = [0usize; 3];
    for field in &mut fields {
        while pos < data.len() && data[pos].is_ascii_whitespace() {
            pos += 1;
        }
        let start = pos;
        while pos < data.len() && data[pos].is_ascii_digit() {
            pos += 1;
        }
        let text = std::str::from_utf8(&data[start..pos]).map_err(|_| bad("bad header"))?;
        *field = text.parse().map_err(|_| bad("bad header number"))?;
    }
    let [width, height, maxval] = fields;
    if width != height {
        return Err(bad("image must be square"));
    }
    if maxval != 65535 {
        return Err(bad("expected maxval 65535"));
    }
    pos += 1; // single whitespace after maxval
    let expected = width * height * 2;
    if data.len() - pos != expected {
        return Err(bad("truncated pixel data"));
    }
    let mut depth = Vec::with_capacity(width * height);
    for chunk in data[pos..].chunks_exact(2) {
        let q = u16::from_be_bytes([chunk[0], chunk[1]]);
        depth.push(q as f64 / 65535.0);
    }
    Ok(DepthImage {
        size: width,
        depth,
    })
}

/// Conventional filename for view `k` of object `id`.
pub fn view_filename(id: &str, k: usize) -> String {
    format!("{id}_view{k}.pgm")
}
