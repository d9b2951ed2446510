//! Core geometric types shared by every pipeline stage.
//!
//! The coordinate convention throughout is Y-up: an object's height runs
//! along +y, and the characteristic sizes of a [`CurveNetwork`] are taken
//! from its axis-aligned bounding box — `s_max` is the largest extent and
//! `d_min` the smaller of the two horizontal-ish extents (x and y), which
//! downstream thresholds are expressed against.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum GeomError {
    #[error("chain needs at least 2 vertices, got {count}")]
    TooFewVertices { count: usize },
    #[error("chain has a zero-length segment between vertices {index} and {}", index + 1)]
    ZeroLengthSegment { index: usize },
    #[error("coordinate is not finite at vertex {index}")]
    NonFiniteCoordinate { index: usize },
    #[error("curve network has no chains")]
    EmptyNetwork,
    #[error("degenerate network: extents ({0:.6}, {1:.6}, {2:.6}) leave d_min or s_max nonpositive")]
    DegenerateNetwork(f64, f64, f64),
    #[error("bounding box of an empty point set is undefined")]
    EmptyPointSet,
    #[error("mesh face {face} references vertex {vertex} but only {count} vertices exist")]
    FaceIndexOutOfRange {
        face: usize,
        vertex: usize,
        count: usize,
    },
    #[error("mesh face {face} is degenerate (zero area)")]
    DegenerateFace { face: usize },
    #[error("point cloud is empty")]
    EmptyPointCloud,
}

/// A point (or vector) in 3D.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Point3 {
    pub const ZERO: Point3 = Point3 {
        x: 0.0,
        y: 0.0,
        z: 0.0,
    };

    pub fn new(x: f64, y: f64, z: f64) -> Self {
        Point3 { x, y, z }
    }

    pub fn add(self, o: Point3) -> Point3 {
        Point3::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }

    pub fn sub(self, o: Point3) -> Point3 {
        Point3::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }

    pub fn scale(self, s: f64) -> Point3 {
        Point3::new(self.x * s, self.y * s, self.z * s)
    }

    pub fn dot(self, o: Point3) -> f64 {
        self.x * o.x + self.y * o.y + self.z * o.z
    }

    pub fn cross(self, o: Point3) -> Point3 {
        Point3::new(
            self.y * o.z - self.z * o.y,
            self.z * o.x - self.x * o.z,
            self.x * o.y - self.y * o.x,
        )
    }

    pub fn norm(self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn dist(self, o: Point3) -> f64 {
        self.sub(o).norm()
    }

    pub fn dist_sq(self, o: Point3) -> f64 {
        let d = self.sub(o);
        d.dot(d)
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    /// Unit vector in the same direction, or `None` for (near-)zero input.
    pub fn normalized(self) -> Option<Point3> {
        let n = self.norm();
        if n > 0.0 {
            Some(self.scale(1.0 / n))
        } else {
            None
        }
    }
}

/// Axis-aligned bounding box.
#[derive(Debug, Clone, Copy)]
pub struct Aabb {
    pub min: Point3,
    pub max: Point3,
}

impl Aabb {
    pub fn center(&self) -> Point3 {
        self.min.add(self.max).scale(0.5)
    }

    pub fn extents(&self) -> (f64, f64, f64) {
        (
            self.max.x - self.min.x,
            self.max.y - self.min.y,
            self.max.z - self.min.z,
        )
    }
}

/// Bounding box of a point set; errors on empty input.
pub fn bbox(points: impl IntoIterator<Item = Point3>) -> Result<Aabb, GeomError> {
    let mut it = points.into_iter();
    let first = it.next().ok_or(GeomError::EmptyPointSet)?;
    let mut min = first;
    let mut max = first;
    for p in it {
        min.x = min.x.min(p.x);
        min.y = min.y.min(p.y);
        min.z = min.z.min(p.z);
        max.x = max.x.max(p.x);
        max.y = max.y.max(p.y);
        max.z = max.z.max(p.z);
    }
    Ok(Aabb { min, max })
}

/// An open polyline: ordered vertices, at least two, with no zero-length
/// segments and all coordinates finite.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Chain {
    vertices: Vec<Point3>,
}

impl Chain {
    pub fn new(vertices: Vec<Point3>) -> Result<Self, GeomError> {
        if vertices.len() < 2 {
            return Err(GeomError::TooFewVertices {
                count: vertices.len(),
            });
        }
        for (i, v) in vertices.iter().enumerate() {
            if !v.is_finite() {
                return Err(GeomError::NonFiniteCoordinate { index: i });
            }
        }
        for i in 0..vertices.len() - 1 {
            if vertices[i].dist(vertices[i + 1]) == 0.0 {
                return Err(GeomError::ZeroLengthSegment { index: i });
            }
        }
        Ok(Chain { vertices })
    }

    pub fn vertices(&self) -> &[Point3] {
        &self.vertices
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    #[must_use]
    pub fn is_empty(&self) -> bool {
        false // invariant: at least two vertices
    }

    /// Total polyline length.
    pub fn arc_length(&self) -> f64 {
        self.vertices
            .windows(2)
            .map(|w| w[0].dist(w[1]))
            .sum()
    }

    /// Map every vertex through `f`, revalidating the result.
    pub fn map(&self, f: impl Fn(Point3) -> Point3) -> Result<Chain, GeomError> {
        Chain::new(self.vertices.iter().map(|&v| f(v)).collect())
    }

    /// Reversed copy.
    pub fn reversed(&self) -> Chain {
        let mut v = self.vertices.clone();
        v.reverse();
        Chain { vertices: v }
    }
}

/// A set of chains plus the characteristic sizes of its bounding box.
///
/// `s_max` is the largest bounding-box extent; `d_min` is the smaller of the
/// x and y extents (width and height under the Y-up convention). Both are
/// recomputed from the chains on construction, so they can never drift out
/// of sync with the geometry.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CurveNetwork {
    chains: Vec<Chain>,
    d_min: f64,
    s_max: f64,
}

impl CurveNetwork {
    pub fn from_chains(chains: Vec<Chain>) -> Result<Self, GeomError> {
        if chains.is_empty() {
            return Err(GeomError::EmptyNetwork);
        }
        let bb = bbox(chains.iter().flat_map(|c| c.vertices().iter().copied()))?;
        let (ex, ey, ez) = bb.extents();
        let d_min = ex.min(ey);
        let s_max = ex.max(ey).max(ez);
        if !(d_min > 0.0 && s_max >= d_min) {
            return Err(GeomError::DegenerateNetwork(ex, ey, ez));
        }
        Ok(CurveNetwork {
            chains,
            d_min,
            s_max,
        })
    }

    pub fn chains(&self) -> &[Chain] {
        &self.chains
    }

    pub fn d_min(&self) -> f64 {
        self.d_min
    }

    pub fn s_max(&self) -> f64 {
        self.s_max
    }

    pub fn bbox(&self) -> Aabb {
        // Cannot fail: a network always has at least one chain with vertices.
        bbox(self.chains.iter().flat_map(|c| c.vertices().iter().copied())).unwrap()
    }

    pub fn vertex_count(&self) -> usize {
        self.chains.iter().map(Chain::len).sum()
    }
}

/// The similarity transform that recenters a network on the origin and
/// scales its longest bounding-box edge to 1. Applying the same transform to
/// the paired mesh keeps both representations registered.
#[derive(Debug, Clone, Copy)]
pub struct Normalization {
    pub center: Point3,
    pub scale: f64,
}

impl Normalization {
    pub fn fit(net: &CurveNetwork) -> Normalization {
        let bb = net.bbox();
        Normalization {
            center: bb.center(),
            scale: 1.0 / net.s_max(),
        }
    }

    pub fn apply(&self, p: Point3) -> Point3 {
        p.sub(self.center).scale(self.scale)
    }
}

/// Recenter the network on the origin and scale `s_max` to 1.
pub fn normalize(net: &CurveNetwork) -> Result<CurveNetwork, GeomError> {
    let t = Normalization::fit(net);
    let chains = net
        .chains()
        .iter()
        .map(|c| c.map(|p| t.apply(p)))
        .collect::<Result<Vec<_>, _>>()?;
    CurveNetwork::from_chains(chains)
}

/// A single drawn stroke: an open polyline with its arc length kept
/// alongside (always equal to the sum of its segment lengths).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Stroke {
    vertices: Vec<Point3>,
    arc_length: f64,
}

impl Stroke {
    pub fn new(vertices: Vec<Point3>) -> Result<Self, GeomError> {
        let chain = Chain::new(vertices)?;
        let arc_length = chain.arc_length();
        Ok(Stroke {
            vertices: chain.vertices,
            arc_length,
        })
    }

    pub fn from_chain(chain: &Chain) -> Stroke {
        Stroke {
            arc_length: chain.arc_length(),
            vertices: chain.vertices().to_vec(),
        }
    }

    pub fn vertices(&self) -> &[Point3] {
        &self.vertices
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    #[must_use]
    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn arc_length(&self) -> f64 {
        self.arc_length
    }

    pub fn to_chain(&self) -> Chain {
        Chain {
            vertices: self.vertices.clone(),
        }
    }
}

/// An abstract sketch: the strokes produced for one source network at one
/// abstraction level, together with the seed that generated them.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Sketch {
    pub strokes: Vec<Stroke>,
    pub abstraction: f64,
    pub seed: u64,
    pub source_id: String,
}

impl Sketch {
    pub fn total_length(&self) -> f64 {
        self.strokes.iter().map(Stroke::arc_length).sum()
    }
}

/// An indexed triangle mesh. Faces are validated on construction: indices in
/// range and strictly positive area.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TriMesh {
    pub vertices: Vec<Point3>,
    pub faces: Vec<[usize; 3]>,
}

impl TriMesh {
    pub fn new(vertices: Vec<Point3>, faces: Vec<[usize; 3]>) -> Result<Self, GeomError> {
        for (fi, f) in faces.iter().enumerate() {
            for &vi in f {
                if vi >= vertices.len() {
                    return Err(GeomError::FaceIndexOutOfRange {
                        face: fi,
                        vertex: vi,
                        count: vertices.len(),
                    });
                }
            }
            let area = triangle_area(vertices[f[0]], vertices[f[1]], vertices[f[2]]);
            if !(area > 0.0) {
                return Err(GeomError::DegenerateFace { face: fi });
            }
        }
        Ok(TriMesh { vertices, faces })
    }

    pub fn face_area(&self, fi: usize) -> f64 {
        let f = self.faces[fi];
        triangle_area(self.vertices[f[0]], self.vertices[f[1]], self.vertices[f[2]])
    }

    pub fn total_area(&self) -> f64 {
        (0..self.faces.len()).map(|fi| self.face_area(fi)).sum()
    }

    pub fn bbox(&self) -> Result<Aabb, GeomError> {
        bbox(self.vertices.iter().copied())
    }

    /// Apply a normalization transform to every vertex.
    pub fn transformed(&self, t: &Normalization) -> Result<TriMesh, GeomError> {
        TriMesh::new(
            self.vertices.iter().map(|&v| t.apply(v)).collect(),
            self.faces.clone(),
        )
    }
}

pub fn triangle_area(a: Point3, b: Point3, c: Point3) -> f64 {
    b.sub(a).cross(c.sub(a)).norm() * 0.5
}

/// An unordered set of 3D points (stored in a fixed order for determinism).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointCloud {
    pub points: Vec<Point3>,
}

impl PointCloud {
    pub fn new(points: Vec<Point3>) -> Result<Self, GeomError> {
        if points.is_empty() {
            return Err(GeomError::EmptyPointCloud);
        }
        for (i, p) in points.iter().enumerate() {
            if !p.is_finite() {
                return Err(GeomError::NonFiniteCoordinate { index: i });
            }
        }
        Ok(PointCloud { points })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    #[must_use]
    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(x: f64, y: f64, z: f64) -> Point3 {
        Point3::new(x, y, z)
    }

    #[test]
    fn chain_rejects_degenerate_input() {
        assert!(matches!(
            Chain::new(vec![p(0.0, 0.0, 0.0)]),
            Err(GeomError::TooFewVertices { count: 1 })
        ));
        assert!(matches!(
            Chain::new(vec![p(0.0, 0.0, 0.0), p(0.0, 0.0, 0.0)]),
            Err(GeomError::ZeroLengthSegment { index: 0 })
        ));
        assert!(matches!(
            Chain::new(vec![p(0.0, 0.0, 0.0), p(f64::NAN, 0.0, 0.0)]),
            Err(GeomError::NonFiniteCoordinate { index: 1 })
        ));
    }

    #[test]
    fn arc_length_sums_segments() {
        let c = Chain::new(vec![p(0.0, 0.0, 0.0), p(3.0, 0.0, 0.0), p(3.0, 4.0, 0.0)]).unwrap();
        assert!((c.arc_length() - 7.0).abs() < 1e-15);
    }

    #[test]
    fn network_sizes_come_from_bbox() {
        // A single L-shaped chain spanning 2 x 1 x 4.
        let c = Chain::new(vec![
            p(0.0, 0.0, 0.0),
            p(2.0, 0.0, 0.0),
            p(2.0, 1.0, 0.0),
            p(2.0, 1.0, 4.0),
        ])
        .unwrap();
        let net = CurveNetwork::from_chains(vec![c]).unwrap();
        assert_eq!(net.d_min(), 1.0); // min(width=2, height=1)
        assert_eq!(net.s_max(), 4.0); // max extent overall
    }

    #[test]
    fn network_rejects_flat_inputs() {
        // Zero y-extent makes d_min = 0, which no downstream threshold can use.
        let c = Chain::new(vec![p(0.0, 0.0, 0.0), p(1.0, 0.0, 0.0)]).unwrap();
        assert!(matches!(
            CurveNetwork::from_chains(vec![c]),
            Err(GeomError::DegenerateNetwork(..))
        ));
        assert!(matches!(
            CurveNetwork::from_chains(vec![]),
            Err(GeomError::EmptyNetwork)
        ));
    }

    #[test]
    fn normalize_centers_and_scales() {
        let c = Chain::new(vec![p(1.0, 1.0, 1.0), p(5.0, 3.0, 2.0)]).unwrap();
        let net = CurveNetwork::from_chains(vec![c]).unwrap();
        let n = normalize(&net).unwrap();
        let bb = n.bbox();
        let ctr = bb.center();
        assert!(ctr.norm() < 1e-12);
        assert!((n.s_max() - 1.0).abs() < 1e-12);
        // Idempotent within tight tolerance.
        let n2 = normalize(&n).unwrap();
        for (a, b) in n.chains()[0]
            .vertices()
            .iter()
            .zip(n2.chains()[0].vertices())
        {
            assert!(a.dist(*b) < 1e-12);
        }
    }

    #[test]
    fn mesh_validation_catches_bad_faces() {
        let verts = vec![p(0.0, 0.0, 0.0), p(1.0, 0.0, 0.0), p(0.0, 1.0, 0.0)];
        assert!(TriMesh::new(verts.clone(), vec![[0, 1, 2]]).is_ok());
        assert!(matches!(
            TriMesh::new(verts.clone(), vec![[0, 1, 3]]),
            Err(GeomError::FaceIndexOutOfRange { .. })
        ));
        assert!(matches!(
            TriMesh::new(verts, vec![[0, 1, 1]]),
            Err(GeomError::DegenerateFace { face: 0 })
        ));
    }

    #[test]
    fn stroke_keeps_arc_length_in_sync() {
        let s = Stroke::new(vec![p(0.0, 0.0, 0.0), p(1.0, 0.0, 0.0), p(1.0, 1.0, 0.0)]).unwrap();
        assert!((s.arc_length() - 2.0).abs() < 1e-15);
    }
}
