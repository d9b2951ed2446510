//! Point-cloud construction from meshes and sketches.
//!
//! Shapes become clouds by Monte-Carlo surface sampling (triangles chosen
//! by area, points uniform via the square-root barycentric trick); sketches
//! by deterministic equidistant sampling along their strokes. Dense clouds
//! are thinned to training size either by uniform random choice or by
//! farthest-point sampling (FPS), whose greedy max-min rule gives evenly
//! spread subsets.

use crate::geom::{Point3, PointCloud, Sketch, TriMesh};
use crate::rng::RngStream;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SamplingError {
    #[error("mesh has no faces with positive area")]
    DegenerateMesh,
    #[error("sketch has zero total arc length")]
    ZeroLength,
    #[error("sample count must be positive")]
    ZeroCount,
    #[error("cannot subsample {k} points from a cloud of {n}")]
    CountTooLarge { k: usize, n: usize },
}

/// How a dense cloud is thinned to its sparse training-size subset.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SampleMode {
    Random,
    FarthestPoint,
}

/// Counts and mode used across the dataset pipeline.
#[derive(Debug, Clone, Copy)]
pub struct SamplingConfig {
    pub dense_count: usize,
    pub sparse_count: usize,
    pub mode: SampleMode,
}

impl Default for SamplingConfig {
    fn default() -> Self {
        SamplingConfig {
            dense_count: 10_000,
            sparse_count: 1024,
            mode: SampleMode::FarthestPoint,
        }
    }
}

/// Monte-Carlo surface sampling: `n` points, triangle picked with
/// probability proportional to its area, position uniform within the
/// triangle.
pub fn sample_mesh(mesh: &TriMesh, n: usize, rng: &mut RngStream) -> Result<PointCloud, SamplingError> {
    if n == 0 {
        return Err(SamplingError::ZeroCount);
    }
    let mut cum = Vec::with_capacity(mesh.faces.len());
    let mut total = 0.0f64;
    for fi in 0..mesh.faces.len() {
        total += mesh.face_area(fi);
        cum.push(total);
    }
    if !(total > 0.0) {
        return Err(SamplingError::DegenerateMesh);
    }
    let mut points = Vec::with_capacity(n);
    for _ in 0..n {
        let u = rng.uniform() * total;
        let fi = cum.partition_point(|&c| c <= u).min(mesh.faces.len() - 1);
        let [ia, ib, ic] = mesh.faces[fi];
        let (a, b, c) = (mesh.vertices[ia], mesh.vertices[ib], mesh.vertices[ic]);
        let r1 = rng.uniform();
        let r2 = rng.uniform();
        let su = r1.sqrt();
        let p = a
            .scale(1.0 - su)
            .add(b.scale(su * (1.0 - r2)))
            .add(c.scale(su * r2));
        points.push(p);
    }
    Ok(PointCloud { points })
}

/// Point at arc-length position `s` along a polyline with cumulative
/// lengths `cum` (same indexing as `pts`).
fn point_at_arc(pts: &[Point3], cum: &[f64], s: f64) -> Point3 {
    let mut seg = cum.partition_point(|&c| c < s);
    seg = seg.saturating_sub(1).min(pts.len() - 2);
    let seg_len = cum[seg + 1] - cum[seg];
    let t = if seg_len > 0.0 {
        ((s - cum[seg]) / seg_len).clamp(0.0, 1.0)
    } else {
        0.0
    };
    pts[seg].add(pts[seg + 1].sub(pts[seg]).scale(t))
}

/// Equidistant sampling of a set of polylines: `n` points distributed
/// proportionally to polyline length (largest-remainder rounding, ties to
/// the earlier polyline), each polyline sampled endpoint-inclusively at
/// uniform arc spacing. Fully deterministic.
pub fn sample_polylines(polylines: &[&[Point3]], n: usize) -> Result<PointCloud, SamplingError> {
    if n == 0 {
        return Err(SamplingError::ZeroCount);
    }
    let lengths: Vec<f64> = polylines
        .iter()
        .map(|pts| pts.windows(2).map(|w| w[0].dist(w[1])).sum::<f64>())
        .collect();
    let total: f64 = lengths.iter().sum();
    if !(total > 0.0) {
        return Err(SamplingError::ZeroLength);
    }
    // Largest-remainder allocation.
    let quotas: Vec<f64> = lengths.iter().map(|l| n as f64 * l / total).collect();
    let mut alloc: Vec<usize> = quotas.iter().map(|q| q.floor() as usize).collect();
    let assigned: usize = alloc.iter().sum();
    let mut order: Vec<usize> = (0..polylines.len()).collect();
    order.sort_by(|&a, &b| {
        let ra = quotas[a] - quotas[a].floor();
        let rb = quotas[b] - quotas[b].floor();
        rb.partial_cmp(&ra).unwrap().then(a.cmp(&b))
    });
    for k in 0..n - assigned {
        alloc[order[k % order.len()]] += 1;
    }

    let mut points = Vec::with_capacity(n);
    for (pts, &count) in polylines.iter().zip(&alloc) {
        if count == 0 {
            continue;
        }
        let mut cum = Vec::with_capacity(pts.len());
        cum.push(0.0);
        for w in pts.windows(2) {
            cum.push(cum.last().unwrap() + w[0].dist(w[1]));
        }
        let len = *cum.last().unwrap();
        if count == 1 {
            points.push(pts[0]);
            continue;
        }
        for k in 0..count {
            let s = len * k as f64 / (count - 1) as f64;
            points.push(point_at_arc(pts, &cum, s));
        }
    }
    Ok(PointCloud { points })
}

/// Equidistant sampling of a sketch's strokes.
pub fn sample_sketch(sketch: &Sketch, n: usize) -> Result<PointCloud, SamplingError> {
    let polylines: Vec<&[Point3]> = sketch.strokes.iter().map(|s| s.vertices()).collect();
    sample_polylines(&polylines, n)
}

/// Dense-then-sparse pipeline for a sketch: equidistant dense samples
/// thinned to the configured sparse count.
pub fn sketch_sparse_cloud(
    sketch: &Sketch,
    config: &SamplingConfig,
    rng: &mut RngStream,
) -> Result<PointCloud, SamplingError> {
    let dense = sample_sketch(sketch, config.dense_count)?;
    subsample(&dense, config.sparse_count, config.mode, rng)
}

/// Dense-then-sparse pipeline for a mesh: Monte-Carlo surface samples
/// thinned to the configured sparse count.
pub fn mesh_sparse_cloud(
    mesh: &TriMesh,
    config: &SamplingConfig,
    rng: &mut RngStream,
) -> Result<PointCloud, SamplingError> {
    let dense = sample_mesh(mesh, config.dense_count, rng)?;
    subsample(&dense, config.sparse_count, config.mode, rng)
}

/// Thin a cloud to `k` points.
///
/// Random mode draws `k` distinct indices uniformly; FPS starts from one
/// rng-chosen point and then greedily adds the point with the largest
/// minimum distance to the selected set (ties to the lowest index). Either
/// way the output is a subset of the input.
pub fn subsample(
    cloud: &PointCloud,
    k: usize,
    mode: SampleMode,
    rng: &mut RngStream,
) -> Result<PointCloud, SamplingError> {
    let n = cloud.len();
    if k == 0 {
        return Err(SamplingError::ZeroCount);
    }
    if k > n {
        return Err(SamplingError::CountTooLarge { k, n });
    }
    let picks = match mode {
        SampleMode::Random => rng.sample_indices(n, k),
        SampleMode::FarthestPoint => {
            let pts = &cloud.points;
            let start = rng.index(n);
            let mut selected = Vec::with_capacity(k);
            selected.push(start);
            let mut min_sq: Vec<f64> = pts.iter().map(|p| p.dist_sq(pts[start])).collect();
            while selected.len() < k {
                let mut best = 0usize;
                let mut best_d = f64::NEG_INFINITY;
                for (i, &d) in min_sq.iter().enumerate() {
                    if d > best_d {
                        best_d = d;
                        best = i;
                    }
                }
                selected.push(best);
                for (i, d) in min_sq.iter_mut().enumerate() {
                    let nd = pts[i].dist_sq(pts[best]);
                    if nd < *d {
                        *d = nd;
                    }
                }
            }
            selected
        }
    };
    Ok(PointCloud {
        points: picks.into_iter().map(|i| cloud.points[i]).collect(),
    })
}
