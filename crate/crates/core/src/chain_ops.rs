//! Deterministic clean-up of raw curve networks.
//!
//! Designed-curve networks arrive as long smooth chains that do not yet look
//! like anything a person would draw. This module reshapes them into
//! stroke-like material in four ordered steps, exposed individually and
//! composed by [`prepare_network`]:
//!
//! 1. [`split_at_corners`] — cut chains at sharp interior corners so each
//!    piece is smooth;
//! 2. [`filter_short`] — drop fragments shorter than a fraction of the
//!    network's characteristic size `d_min`;
//! 3. [`rdp_resample`] — simplify each chain with Ramer–Douglas–Peucker so
//!    vertex spacing is drawing-like rather than tessellation-dense;
//! 4. [`consolidate`] — merge near-duplicate, near-parallel chains (over-
//!    sketched strokes) into single aggregates.
//!
//! Every step is pure and ordering-stable: the same input always yields the
//! same output, with no randomness involved.

use crate::geom::{Chain, CurveNetwork, GeomError, Point3};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ChainOpsError {
    #[error("all chains were filtered away (shortest kept length threshold {threshold:.6})")]
    AllChainsFiltered { threshold: f64 },
    #[error("invalid geometry after preparation: {0}")]
    Geometry(#[from] GeomError),
}

/// Thresholds for network preparation. Lengths are expressed as fractions of
/// the network's `d_min`, except the merge distance, which is a fraction of
/// the longer chain in a candidate pair.
#[derive(Debug, Clone, Copy)]
pub struct ConsolidationConfig {
    /// Interior angles strictly below this (degrees) are corners.
    pub corner_angle_deg: f64,
    /// Chains shorter than `min_len_fraction * d_min` are dropped.
    pub min_len_fraction: f64,
    /// RDP tolerance as `rdp_fraction * d_min`.
    pub rdp_fraction: f64,
    /// Two chains may merge when their symmetric mean closest-point distance
    /// is below `merge_dist_fraction * max(len_a, len_b)`.
    pub merge_dist_fraction: f64,
    /// ... and their mean absolute tangent alignment is at least this.
    pub tangent_align_min_cos: f64,
    /// Upper bound on consolidation passes.
    pub max_merge_iterations: usize,
}

impl Default for ConsolidationConfig {
    fn default() -> Self {
        ConsolidationConfig {
            corner_angle_deg: 135.0,
            min_len_fraction: 0.10,
            rdp_fraction: 0.02,
            merge_dist_fraction: 0.05,
            tangent_align_min_cos: 0.9,
            max_merge_iterations: 10,
        }
    }
}

/// Distance from `p` to the segment `[a, b]`, clamped to the endpoints.
pub fn point_segment_distance(p: Point3, a: Point3, b: Point3) -> f64 {
    let ab = b.sub(a);
    let len_sq = ab.dot(ab);
    if len_sq == 0.0 {
        return p.dist(a);
    }
    let t = (p.sub(a).dot(ab) / len_sq).clamp(0.0, 1.0);
    p.dist(a.add(ab.scale(t)))
}

/// Distance from `p` to the nearest point on a polyline.
pub fn point_polyline_distance(p: Point3, polyline: &[Point3]) -> f64 {
    assert!(polyline.len() >= 2);
    polyline
        .windows(2)
        .map(|w| point_segment_distance(p, w[0], w[1]))
        .fold(f64::INFINITY, f64::min)
}

/// Interior angle (degrees) at vertex `i` of `pts`: the angle between the
/// reversed incoming direction and the outgoing direction. A straight-through
/// vertex measures 180°, a right-angle corner 90°.
fn interior_angle_deg(pts: &[Point3], i: usize) -> f64 {
    let u = pts[i].sub(pts[i - 1]);
    let w = pts[i + 1].sub(pts[i]);
    let denom = u.norm() * w.norm();
    let cos = (u.scale(-1.0).dot(w) / denom).clamp(-1.0, 1.0);
    cos.acos().to_degrees()
}

/// Split a chain at every interior vertex whose interior angle is strictly
/// below `corner_angle_deg`. The corner vertex is kept in both pieces.
pub fn split_at_corners(chain: &Chain, corner_angle_deg: f64) -> Vec<Chain> {
    let pts = chain.vertices();
    let mut cut_after = Vec::new();
    for i in 1..pts.len() - 1 {
        if interior_angle_deg(pts, i) < corner_angle_deg {
            cut_after.push(i);
        }
    }
    if cut_after.is_empty() {
        return vec![chain.clone()];
    }
    let mut pieces = Vec::with_capacity(cut_after.len() + 1);
    let mut start = 0usize;
    for &cut in &cut_after {
        // Sub-chains reuse already-validated vertices, so this cannot fail.
        pieces.push(Chain::new(pts[start..=cut].to_vec()).unwrap());
        start = cut;
    }
    pieces.push(Chain::new(pts[start..].to_vec()).unwrap());
    pieces
}

/// Keep only chains whose arc length is at least `min_len` (strictly shorter
/// ones are removed).
pub fn filter_short(chains: Vec<Chain>, min_len: f64) -> Vec<Chain> {
    chains
        .into_iter()
        .filter(|c| c.arc_length() >= min_len)
        .collect()
}

/// Ramer–Douglas–Peucker simplification with tolerance `epsilon`.
///
/// Interior vertices are dropped whenever the whole span deviates from the
/// replacing segment by at most `epsilon`; a vertex deviating strictly more
/// is kept. Endpoints always survive, and the output vertices are a subset
/// of the input vertices.
pub fn rdp_resample(chain: &Chain, epsilon: f64) -> Chain {
    let pts = chain.vertices();
    let mut keep = vec![false; pts.len()];
    keep[0] = true;
    keep[pts.len() - 1] = true;
    let mut stack = vec![(0usize, pts.len() - 1)];
    while let Some((lo, hi)) = stack.pop() {
        if hi <= lo + 1 {
            continue;
        }
        let mut max_d = -1.0;
        let mut max_i = lo + 1;
        for i in lo + 1..hi {
            let d = point_segment_distance(pts[i], pts[lo], pts[hi]);
            if d > max_d {
                max_d = d;
                max_i = i;
            }
        }
        if max_d > epsilon {
            keep[max_i] = true;
            stack.push((lo, max_i));
            stack.push((max_i, hi));
        }
    }
    let kept: Vec<Point3> = pts
        .iter()
        .zip(&keep)
        .filter(|(_, k)| **k)
        .map(|(p, _)| *p)
        .collect();
    // Endpoints are always kept and a chain has no zero-length segments
    // between kept original vertices, so this cannot fail.
    Chain::new(kept).unwrap()
}

/// Uniform arc-length resampling of a polyline to `m >= 2` points,
/// endpoints included.
pub(crate) fn resample_uniform(pts: &[Point3], m: usize) -> Vec<Point3> {
    assert!(pts.len() >= 2 && m >= 2);
    let mut cum = Vec::with_capacity(pts.len());
    cum.push(0.0);
    for w in pts.windows(2) {
        cum.push(cum.last().unwrap() + w[0].dist(w[1]));
    }
    let total = *cum.last().unwrap();
    let mut out = Vec::with_capacity(m);
    let mut seg = 0usize;
    for k in 0..m {
        let target = total * k as f64 / (m - 1) as f64;
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

/// Per-vertex unit tangents of a polyline: central differences inside,
/// one-sided at the ends.
fn vertex_tangents(pts: &[Point3]) -> Vec<Point3> {
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

/// Closest point on `pts` to `p`, returning (distance, unit direction of the
/// segment the closest point lies on).
fn closest_point_info(p: Point3, pts: &[Point3]) -> (f64, Point3) {
    let mut best = (f64::INFINITY, Point3::new(1.0, 0.0, 0.0));
    for w in pts.windows(2) {
        let d = point_segment_distance(p, w[0], w[1]);
        if d < best.0 {
            let dir = w[1].sub(w[0]).normalized().unwrap_or(best.1);
            best = (d, dir);
        }
    }
    best
}

/// Symmetric proximity/alignment statistics between two polylines:
/// (mean closest-point distance, mean |cos| between local tangents and the
/// closest segment's direction), averaged over the vertices of both.
fn correspondence_stats(a: &[Point3], b: &[Point3]) -> (f64, f64) {
    let mut dist_sum = 0.0;
    let mut cos_sum = 0.0;
    let mut count = 0usize;
    for (pts, other) in [(a, b), (b, a)] {
        let tangents = vertex_tangents(pts);
        for (p, t) in pts.iter().zip(&tangents) {
            let (d, dir) = closest_point_info(*p, other);
            dist_sum += d;
            cos_sum += t.dot(dir).abs();
            count += 1;
        }
    }
    (dist_sum / count as f64, cos_sum / count as f64)
}

/// Pointwise average of two chains after orientation alignment and uniform
/// resampling to the larger vertex count. `None` if the average collapses.
fn aggregate_pair(a: &Chain, b: &Chain) -> Option<Chain> {
    let m = a.len().max(b.len());
    let av = a.vertices();
    let bv = b.vertices();
    // Orient b the same way as a: compare endpoint pairings.
    let fwd = av[0].dist(bv[0]) + av[av.len() - 1].dist(bv[bv.len() - 1]);
    let rev = av[0].dist(bv[bv.len() - 1]) + av[av.len() - 1].dist(bv[0]);
    let b_oriented = if rev < fwd { b.reversed() } else { b.clone() };
    let ra = resample_uniform(av, m);
    let rb = resample_uniform(b_oriented.vertices(), m);
    let mut avg: Vec<Point3> = ra
        .iter()
        .zip(&rb)
        .map(|(p, q)| p.add(*q).scale(0.5))
        .collect();
    avg.dedup_by(|x, y| x.dist(*y) == 0.0);
    Chain::new(avg).ok()
}

/// Merge near-duplicate chains until a fixed point (or the iteration cap).
///
/// A pair is mergeable when its mean absolute tangent alignment reaches
/// `tangent_align_min_cos` and its symmetric mean closest-point distance is
/// below `merge_dist_fraction` of the longer chain's arc length. Candidate
/// pairs are scanned in index order, so the result is deterministic.
pub fn consolidate(chains: Vec<Chain>, cfg: &ConsolidationConfig) -> Vec<Chain> {
    let mut chains = chains;
    for _pass in 0..cfg.max_merge_iterations {
        let mut merged_any = false;
        let mut i = 0;
        while i < chains.len() {
            let mut j = i + 1;
            while j < chains.len() {
                let (mean_dist, mean_cos) =
                    correspondence_stats(chains[i].vertices(), chains[j].vertices());
                let len_max = chains[i].arc_length().max(chains[j].arc_length());
                let close = mean_dist < cfg.merge_dist_fraction * len_max;
                let aligned = mean_cos >= cfg.tangent_align_min_cos;
                if close && aligned {
                    if let Some(agg) = aggregate_pair(&chains[i], &chains[j]) {
                        chains[i] = agg;
                        chains.remove(j);
                        merged_any = true;
                        continue; // re-test the new aggregate against the same j
                    }
                }
                j += 1;
            }
            i += 1;
        }
        if !merged_any {
            break;
        }
    }
    chains
}

/// Full preparation pipeline: split at corners, drop short fragments,
/// simplify, consolidate, and rebuild the network (its `d_min`/`s_max` are
/// recomputed from the surviving chains).
pub fn prepare_network(
    net: &CurveNetwork,
    cfg: &ConsolidationConfig,
) -> Result<CurveNetwork, ChainOpsError> {
    let d_min = net.d_min();
    let mut split = Vec::new();
    for chain in net.chains() {
        split.extend(split_at_corners(chain, cfg.corner_angle_deg));
    }
    let min_len = cfg.min_len_fraction * d_min;
    let kept = filter_short(split, min_len);
    if kept.is_empty() {
        return Err(ChainOpsError::AllChainsFiltered { threshold: min_len });
    }
    let eps = cfg.rdp_fraction * d_min;
    let simplified: Vec<Chain> = kept.iter().map(|c| rdp_resample(c, eps)).collect();
    let merged = consolidate(simplified, cfg);
    Ok(CurveNetwork::from_chains(merged)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::RngStream;

    fn p(x: f64, y: f64, z: f64) -> Point3 {
        Point3::new(x, y, z)
    }

    fn chain(pts: &[(f64, f64, f64)]) -> Chain {
        Chain::new(pts.iter().map(|&(x, y, z)| p(x, y, z)).collect()).unwrap()
    }

    #[test]
    fn l_shape_splits_at_right_angle() {
        let c = chain(&[(0.0, 0.0, 0.0), (1.0, 0.0, 0.0), (1.0, 1.0, 0.0)]);
        let parts = split_at_corners(&c, 135.0);
        assert_eq!(parts.len(), 2);
        // Both pieces retain the corner vertex.
        assert_eq!(parts[0].vertices().last().unwrap(), &p(1.0, 0.0, 0.0));
        assert_eq!(parts[1].vertices()[0], p(1.0, 0.0, 0.0));
    }

    #[test]
    fn straight_and_gentle_chains_do_not_split() {
        let straight = chain(&[(0.0, 0.0, 0.0), (1.0, 0.0, 0.0), (2.0, 0.0, 0.0)]);
        assert_eq!(split_at_corners(&straight, 135.0).len(), 1);
        // 160° interior angle: gentler than the 135° threshold.
        let ang = 20.0_f64.to_radians();
        let gentle = chain(&[
            (0.0, 0.0, 0.0),
            (1.0, 0.0, 0.0),
            (1.0 + ang.cos(), ang.sin(), 0.0),
        ]);
        assert_eq!(split_at_corners(&gentle, 135.0).len(), 1);
    }

    #[test]
    fn filter_short_uses_strict_threshold() {
        let chains = vec![
            chain(&[(0.0, 0.0, 0.0), (0.05, 0.0, 0.0)]),
            chain(&[(0.0, 0.0, 0.0), (0.2, 0.0, 0.0)]),
            chain(&[(0.0, 0.0, 0.0), (0.09, 0.0, 0.0)]),
        ];
        let kept = filter_short(chains, 0.1);
        assert_eq!(kept.len(), 1);
        assert!((kept[0].arc_length() - 0.2).abs() < 1e-12);
        // Exactly at the threshold survives.
        let border = filter_short(vec![chain(&[(0.0, 0.0, 0.0), (0.1, 0.0, 0.0)])], 0.1);
        assert_eq!(border.len(), 1);
    }

    #[test]
    fn rdp_collapses_near_straight_chains() {
        let c = chain(&[
            (0.0, 0.0, 0.0),
            (0.25, 0.001, 0.0),
            (0.5, -0.0015, 0.0),
            (0.75, 0.0005, 0.0),
            (1.0, 0.0, 0.0),
        ]);
        let s = rdp_resample(&c, 0.01);
        assert_eq!(s.len(), 2);
        assert_eq!(s.vertices()[0], p(0.0, 0.0, 0.0));
        assert_eq!(s.vertices()[1], p(1.0, 0.0, 0.0));
    }

    #[test]
    fn rdp_keeps_significant_detail_and_subset_property() {
        let mut rng = RngStream::new(77);
        for _ in 0..50 {
            let n = 5 + rng.index(20);
            let mut pts = Vec::new();
            for i in 0..n {
                pts.push(p(
                    i as f64 * 0.1,
                    rng.uniform_in(-0.5, 0.5),
                    rng.uniform_in(-0.5, 0.5),
                ));
            }
            let c = Chain::new(pts.clone()).unwrap();
            let eps = 0.05;
            let s = rdp_resample(&c, eps);
            // Subset property.
            for v in s.vertices() {
                assert!(pts.contains(v), "output vertex must come from the input");
            }
            // Guarantee: every original vertex within eps of the simplified line.
            for v in &pts {
                let d = point_polyline_distance(*v, s.vertices());
                assert!(d <= eps + 1e-12, "deviation {d} exceeds epsilon {eps}");
            }
        }
    }

    #[test]
    fn parallel_overdrawn_chains_merge_to_midline() {
        let a = chain(&[(0.0, 0.0, 0.0), (0.5, 0.0, 0.0), (1.0, 0.0, 0.0)]);
        let b = chain(&[(0.0, 0.02, 0.0), (0.5, 0.02, 0.0), (1.0, 0.02, 0.0)]);
        let cfg = ConsolidationConfig::default();
        let merged = consolidate(vec![a, b], &cfg);
        assert_eq!(merged.len(), 1);
        for v in merged[0].vertices() {
            assert!((v.y - 0.01).abs() < 1e-12, "expected the midline, got y={}", v.y);
        }
    }

    #[test]
    fn reversed_duplicate_still_merges_cleanly() {
        let a = chain(&[(0.0, 0.0, 0.0), (0.5, 0.1, 0.0), (1.0, 0.0, 0.0)]);
        let b = chain(&[(1.0, 0.01, 0.0), (0.5, 0.11, 0.0), (0.0, 0.01, 0.0)]);
        let merged = consolidate(vec![a.clone(), b], &ConsolidationConfig::default());
        assert_eq!(merged.len(), 1);
        // Midline, not a folded zig-zag: endpoints near the originals.
        let first = merged[0].vertices()[0];
        assert!(first.dist(p(0.0, 0.005, 0.0)) < 1e-9);
    }

    #[test]
    fn perpendicular_chains_do_not_merge() {
        let a = chain(&[(0.0, 0.0, 0.0), (1.0, 0.0, 0.0)]);
        let b = chain(&[(0.5, -0.01, 0.0), (0.5, 0.99, 0.0)]);
        let merged = consolidate(vec![a, b], &ConsolidationConfig::default());
        assert_eq!(merged.len(), 2, "orthogonal chains must stay separate");
    }

    #[test]
    fn prepare_network_runs_all_stages_in_order() {
        // A square outline drawn as one chain (three right-angle corners),
        // plus a tiny fragment that must be filtered, plus an over-sketched
        // copy of one side that must merge.
        let square = chain(&[
            (0.0, 0.0, 0.0),
            (1.0, 0.0, 0.0),
            (1.0, 1.0, 0.0),
            (0.0, 1.0, 0.0),
        ]);
        let fragment = chain(&[(0.4, 0.5, 0.0), (0.42, 0.5, 0.0)]);
        let overdraw = chain(&[(0.0, 0.005, 0.0), (1.0, 0.005, 0.0)]);
        let net = CurveNetwork::from_chains(vec![square, fragment, overdraw]).unwrap();
        let cfg = ConsolidationConfig::default();
        let prepared = prepare_network(&net, &cfg).unwrap();
        // Square splits into 3 smooth sides; bottom side merges with the
        // overdraw; the fragment disappears.
        assert_eq!(prepared.chains().len(), 3);
    }

    #[test]
    fn prepare_network_errors_when_everything_is_filtered() {
        let tiny1 = chain(&[(0.0, 0.0, 0.0), (0.05, 0.0, 0.0)]);
        let tiny2 = chain(&[(0.0, 1.0, 0.0), (0.05, 1.0, 0.0)]);
        // d_min here is the x-extent 0.05, so a fraction of 2 demands
        // length >= 0.1 and removes both 0.05-long chains.
        let net = CurveNetwork::from_chains(vec![tiny1, tiny2]).unwrap();
        let cfg = ConsolidationConfig {
            min_len_fraction: 2.0,
            ..ConsolidationConfig::default()
        };
        assert!(matches!(
            prepare_network(&net, &cfg),
            Err(ChainOpsError::AllChainsFiltered { .. })
        ));
    }
}
