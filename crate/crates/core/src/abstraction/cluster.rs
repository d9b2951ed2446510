//! Chain clustering and reduction: the abstraction-level-driven thinning of
//! a curve network.
//!
//! Chains are grouped by shape similarity (aligned Fréchet distance,
//! average-linkage agglomerative clustering) into a cluster count that
//! shrinks as the abstraction level rises, and each large cluster is then
//! reduced to its most distinctive members: the two mutually farthest chains
//! in absolute position are always kept, and any other member closer to them
//! than the cluster average is dropped as redundant over-sketching.

use super::frechet::frechet_distance;
use super::AbstractionParams;
use crate::geom::Chain;

/// Cluster count for `n_chains` at level `l_a`:
/// `max(ceil(n·(1 - keep·l_a)/2), floor)`, capped at `n_chains`.
pub fn cluster_count(n_chains: usize, l_a: f64, keep_fraction: f64, floor: usize) -> usize {
    let raw = (n_chains as f64 * (1.0 - keep_fraction * l_a) / 2.0).ceil() as usize;
    raw.max(floor).min(n_chains)
}

/// Average-linkage agglomerative clustering over a precomputed symmetric
/// distance matrix, run until `target` clusters remain. Clusters are
/// returned with members sorted, ordered by smallest member; ties in the
/// merge choice go to the lexicographically smallest pair, so the outcome is
/// deterministic.
fn agglomerate(dist: &[Vec<f64>], target: usize) -> Vec<Vec<usize>> {
    let n = dist.len();
    let mut clusters: Vec<Vec<usize>> = (0..n).map(|i| vec![i]).collect();
    while clusters.len() > target {
        let mut best = (f64::INFINITY, 0usize, 1usize);
        for i in 0..clusters.len() {
            for j in i + 1..clusters.len() {
                let mut sum = 0.0;
                for &a in &clusters[i] {
                    for &b in &clusters[j] {
                        sum += dist[a][b];
                    }
                }
                let mean = sum / (clusters[i].len() * clusters[j].len()) as f64;
                if mean < best.0 {
                    best = (mean, i, j);
                }
            }
        }
        let (_, i, j) = best;
        let merged = clusters.remove(j);
        clusters[i].extend(merged);
        clusters[i].sort_unstable();
    }
    clusters
}

/// Indices of the chains that survive clustering and reduction, in original
/// order. Exposed separately from [`cluster_and_reduce`] so callers can
/// track provenance.
pub fn cluster_and_reduce_indices(chains: &[Chain], params: &AbstractionParams) -> Vec<usize> {
    let n = chains.len();
    if n == 0 {
        return Vec::new();
    }
    let target = cluster_count(
        n,
        params.l_a,
        params.cluster_keep_fraction,
        params.cluster_floor,
    );
    // Aligned (position-free) distances drive the grouping.
    let mut aligned = vec![vec![0.0f64; n]; n];
    for i in 0..n {
        for j in i + 1..n {
            let d = frechet_distance(&chains[i], &chains[j], true);
            aligned[i][j] = d;
            aligned[j][i] = d;
        }
    }
    let clusters = agglomerate(&aligned, target);

    let mut survivors = Vec::new();
    for cluster in &clusters {
        if cluster.len() <= 2 {
            survivors.extend(cluster.iter().copied());
            continue;
        }
        // Unaligned distances ("absolute positions") pick the extremes.
        let m = cluster.len();
        let mut unaligned = vec![vec![0.0f64; m]; m];
        for a in 0..m {
            for b in a + 1..m {
                let d = frechet_distance(&chains[cluster[a]], &chains[cluster[b]], false);
                unaligned[a][b] = d;
                unaligned[b][a] = d;
            }
        }
        let mut far = (f64::NEG_INFINITY, 0usize, 1usize);
        for a in 0..m {
            for b in a + 1..m {
                if unaligned[a][b] > far.0 {
                    far = (unaligned[a][b], a, b);
                }
            }
        }
        let (_, rep_a, rep_b) = far;
        let rest: Vec<usize> = (0..m).filter(|&k| k != rep_a && k != rep_b).collect();
        let d_of = |k: usize| unaligned[k][rep_a].min(unaligned[k][rep_b]);
        let d_mean = rest.iter().map(|&k| d_of(k)).sum::<f64>() / rest.len() as f64;
        for k in 0..m {
            let keep = k == rep_a || k == rep_b || d_of(k) >= d_mean;
            if keep {
                survivors.push(cluster[k]);
            }
        }
    }
    survivors.sort_unstable();
    survivors
}

/// Cluster the chains at the configured abstraction level and keep only each
/// cluster's distinctive representatives. The output is a subset of the
/// input in original order.
pub fn cluster_and_reduce(chains: &[Chain], params: &AbstractionParams) -> Vec<Chain> {
    cluster_and_reduce_indices(chains, params)
        .into_iter()
        .map(|i| chains[i].clone())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::Point3;

    fn chain(pts: &[(f64, f64, f64)]) -> Chain {
        Chain::new(pts.iter().map(|&(x, y, z)| Point3::new(x, y, z)).collect()).unwrap()
    }

    #[test]
    fn cluster_count_matches_formula() {
        assert_eq!(cluster_count(100, 0.5, 0.8, 10), 30);
        assert_eq!(cluster_count(20, 1.0, 0.8, 10), 10);
        assert_eq!(cluster_count(40, 0.0, 0.8, 10), 20);
        assert_eq!(cluster_count(12, 1.0, 0.8, 10), 10);
        // The floor is itself capped by the chain count.
        assert_eq!(cluster_count(4, 1.0, 0.8, 10), 4);
    }

    #[test]
    fn cluster_count_never_increases_with_level() {
        for n in [5usize, 10, 23, 64, 100] {
            let mut prev = usize::MAX;
            for step in 0..=20 {
                let l_a = step as f64 / 20.0;
                let c = cluster_count(n, l_a, 0.8, 10);
                assert!(c <= prev, "n={n}: count rose from {prev} to {c} at l_a={l_a}");
                assert!(c >= 10.min(n));
                assert!(c <= n);
                prev = c;
            }
        }
    }

    #[test]
    fn near_duplicates_in_a_cluster_are_removed() {
        // Five parallel unit segments (identical shape, so aligned
        // distances are all zero and everything lands in one cluster when
        // the floor permits). Heights: A=0, B=10 are the far pair; two
        // members hug A and one sits mid-way. Unaligned distance between
        // two such segments is just their height gap, so the reduction rule
        // is hand-checkable: d(L) = min(gap to A, gap to B) gives 0.5, 1.0
        // and 4.0, the mean is 11/6, and the two huggers fall strictly
        // below it while the mid chain survives.
        let chains = vec![
            chain(&[(0.0, 0.0, 0.0), (1.0, 0.0, 0.0)]),  // A
            chain(&[(0.0, 0.5, 0.0), (1.0, 0.5, 0.0)]),  // near A: removed
            chain(&[(0.0, 1.0, 0.0), (1.0, 1.0, 0.0)]),  // near A: removed
            chain(&[(0.0, 4.0, 0.0), (1.0, 4.0, 0.0)]),  // distinctive: kept
            chain(&[(0.0, 10.0, 0.0), (1.0, 10.0, 0.0)]), // B
        ];
        let params = AbstractionParams {
            l_a: 1.0,
            cluster_floor: 1,
            ..AbstractionParams::default()
        };
        let survivors = cluster_and_reduce_indices(&chains, &params);
        assert_eq!(survivors, vec![0, 3, 4]);
    }

    #[test]
    fn output_is_a_subset_in_original_order() {
        let chains: Vec<Chain> = (0..15)
            .map(|i| {
                let y = i as f64 * 0.005;
                chain(&[(0.0, y, 0.0), (1.0, y + 0.3, 0.0)])
            })
            .collect();
        let params = AbstractionParams {
            l_a: 1.0,
            cluster_floor: 2,
            ..AbstractionParams::default()
        };
        let out = cluster_and_reduce(&chains, &params);
        assert!(!out.is_empty() && out.len() <= chains.len());
        let mut cursor = 0usize;
        for c in &out {
            let pos = chains[cursor..]
                .iter()
                .position(|orig| orig == c)
                .expect("every output chain must come from the input, in order");
            cursor += pos + 1;
        }
    }

    #[test]
    fn low_level_keeps_everything_when_floor_allows() {
        let chains: Vec<Chain> = (0..8)
            .map(|i| chain(&[(0.0, i as f64, 0.0), (1.0, i as f64 + 0.4, 0.0)]))
            .collect();
        // l_a = 0 → target = max(ceil(8/2), 10) capped at 8 = 8 → singletons.
        let params = AbstractionParams {
            l_a: 0.0,
            ..AbstractionParams::default()
        };
        let out = cluster_and_reduce(&chains, &params);
        assert_eq!(out.len(), 8);
    }
}
