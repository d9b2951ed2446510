//! Discrete Fréchet distance between polylines.
//!
//! The plain mode is the textbook dynamic program over the coupling lattice.
//! The aligned mode first translates the second polyline so that one of its
//! endpoints coincides with one of the first polyline's endpoints and takes
//! the minimum over all four endpoint pairings; that variant ignores where a
//! stroke sits in space and compares shape only, while staying symmetric in
//! its arguments.

use crate::geom::{Chain, Point3};

/// Dynamic program on explicit point slices. Row-rolling keeps memory at
/// O(|b|).
fn frechet_dp(a: &[Point3], b: &[Point3]) -> f64 {
    let n = a.len();
    let m = b.len();
    debug_assert!(n >= 1 && m >= 1);
    let mut prev = vec![0.0f64; m];
    let mut cur = vec![0.0f64; m];
    for i in 0..n {
        for j in 0..m {
            let d = a[i].dist(b[j]);
            let reach = if i == 0 && j == 0 {
                d
            } else if i == 0 {
                cur[j - 1]
            } else if j == 0 {
                prev[j]
            } else {
                prev[j].min(prev[j - 1]).min(cur[j - 1])
            };
            cur[j] = d.max(reach);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[m - 1]
}

/// Discrete Fréchet distance between two chains.
///
/// With `aligned` set, `b` is translated so that one of its endpoints lands
/// on one of `a`'s endpoints, minimizing over all four pairings; the result
/// is then a position-free shape distance. Either way the result is
/// symmetric and non-negative, and zero exactly for equal vertex sequences
/// (unaligned mode).
pub fn frechet_distance(a: &Chain, b: &Chain, aligned: bool) -> f64 {
    let av = a.vertices();
    let bv = b.vertices();
    if !aligned {
        return frechet_dp(av, bv);
    }
    let a_ends = [av[0], av[av.len() - 1]];
    let b_ends = [bv[0], bv[bv.len() - 1]];
    let mut best = f64::INFINITY;
    let mut shifted = vec![Point3::ZERO; bv.len()];
    for ae in a_ends {
        for be in b_ends {
            let offset = ae.sub(be);
            for (dst, src) in shifted.iter_mut().zip(bv) {
                *dst = src.add(offset);
            }
            best = best.min(frechet_dp(av, &shifted));
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::RngStream;

    fn chain(pts: &[(f64, f64, f64)]) -> Chain {
        Chain::new(pts.iter().map(|&(x, y, z)| Point3::new(x, y, z)).collect()).unwrap()
    }

    fn random_chain(rng: &mut RngStream, n: usize) -> Chain {
        let mut pts = Vec::with_capacity(n);
        let mut cur = Point3::new(
            rng.uniform_in(-1.0, 1.0),
            rng.uniform_in(-1.0, 1.0),
            rng.uniform_in(-1.0, 1.0),
        );
        pts.push(cur);
        for _ in 1..n {
            cur = cur.add(Point3::new(
                rng.uniform_in(-0.5, 0.5),
                rng.uniform_in(0.05, 0.5),
                rng.uniform_in(-0.5, 0.5),
            ));
            pts.push(cur);
        }
        Chain::new(pts).unwrap()
    }

    /// Exhaustive minimum over every monotone coupling path; exponential, for
    /// tiny inputs only.
    fn coupling_oracle(a: &[Point3], b: &[Point3]) -> f64 {
        fn walk(a: &[Point3], b: &[Point3], i: usize, j: usize, acc: f64, best: &mut f64) {
            let acc = acc.max(a[i].dist(b[j]));
            if i == a.len() - 1 && j == b.len() - 1 {
                *best = best.min(acc);
                return;
            }
            if i + 1 < a.len() {
                walk(a, b, i + 1, j, acc, best);
            }
            if j + 1 < b.len() {
                walk(a, b, i, j + 1, acc, best);
            }
            if i + 1 < a.len() && j + 1 < b.len() {
                walk(a, b, i + 1, j + 1, acc, best);
            }
        }
        let mut best = f64::INFINITY;
        walk(a, b, 0, 0, 0.0, &mut best);
        best
    }

    #[test]
    fn identical_chains_have_zero_distance() {
        let c = chain(&[(0.0, 0.0, 0.0), (1.0, 0.5, 0.0), (2.0, 0.0, 1.0)]);
        assert_eq!(frechet_distance(&c, &c, false), 0.0);
        assert_eq!(frechet_distance(&c, &c, true), 0.0);
    }

    #[test]
    fn parallel_offset_segments() {
        let a = chain(&[(0.0, 0.0, 0.0), (1.0, 0.0, 0.0)]);
        let b = chain(&[(0.0, 0.3, 0.0), (1.0, 0.3, 0.0)]);
        assert!((frechet_distance(&a, &b, false) - 0.3).abs() < 1e-15);
        // Aligned mode erases the pure translation.
        assert_eq!(frechet_distance(&a, &b, true), 0.0);
    }

    #[test]
    fn dp_matches_coupling_oracle_on_small_chains() {
        let mut rng = RngStream::new(2024);
        for _ in 0..60 {
            let a = { let n = 2 + rng.index(4); random_chain(&mut rng, n) };
            let b = { let n = 2 + rng.index(4); random_chain(&mut rng, n) };
            let dp = frechet_distance(&a, &b, false);
            let oracle = coupling_oracle(a.vertices(), b.vertices());
            assert_eq!(dp, oracle, "DP must equal the coupling recursion exactly");
        }
    }

    #[test]
    fn aligned_mode_is_symmetric() {
        let mut rng = RngStream::new(5150);
        for _ in 0..40 {
            let a = { let n = 2 + rng.index(5); random_chain(&mut rng, n) };
            let b = { let n = 2 + rng.index(5); random_chain(&mut rng, n) };
            let ab = frechet_distance(&a, &b, true);
            let ba = frechet_distance(&b, &a, true);
            assert!(
                (ab - ba).abs() <= 1e-12 * ab.max(1.0),
                "aligned distance must be symmetric: {ab} vs {ba}"
            );
            assert!(ab >= 0.0);
        }
    }
}
