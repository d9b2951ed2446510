//! Balanced batch construction and online hard-negative mining.

use super::embedding::sq_dist;
use super::MetricError;
use crate::rng::RngStream;
use std::collections::BTreeMap;

/// A balanced training batch: `k` distinct classes × `p` sketch–shape
/// pairs per class. `pair_indices` point into the caller's dataset; the
/// embedding slots are filled by the encoder after selection.
#[derive(Debug, Clone, PartialEq)]
pub struct TripletBatch {
    pub classes: Vec<usize>,
    pub pair_indices: Vec<usize>,
    pub sketch_embeddings: Vec<Vec<f64>>,
    pub shape_embeddings: Vec<Vec<f64>>,
}

impl TripletBatch {
    pub fn num_pairs(&self) -> usize {
        self.pair_indices.len()
    }

    /// Flatten into parallel (embeddings, labels) lists: all sketches in
    /// pair order, then all shapes in pair order. This fixed order is what
    /// makes lowest-index tie-breaking in mining reproducible.
    pub fn flattened(&self) -> (Vec<Vec<f64>>, Vec<usize>) {
        let mut embeddings =
            Vec::with_capacity(self.sketch_embeddings.len() + self.shape_embeddings.len());
        embeddings.extend(self.sketch_embeddings.iter().cloned());
        embeddings.extend(self.shape_embeddings.iter().cloned());
        let mut labels = Vec::with_capacity(embeddings.len());
        labels.extend(self.classes.iter().copied());
        labels.extend(self.classes.iter().copied());
        (embeddings, labels)
    }
}

/// Sample `k` distinct classes uniformly without replacement (among the
/// classes holding at least `p` pairs), then `p` of each class's pairs
/// without replacement.
///
/// `class_of_pair[i]` is the class of dataset pair `i`.
pub fn balanced_batch(
    class_of_pair: &[usize],
    k: usize,
    p: usize,
    rng: &mut RngStream,
) -> Result<TripletBatch, MetricError> {
    let mut by_class: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (i, &c) in class_of_pair.iter().enumerate() {
        by_class.entry(c).or_default().push(i);
    }
    if by_class.len() < k || k == 0 {
        return Err(MetricError::InsufficientClasses {
            needed: k.max(1),
            available: by_class.len(),
            pairs: p,
        });
    }
    let p = p.max(1);
    let eligible: Vec<(&usize, &Vec<usize>)> =
        by_class.iter().filter(|(_, v)| v.len() >= p).collect();
    if eligible.len() < k {
        // Not enough classes can supply p pairs; report the first that
        // falls short.
        let (&class, pairs) = by_class
            .iter()
            .find(|(_, v)| v.len() < p)
            .expect("a deficient class exists when eligibility falls below k");
        return Err(MetricError::InsufficientPairs {
            class,
            needed: p,
            available: pairs.len(),
        });
    }
    let chosen = rng.sample_indices(eligible.len(), k);
    let mut classes = Vec::with_capacity(k * p);
    let mut pair_indices = Vec::with_capacity(k * p);
    for ci in chosen {
        let (&class, pairs) = eligible[ci];
        for pi in rng.sample_indices(pairs.len(), p) {
            classes.push(class);
            pair_indices.push(pairs[pi]);
        }
    }
    Ok(TripletBatch {
        classes,
        pair_indices,
        sketch_embeddings: Vec::new(),
        shape_embeddings: Vec::new(),
    })
}

/// One mined triplet, as indices into the flat embedding list.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Triplet {
    pub anchor: usize,
    pub positive: usize,
    pub negative: usize,
}

/// Mine hard negatives: every element anchors, every same-class element
/// other than the anchor is a positive, and the negative is the nearest
/// different-class element (squared Euclidean on the given vectors, ties
/// to the lowest index).
pub fn mine_hard_negatives(
    embeddings: &[Vec<f64>],
    labels: &[usize],
) -> Result<Vec<Triplet>, MetricError> {
    if labels.len() != embeddings.len() {
        return Err(MetricError::DimensionMismatch {
            what: "mining labels",
            expected: embeddings.len(),
            found: labels.len(),
        });
    }
    let distinct = {
        let mut seen: Vec<usize> = labels.to_vec();
        seen.sort_unstable();
        seen.dedup();
        seen.len()
    };
    if distinct < 2 {
        return Err(MetricError::SingleClassBatch);
    }
    let mut triplets = Vec::new();
    for (a, label) in labels.iter().enumerate() {
        let mut negative = usize::MAX;
        let mut best = f64::INFINITY;
        for (b, other) in labels.iter().enumerate() {
            if other != label {
                let d = sq_dist(&embeddings[a], &embeddings[b]);
                if d < best {
                    best = d;
                    negative = b;
                }
            }
        }
        for (b, other) in labels.iter().enumerate() {
            if b != a && other == label {
                triplets.push(Triplet {
                    anchor: a,
                    positive: b,
                    negative,
                });
            }
        }
    }
    Ok(triplets)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn covering_every_class_uses_each_once() {
        let class_of_pair: Vec<usize> = (0..12).map(|i| i % 4).collect();
        let mut rng = RngStream::new(3);
        let batch = balanced_batch(&class_of_pair, 4, 1, &mut rng).unwrap();
        let mut classes = batch.classes.clone();
        classes.sort_unstable();
        assert_eq!(classes, vec![0, 1, 2, 3], "k = total classes covers all");
        assert_eq!(batch.num_pairs(), 4);
    }

    #[test]
    fn batch_draws_without_replacement() {
        let class_of_pair: Vec<usize> = (0..40).map(|i| i / 4).collect(); // 10 classes × 4
        let mut rng = RngStream::new(17);
        let batch = balanced_batch(&class_of_pair, 8, 2, &mut rng).unwrap();
        assert_eq!(batch.num_pairs(), 16);
        let mut seen_pairs = batch.pair_indices.clone();
        seen_pairs.sort_unstable();
        seen_pairs.dedup();
        assert_eq!(seen_pairs.len(), 16, "no pair drawn twice");
        let mut seen_classes = batch.classes.clone();
        seen_classes.sort_unstable();
        seen_classes.dedup();
        assert_eq!(seen_classes.len(), 8, "8 distinct classes");
        for (&pi, &class) in batch.pair_indices.iter().zip(&batch.classes) {
            assert_eq!(class_of_pair[pi], class, "pair/class columns stay aligned");
        }
    }

    #[test]
    fn batch_is_deterministic_per_seed() {
        let class_of_pair: Vec<usize> = (0..30).map(|i| i % 6).collect();
        let a = balanced_batch(&class_of_pair, 5, 2, &mut RngStream::new(8)).unwrap();
        let b = balanced_batch(&class_of_pair, 5, 2, &mut RngStream::new(8)).unwrap();
        assert_eq!(a, b);
        let c = balanced_batch(&class_of_pair, 5, 2, &mut RngStream::new(9)).unwrap();
        assert!(a.pair_indices != c.pair_indices, "a different seed reselects");
    }

    #[test]
    fn too_few_classes_is_an_error() {
        let class_of_pair: Vec<usize> = (0..14).map(|i| i % 7).collect();
        let err = balanced_batch(&class_of_pair, 8, 1, &mut RngStream::new(0));
        match err {
            Err(MetricError::InsufficientClasses {
                needed, available, ..
            }) => {
                assert_eq!((needed, available), (8, 7));
            }
            other => panic!("expected InsufficientClasses, got {other:?}"),
        }
    }

    #[test]
    fn too_few_pairs_is_an_error() {
        // Class 2 holds a single pair, so only two classes can supply
        // p=2 and a request for three balanced classes must fail.
        let class_of_pair = vec![0, 0, 1, 1, 2];
        let err = balanced_batch(&class_of_pair, 3, 2, &mut RngStream::new(0));
        match err {
            Err(MetricError::InsufficientPairs {
                class,
                needed,
                available,
            }) => assert_eq!((class, needed, available), (2, 2, 1)),
            other => panic!("expected InsufficientPairs, got {other:?}"),
        }
        // Classes that do hold enough pairs remain usable.
        let ok = balanced_batch(&class_of_pair, 2, 2, &mut RngStream::new(0)).unwrap();
        assert_eq!(ok.num_pairs(), 4);
        assert!(!ok.classes.contains(&2), "the deficient class is skipped");
    }

    #[test]
    fn two_class_mining_yields_four_forced_triplets() {
        // 1 pair per class, flattened sketches-then-shapes.
        let embeddings = vec![
            vec![0.0, 0.0],
            vec![5.0, 0.0],
            vec![0.1, 0.0],
            vec![5.1, 0.0],
        ];
        let labels = vec![0, 1, 0, 1];
        let triplets = mine_hard_negatives(&embeddings, &labels).unwrap();
        assert_eq!(triplets.len(), 4, "each element anchors exactly once");
        for t in &triplets {
            assert_eq!(labels[t.anchor], labels[t.positive]);
            assert_ne!(labels[t.anchor], labels[t.negative]);
        }
        // For anchor 0 the only other-class members are 1 (d=25) and 3
        // (d=26.01): index 1 must win.
        assert_eq!(triplets[0].negative, 1);
    }

    #[test]
    fn mined_negative_beats_every_alternative() {
        let mut rng = RngStream::new(404);
        for _ in 0..30 {
            let n = 6 + rng.index(10);
            let embeddings: Vec<Vec<f64>> = (0..n)
                .map(|_| (0..4).map(|_| rng.uniform_in(-1.0, 1.0)).collect())
                .collect();
            let labels: Vec<usize> = (0..n).map(|_| rng.index(3)).collect();
            let distinct: std::collections::BTreeSet<_> = labels.iter().collect();
            if distinct.len() < 2 {
                continue;
            }
            for t in mine_hard_negatives(&embeddings, &labels).unwrap() {
                let d_neg = sq_dist(&embeddings[t.anchor], &embeddings[t.negative]);
                for (b, other) in labels.iter().enumerate() {
                    if *other != labels[t.anchor] {
                        let d = sq_dist(&embeddings[t.anchor], &embeddings[b]);
                        assert!(
                            d_neg <= d,
                            "negative {} at {d_neg} loses to {b} at {d}",
                            t.negative
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn duplicate_embeddings_tie_break_to_lowest_index() {
        let embeddings = vec![
            vec![0.0, 0.0],
            vec![1.0, 0.0],
            vec![1.0, 0.0], // same position as index 1, different class
            vec![0.0, 0.1],
        ];
        let labels = vec![0, 1, 2, 0];
        let triplets = mine_hard_negatives(&embeddings, &labels).unwrap();
        let anchor0: Vec<&Triplet> = triplets.iter().filter(|t| t.anchor == 0).collect();
        assert!(!anchor0.is_empty());
        for t in anchor0 {
            assert_eq!(t.negative, 1, "indices 1 and 2 tie; 1 is lower");
        }
    }

    #[test]
    fn single_class_batch_cannot_mine() {
        let embeddings = vec![vec![0.0], vec![1.0]];
        let labels = vec![4, 4];
        assert!(matches!(
            mine_hard_negatives(&embeddings, &labels),
            Err(MetricError::SingleClassBatch)
        ));
    }

    #[test]
    fn flattened_order_is_sketches_then_shapes() {
        let batch = TripletBatch {
            classes: vec![2, 5],
            pair_indices: vec![10, 11],
            sketch_embeddings: vec![vec![1.0], vec![2.0]],
            shape_embeddings: vec![vec![3.0], vec![4.0]],
        };
        let (embeddings, labels) = batch.flattened();
        assert_eq!(
            embeddings,
            vec![vec![1.0], vec![2.0], vec![3.0], vec![4.0]]
        );
        assert_eq!(labels, vec![2, 5, 2, 5]);
    }
}
