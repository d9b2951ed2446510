//! Retrieval evaluation: mAP, NDCG, nearest-neighbor, and Top-k.

use super::losses::LossConfig;
use super::MetricError;
use serde::Serialize;

/// One cross-modal retrieval evaluation: a distance matrix from queries
/// (rows) to gallery items (columns), class labels on both sides, and for
/// each query the gallery index of its paired ground-truth item.
#[derive(Debug, Clone)]
pub struct RetrievalRun {
    query_classes: Vec<usize>,
    query_gt: Vec<usize>,
    gallery_classes: Vec<usize>,
    distances: Vec<Vec<f64>>,
}

impl RetrievalRun {
    pub fn new(
        query_classes: Vec<usize>,
        query_gt: Vec<usize>,
        gallery_classes: Vec<usize>,
        distances: Vec<Vec<f64>>,
    ) -> Result<Self, MetricError> {
        let nq = query_classes.len();
        let ng = gallery_classes.len();
        let fail = |message: String| Err(MetricError::BadRun { message });
        if query_gt.len() != nq || distances.len() != nq {
            return fail(format!(
                "{nq} queries but {} ground-truth entries and {} distance rows",
                query_gt.len(),
                distances.len()
            ));
        }
        if nq == 0 || ng == 0 {
            return fail("empty query or gallery set".to_string());
        }
        for (qi, row) in distances.iter().enumerate() {
            if row.len() != ng {
                return fail(format!(
                    "distance row {qi} has {} entries for a gallery of {ng}",
                    row.len()
                ));
            }
            if row.iter().any(|d| !d.is_finite()) {
                return fail(format!("non-finite distance in row {qi}"));
            }
        }
        for (qi, (&gt, &class)) in query_gt.iter().zip(&query_classes).enumerate() {
            if gt >= ng {
                return fail(format!("query {qi} ground truth {gt} outside gallery"));
            }
            if gallery_classes[gt] != class {
                return fail(format!(
                    "query {qi} (class {class}) pairs with gallery item of class {}",
                    gallery_classes[gt]
                ));
            }
        }
        Ok(RetrievalRun {
            query_classes,
            query_gt,
            gallery_classes,
            distances,
        })
    }

    pub fn num_queries(&self) -> usize {
        self.query_classes.len()
    }
}

/// Macro-averaged retrieval scores, all in [0, 1].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RetrievalMetrics {
    pub map: f64,
    pub ndcg: f64,
    pub nn: f64,
    pub top1: f64,
    pub top5: f64,
    pub top10: f64,
}

impl RetrievalMetrics {
    /// Key-value text form, one metric per line.
    pub fn to_text(&self) -> String {
        format!(
            "map={:.6}\nndcg={:.6}\nnn={:.6}\ntop1={:.6}\ntop5={:.6}\ntop10={:.6}\n",
            self.map, self.ndcg, self.nn, self.top1, self.top5, self.top10
        )
    }
}

/// Machine-readable record of one evaluation run.
#[derive(Debug, Clone, Serialize)]
pub struct RunRecord {
    pub variant: String,
    pub lambda_cls: f64,
    pub lambda_tl: f64,
    pub lambda_tcl: f64,
    pub lambda_ch: f64,
    pub m_tl: f64,
    pub m_tcl: f64,
    pub seed: u64,
    pub metrics: RetrievalMetrics,
}

impl RunRecord {
    pub fn new(config: &LossConfig, seed: u64, metrics: RetrievalMetrics) -> Self {
        RunRecord {
            variant: config.variant.to_string(),
            lambda_cls: config.lambda_cls,
            lambda_tl: config.lambda_tl,
            lambda_tcl: config.lambda_tcl,
            lambda_ch: config.lambda_ch,
            m_tl: config.m_tl,
            m_tcl: config.m_tcl,
            seed,
            metrics,
        }
    }
}

/// Rank the gallery for one query: ascending distance, ties to the lowest
/// gallery index.
fn ranking(row: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..row.len()).collect();
    order.sort_by(|&a, &b| row[a].partial_cmp(&row[b]).unwrap().then(a.cmp(&b)));
    order
}

/// Score a retrieval run.
///
/// Rankings are per query by ascending distance. mAP, NDCG (binary gains,
/// log₂ discount, full depth), and nearest-neighbor accuracy use
/// class-level relevance; Top-k asks whether the query's paired
/// ground-truth item ranks within the first k. All scores are means over
/// queries.
pub fn evaluate(run: &RetrievalRun) -> RetrievalMetrics {
    let nq = run.num_queries();
    let mut map = 0.0;
    let mut ndcg = 0.0;
    let mut nn = 0.0;
    let mut top = [0.0f64; 3]; // k = 1, 5, 10
    for qi in 0..nq {
        let order = ranking(&run.distances[qi]);
        let class = run.query_classes[qi];
        let gt = run.query_gt[qi];
        let relevant_total = run
            .gallery_classes
            .iter()
            .filter(|&&c| c == class)
            .count();
        let mut hits = 0usize;
        let mut ap = 0.0;
        let mut dcg = 0.0;
        for (rank0, &gi) in order.iter().enumerate() {
            let rank = rank0 + 1;
            if run.gallery_classes[gi] == class {
                hits += 1;
                ap += hits as f64 / rank as f64;
                dcg += 1.0 / ((rank + 1) as f64).log2();
            }
            if gi == gt {
                for (slot, &k) in [1usize, 5, 10].iter().enumerate() {
                    if rank <= k {
                        top[slot] += 1.0;
                    }
                }
            }
        }
        let idcg: f64 = (1..=relevant_total)
            .map(|r| 1.0 / ((r + 1) as f64).log2())
            .sum();
        map += ap / relevant_total as f64;
        ndcg += dcg / idcg;
        if run.gallery_classes[order[0]] == class {
            nn += 1.0;
        }
    }
    let n = nq as f64;
    RetrievalMetrics {
        map: map / n,
        ndcg: ndcg / n,
        nn: nn / n,
        top1: top[0] / n,
        top5: top[1] / n,
        top10: top[2] / n,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::RngStream;

    #[test]
    fn perfect_ranking_scores_one_everywhere() {
        // 2 queries, 6 gallery items, 3 per class; same-class items closest.
        let gallery_classes = vec![0, 0, 0, 1, 1, 1];
        let distances = vec![
            vec![0.1, 0.2, 0.3, 5.0, 6.0, 7.0],
            vec![5.0, 6.0, 7.0, 0.1, 0.2, 0.3],
        ];
        let run =
            RetrievalRun::new(vec![0, 1], vec![0, 3], gallery_classes, distances).unwrap();
        let m = evaluate(&run);
        assert_eq!(m.map, 1.0);
        assert_eq!(m.ndcg, 1.0);
        assert_eq!(m.nn, 1.0);
        assert_eq!(m.top1, 1.0);
        assert_eq!(m.top5, 1.0);
        assert_eq!(m.top10, 1.0);
    }

    #[test]
    fn ground_truth_third_hits_top5_not_top1() {
        let gallery_classes = vec![0, 0, 0];
        let distances = vec![vec![0.3, 0.2, 0.1]];
        let run = RetrievalRun::new(vec![0], vec![0], gallery_classes, distances).unwrap();
        let m = evaluate(&run);
        assert_eq!(m.top1, 0.0, "gt at rank 3");
        assert_eq!(m.top5, 1.0);
        assert_eq!(m.top10, 1.0);
        assert_eq!(m.nn, 1.0, "class-level NN still perfect");
    }

    #[test]
    fn ndcg_binary_convention_hand_example() {
        // Relevant at ranks 1 and 3 of a 3-item gallery with 2 relevant:
        // DCG = 1/log2(2) + 1/log2(4) = 1.5; IDCG = 1 + 1/log2(3).
        let gallery_classes = vec![0, 1, 0];
        let distances = vec![vec![0.1, 0.2, 0.3]];
        let run = RetrievalRun::new(vec![0], vec![0], gallery_classes, distances).unwrap();
        let m = evaluate(&run);
        let want = 1.5 / (1.0 + 1.0 / 3f64.log2());
        assert!((m.ndcg - want).abs() < 1e-12, "got {} want {want}", m.ndcg);
        // And mAP for the same run: (1/1 + 2/3) / 2.
        assert!((m.map - (1.0 + 2.0 / 3.0) / 2.0).abs() < 1e-12);
    }

    fn random_run(rng: &mut RngStream) -> RetrievalRun {
        let nc = 2 + rng.index(3);
        let ng = nc * (2 + rng.index(4));
        let gallery_classes: Vec<usize> = (0..ng).map(|i| i % nc).collect();
        let nq = 1 + rng.index(6);
        let mut query_classes = Vec::new();
        let mut query_gt = Vec::new();
        let mut distances = Vec::new();
        for _ in 0..nq {
            let class = rng.index(nc);
            query_classes.push(class);
            let members: Vec<usize> = (0..ng)
                .filter(|&g| gallery_classes[g] == class)
                .collect();
            query_gt.push(members[rng.index(members.len())]);
            distances.push((0..ng).map(|_| rng.uniform_in(0.0, 10.0)).collect());
        }
        RetrievalRun::new(query_classes, query_gt, gallery_classes, distances).unwrap()
    }

    /// Deliberately naive reference: recompute each metric from scratch
    /// with explicit sorting and set scans.
    fn naive_metrics(run: &RetrievalRun) -> RetrievalMetrics {
        let nq = run.query_classes.len();
        let ng = run.gallery_classes.len();
        let mut acc = [0.0f64; 6];
        for qi in 0..nq {
            let mut order: Vec<usize> = (0..ng).collect();
            order.sort_by(|&a, &b| {
                run.distances[qi][a]
                    .partial_cmp(&run.distances[qi][b])
                    .unwrap()
                    .then(a.cmp(&b))
            });
            let rel: Vec<bool> = order
                .iter()
                .map(|&g| run.gallery_classes[g] == run.query_classes[qi])
                .collect();
            let total_rel = rel.iter().filter(|&&r| r).count();
            let mut ap = 0.0;
            let mut seen = 0;
            for (i, &r) in rel.iter().enumerate() {
                if r {
                    seen += 1;
                    ap += seen as f64 / (i + 1) as f64;
                }
            }
            acc[0] += ap / total_rel as f64;
            let dcg: f64 = rel
                .iter()
                .enumerate()
                .filter(|(_, &r)| r)
                .map(|(i, _)| 1.0 / ((i + 2) as f64).log2())
                .sum();
            let idcg: f64 = (0..total_rel).map(|i| 1.0 / ((i + 2) as f64).log2()).sum();
            acc[1] += dcg / idcg;
            acc[2] += if rel[0] { 1.0 } else { 0.0 };
            let gt_rank = order
                .iter()
                .position(|&g| g == run.query_gt[qi])
                .unwrap()
                + 1;
            acc[3] += if gt_rank <= 1 { 1.0 } else { 0.0 };
            acc[4] += if gt_rank <= 5 { 1.0 } else { 0.0 };
            acc[5] += if gt_rank <= 10 { 1.0 } else { 0.0 };
        }
        let n = nq as f64;
        RetrievalMetrics {
            map: acc[0] / n,
            ndcg: acc[1] / n,
            nn: acc[2] / n,
            top1: acc[3] / n,
            top5: acc[4] / n,
            top10: acc[5] / n,
        }
    }

    fn assert_close(a: &RetrievalMetrics, b: &RetrievalMetrics, tol: f64) {
        for (x, y) in [
            (a.map, b.map),
            (a.ndcg, b.ndcg),
            (a.nn, b.nn),
            (a.top1, b.top1),
            (a.top5, b.top5),
            (a.top10, b.top10),
        ] {
            assert!((x - y).abs() <= tol, "{x} vs {y}");
        }
    }

    #[test]
    fn metrics_match_naive_reference_on_random_runs() {
        let mut rng = RngStream::new(600);
        for _ in 0..60 {
            let run = random_run(&mut rng);
            assert_close(&evaluate(&run), &naive_metrics(&run), 1e-12);
        }
    }

    #[test]
    fn monotone_distance_transform_leaves_metrics_unchanged() {
        let mut rng = RngStream::new(601);
        let run = random_run(&mut rng);
        let base = evaluate(&run);
        let transformed = RetrievalRun::new(
            run.query_classes.clone(),
            run.query_gt.clone(),
            run.gallery_classes.clone(),
            run.distances
                .iter()
                .map(|row| row.iter().map(|&d| (3.0 * d + 1.0).exp()).collect())
                .collect(),
        )
        .unwrap();
        assert_close(&base, &evaluate(&transformed), 0.0);
    }

    #[test]
    fn gallery_permutation_leaves_metrics_unchanged() {
        let mut rng = RngStream::new(602);
        for _ in 0..10 {
            let run = random_run(&mut rng);
            let ng = run.gallery_classes.len();
            let mut perm: Vec<usize> = (0..ng).collect();
            rng.shuffle(&mut perm);
            // perm[new] = old: rebuild every gallery-indexed structure.
            let gallery_classes: Vec<usize> =
                perm.iter().map(|&old| run.gallery_classes[old]).collect();
            let mut inverse = vec![0usize; ng];
            for (new, &old) in perm.iter().enumerate() {
                inverse[old] = new;
            }
            let permuted = RetrievalRun::new(
                run.query_classes.clone(),
                run.query_gt.iter().map(|&gt| inverse[gt]).collect(),
                gallery_classes,
                run.distances
                    .iter()
                    .map(|row| perm.iter().map(|&old| row[old]).collect())
                    .collect(),
            )
            .unwrap();
            // Ties would re-break differently after permutation; the random
            // distances here are almost surely tie-free.
            assert_close(&evaluate(&run), &evaluate(&permuted), 1e-12);
        }
    }

    #[test]
    fn malformed_runs_are_rejected() {
        let err = RetrievalRun::new(vec![0], vec![5], vec![0, 0], vec![vec![0.0, 1.0]]);
        assert!(matches!(err, Err(MetricError::BadRun { .. })));
        let err = RetrievalRun::new(
            vec![0],
            vec![1],
            vec![0, 1],
            vec![vec![0.0, 1.0]],
        );
        assert!(
            matches!(err, Err(MetricError::BadRun { .. })),
            "gt of a different class"
        );
        let err = RetrievalRun::new(
            vec![0],
            vec![0],
            vec![0, 0],
            vec![vec![f64::NAN, 1.0]],
        );
        assert!(matches!(err, Err(MetricError::BadRun { .. })));
    }

    #[test]
    fn text_report_lists_every_metric() {
        let m = RetrievalMetrics {
            map: 0.5,
            ndcg: 0.25,
            nn: 1.0,
            top1: 0.125,
            top5: 0.75,
            top10: 1.0,
        };
        let text = m.to_text();
        for key in ["map=", "ndcg=", "nn=", "top1=", "top5=", "top10="] {
            assert!(text.contains(key), "missing {key} in {text}");
        }
        let record = RunRecord::new(&LossConfig::default(), 42, m);
        let json = serde_json::to_string(&record).unwrap();
        assert!(json.contains("\"variant\":\"cl+tl\""));
        assert!(json.contains("\"seed\":42"));
    }
}
