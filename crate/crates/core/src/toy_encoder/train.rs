//! SGD training over balanced batches with per-epoch cloud resampling.

use super::backward::{forward_backward, BatchItem, Grads};
use super::model::{classify, encode, EncoderDims, EncoderParams};
use super::EncoderError;
use crate::geom::{Point3, Sketch, TriMesh};
use crate::metric_learning::embedding::{l2_normalize, sq_dist, ClassCenters};
use crate::metric_learning::eval::{evaluate, RetrievalMetrics, RetrievalRun};
use crate::metric_learning::losses::{LossBreakdown, LossConfig};
use crate::metric_learning::{balanced_batch, MetricError};
use crate::rng::RngStream;
use crate::sampling::{mesh_sparse_cloud, sketch_sparse_cloud, SamplingConfig};
use serde::Serialize;

/// One paired training example: the sketch and shape geometry plus the
/// fixed reconstruction target (equidistant samples of the prepared
/// curve network the sketch came from).
#[derive(Debug, Clone)]
pub struct TrainPair {
    pub class: usize,
    pub sketch: Sketch,
    pub mesh: TriMesh,
    pub recon_target: Vec<Point3>,
}

/// A dataset of paired examples over `num_classes` classes.
#[derive(Debug, Clone)]
pub struct TrainDataset {
    pub pairs: Vec<TrainPair>,
    pub num_classes: usize,
}

/// Optimizer and schedule settings.
#[derive(Debug, Clone)]
pub struct TrainConfig {
    pub lr: f64,
    pub momentum: f64,
    pub epochs: usize,
    /// Classes per balanced batch (k).
    pub batch_classes: usize,
    /// Pairs per class per batch (p).
    pub pairs_per_class: usize,
    pub loss: LossConfig,
    pub seed: u64,
    pub dims: EncoderDims,
    pub sampling: SamplingConfig,
}

impl TrainConfig {
    pub fn new(dims: EncoderDims, loss: LossConfig, epochs: usize, seed: u64) -> Self {
        TrainConfig {
            lr: 0.01,
            momentum: 0.9,
            epochs,
            batch_classes: 8,
            pairs_per_class: 1,
            loss,
            seed,
            dims,
            sampling: SamplingConfig {
                sparse_count: dims.input_points,
                ..SamplingConfig::default()
            },
        }
    }
}

/// One line of the training log.
#[derive(Debug, Clone, Serialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub cls: f64,
    pub triplet: f64,
    pub center: f64,
    pub reconstruction: f64,
    pub total: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub val: Option<RetrievalMetrics>,
}

/// A trained model plus its training history.
#[derive(Debug, Clone)]
pub struct TrainOutput {
    pub params: EncoderParams,
    pub centers: ClassCenters,
    pub log: Vec<EpochRecord>,
}

fn metric(e: MetricError) -> EncoderError {
    EncoderError::Metric(e)
}

/// Retrieval works on unit-sphere embeddings for the triplet-loss
/// variants and on raw features for the center-loss variants (whose
/// margins are calibrated to raw feature space).
pub fn retrieval_embedding(raw: &[f64], config: &LossConfig) -> Result<Vec<f64>, EncoderError> {
    if config.variant.uses_center() {
        Ok(raw.to_vec())
    } else {
        l2_normalize(raw).map_err(metric)
    }
}

/// Sample every pair's sketch and shape cloud with seeds derived from
/// `stream_key`, so one key reproduces one epoch's clouds exactly.
fn sample_clouds(
    dataset: &TrainDataset,
    sampling: &SamplingConfig,
    base: &RngStream,
) -> Result<Vec<(Vec<Point3>, Vec<Point3>)>, EncoderError> {
    let mut out = Vec::with_capacity(dataset.pairs.len());
    for (i, pair) in dataset.pairs.iter().enumerate() {
        let mut sk_rng = base.derive(2 * i as u64);
        let sk = sketch_sparse_cloud(&pair.sketch, sampling, &mut sk_rng)?;
        let mut sh_rng = base.derive(2 * i as u64 + 1);
        let sh = mesh_sparse_cloud(&pair.mesh, sampling, &mut sh_rng)?;
        out.push((sk.points, sh.points));
    }
    Ok(out)
}

/// Embed a cloud list and score sketch→shape retrieval within it.
fn validation_metrics(
    dataset: &TrainDataset,
    clouds: &[(Vec<Point3>, Vec<Point3>)],
    params: &EncoderParams,
    config: &LossConfig,
) -> Result<RetrievalMetrics, EncoderError> {
    let mut query_embeddings = Vec::with_capacity(clouds.len());
    let mut gallery_embeddings = Vec::with_capacity(clouds.len());
    for (sk, sh) in clouds {
        query_embeddings.push(retrieval_embedding(&encode(sk, params)?.feature, config)?);
        gallery_embeddings.push(retrieval_embedding(&encode(sh, params)?.feature, config)?);
    }
    let classes: Vec<usize> = dataset.pairs.iter().map(|p| p.class).collect();
    let distances: Vec<Vec<f64>> = query_embeddings
        .iter()
        .map(|q| gallery_embeddings.iter().map(|g| sq_dist(q, g)).collect())
        .collect();
    let run = RetrievalRun::new(
        classes.clone(),
        (0..clouds.len()).collect(),
        classes,
        distances,
    )
    .map_err(metric)?;
    Ok(evaluate(&run))
}

fn sgd_step_matrix(w: &mut [f64], v: &mut [f64], g: &[f64], lr: f64, momentum: f64) {
    for ((wi, vi), gi) in w.iter_mut().zip(v.iter_mut()).zip(g) {
        *vi = momentum * *vi - lr * gi;
        *wi += *vi;
    }
}

fn sgd_step(
    params: &mut EncoderParams,
    centers: &mut ClassCenters,
    velocity: &mut Grads,
    grads: &Grads,
    lr: f64,
    momentum: f64,
) {
    sgd_step_matrix(&mut params.w1.data, &mut velocity.w1.data, &grads.w1.data, lr, momentum);
    sgd_step_matrix(&mut params.b1, &mut velocity.b1, &grads.b1, lr, momentum);
    sgd_step_matrix(&mut params.w2.data, &mut velocity.w2.data, &grads.w2.data, lr, momentum);
    sgd_step_matrix(&mut params.b2, &mut velocity.b2, &grads.b2, lr, momentum);
    sgd_step_matrix(&mut params.w3.data, &mut velocity.w3.data, &grads.w3.data, lr, momentum);
    sgd_step_matrix(&mut params.b3, &mut velocity.b3, &grads.b3, lr, momentum);
    sgd_step_matrix(&mut params.wc.data, &mut velocity.wc.data, &grads.wc.data, lr, momentum);
    sgd_step_matrix(&mut params.bc, &mut velocity.bc, &grads.bc, lr, momentum);
    sgd_step_matrix(&mut params.wr1.data, &mut velocity.wr1.data, &grads.wr1.data, lr, momentum);
    sgd_step_matrix(&mut params.br1, &mut velocity.br1, &grads.br1, lr, momentum);
    sgd_step_matrix(&mut params.wr2.data, &mut velocity.wr2.data, &grads.wr2.data, lr, momentum);
    sgd_step_matrix(&mut params.br2, &mut velocity.br2, &grads.br2, lr, momentum);
    for (row, (vrow, grow)) in centers
        .rows_mut()
        .iter_mut()
        .zip(velocity.centers.iter_mut().zip(&grads.centers))
    {
        sgd_step_matrix(row, vrow, grow, lr, momentum);
    }
}

/// Train the encoder.
///
/// Each epoch resamples every pair's sparse clouds with epoch-derived
/// seeds, then runs `pairs / (k·p)` balanced batches (at least one) of
/// SGD with momentum. Validation clouds, when a validation set is given,
/// are sampled once with a fixed seed and rescored after every epoch.
/// The whole run is a pure function of (dataset, config).
pub fn train(
    dataset: &TrainDataset,
    validation: Option<&TrainDataset>,
    config: &TrainConfig,
) -> Result<TrainOutput, EncoderError> {
    let k = config.batch_classes;
    let p = config.pairs_per_class;
    if dataset.pairs.len() < k * p || k == 0 || p == 0 {
        return Err(EncoderError::DatasetTooSmall {
            pairs: dataset.pairs.len(),
            needed: (k * p).max(1),
        });
    }
    if config.sampling.sparse_count != config.dims.input_points {
        return Err(EncoderError::Metric(MetricError::DimensionMismatch {
            what: "sparse_count vs encoder input_points",
            expected: config.dims.input_points,
            found: config.sampling.sparse_count,
        }));
    }
    let root = RngStream::new(config.seed);
    let mut init_rng = root.derive_str("init");
    let mut params = EncoderParams::init(config.dims, &mut init_rng);
    let mut centers_rng = root.derive_str("centers");
    let mut centers = ClassCenters::init(config.dims.classes, config.dims.embed, &mut centers_rng);
    let mut velocity = Grads::zeros_like(&params, &centers);

    let class_of_pair: Vec<usize> = dataset.pairs.iter().map(|pr| pr.class).collect();
    let batches_per_epoch = (dataset.pairs.len() / (k * p)).max(1);

    let val_clouds = match validation {
        Some(v) => Some(sample_clouds(v, &config.sampling, &root.derive_str("eval"))?),
        None => None,
    };

    let mut log = Vec::with_capacity(config.epochs);
    for epoch in 0..config.epochs {
        let epoch_rng = root.derive_str("epoch").derive(epoch as u64);
        let clouds = sample_clouds(dataset, &config.sampling, &epoch_rng.derive_str("clouds"))?;
        let mut sums = LossBreakdown {
            cls: 0.0,
            triplet: 0.0,
            center: 0.0,
            reconstruction: 0.0,
            total: 0.0,
            triplet_count: 0,
        };
        for b in 0..batches_per_epoch {
            let mut batch_rng = epoch_rng.derive_str("batch").derive(b as u64);
            let batch = balanced_batch(&class_of_pair, k, p, &mut batch_rng).map_err(metric)?;
            // Flatten sketches first, then shapes, matching the mining
            // convention.
            let mut items: Vec<BatchItem> = Vec::with_capacity(2 * batch.num_pairs());
            let wants_rec = config.loss.variant.uses_reconstruction();
            for (&pi, &class) in batch.pair_indices.iter().zip(&batch.classes) {
                items.push(BatchItem {
                    cloud: &clouds[pi].0,
                    label: class,
                    recon_target: if wants_rec {
                        Some(&dataset.pairs[pi].recon_target)
                    } else {
                        None
                    },
                });
            }
            for (&pi, &class) in batch.pair_indices.iter().zip(&batch.classes) {
                items.push(BatchItem {
                    cloud: &clouds[pi].1,
                    label: class,
                    recon_target: None,
                });
            }
            let (breakdown, grads) = forward_backward(&params, &centers, &items, &config.loss)?;
            sgd_step(
                &mut params,
                &mut centers,
                &mut velocity,
                &grads,
                config.lr,
                config.momentum,
            );
            sums.cls += breakdown.cls;
            sums.triplet += breakdown.triplet;
            sums.center += breakdown.center;
            sums.reconstruction += breakdown.reconstruction;
            sums.total += breakdown.total;
            sums.triplet_count += breakdown.triplet_count;
        }
        let nb = batches_per_epoch as f64;
        let val = match (&val_clouds, validation) {
            (Some(clouds), Some(vset)) => {
                Some(validation_metrics(vset, clouds, &params, &config.loss)?)
            }
            _ => None,
        };
        log.push(EpochRecord {
            epoch,
            cls: sums.cls / nb,
            triplet: sums.triplet / nb,
            center: sums.center / nb,
            reconstruction: sums.reconstruction / nb,
            total: sums.total / nb,
            val,
        });
    }
    Ok(TrainOutput {
        params,
        centers,
        log,
    })
}

/// Embed one cloud for retrieval with a trained model (raw or unit space
/// per the variant).
pub fn embed_for_retrieval(
    cloud: &[Point3],
    params: &EncoderParams,
    config: &LossConfig,
) -> Result<Vec<f64>, EncoderError> {
    let cache = encode(cloud, params)?;
    retrieval_embedding(&cache.feature, config)
}

/// Predicted class of one cloud (argmax logit, lowest index on ties).
pub fn predict_class(cloud: &[Point3], params: &EncoderParams) -> Result<usize, EncoderError> {
    let cache = encode(cloud, params)?;
    let logits = classify(&cache.feature, params);
    let mut best = 0;
    for (i, &l) in logits.iter().enumerate() {
        if l > logits[best] {
            best = i;
        }
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::{Chain, CurveNetwork, Stroke};
    use crate::metric_learning::losses::Variant;

    fn tiny_dims(classes: usize) -> EncoderDims {
        EncoderDims {
            input_points: 16,
            hidden1: 8,
            hidden2: 12,
            embed: 12,
            classes,
            recon_hidden: 16,
            recon_points: 8,
        }
    }

    /// A crude parametric dataset: boxes of per-class proportions with
    /// wireframe sketches, enough signal for loss curves to move.
    fn toy_dataset(classes: usize, per_class: usize, seed: u64) -> TrainDataset {
        let mut rng = RngStream::new(seed);
        let mut pairs = Vec::new();
        for class in 0..classes {
            let aspect = 0.3 + 0.35 * class as f64;
            for _ in 0..per_class {
                let h = aspect + rng.uniform_in(-0.05, 0.05);
                let w = 1.0;
                let d = 0.5 + 0.1 * class as f64 + rng.uniform_in(-0.04, 0.04);
                let v = |x: f64, y: f64, z: f64| Point3::new(x * w, y * h, z * d);
                let corners = [
                    v(0.0, 0.0, 0.0),
                    v(1.0, 0.0, 0.0),
                    v(1.0, 1.0, 0.0),
                    v(0.0, 1.0, 0.0),
                    v(0.0, 0.0, 1.0),
                    v(1.0, 0.0, 1.0),
                    v(1.0, 1.0, 1.0),
                    v(0.0, 1.0, 1.0),
                ];
                let loop_bottom =
                    vec![corners[0], corners[1], corners[2], corners[3], corners[0]];
                let loop_top = vec![corners[4], corners[5], corners[6], corners[7], corners[4]];
                let strokes = vec![
                    Stroke::new(loop_bottom.clone()).unwrap(),
                    Stroke::new(loop_top.clone()).unwrap(),
                    Stroke::new(vec![corners[0], corners[4]]).unwrap(),
                    Stroke::new(vec![corners[2], corners[6]]).unwrap(),
                ];
                let sketch = Sketch {
                    strokes,
                    abstraction: 0.0,
                    seed: 0,
                    source_id: format!("toy-{class}"),
                };
                let mesh = TriMesh::new(
                    corners.to_vec(),
                    vec![
                        [0, 1, 2],
                        [0, 2, 3],
                        [4, 5, 6],
                        [4, 6, 7],
                        [0, 1, 5],
                        [0, 5, 4],
                        [2, 3, 7],
                        [2, 7, 6],
                    ],
                )
                .unwrap();
                let network = CurveNetwork::from_chains(vec![
                    Chain::new(loop_bottom).unwrap(),
                    Chain::new(loop_top).unwrap(),
                ])
                .unwrap();
                let polylines: Vec<&[Point3]> = network
                    .chains()
                    .iter()
                    .map(|c| c.vertices())
                    .collect();
                let target = crate::sampling::sample_polylines(&polylines, 8)
                    .unwrap()
                    .points;
                pairs.push(TrainPair {
                    class,
                    sketch,
                    mesh,
                    recon_target: target,
                });
            }
        }
        TrainDataset {
            pairs,
            num_classes: classes,
        }
    }

    fn tiny_config(classes: usize, epochs: usize, seed: u64) -> TrainConfig {
        let mut config = TrainConfig::new(
            tiny_dims(classes),
            LossConfig::for_variant(Variant::ClTl),
            epochs,
            seed,
        );
        config.batch_classes = classes.min(3);
        config.sampling = SamplingConfig {
            dense_count: 64,
            sparse_count: 16,
            mode: crate::sampling::SampleMode::Random,
        };
        config
    }

    #[test]
    fn zero_learning_rate_freezes_parameters() {
        let dataset = toy_dataset(3, 3, 5);
        let mut config = tiny_config(3, 1, 42);
        config.lr = 0.0;
        let out = train(&dataset, None, &config).unwrap();
        let mut rng = RngStream::new(42).derive_str("init");
        let fresh = EncoderParams::init(config.dims, &mut rng);
        assert_eq!(out.params, fresh, "lr = 0 leaves the init untouched");
    }

    #[test]
    fn training_is_bit_deterministic() {
        let dataset = toy_dataset(3, 3, 6);
        let config = tiny_config(3, 2, 77);
        let a = train(&dataset, Some(&dataset), &config).unwrap();
        let b = train(&dataset, Some(&dataset), &config).unwrap();
        assert_eq!(a.params, b.params);
        assert_eq!(a.centers, b.centers);
        assert_eq!(a.log.len(), b.log.len());
        for (ra, rb) in a.log.iter().zip(&b.log) {
            assert_eq!(ra.total, rb.total);
        }
        let mut other = config.clone();
        other.seed = 78;
        let c = train(&dataset, None, &other).unwrap();
        assert!(c.params != a.params, "a new seed retrains differently");
    }

    #[test]
    fn loss_decreases_early_on_most_seeds() {
        let dataset = toy_dataset(3, 4, 7);
        let mut wins = 0;
        for seed in [1u64, 2, 3, 4, 5] {
            let config = tiny_config(3, 5, seed);
            let out = train(&dataset, None, &config).unwrap();
            let first = out.log.first().unwrap().total;
            let last = out.log.last().unwrap().total;
            if last < first {
                wins += 1;
            }
        }
        assert!(wins >= 4, "loss fell on only {wins}/5 seeds");
    }

    #[test]
    fn centers_move_only_under_center_variants() {
        let dataset = toy_dataset(3, 3, 8);
        let mut config = tiny_config(3, 2, 11);
        config.loss = LossConfig::for_variant(Variant::ClTl);
        let out_tl = train(&dataset, None, &config).unwrap();
        let mut centers_rng = RngStream::new(11).derive_str("centers");
        let fresh = ClassCenters::init(config.dims.classes, config.dims.embed, &mut centers_rng);
        assert_eq!(out_tl.centers, fresh, "TL variant never touches centers");

        config.loss = LossConfig::for_variant(Variant::ClTcl);
        config.loss.m_tcl = 5.0; // activate the hinge at toy scale
        let out_tcl = train(&dataset, None, &config).unwrap();
        assert!(out_tcl.centers != fresh, "active TCL hinge moves centers");
    }

    #[test]
    fn dataset_smaller_than_one_batch_errors() {
        let dataset = toy_dataset(2, 1, 9);
        let mut config = tiny_config(2, 1, 1);
        config.batch_classes = 3;
        match train(&dataset, None, &config) {
            Err(EncoderError::DatasetTooSmall { pairs, needed }) => {
                assert_eq!((pairs, needed), (2, 3));
            }
            other => panic!("expected DatasetTooSmall, got {other:?}"),
        }
    }

    #[test]
    fn validation_metrics_recorded_each_epoch() {
        let dataset = toy_dataset(3, 3, 10);
        let config = tiny_config(3, 2, 13);
        let out = train(&dataset, Some(&dataset), &config).unwrap();
        assert_eq!(out.log.len(), 2);
        for record in &out.log {
            let val = record.val.as_ref().expect("validation attached");
            assert!(val.map > 0.0 && val.map <= 1.0);
        }
        let line = serde_json::to_string(&out.log[0]).unwrap();
        assert!(line.contains("\"epoch\":0") && line.contains("\"map\""));
    }
}
