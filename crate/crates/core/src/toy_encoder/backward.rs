//! Exact reverse-mode gradients for the full training objective.

use super::model::{classify, encode, reconstruct, EncodeCache, EncoderParams, Matrix, ReconCache};
use super::EncoderError;
use crate::geom::Point3;
use crate::metric_learning::embedding::{l2_normalize, ClassCenters};
use crate::metric_learning::grad::{
    grad_chamfer, grad_cross_entropy, grad_triplet, grad_triplet_center, normalize_backward,
};
use crate::metric_learning::losses::{
    chamfer, triplet_center_loss, triplet_hinge, LossBreakdown, LossConfig,
};
use crate::metric_learning::{mine_hard_negatives, MetricError};

/// Gradient (or momentum-velocity) storage with the same shapes as
/// [`EncoderParams`] plus the class centers.
#[derive(Debug, Clone, PartialEq)]
pub struct Grads {
    pub w1: Matrix,
    pub b1: Vec<f64>,
    pub w2: Matrix,
    pub b2: Vec<f64>,
    pub w3: Matrix,
    pub b3: Vec<f64>,
    pub wc: Matrix,
    pub bc: Vec<f64>,
    pub wr1: Matrix,
    pub br1: Vec<f64>,
    pub wr2: Matrix,
    pub br2: Vec<f64>,
    pub centers: Vec<Vec<f64>>,
}

impl Grads {
    pub fn zeros_like(params: &EncoderParams, centers: &ClassCenters) -> Self {
        let zero_m = |m: &Matrix| Matrix::zeros(m.rows, m.cols);
        Grads {
            w1: zero_m(&params.w1),
            b1: vec![0.0; params.b1.len()],
            w2: zero_m(&params.w2),
            b2: vec![0.0; params.b2.len()],
            w3: zero_m(&params.w3),
            b3: vec![0.0; params.b3.len()],
            wc: zero_m(&params.wc),
            bc: vec![0.0; params.bc.len()],
            wr1: zero_m(&params.wr1),
            br1: vec![0.0; params.br1.len()],
            wr2: zero_m(&params.wr2),
            br2: vec![0.0; params.br2.len()],
            centers: vec![vec![0.0; centers.dim()]; centers.num_classes()],
        }
    }
}

fn axpy(dst: &mut [f64], src: &[f64], scale: f64) {
    for (d, s) in dst.iter_mut().zip(src) {
        *d += scale * s;
    }
}

/// One batch element: a point cloud with its class, plus the
/// reconstruction target for sketch items when the variant reconstructs.
#[derive(Debug, Clone)]
pub struct BatchItem<'a> {
    pub cloud: &'a [Point3],
    pub label: usize,
    pub recon_target: Option<&'a [Point3]>,
}

/// Full forward and backward pass over one batch.
///
/// The loss value reproduces `metric_learning::total_loss` term for term
/// (identical accumulation order), and the returned gradients are exact
/// reverse-mode derivatives of it with respect to every weight, bias, and
/// class center. Max-pool gradients route to the argmax point, lowest
/// index on ties; hinges at zero contribute zero gradient.
pub fn forward_backward(
    params: &EncoderParams,
    centers: &ClassCenters,
    items: &[BatchItem],
    config: &LossConfig,
) -> Result<(LossBreakdown, Grads), EncoderError> {
    let n = items.len();
    if n == 0 {
        return Err(EncoderError::EmptyBatch);
    }
    let mut caches: Vec<EncodeCache> = Vec::with_capacity(n);
    for item in items {
        caches.push(encode(item.cloud, params)?);
    }
    let logits: Vec<Vec<f64>> = caches
        .iter()
        .map(|c| classify(&c.feature, params))
        .collect();

    let mut grads = Grads::zeros_like(params, centers);
    let mut g_feature: Vec<Vec<f64>> = vec![vec![0.0; params.dims.embed]; n];

    // Classification term: λ_cls · mean cross-entropy.
    let mut cls_sum = 0.0;
    let cls_scale = config.lambda_cls / n as f64;
    for (i, item) in items.iter().enumerate() {
        let (g_logits, ce) = grad_cross_entropy(&logits[i], item.label).map_err(metric)?;
        cls_sum += ce;
        grads.wc.add_outer(&g_logits, &caches[i].feature, cls_scale);
        axpy(&mut grads.bc, &g_logits, cls_scale);
        let back = params.wc.matvec_t(&g_logits);
        axpy(&mut g_feature[i], &back, cls_scale);
    }
    let cls = cls_sum / n as f64;

    // Triplet term on the unit sphere with hard-negative mining.
    let mut triplet = 0.0;
    let mut triplet_count = 0usize;
    if config.variant.uses_triplet() {
        let labels: Vec<usize> = items.iter().map(|it| it.label).collect();
        let unit: Vec<Vec<f64>> = caches
            .iter()
            .map(|c| l2_normalize(&c.feature))
            .collect::<Result<_, _>>()
            .map_err(metric)?;
        let triplets = mine_hard_negatives(&unit, &labels).map_err(metric)?;
        triplet_count = triplets.len();
        let scale = config.lambda_tl / triplets.len() as f64;
        let mut g_unit: Vec<Vec<f64>> = vec![vec![0.0; params.dims.embed]; n];
        let mut sum = 0.0;
        for t in &triplets {
            sum += triplet_hinge(&unit[t.anchor], &unit[t.positive], &unit[t.negative], config.m_tl);
            let (ga, gp, gn, _) =
                grad_triplet(&unit[t.anchor], &unit[t.positive], &unit[t.negative], config.m_tl);
            axpy(&mut g_unit[t.anchor], &ga, scale);
            axpy(&mut g_unit[t.positive], &gp, scale);
            axpy(&mut g_unit[t.negative], &gn, scale);
        }
        triplet = sum / triplets.len() as f64;
        for i in 0..n {
            if g_unit[i].iter().any(|&g| g != 0.0) {
                let back = normalize_backward(&caches[i].feature, &g_unit[i]).map_err(metric)?;
                axpy(&mut g_feature[i], &back, 1.0);
            }
        }
    }

    // Triplet-center term on raw features.
    let mut center = 0.0;
    if config.variant.uses_center() {
        let scale = config.lambda_tcl / n as f64;
        let mut sum = 0.0;
        for (i, item) in items.iter().enumerate() {
            sum +=
                triplet_center_loss(&caches[i].feature, item.label, centers, config.m_tcl)
                    .map_err(metric)?;
            let (gf, gc, _) =
                grad_triplet_center(&caches[i].feature, item.label, centers, config.m_tcl)
                    .map_err(metric)?;
            axpy(&mut g_feature[i], &gf, scale);
            for (dst, src) in grads.centers.iter_mut().zip(&gc) {
                axpy(dst, src, scale);
            }
        }
        center = sum / n as f64;
    }

    // Reconstruction term: Chamfer against the prepared-network samples.
    let mut reconstruction = 0.0;
    if config.variant.uses_reconstruction() {
        let with_targets: Vec<usize> = (0..n)
            .filter(|&i| items[i].recon_target.is_some())
            .collect();
        if with_targets.is_empty() {
            return Err(EncoderError::Metric(MetricError::MissingReconstructions {
                variant: config.variant.to_string(),
            }));
        }
        let scale = config.lambda_ch / with_targets.len() as f64;
        let mut sum = 0.0;
        for &i in &with_targets {
            let target = items[i].recon_target.unwrap();
            let rc: ReconCache = reconstruct(&caches[i].feature, params);
            sum += chamfer(&rc.points, target).map_err(metric)?;
            let (g_pred, _, _) = grad_chamfer(&rc.points, target).map_err(metric)?;
            let mut g_flat = Vec::with_capacity(3 * g_pred.len());
            for g in &g_pred {
                g_flat.extend_from_slice(&[g.x, g.y, g.z]);
            }
            grads.wr2.add_outer(&g_flat, &rc.hidden, scale);
            axpy(&mut grads.br2, &g_flat, scale);
            let mut g_hidden = params.wr2.matvec_t(&g_flat);
            for (g, &h) in g_hidden.iter_mut().zip(&rc.hidden) {
                if h <= 0.0 {
                    *g = 0.0;
                }
            }
            grads.wr1.add_outer(&g_hidden, &caches[i].feature, scale);
            axpy(&mut grads.br1, &g_hidden, scale);
            let back = params.wr1.matvec_t(&g_hidden);
            axpy(&mut g_feature[i], &back, scale);
        }
        reconstruction = sum / with_targets.len() as f64;
    }

    // Push every item's accumulated feature gradient through the encoder.
    for (i, item) in items.iter().enumerate() {
        backward_encoder(params, &caches[i], item.cloud, &g_feature[i], &mut grads);
    }

    let total = config.lambda_cls * cls
        + config.lambda_tl * triplet
        + config.lambda_tcl * center
        + config.lambda_ch * reconstruction;
    Ok((
        LossBreakdown {
            cls,
            triplet,
            center,
            reconstruction,
            total,
            triplet_count,
        },
        grads,
    ))
}

fn metric(e: MetricError) -> EncoderError {
    EncoderError::Metric(e)
}

/// Reverse through embed-affine → max pool → per-point MLP.
fn backward_encoder(
    params: &EncoderParams,
    cache: &EncodeCache,
    cloud: &[Point3],
    g_feature: &[f64],
    grads: &mut Grads,
) {
    if g_feature.iter().all(|&g| g == 0.0) {
        return;
    }
    grads.w3.add_outer(g_feature, &cache.pooled, 1.0);
    axpy(&mut grads.b3, g_feature, 1.0);
    let g_pooled = params.w3.matvec_t(g_feature);

    // Route each pooled coordinate's gradient to its argmax point.
    let n_points = cloud.len();
    let h2 = cache.pooled.len();
    let mut g_a2: Vec<Vec<f64>> = vec![Vec::new(); n_points];
    for j in 0..h2 {
        if g_pooled[j] != 0.0 {
            let pi = cache.argmax[j];
            if g_a2[pi].is_empty() {
                g_a2[pi] = vec![0.0; h2];
            }
            g_a2[pi][j] += g_pooled[j];
        }
    }
    for (pi, g2) in g_a2.iter_mut().enumerate() {
        if g2.is_empty() {
            continue;
        }
        // ReLU mask for layer 2.
        for (g, &a) in g2.iter_mut().zip(&cache.a2[pi]) {
            if a <= 0.0 {
                *g = 0.0;
            }
        }
        grads.w2.add_outer(g2, &cache.a1[pi], 1.0);
        axpy(&mut grads.b2, g2, 1.0);
        let mut g1 = params.w2.matvec_t(g2);
        for (g, &a) in g1.iter_mut().zip(&cache.a1[pi]) {
            if a <= 0.0 {
                *g = 0.0;
            }
        }
        let p = cloud[pi];
        grads.w1.add_outer(&g1, &[p.x, p.y, p.z], 1.0);
        axpy(&mut grads.b1, &g1, 1.0);
    }
}
