//! Analytic gradients of the loss terms.
//!
//! Each function mirrors one loss in [`super::losses`] and returns the
//! loss value alongside exact gradients with respect to every input. The
//! hinge losses use the subgradient 0 at the kink; the Chamfer gradient
//! differentiates through the (almost-everywhere unique) nearest-neighbor
//! assignment with ties to the lowest index, matching the forward pass.

use super::embedding::{sq_dist, ClassCenters};
use super::MetricError;
use crate::geom::Point3;

/// Softmax cross-entropy and its gradient with respect to the logits:
/// softmax(logits) minus the one-hot label.
pub fn grad_cross_entropy(logits: &[f64], label: usize) -> Result<(Vec<f64>, f64), MetricError> {
    if label >= logits.len() {
        return Err(MetricError::LabelOutOfRange {
            label,
            classes: logits.len(),
        });
    }
    let m = logits.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b));
    let exps: Vec<f64> = logits.iter().map(|&l| (l - m).exp()).collect();
    let z: f64 = exps.iter().sum();
    let loss = m + z.ln() - logits[label];
    let mut grad: Vec<f64> = exps.iter().map(|e| e / z).collect();
    grad[label] -= 1.0;
    Ok((grad, loss))
}

/// Triplet hinge value and gradients for (anchor, positive, negative).
/// Inactive hinges return zero gradients.
pub fn grad_triplet(
    anchor: &[f64],
    positive: &[f64],
    negative: &[f64],
    margin: f64,
) -> (Vec<f64>, Vec<f64>, Vec<f64>, f64) {
    let d = anchor.len();
    let d_pos = sq_dist(anchor, positive);
    let d_neg = sq_dist(anchor, negative);
    let loss = (d_pos - d_neg + margin).max(0.0);
    if loss <= 0.0 {
        return (vec![0.0; d], vec![0.0; d], vec![0.0; d], 0.0);
    }
    let mut ga = Vec::with_capacity(d);
    let mut gp = Vec::with_capacity(d);
    let mut gn = Vec::with_capacity(d);
    for i in 0..d {
        ga.push(2.0 * (negative[i] - positive[i]));
        gp.push(-2.0 * (anchor[i] - positive[i]));
        gn.push(2.0 * (anchor[i] - negative[i]));
    }
    (ga, gp, gn, loss)
}

/// Triplet-center loss with gradients for the feature and for every
/// center (rows not involved stay zero).
pub fn grad_triplet_center(
    feature: &[f64],
    label: usize,
    centers: &ClassCenters,
    margin: f64,
) -> Result<(Vec<f64>, Vec<Vec<f64>>, f64), MetricError> {
    let k = centers.num_classes();
    if k < 2 {
        return Err(MetricError::TooFewClasses { needed: 2, found: k });
    }
    if label >= k {
        return Err(MetricError::LabelOutOfRange { label, classes: k });
    }
    let dim = feature.len();
    if centers.dim() != dim {
        return Err(MetricError::DimensionMismatch {
            what: "feature vs center",
            expected: centers.dim(),
            found: dim,
        });
    }
    let d_own = sq_dist(feature, centers.center(label));
    let mut nearest = usize::MAX;
    let mut d_other = f64::INFINITY;
    for j in 0..k {
        if j != label {
            let d = sq_dist(feature, centers.center(j));
            if d < d_other {
                d_other = d;
                nearest = j;
            }
        }
    }
    let loss = (d_own - d_other + margin).max(0.0);
    let mut gf = vec![0.0; dim];
    let mut gc = vec![vec![0.0; dim]; k];
    if loss > 0.0 {
        let own = centers.center(label);
        let other = centers.center(nearest);
        for i in 0..dim {
            gf[i] = 2.0 * (feature[i] - own[i]) - 2.0 * (feature[i] - other[i]);
            gc[label][i] = -2.0 * (feature[i] - own[i]);
            gc[nearest][i] = 2.0 * (feature[i] - other[i]);
        }
    }
    Ok((gf, gc, loss))
}

/// Symmetric Chamfer distance with gradients for both clouds.
pub fn grad_chamfer(
    p: &[Point3],
    q: &[Point3],
) -> Result<(Vec<Point3>, Vec<Point3>, f64), MetricError> {
    if p.is_empty() || q.is_empty() {
        return Err(MetricError::EmptyCloud);
    }
    let zero = Point3::new(0.0, 0.0, 0.0);
    let mut gp = vec![zero; p.len()];
    let mut gq = vec![zero; q.len()];
    let mut loss = 0.0;
    let wp = 1.0 / p.len() as f64;
    for (i, a) in p.iter().enumerate() {
        let (j, d) = nearest(*a, q);
        loss += wp * d;
        let diff = a.sub(q[j]).scale(2.0 * wp);
        gp[i] = gp[i].add(diff);
        gq[j] = gq[j].sub(diff);
    }
    let wq = 1.0 / q.len() as f64;
    for (j, b) in q.iter().enumerate() {
        let (i, d) = nearest(*b, p);
        loss += wq * d;
        let diff = b.sub(p[i]).scale(2.0 * wq);
        gq[j] = gq[j].add(diff);
        gp[i] = gp[i].sub(diff);
    }
    Ok((gp, gq, loss))
}

fn nearest(a: Point3, cloud: &[Point3]) -> (usize, f64) {
    let mut best_i = 0;
    let mut best = f64::INFINITY;
    for (i, b) in cloud.iter().enumerate() {
        let d = a.dist_sq(*b);
        if d < best {
            best = d;
            best_i = i;
        }
    }
    (best_i, best)
}

/// Pull a gradient on the unit-normalized vector back to the raw vector:
/// g_raw = (g − f̂ (f̂ · g)) / ‖f‖.
pub fn normalize_backward(raw: &[f64], grad_on_unit: &[f64]) -> Result<Vec<f64>, MetricError> {
    let norm = raw.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm == 0.0 || !norm.is_finite() {
        return Err(MetricError::ZeroNorm { norm });
    }
    let unit: Vec<f64> = raw.iter().map(|x| x / norm).collect();
    let along: f64 = unit.iter().zip(grad_on_unit).map(|(u, g)| u * g).sum();
    Ok(unit
        .iter()
        .zip(grad_on_unit)
        .map(|(u, g)| (g - u * along) / norm)
        .collect())
}
