//! Loss terms and their weighted combination.

use super::batch::mine_hard_negatives;
use super::embedding::{l2_normalize, sq_dist, ClassCenters, Embedding};
use super::MetricError;
use crate::geom::Point3;
use serde::{Deserialize, Serialize};

/// Which loss terms participate in training.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Variant {
    #[serde(rename = "cl")]
    Cl,
    #[serde(rename = "cl+tl")]
    ClTl,
    #[serde(rename = "cl+tcl")]
    ClTcl,
    #[serde(rename = "cl+tl+rec")]
    ClTlRec,
    #[serde(rename = "cl+tcl+rec")]
    ClTclRec,
}

impl Variant {
    pub fn uses_triplet(&self) -> bool {
        matches!(self, Variant::ClTl | Variant::ClTlRec)
    }

    pub fn uses_center(&self) -> bool {
        matches!(self, Variant::ClTcl | Variant::ClTclRec)
    }

    pub fn uses_reconstruction(&self) -> bool {
        matches!(self, Variant::ClTlRec | Variant::ClTclRec)
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            Variant::Cl => "cl",
            Variant::ClTl => "cl+tl",
            Variant::ClTcl => "cl+tcl",
            Variant::ClTlRec => "cl+tl+rec",
            Variant::ClTclRec => "cl+tcl+rec",
        }
    }

    pub fn parse(text: &str) -> Result<Self, MetricError> {
        match text {
            "cl" => Ok(Variant::Cl),
            "cl+tl" => Ok(Variant::ClTl),
            "cl+tcl" => Ok(Variant::ClTcl),
            "cl+tl+rec" => Ok(Variant::ClTlRec),
            "cl+tcl+rec" => Ok(Variant::ClTclRec),
            other => Err(MetricError::UnknownVariant(other.to_string())),
        }
    }

    pub fn all() -> [Variant; 5] {
        [
            Variant::Cl,
            Variant::ClTl,
            Variant::ClTcl,
            Variant::ClTlRec,
            Variant::ClTclRec,
        ]
    }
}

impl std::fmt::Display for Variant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Loss weights and margins.
///
/// The triplet margin applies on the unit sphere; the center margin
/// applies in raw feature space, where squared distances are unbounded.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossConfig {
    pub lambda_cls: f64,
    pub lambda_tl: f64,
    pub lambda_tcl: f64,
    pub lambda_ch: f64,
    pub m_tl: f64,
    pub m_tcl: f64,
    pub variant: Variant,
}

impl LossConfig {
    /// Defaults for a variant: λ_cls 1, λ_tl = λ_tcl = 0.1, margin 1.8 for
    /// the triplet path and 50 for the center path, and a reconstruction
    /// weight of 12 alongside the triplet loss or 8 alongside the center
    /// loss.
    pub fn for_variant(variant: Variant) -> Self {
        let lambda_ch = if variant.uses_center() { 8.0 } else { 12.0 };
        LossConfig {
            lambda_cls: 1.0,
            lambda_tl: 0.1,
            lambda_tcl: 0.1,
            lambda_ch,
            m_tl: 1.8,
            m_tcl: 50.0,
            variant,
        }
    }
}

impl Default for LossConfig {
    fn default() -> Self {
        LossConfig::for_variant(Variant::ClTl)
    }
}

/// Unchecked triplet hinge on plain vectors; used internally and by the
/// gradient routines.
pub fn triplet_hinge(anchor: &[f64], positive: &[f64], negative: &[f64], margin: f64) -> f64 {
    let d_pos = sq_dist(anchor, positive);
    let d_neg = sq_dist(anchor, negative);
    (d_pos - d_neg + margin).max(0.0)
}

/// Triplet loss on unit-sphere embeddings: max(0, d_pos − d_neg + m) with
/// squared Euclidean distances. All three inputs must be normalized.
pub fn triplet_loss(
    anchor: &Embedding,
    positive: &Embedding,
    negative: &Embedding,
    m_tl: f64,
) -> Result<f64, MetricError> {
    anchor.check_unit()?;
    positive.check_unit()?;
    negative.check_unit()?;
    Ok(triplet_hinge(
        anchor.values(),
        positive.values(),
        negative.values(),
        m_tl,
    ))
}

/// Triplet-center loss on raw features: the feature is pulled toward its
/// own class center and pushed past the nearest competing center by the
/// margin. Ties for the nearest competitor break toward the lowest class
/// index.
pub fn triplet_center_loss(
    feature: &[f64],
    label: usize,
    centers: &ClassCenters,
    m_tcl: f64,
) -> Result<f64, MetricError> {
    let k = centers.num_classes();
    if k < 2 {
        return Err(MetricError::TooFewClasses { needed: 2, found: k });
    }
    if label >= k {
        return Err(MetricError::LabelOutOfRange { label, classes: k });
    }
    if centers.dim() != feature.len() {
        return Err(MetricError::DimensionMismatch {
            what: "feature vs center",
            expected: centers.dim(),
            found: feature.len(),
        });
    }
    let d_own = sq_dist(feature, centers.center(label));
    let mut d_other = f64::INFINITY;
    for j in 0..k {
        if j == label {
            continue;
        }
        let d = sq_dist(feature, centers.center(j));
        if d < d_other {
            d_other = d;
        }
    }
    Ok((d_own - d_other + m_tcl).max(0.0))
}

/// Symmetric Chamfer distance: the mean squared nearest-neighbor distance
/// from P into Q plus the same from Q into P.
pub fn chamfer(p: &[Point3], q: &[Point3]) -> Result<f64, MetricError> {
    if p.is_empty() || q.is_empty() {
        return Err(MetricError::EmptyCloud);
    }
    Ok(directed_mean_sq(p, q) + directed_mean_sq(q, p))
}

fn directed_mean_sq(from: &[Point3], to: &[Point3]) -> f64 {
    let mut sum = 0.0;
    for a in from {
        let mut best = f64::INFINITY;
        for b in to {
            let d = a.dist_sq(*b);
            if d < best {
                best = d;
            }
        }
        sum += best;
    }
    sum / from.len() as f64
}

/// Numerically stable softmax cross-entropy of one logit row against its
/// label: log-sum-exp(logits) − logits[label].
pub fn cross_entropy(logits: &[f64], label: usize) -> Result<f64, MetricError> {
    if label >= logits.len() {
        return Err(MetricError::LabelOutOfRange {
            label,
            classes: logits.len(),
        });
    }
    let m = logits.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b));
    let lse = m + logits.iter().map(|&l| (l - m).exp()).sum::<f64>().ln();
    Ok(lse - logits[label])
}

/// Per-term values of one total-loss evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LossBreakdown {
    pub cls: f64,
    pub triplet: f64,
    pub center: f64,
    pub reconstruction: f64,
    pub total: f64,
    /// Number of mined triplets the triplet mean ran over (0 when unused).
    pub triplet_count: usize,
}

/// Combine the configured loss terms over one batch.
///
/// `embeddings`, `labels`, and `logits` are parallel; embeddings are raw
/// encoder features. The triplet path normalizes them onto the unit
/// sphere, mines hard negatives in that space, and averages the hinge
/// over every mined triplet, active or not. The center path scores raw
/// features against `centers`. `recon_pairs` are (prediction, target)
/// point sets for the items that reconstruct — required non-empty exactly
/// when the variant includes reconstruction.
pub fn total_loss(
    embeddings: &[Vec<f64>],
    labels: &[usize],
    logits: &[Vec<f64>],
    recon_pairs: &[(Vec<Point3>, Vec<Point3>)],
    centers: &ClassCenters,
    config: &LossConfig,
) -> Result<LossBreakdown, MetricError> {
    let n = embeddings.len();
    if labels.len() != n {
        return Err(MetricError::DimensionMismatch {
            what: "labels",
            expected: n,
            found: labels.len(),
        });
    }
    if logits.len() != n {
        return Err(MetricError::DimensionMismatch {
            what: "logits",
            expected: n,
            found: logits.len(),
        });
    }
    if n == 0 {
        return Err(MetricError::DimensionMismatch {
            what: "batch",
            expected: 1,
            found: 0,
        });
    }

    let mut cls_sum = 0.0;
    for (row, &label) in logits.iter().zip(labels) {
        cls_sum += cross_entropy(row, label)?;
    }
    let cls = cls_sum / n as f64;

    let mut triplet = 0.0;
    let mut triplet_count = 0usize;
    if config.variant.uses_triplet() {
        let unit: Vec<Vec<f64>> = embeddings
            .iter()
            .map(|e| l2_normalize(e))
            .collect::<Result<_, _>>()?;
        let triplets = mine_hard_negatives(&unit, labels)?;
        triplet_count = triplets.len();
        let mut sum = 0.0;
        for t in &triplets {
            sum += triplet_hinge(
                &unit[t.anchor],
                &unit[t.positive],
                &unit[t.negative],
                config.m_tl,
            );
        }
        triplet = sum / triplets.len() as f64;
    }

    let mut center = 0.0;
    if config.variant.uses_center() {
        let mut sum = 0.0;
        for (f, &label) in embeddings.iter().zip(labels) {
            sum += triplet_center_loss(f, label, centers, config.m_tcl)?;
        }
        center = sum / n as f64;
    }

    let mut reconstruction = 0.0;
    if config.variant.uses_reconstruction() {
        if recon_pairs.is_empty() {
            return Err(MetricError::MissingReconstructions {
                variant: config.variant.to_string(),
            });
        }
        let mut sum = 0.0;
        for (pred, target) in recon_pairs {
            sum += chamfer(pred, target)?;
        }
        reconstruction = sum / recon_pairs.len() as f64;
    }

    let total = config.lambda_cls * cls
        + config.lambda_tl * triplet
        + config.lambda_tcl * center
        + config.lambda_ch * reconstruction;
    Ok(LossBreakdown {
        cls,
        triplet,
        center,
        reconstruction,
        total,
        triplet_count,
    })
}
