//! The encoder network: per-point MLP, max pool, embedding head,
//! classifier, and reconstruction branch.

use super::EncoderError;
use crate::geom::Point3;
use crate::rng::RngStream;

/// Dense matrix, row-major; row index = output neuron.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    /// Uniform init in ±√(6/(fan_in+fan_out)).
    pub fn glorot(rows: usize, cols: usize, rng: &mut RngStream) -> Self {
        let limit = (6.0 / (rows + cols) as f64).sqrt();
        let data = (0..rows * cols)
            .map(|_| rng.uniform_in(-limit, limit))
            .collect();
        Matrix { rows, cols, data }
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    /// y = W x + b
    pub fn affine(&self, x: &[f64], b: &[f64]) -> Vec<f64> {
        debug_assert_eq!(x.len(), self.cols);
        debug_assert_eq!(b.len(), self.rows);
        (0..self.rows)
            .map(|i| {
                let row = self.row(i);
                let mut acc = b[i];
                for (w, xi) in row.iter().zip(x) {
                    acc += w * xi;
                }
                acc
            })
            .collect()
    }

    /// x = Wᵀ y (used to push gradients backward through an affine layer).
    pub fn matvec_t(&self, y: &[f64]) -> Vec<f64> {
        debug_assert_eq!(y.len(), self.rows);
        let mut out = vec![0.0; self.cols];
        for (i, &yi) in y.iter().enumerate() {
            if yi == 0.0 {
                continue;
            }
            for (o, w) in out.iter_mut().zip(self.row(i)) {
                *o += w * yi;
            }
        }
        out
    }

    /// W += scale · y xᵀ
    pub fn add_outer(&mut self, y: &[f64], x: &[f64], scale: f64) {
        debug_assert_eq!(y.len(), self.rows);
        debug_assert_eq!(x.len(), self.cols);
        for (i, &yi) in y.iter().enumerate() {
            let s = scale * yi;
            if s == 0.0 {
                continue;
            }
            let row = &mut self.data[i * self.cols..(i + 1) * self.cols];
            for (w, xi) in row.iter_mut().zip(x) {
                *w += s * xi;
            }
        }
    }
}

/// Layer sizes. `input_points` is the exact cloud cardinality the encoder
/// accepts; `recon_points` is the reconstruction cardinality M.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EncoderDims {
    pub input_points: usize,
    pub hidden1: usize,
    pub hidden2: usize,
    pub embed: usize,
    pub classes: usize,
    pub recon_hidden: usize,
    pub recon_points: usize,
}

impl EncoderDims {
    /// The full-size configuration: 3→64→128 per point, 512-dim
    /// embedding, 1024-wide reconstruction hidden layer, 256
    /// reconstruction points.
    pub fn standard(classes: usize, input_points: usize) -> Self {
        EncoderDims {
            input_points,
            hidden1: 64,
            hidden2: 128,
            embed: 512,
            classes,
            recon_hidden: 1024,
            recon_points: 256,
        }
    }
}

/// All trainable weights. Weights draw from the scaled uniform init;
/// biases start at zero.
#[derive(Debug, Clone, PartialEq)]
pub struct EncoderParams {
    pub dims: EncoderDims,
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
}

impl EncoderParams {
    pub fn init(dims: EncoderDims, rng: &mut RngStream) -> Self {
        EncoderParams {
            dims,
            w1: Matrix::glorot(dims.hidden1, 3, rng),
            b1: vec![0.0; dims.hidden1],
            w2: Matrix::glorot(dims.hidden2, dims.hidden1, rng),
            b2: vec![0.0; dims.hidden2],
            w3: Matrix::glorot(dims.embed, dims.hidden2, rng),
            b3: vec![0.0; dims.embed],
            wc: Matrix::glorot(dims.classes, dims.embed, rng),
            bc: vec![0.0; dims.classes],
            wr1: Matrix::glorot(dims.recon_hidden, dims.embed, rng),
            br1: vec![0.0; dims.recon_hidden],
            wr2: Matrix::glorot(3 * dims.recon_points, dims.recon_hidden, rng),
            br2: vec![0.0; 3 * dims.recon_points],
        }
    }
}

fn relu(v: &mut [f64]) {
    for x in v {
        if *x < 0.0 {
            *x = 0.0;
        }
    }
}

/// Activations retained for the backward pass.
#[derive(Debug, Clone)]
pub struct EncodeCache {
    /// Post-ReLU first-layer activations, one row per input point.
    pub a1: Vec<Vec<f64>>,
    /// Post-ReLU second-layer activations, one row per input point.
    pub a2: Vec<Vec<f64>>,
    /// Coordinate-wise max over points.
    pub pooled: Vec<f64>,
    /// Which point supplied each pooled coordinate (lowest index on ties).
    pub argmax: Vec<usize>,
    /// The raw embedding f.
    pub feature: Vec<f64>,
}

/// Per-point MLP → coordinate-wise max pool → affine embedding head.
pub fn encode(
    cloud: &[Point3],
    params: &EncoderParams,
) -> Result<EncodeCache, EncoderError> {
    let dims = &params.dims;
    if cloud.len() != dims.input_points {
        return Err(EncoderError::CardinalityMismatch {
            expected: dims.input_points,
            found: cloud.len(),
        });
    }
    let mut a1 = Vec::with_capacity(cloud.len());
    let mut a2 = Vec::with_capacity(cloud.len());
    for p in cloud {
        let mut h1 = params.w1.affine(&[p.x, p.y, p.z], &params.b1);
        relu(&mut h1);
        let mut h2 = params.w2.affine(&h1, &params.b2);
        relu(&mut h2);
        a1.push(h1);
        a2.push(h2);
    }
    let mut pooled = vec![f64::NEG_INFINITY; dims.hidden2];
    let mut argmax = vec![0usize; dims.hidden2];
    for (pi, row) in a2.iter().enumerate() {
        for (j, &v) in row.iter().enumerate() {
            if v > pooled[j] {
                pooled[j] = v;
                argmax[j] = pi;
            }
        }
    }
    let feature = params.w3.affine(&pooled, &params.b3);
    Ok(EncodeCache {
        a1,
        a2,
        pooled,
        argmax,
        feature,
    })
}

/// Class logits from a raw embedding.
pub fn classify(feature: &[f64], params: &EncoderParams) -> Vec<f64> {
    params.wc.affine(feature, &params.bc)
}

/// Reconstruction forward pass, keeping the hidden layer for backward.
#[derive(Debug, Clone)]
pub struct ReconCache {
    /// Post-ReLU hidden activations.
    pub hidden: Vec<f64>,
    pub points: Vec<Point3>,
}

/// Two affine layers with one ReLU; the output reshapes to M points.
pub fn reconstruct(feature: &[f64], params: &EncoderParams) -> ReconCache {
    let mut hidden = params.wr1.affine(feature, &params.br1);
    relu(&mut hidden);
    let flat = params.wr2.affine(&hidden, &params.br2);
    let points = flat
        .chunks_exact(3)
        .map(|c| Point3::new(c[0], c[1], c[2]))
        .collect();
    ReconCache { hidden, points }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_dims() -> EncoderDims {
        EncoderDims {
            input_points: 5,
            hidden1: 6,
            hidden2: 7,
            embed: 4,
            classes: 3,
            recon_hidden: 8,
            recon_points: 4,
        }
    }

    fn cloud(n: usize, rng: &mut RngStream) -> Vec<Point3> {
        (0..n)
            .map(|_| {
                Point3::new(
                    rng.uniform_in(-1.0, 1.0),
                    rng.uniform_in(-1.0, 1.0),
                    rng.uniform_in(-1.0, 1.0),
                )
            })
            .collect()
    }

    #[test]
    fn permuting_points_leaves_embedding_unchanged() {
        let mut rng = RngStream::new(61);
        let params = EncoderParams::init(tiny_dims(), &mut rng);
        let pts = cloud(5, &mut rng);
        let base = encode(&pts, &params).unwrap();
        let mut permuted = pts.clone();
        permuted.reverse();
        permuted.swap(1, 3);
        let other = encode(&permuted, &params).unwrap();
        assert_eq!(base.feature, other.feature, "max pool ignores point order");
        assert_eq!(base.pooled, other.pooled);
    }

    #[test]
    fn zero_parameters_give_zero_embedding() {
        let dims = tiny_dims();
        let mut params = EncoderParams::init(dims, &mut RngStream::new(0));
        for m in [
            &mut params.w1,
            &mut params.w2,
            &mut params.w3,
        ] {
            m.data.iter_mut().for_each(|w| *w = 0.0);
        }
        let pts = cloud(5, &mut RngStream::new(9));
        let cache = encode(&pts, &params).unwrap();
        assert!(cache.feature.iter().all(|&f| f == 0.0));
    }

    #[test]
    fn duplicated_points_pool_to_the_same_embedding() {
        let mut rng = RngStream::new(62);
        let mut dims = tiny_dims();
        let params = EncoderParams::init(dims, &mut rng);
        let pts = cloud(5, &mut rng);
        let base = encode(&pts, &params).unwrap();
        let mut doubled_params = params.clone();
        dims.input_points = 10;
        doubled_params.dims = dims;
        let doubled: Vec<Point3> = pts.iter().chain(&pts).copied().collect();
        let other = encode(&doubled, &doubled_params).unwrap();
        assert_eq!(base.feature, other.feature, "duplicates cannot raise a max");
    }

    #[test]
    fn wrong_cardinality_is_rejected() {
        let params = EncoderParams::init(tiny_dims(), &mut RngStream::new(1));
        let pts = cloud(4, &mut RngStream::new(2));
        match encode(&pts, &params) {
            Err(EncoderError::CardinalityMismatch { expected, found }) => {
                assert_eq!((expected, found), (5, 4));
            }
            other => panic!("expected CardinalityMismatch, got {other:?}"),
        }
    }

    #[test]
    fn pool_ties_route_to_lowest_index() {
        let mut rng = RngStream::new(63);
        let params = EncoderParams::init(tiny_dims(), &mut rng);
        let p = Point3::new(0.5, -0.25, 0.75);
        let pts = vec![p; 5];
        let cache = encode(&pts, &params).unwrap();
        assert!(cache.argmax.iter().all(|&i| i == 0), "all points tie");
    }

    #[test]
    fn reconstruction_shape_and_zero_case() {
        let dims = tiny_dims();
        let mut rng = RngStream::new(64);
        let params = EncoderParams::init(dims, &mut rng);
        let feature = vec![0.3; dims.embed];
        let rc = reconstruct(&feature, &params);
        assert_eq!(rc.points.len(), dims.recon_points);
        let mut zeroed = params.clone();
        zeroed.wr1.data.iter_mut().for_each(|w| *w = 0.0);
        zeroed.wr2.data.iter_mut().for_each(|w| *w = 0.0);
        let rc0 = reconstruct(&feature, &zeroed);
        assert!(
            rc0.points
                .iter()
                .all(|p| p.x == 0.0 && p.y == 0.0 && p.z == 0.0),
            "zero weights and biases collapse to the origin"
        );
    }

    #[test]
    fn glorot_limit_respected() {
        let mut rng = RngStream::new(65);
        let m = Matrix::glorot(30, 50, &mut rng);
        let limit = (6.0 / 80.0f64).sqrt();
        assert!(m.data.iter().all(|w| w.abs() <= limit));
        assert!(
            m.data.iter().any(|w| w.abs() > limit * 0.5),
            "draws should fill the range"
        );
    }
}
