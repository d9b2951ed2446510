//! Binary model checkpoints.
//!
//! Layout (all integers little-endian u32, all floats little-endian f64):
//!
//! ```text
//! magic   8 bytes  "SKENC001"
//! dims    7 × u32  input_points, hidden1, hidden2, embed, classes,
//!                  recon_hidden, recon_points
//! blocks  f64 …    w1, b1, w2, b2, w3, b3, wc, bc, wr1, br1, wr2, br2,
//!                  row-major, sizes implied by the dims
//! centers 2 × u32  K, dim, then K·dim f64 row-major
//! ```
//!
//! Writing is deterministic: the same parameters always produce the same
//! bytes.

use super::model::{EncoderDims, EncoderParams, Matrix};
use super::EncoderError;
use crate::metric_learning::embedding::ClassCenters;
use std::path::Path;

const MAGIC: &[u8; 8] = b"SKENC001";

fn push_u32(buf: &mut Vec<u8>, v: usize) {
    buf.extend_from_slice(&(v as u32).to_le_bytes());
}

fn push_f64s(buf: &mut Vec<u8>, values: &[f64]) {
    for v in values {
        buf.extend_from_slice(&v.to_le_bytes());
    }
}

/// Serialize a model and its class centers.
pub fn checkpoint_bytes(params: &EncoderParams, centers: &ClassCenters) -> Vec<u8> {
    let d = &params.dims;
    let mut buf = Vec::new();
    buf.extend_from_slice(MAGIC);
    for v in [
        d.input_points,
        d.hidden1,
        d.hidden2,
        d.embed,
        d.classes,
        d.recon_hidden,
        d.recon_points,
    ] {
        push_u32(&mut buf, v);
    }
    for block in [
        &params.w1.data,
        &params.b1,
        &params.w2.data,
        &params.b2,
        &params.w3.data,
        &params.b3,
        &params.wc.data,
        &params.bc,
        &params.wr1.data,
        &params.br1,
        &params.wr2.data,
        &params.br2,
    ] {
        push_f64s(&mut buf, block);
    }
    push_u32(&mut buf, centers.num_classes());
    push_u32(&mut buf, centers.dim());
    for row in centers.rows() {
        push_f64s(&mut buf, row);
    }
    buf
}

pub fn save_checkpoint(
    path: &Path,
    params: &EncoderParams,
    centers: &ClassCenters,
) -> Result<(), EncoderError> {
    std::fs::write(path, checkpoint_bytes(params, centers)).map_err(|source| {
        EncoderError::File {
            path: path.display().to_string(),
            source,
        }
    })
}

struct Reader<'a> {
    data: &'a [u8],
    pos: usize,
    path: String,
}

impl<'a> Reader<'a> {
    fn bad(&self, message: &str) -> EncoderError {
        EncoderError::BadCheckpoint {
            path: self.path.clone(),
            message: message.to_string(),
        }
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8], EncoderError> {
        if self.pos + n > self.data.len() {
            return Err(self.bad("truncated"));
        }
        let slice = &self.data[self.pos..self.pos + n];
        self.pos += n;
        Ok(slice)
    }

    fn u32(&mut self) -> Result<usize, EncoderError> {
        let b = self.take(4)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]) as usize)
    }

    fn f64s(&mut self, count: usize) -> Result<Vec<f64>, EncoderError> {
        let b = self.take(count * 8)?;
        Ok(b.chunks_exact(8)
            .map(|c| f64::from_le_bytes([c[0], c[1], c[2], c[3], c[4], c[5], c[6], c[7]]))
            .collect())
    }
}

pub fn load_checkpoint(path: &Path) -> Result<(EncoderParams, ClassCenters), EncoderError> {
    let data = std::fs::read(path).map_err(|source| EncoderError::File {
        path: path.display().to_string(),
        source,
    })?;
    let mut r = Reader {
        data: &data,
        pos: 0,
        path: path.display().to_string(),
    };
    if r.take(8)? != MAGIC {
        return Err(r.bad("wrong magic bytes"));
    }
    let dims = EncoderDims {
        input_points: r.u32()?,
        hidden1: r.u32()?,
        hidden2: r.u32()?,
        embed: r.u32()?,
        classes: r.u32()?,
        recon_hidden: r.u32()?,
        recon_points: r.u32()?,
    };
    let matrix = |r: &mut Reader, rows: usize, cols: usize| -> Result<Matrix, EncoderError> {
        Ok(Matrix {
            rows,
            cols,
            data: r.f64s(rows * cols)?,
        })
    };
    let w1 = matrix(&mut r, dims.hidden1, 3)?;
    let b1 = r.f64s(dims.hidden1)?;
    let w2 = matrix(&mut r, dims.hidden2, dims.hidden1)?;
    let b2 = r.f64s(dims.hidden2)?;
    let w3 = matrix(&mut r, dims.embed, dims.hidden2)?;
    let b3 = r.f64s(dims.embed)?;
    let wc = matrix(&mut r, dims.classes, dims.embed)?;
    let bc = r.f64s(dims.classes)?;
    let wr1 = matrix(&mut r, dims.recon_hidden, dims.embed)?;
    let br1 = r.f64s(dims.recon_hidden)?;
    let wr2 = matrix(&mut r, 3 * dims.recon_points, dims.recon_hidden)?;
    let br2 = r.f64s(3 * dims.recon_points)?;
    let params = EncoderParams {
        dims,
        w1,
        b1,
        w2,
        b2,
        w3,
        b3,
        wc,
        bc,
        wr1,
        br1,
        wr2,
        br2,
    };
    let k = r.u32()?;
    let dim = r.u32()?;
    let mut rows = Vec::with_capacity(k);
    for _ in 0..k {
        rows.push(r.f64s(dim)?);
    }
    if r.pos != r.data.len() {
        return Err(r.bad("trailing bytes"));
    }
    let centers = ClassCenters::from_rows(rows)
        .map_err(|e| EncoderError::Metric(e))?;
    Ok((params, centers))
}
