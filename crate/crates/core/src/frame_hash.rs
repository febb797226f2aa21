//! Per-frame DCT hashes used as the time series for synchronization.
//!
//! Each frame is reduced to the two lowest AC coefficients of its orthonormal
//! type-II DCT: the first horizontal frequency `(0, 1)` followed by the first
//! vertical frequency `(1, 0)`. Coefficients are indexed `(row frequency,
//! column frequency)`, so `(0, 1)` responds to variation along a row.

use std::f64::consts::PI;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::frame::Frame;
use crate::video::VideoTensor;

/// Orthonormal DCT-II basis for length `n`: `basis[k * n + x]`.
///
/// Symmetric pairs are filled from one half so that `b[k][n-1-x] == ±b[k][x]`
/// holds exactly, which makes AC responses of constant or mirrored inputs
/// cancel without rounding residue.
fn dct_basis(n: usize) -> Vec<f64> {
    let mut basis = vec![0.0; n * n];
    for k in 0..n {
        let scale = if k == 0 { (1.0 / n as f64).sqrt() } else { (2.0 / n as f64).sqrt() };
        let odd = k % 2 == 1;
        for x in 0..n.div_ceil(2) {
            let mirror = n - 1 - x;
            let value = if odd && x == mirror {
                0.0
            } else {
                scale * (PI * (2 * x + 1) as f64 * k as f64 / (2 * n) as f64).cos()
            };
            basis[k * n + x] = value;
            basis[k * n + mirror] = if odd { -value } else { value };
        }
    }
    basis
}

/// Two-dimensional orthonormal DCT-II.
pub fn dct2(frame: &Frame) -> Result<Frame> {
    let (h, w) = frame.dims();
    if h < 2 || w < 2 {
        return Err(Error::DegenerateFrame { height: h, width: w });
    }
    let bh = dct_basis(h);
    let bw = dct_basis(w);
    // rows first: tmp[r][l] = sum_c f[r][c] * bw[l][c]
    let mut tmp = vec![0.0; h * w];
    for r in 0..h {
        let row = &frame.data()[r * w..(r + 1) * w];
        for l in 0..w {
            tmp[r * w + l] = row.iter().zip(&bw[l * w..(l + 1) * w]).map(|(a, b)| a * b).sum();
        }
    }
    let mut out = vec![0.0; h * w];
    for k in 0..h {
        for l in 0..w {
            out[k * w + l] = (0..h).map(|r| bh[k * h + r] * tmp[r * w + l]).sum();
        }
    }
    Ok(Frame::new(h, w, out))
}

/// Inverse of [`dct2`] (orthonormal DCT-III).
pub fn idct2(coeffs: &Frame) -> Result<Frame> {
    let (h, w) = coeffs.dims();
    if h < 2 || w < 2 {
        return Err(Error::DegenerateFrame { height: h, width: w });
    }
    let bh = dct_basis(h);
    let bw = dct_basis(w);
    let mut tmp = vec![0.0; h * w];
    for k in 0..h {
        for c in 0..w {
            tmp[k * w + c] = (0..w).map(|l| coeffs.get(k, l) * bw[l * w + c]).sum();
        }
    }
    let mut out = vec![0.0; h * w];
    for r in 0..h {
        for c in 0..w {
            out[r * w + c] = (0..h).map(|k| bh[k * h + r] * tmp[k * w + c]).sum();
        }
    }
    Ok(Frame::new(h, w, out))
}

/// Projection of `values` onto the first (odd) DCT basis vector, summing
/// mirrored pairs first so antisymmetric cancellation is exact.
fn first_ac(values: &[f64], basis: &[f64]) -> f64 {
    let n = values.len();
    (0..n / 2).map(|x| (values[x] - values[n - 1 - x]) * basis[n + x]).sum()
}

/// The `(DCT(0,1), DCT(1,0))` pair of one frame.
pub fn frame_hash(frame: &Frame) -> Result<[f64; 2]> {
    let (h, w) = frame.dims();
    if h < 2 || w < 2 {
        return Err(Error::DegenerateFrame { height: h, width: w });
    }
    let bh = dct_basis(h);
    let bw = dct_basis(w);
    let dc_h = bh[0];
    let dc_w = bw[0];
    let data = frame.data();
    let mut col_sums = vec![0.0; w];
    let mut row_sums = vec![0.0; h];
    for r in 0..h {
        let row = &data[r * w..(r + 1) * w];
        for (acc, &v) in col_sums.iter_mut().zip(row) {
            *acc += v;
        }
        row_sums[r] = row.iter().sum();
    }
    let horizontal = dc_h * first_ac(&col_sums, &bw);
    let vertical = dc_w * first_ac(&row_sums, &bh);
    Ok([horizontal, vertical])
}

/// Per-frame hash time series of a video.
#[derive(Clone, Debug, PartialEq)]
pub struct FrameHashSeries {
    coeffs: Vec<[f64; 2]>,
}

impl FrameHashSeries {
    pub fn new(coeffs: Vec<[f64; 2]>) -> Self {
        FrameHashSeries { coeffs }
    }

    /// Rebuilds a series from its flattened `[h0, v0, h1, v1, ...]` layout.
    pub fn from_flat(flat: &[f64]) -> Result<Self> {
        if !flat.len().is_multiple_of(2) {
            return Err(Error::LengthMismatch(flat.len(), flat.len() + 1));
        }
        Ok(FrameHashSeries { coeffs: flat.chunks_exact(2).map(|c| [c[0], c[1]]).collect() })
    }

    pub fn coeffs(&self) -> &[[f64; 2]] {
        &self.coeffs
    }

    pub fn frame_count(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn flatten(&self) -> Vec<f64> {
        self.coeffs.iter().flatten().copied().collect()
    }
}

pub fn extract_frame_hashes(v: &VideoTensor) -> Result<FrameHashSeries> {
    let coeffs = v.frames().par_iter().map(frame_hash).collect::<Result<Vec<_>>>()?;
    Ok(FrameHashSeries { coeffs })
}
