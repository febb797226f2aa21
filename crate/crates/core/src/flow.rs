//! Flow hashing: temporal averaging, optical flow and orientation histograms.
//!
//! A video is split into `segments` equal runs of `J = floor(len / segments)`
//! frames (trailing frames are discarded). Each run is averaged into one
//! representative image (a TIRI). Dense optical flow is estimated between
//! every pair of consecutive TIRIs with a Horn-Schunck solver, each flow field
//! is summarized by a magnitude-weighted histogram of flow orientations over
//! the full circle, and the histograms are concatenated in temporal order and
//! scaled to unit Euclidean norm.
//!
//! With the default 9 segments and 8 bins the hash has 8 * 8 = 64 entries.

use std::f64::consts::PI;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::frame::Frame;
use crate::video::VideoTensor;

/// Temporally averaged frames.
#[derive(Clone, Debug, PartialEq)]
pub struct TiriStack {
    pub images: Vec<Frame>,
    pub segment_length: usize,
}

/// Averages non-overlapping runs of `segment_length` frames.
pub fn frame_average(v: &VideoTensor, segment_length: usize) -> Result<TiriStack> {
    frame_average_strided(v, segment_length, segment_length, None)
}

/// Averages runs of `segment_length` frames starting every `stride` frames,
/// keeping at most `limit` images.
pub fn frame_average_strided(
    v: &VideoTensor,
    segment_length: usize,
    stride: usize,
    limit: Option<usize>,
) -> Result<TiriStack> {
    if segment_length == 0 || stride == 0 {
        return Err(Error::InvalidConfig("segment length and stride must be positive".into()));
    }
    let available = if v.len() < segment_length { 0 } else { (v.len() - segment_length) / stride + 1 };
    let count = limit.map_or(available, |l| l.min(available));
    if count < 2 {
        return Err(Error::VideoTooShort { needed: segment_length + stride, got: v.len() });
    }
    let (h, w) = (v.height(), v.width());
    let images = (0..count)
        .map(|s| {
            let mut acc = vec![0.0; h * w];
            for f in &v.frames()[s * stride..s * stride + segment_length] {
                for (a, &p) in acc.iter_mut().zip(f.data()) {
                    *a += p;
                }
            }
            let scale = segment_length as f64;
            Frame::new(h, w, acc.into_iter().map(|a| a / scale).collect())
        })
        .collect();
    Ok(TiriStack { images, segment_length })
}

/// Per-pixel displacement from one image to the next.
#[derive(Clone, Debug, PartialEq)]
pub struct FlowField {
    pub u: Frame,
    pub v: Frame,
}

impl FlowField {
    pub fn zeros(height: usize, width: usize) -> Self {
        FlowField { u: Frame::filled(height, width, 0.0), v: Frame::filled(height, width, 0.0) }
    }

    pub fn total_magnitude(&self) -> f64 {
        self.u.data().iter().zip(self.v.data()).map(|(u, v)| u.hypot(*v)).sum()
    }
}

/// Horn-Schunck solver settings.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FlowParams {
    /// Weight of the smoothness term, in squared 8-bit intensity units.
    pub lambda: f64,
    pub iterations: usize,
}

impl Default for FlowParams {
    fn default() -> Self {
        FlowParams { lambda: 15.0, iterations: 200 }
    }
}

/// Images are scaled to this range before solving so that `lambda` is
/// expressed against 8-bit gradients.
const INTENSITY_SCALE: f64 = 255.0;

/// Horn-Schunck optical flow from `a` to `b`.
///
/// Spatial gradients are central differences (border-replicated) of the mean
/// image `(a + b) / 2`, the temporal gradient is `b - a`. Starting from zero
/// flow, each Jacobi sweep sets
///
/// ```text
/// u = u_avg - Ix * (Ix u_avg + Iy v_avg + It) / (lambda + Ix^2 + Iy^2)
/// v = v_avg - Iy * (Ix u_avg + Iy v_avg + It) / (lambda + Ix^2 + Iy^2)
/// ```
///
/// where the averages use the 3x3 Horn-Schunck kernel (1/6 edge neighbours,
/// 1/12 corners).
pub fn optical_flow(a: &Frame, b: &Frame, params: &FlowParams) -> Result<FlowField> {
    if a.dims() != b.dims() {
        return Err(Error::DimensionMismatch(format!(
            "flow between {}x{} and {}x{} images",
            a.height(),
            a.width(),
            b.height(),
            b.width()
        )));
    }
    let (h, w) = a.dims();
    if h < 8 || w < 8 {
        return Err(Error::DimensionMismatch(format!("flow needs at least 8x8 images, got {h}x{w}")));
    }
    if !(params.lambda > 0.0) {
        return Err(Error::InvalidConfig("flow regularization must be positive".into()));
    }
    let mean = Frame::from_fn(h, w, |r, c| 0.5 * INTENSITY_SCALE * (a.get(r, c) + b.get(r, c)));
    let n = h * w;
    let mut ix = vec![0.0; n];
    let mut iy = vec![0.0; n];
    let mut it = vec![0.0; n];
    let mut denom = vec![0.0; n];
    for r in 0..h {
        for c in 0..w {
            let (ri, ci) = (r as isize, c as isize);
            let k = r * w + c;
            ix[k] = 0.5 * (mean.get_clamped(ri, ci + 1) - mean.get_clamped(ri, ci - 1));
            iy[k] = 0.5 * (mean.get_clamped(ri + 1, ci) - mean.get_clamped(ri - 1, ci));
            it[k] = INTENSITY_SCALE * (b.get(r, c) - a.get(r, c));
            denom[k] = params.lambda + ix[k] * ix[k] + iy[k] * iy[k];
        }
    }

    let mut u = Frame::filled(h, w, 0.0);
    let mut v = Frame::filled(h, w, 0.0);
    let mut u_next = u.clone();
    let mut v_next = v.clone();
    for _ in 0..params.iterations {
        for r in 0..h {
            for c in 0..w {
                let k = r * w + c;
                let u_avg = neighbourhood_mean(&u, r, c);
                let v_avg = neighbourhood_mean(&v, r, c);
                let residual = (ix[k] * u_avg + iy[k] * v_avg + it[k]) / denom[k];
                u_next.data_mut()[k] = u_avg - ix[k] * residual;
                v_next.data_mut()[k] = v_avg - iy[k] * residual;
            }
        }
        std::mem::swap(&mut u, &mut u_next);
        std::mem::swap(&mut v, &mut v_next);
    }
    Ok(FlowField { u, v })
}

#[inline]
fn neighbourhood_mean(f: &Frame, r: usize, c: usize) -> f64 {
    let (r, c) = (r as isize, c as isize);
    let edges = f.get_clamped(r - 1, c) + f.get_clamped(r + 1, c) + f.get_clamped(r, c - 1) + f.get_clamped(r, c + 1);
    let corners = f.get_clamped(r - 1, c - 1)
        + f.get_clamped(r - 1, c + 1)
        + f.get_clamped(r + 1, c - 1)
        + f.get_clamped(r + 1, c + 1);
    edges / 6.0 + corners / 12.0
}

/// Orientation bin of a flow vector over `[-pi, pi)`.
#[inline]
pub fn orientation_bin(u: f64, v: f64, bins: usize) -> usize {
    let theta = v.atan2(u);
    ((bins as f64 * (theta + PI) / (2.0 * PI)).floor() as usize).min(bins - 1)
}

/// Histogram of flow orientations where every pixel votes with its magnitude.
pub fn hoof(field: &FlowField, bins: usize) -> Result<Vec<f64>> {
    if bins < 2 {
        return Err(Error::InvalidConfig(format!("need at least 2 orientation bins, got {bins}")));
    }
    let mut hist = vec![0.0; bins];
    for (&u, &v) in field.u.data().iter().zip(field.v.data()) {
        let magnitude = u.hypot(v);
        if magnitude > 0.0 {
            hist[orientation_bin(u, v, bins)] += magnitude;
        }
    }
    Ok(hist)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FlowHashConfig {
    pub bins: usize,
    /// Number of TIRIs per video; the hash covers `segments - 1` transitions.
    pub segments: usize,
    /// Frames shared by consecutive segments (0 = non-overlapping).
    pub overlap: usize,
    pub flow: FlowParams,
}

impl Default for FlowHashConfig {
    fn default() -> Self {
        FlowHashConfig { bins: 8, segments: 9, overlap: 0, flow: FlowParams::default() }
    }
}

impl FlowHashConfig {
    pub fn hash_len(&self) -> usize {
        self.bins * (self.segments - 1)
    }

    pub fn validate(&self) -> Result<()> {
        if self.bins < 2 {
            return Err(Error::InvalidConfig("flow hash needs at least 2 bins".into()));
        }
        if self.segments < 2 {
            return Err(Error::InvalidConfig("flow hash needs at least 2 segments".into()));
        }
        if !(self.flow.lambda > 0.0) {
            return Err(Error::InvalidConfig("flow regularization must be positive".into()));
        }
        Ok(())
    }

    /// `(segment_length, stride)` for a video of `len` frames.
    pub fn segmentation(&self, len: usize) -> Result<(usize, usize)> {
        let s = self.segments;
        let segment_length = (len + (s - 1) * self.overlap) / s;
        let stride = segment_length.saturating_sub(self.overlap);
        if segment_length == 0 || stride == 0 {
            return Err(Error::VideoTooShort { needed: s + self.overlap, got: len });
        }
        Ok((segment_length, stride))
    }
}

/// Unit-norm concatenated orientation histograms.
#[derive(Clone, Debug, PartialEq)]
pub struct FlowHash {
    values: Vec<f64>,
    bins: usize,
}

impl FlowHash {
    pub fn new(values: Vec<f64>, bins: usize) -> Self {
        assert!(bins > 0 && values.len().is_multiple_of(bins), "flow hash length must be a multiple of the bin count");
        FlowHash { values, bins }
    }

    /// The all-zero stand-in for videos without any motion. Its Euclidean
    /// distance to every unit-norm hash is exactly 1.
    pub fn zero(bins: usize, transitions: usize) -> Self {
        FlowHash { values: vec![0.0; bins * transitions], bins }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn bins(&self) -> usize {
        self.bins
    }

    pub fn transitions(&self) -> usize {
        self.values.len() / self.bins
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|&v| v == 0.0)
    }

    pub fn norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

/// Unnormalized histograms, one per TIRI transition.
pub fn transition_histograms(v: &VideoTensor, cfg: &FlowHashConfig) -> Result<Vec<Vec<f64>>> {
    cfg.validate()?;
    let (segment_length, stride) = cfg.segmentation(v.len())?;
    let tiris = frame_average_strided(v, segment_length, stride, Some(cfg.segments))?;
    if tiris.images.len() < cfg.segments {
        return Err(Error::VideoTooShort { needed: cfg.segments * segment_length, got: v.len() });
    }
    tiris
        .images
        .par_windows(2)
        .map(|pair| hoof(&optical_flow(&pair[0], &pair[1], &cfg.flow)?, cfg.bins))
        .collect()
}

pub fn flow_hash(v: &VideoTensor, cfg: &FlowHashConfig) -> Result<FlowHash> {
    let mut values: Vec<f64> = transition_histograms(v, cfg)?.into_iter().flatten().collect();
    let norm = values.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm == 0.0 {
        return Err(Error::AllZeroFlow);
    }
    for x in &mut values {
        *x /= norm;
    }
    Ok(FlowHash { values, bins: cfg.bins })
}

/// Like [`flow_hash`], but static videos map to [`FlowHash::zero`].
pub fn flow_hash_or_zero(v: &VideoTensor, cfg: &FlowHashConfig) -> Result<FlowHash> {
    match flow_hash(v, cfg) {
        Err(Error::AllZeroFlow) => Ok(FlowHash::zero(cfg.bins, cfg.segments - 1)),
        other => other,
    }
}
