//! Content-preserving attacks used to generate query videos.
//!
//! * spatial: rotate about the frame center, center-crop, resize back to the
//!   original size, then remap intensities linearly,
//! * temporal: drop a fixed fraction of frames at seeded random positions,
//! * spatio-temporal: spatial first, then temporal.
//!
//! Randomness comes from ChaCha8 seeded through `SeedableRng::seed_from_u64`.
//! Drop positions are the first `k` entries of a partial Fisher-Yates shuffle
//! of `0..len`, where each draw maps a 64-bit output `x` onto `0..bound` as
//! `(x * bound) >> 64`. Outputs for a given seed are therefore fixed.

use std::fmt;
use std::str::FromStr;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::frame::Frame;
use crate::video::VideoTensor;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum AttackKind {
    Spatial,
    Temporal,
    SpatioTemporal,
}

impl AttackKind {
    pub fn as_str(self) -> &'static str {
        match self {
            AttackKind::Spatial => "spatial",
            AttackKind::Temporal => "temporal",
            AttackKind::SpatioTemporal => "spatio-temporal",
        }
    }

    fn has_spatial(self) -> bool {
        matches!(self, AttackKind::Spatial | AttackKind::SpatioTemporal)
    }

    fn has_temporal(self) -> bool {
        matches!(self, AttackKind::Temporal | AttackKind::SpatioTemporal)
    }
}

impl fmt::Display for AttackKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for AttackKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "spatial" => Ok(AttackKind::Spatial),
            "temporal" => Ok(AttackKind::Temporal),
            "spatio-temporal" | "spatiotemporal" | "both" => Ok(AttackKind::SpatioTemporal),
            _ => Err(Error::InvalidAttack(format!("unknown attack kind {s:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct AttackSpec {
    pub kind: AttackKind,
    /// Counter-clockwise rotation in degrees.
    pub rotation_deg: f64,
    /// Fraction of each dimension kept by the center crop.
    pub crop_fraction: f64,
    pub intensity_src: [f64; 2],
    pub intensity_dst: [f64; 2],
    pub drop_fraction: f64,
    pub seed: u64,
}

impl AttackSpec {
    pub fn new(kind: AttackKind) -> Self {
        AttackSpec {
            kind,
            rotation_deg: 5.0,
            crop_fraction: 0.75,
            intensity_src: [0.2, 0.8],
            intensity_dst: [0.0, 1.0],
            drop_fraction: 0.3,
            seed: 0,
        }
    }

    /// A spec whose spatial stage leaves frames untouched.
    pub fn identity(kind: AttackKind) -> Self {
        AttackSpec {
            rotation_deg: 0.0,
            crop_fraction: 1.0,
            intensity_src: [0.0, 1.0],
            intensity_dst: [0.0, 1.0],
            drop_fraction: 0.0,
            ..AttackSpec::new(kind)
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.crop_fraction > 0.0 && self.crop_fraction <= 1.0) {
            return Err(Error::InvalidAttack(format!("crop fraction {} not in (0, 1]", self.crop_fraction)));
        }
        if !(0.0..1.0).contains(&self.drop_fraction) {
            return Err(Error::InvalidAttack(format!("drop fraction {} not in [0, 1)", self.drop_fraction)));
        }
        for (name, [lo, hi]) in [("source", self.intensity_src), ("target", self.intensity_dst)] {
            if !(lo < hi) {
                return Err(Error::InvalidAttack(format!("{name} intensity range [{lo}, {hi}] is empty")));
            }
        }
        if !self.rotation_deg.is_finite() {
            return Err(Error::InvalidAttack("rotation must be finite".into()));
        }
        Ok(())
    }

    /// Linear intensity map from the source range onto the target range, clamped to `[0, 1]`.
    pub fn remap(&self, value: f64) -> f64 {
        let [s0, s1] = self.intensity_src;
        let [d0, d1] = self.intensity_dst;
        (d0 + (value - s0) / (s1 - s0) * (d1 - d0)).clamp(0.0, 1.0)
    }
}

/// An attacked video together with the indices of the frames it lost.
#[derive(Clone, Debug, PartialEq)]
pub struct AttackedVideo {
    pub video: VideoTensor,
    /// Ascending indices into the source video.
    pub dropped: Vec<usize>,
}

impl AttackedVideo {
    /// Source indices of the frames that survived, in order.
    pub fn survivors(&self, source_len: usize) -> Vec<usize> {
        let mut dropped = self.dropped.iter().peekable();
        (0..source_len)
            .filter(|i| {
                if dropped.peek() == Some(&i) {
                    dropped.next();
                    false
                } else {
                    true
                }
            })
            .collect()
    }
}

fn attack_frame(frame: &Frame, spec: &AttackSpec) -> Frame {
    let (h, w) = frame.dims();
    let (cy, cx) = ((h as f64 - 1.0) / 2.0, (w as f64 - 1.0) / 2.0);
    let theta = spec.rotation_deg.to_radians();
    let (sin, cos) = theta.sin_cos();

    let rotated = if spec.rotation_deg == 0.0 {
        frame.clone()
    } else {
        // inverse mapping with y pointing down: a counter-clockwise turn on
        // screen samples the source at R(theta) applied to the offset
        Frame::from_fn(h, w, |r, c| {
            let (dy, dx) = (r as f64 - cy, c as f64 - cx);
            let sx = cx + cos * dx - sin * dy;
            let sy = cy + sin * dx + cos * dy;
            frame.sample_bilinear(sy, sx)
        })
    };

    let cropped = if spec.crop_fraction == 1.0 {
        rotated
    } else {
        let (ch, cw) = (spec.crop_fraction * h as f64, spec.crop_fraction * w as f64);
        let (y0, x0) = ((h as f64 - ch) / 2.0, (w as f64 - cw) / 2.0);
        let (sy, sx) = (ch / h as f64, cw / w as f64);
        Frame::from_fn(h, w, |r, c| {
            rotated.sample_bilinear(y0 + (r as f64 + 0.5) * sy - 0.5, x0 + (c as f64 + 0.5) * sx - 0.5)
        })
    };

    cropped.map(|p| spec.remap(p))
}

pub fn spatial_attack(v: &VideoTensor, spec: &AttackSpec) -> Result<VideoTensor> {
    spec.validate()?;
    if !spec.kind.has_spatial() {
        return Err(Error::InvalidAttack(format!("{} attack has no spatial stage", spec.kind)));
    }
    let frames = v.frames().par_iter().map(|f| attack_frame(f, spec)).collect();
    VideoTensor::new(frames, v.fps(), v.source_id().to_owned())
}

/// Uniform draw from `0..bound` by multiply-shift.
#[inline]
fn draw(rng: &mut ChaCha8Rng, bound: usize) -> usize {
    ((rng.next_u64() as u128 * bound as u128) >> 64) as usize
}

/// Seeded choice of `count` distinct indices from `0..len`, returned ascending.
pub fn sample_drop_indices(len: usize, count: usize, seed: u64) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pool: Vec<usize> = (0..len).collect();
    for i in 0..count.min(len) {
        let j = i + draw(&mut rng, len - i);
        pool.swap(i, j);
    }
    let mut chosen = pool[..count.min(len)].to_vec();
    chosen.sort_unstable();
    chosen
}

pub fn temporal_attack(v: &VideoTensor, spec: &AttackSpec) -> Result<AttackedVideo> {
    spec.validate()?;
    if !spec.kind.has_temporal() {
        return Err(Error::InvalidAttack(format!("{} attack has no temporal stage", spec.kind)));
    }
    let len = v.len();
    // guard against 0.3 * 10 = 2.9999999999999996 style products
    let count = (spec.drop_fraction * len as f64 + 1e-9).floor() as usize;
    let survivors = len - count.min(len);
    if survivors < 2 {
        return Err(Error::TooShortAfterDrop { survivors });
    }
    let dropped = sample_drop_indices(len, count, spec.seed);
    let attacked = AttackedVideo { video: v.clone(), dropped };
    let keep = attacked.survivors(len);
    Ok(AttackedVideo { video: v.select(&keep)?, ..attacked })
}

pub fn apply(v: &VideoTensor, spec: &AttackSpec) -> Result<AttackedVideo> {
    spec.validate()?;
    match spec.kind {
        AttackKind::Spatial => Ok(AttackedVideo { video: spatial_attack(v, spec)?, dropped: Vec::new() }),
        AttackKind::Temporal => temporal_attack(v, spec),
        AttackKind::SpatioTemporal => temporal_attack(&spatial_attack(v, spec)?, spec),
    }
}
