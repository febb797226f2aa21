//! Seeded synthetic videos: smooth textures translating along piecewise
//! constant velocities. Every frame differs from its neighbours and the
//! motion direction changes over time, which makes both the frame hashes and
//! the flow hashes informative.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::frame::Frame;
use crate::video::{quantize, Fps, VideoTensor};

#[derive(Clone, Debug, PartialEq)]
pub struct SyntheticSpec {
    pub height: usize,
    pub width: usize,
    pub frames: usize,
    /// Sinusoidal texture components.
    pub components: usize,
    /// Spatial periods are drawn from this range, in pixels.
    pub period: (f64, f64),
    /// Frames per constant-velocity phase.
    pub phase_length: (usize, usize),
    /// Speed range in pixels per frame.
    pub speed: (f64, f64),
    /// When set, every video of a [`corpus`] follows one shared motion
    /// schedule whose headings are perturbed per video by up to this many
    /// radians. Textures stay independent.
    pub family_jitter: Option<f64>,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        SyntheticSpec {
            height: 64,
            width: 64,
            frames: 45,
            components: 4,
            period: (20.0, 56.0),
            phase_length: (4, 10),
            speed: (0.4, 1.0),
            family_jitter: None,
        }
    }
}

struct Wave {
    amplitude: f64,
    kx: f64,
    ky: f64,
    phase: f64,
}

#[derive(Clone, Copy)]
struct Phase {
    length: usize,
    heading: f64,
    speed: f64,
}

fn motion_schedule(spec: &SyntheticSpec, rng: &mut ChaCha8Rng) -> Vec<Phase> {
    let mut phases = Vec::new();
    let mut covered = 0;
    while covered < spec.frames {
        let length = rng.gen_range(spec.phase_length.0..=spec.phase_length.1).max(1);
        phases.push(Phase { length, heading: rng.gen_range(0.0..2.0 * PI), speed: rng.gen_range(spec.speed.0..=spec.speed.1) });
        covered += length;
    }
    phases
}

/// One synthetic video; pixels are quantized to 8 bits like ingested video.
pub fn moving_texture(spec: &SyntheticSpec, seed: u64, id: impl Into<String>) -> Result<VideoTensor> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let schedule = motion_schedule(spec, &mut rng);
    render(spec, &schedule, &mut rng, id)
}

fn render(spec: &SyntheticSpec, schedule: &[Phase], rng: &mut ChaCha8Rng, id: impl Into<String>) -> Result<VideoTensor> {
    let waves: Vec<Wave> = (0..spec.components)
        .map(|_| {
            let period = rng.gen_range(spec.period.0..=spec.period.1);
            let angle = rng.gen_range(0.0..PI);
            Wave {
                amplitude: rng.gen_range(0.5..1.0),
                kx: 2.0 * PI * angle.cos() / period,
                ky: 2.0 * PI * angle.sin() / period,
                phase: rng.gen_range(0.0..2.0 * PI),
            }
        })
        .collect();
    // Peak excursion stays within 0.45 of mid-grey.
    let norm = (waves.iter().map(|w| w.amplitude).sum::<f64>() / 0.45).max(1.0);

    let mut offsets = Vec::with_capacity(spec.frames);
    let (mut ox, mut oy) = (0.0, 0.0);
    for phase in schedule {
        let (vx, vy) = (phase.speed * phase.heading.cos(), phase.speed * phase.heading.sin());
        for _ in 0..phase.length {
            offsets.push((ox, oy));
            ox += vx;
            oy += vy;
        }
    }
    offsets.truncate(spec.frames);

    let frames = offsets
        .iter()
        .map(|&(ox, oy)| {
            Frame::from_fn(spec.height, spec.width, |r, c| {
                let (x, y) = (c as f64 - ox, r as f64 - oy);
                let v: f64 = waves.iter().map(|w| w.amplitude * (w.kx * x + w.ky * y + w.phase).cos()).sum();
                quantize(0.5 + v / norm) as f64 / 255.0
            })
        })
        .collect();
    VideoTensor::new(frames, Fps::new(2, 1), id)
}

/// `count` videos named `syn000`, `syn001`, ...
pub fn corpus(spec: &SyntheticSpec, count: usize, seed: u64) -> Result<Vec<VideoTensor>> {
    let video_seed = |i: usize| seed.wrapping_mul(1_000_003).wrapping_add(i as u64);
    let Some(jitter) = spec.family_jitter else {
        return (0..count).map(|i| moving_texture(spec, video_seed(i), format!("syn{i:03}"))).collect();
    };
    let shared = motion_schedule(spec, &mut ChaCha8Rng::seed_from_u64(seed ^ 0x5EED_FA41));
    (0..count)
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(video_seed(i));
            let schedule: Vec<Phase> = shared
                .iter()
                .map(|p| Phase { heading: p.heading + rng.gen_range(-jitter..=jitter), ..*p })
                .collect();
            render(spec, &schedule, &mut rng, format!("syn{i:03}"))
        })
        .collect()
}
