//! Procedural road sequences with a known steering signal.
//!
//! Each frame shows one bright lane line over a noisy background. The line's
//! column in the row `r` pixels above the bottom edge encodes the steering
//! signal `r / 4` frames ahead, so the bottom row carries the current label
//! and the image as a whole previews the road to come.

use std::f64::consts::TAU;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{FrameRecord, FrameSequence, Image};

pub const LINE_VALUE: u8 = 255;
pub const LINE_HALF_WIDTH: usize = 1;
const BACKGROUND: [u8; 3] = [70, 80, 70];
const NOISE: i16 = 12;
const FRAME_PERIOD_NS: i64 = 50_000_000;

/// `s(t) = 0.5·sin(2πt/97) + 0.3·sin(2πt/41 + 1)`, in radians.
pub fn steering_signal(t: f64) -> f64 {
    0.5 * (TAU * t / 97.0).sin() + 0.3 * (TAU * t / 41.0 + 1.0).sin()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GlareScope {
    /// Glare frames are whited out in the stored stream.
    AllViews,
    /// Stored frames stay clean; only ego-role reads see the glare.
    EgoOnly,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub frames: usize,
    pub seed: u64,
    pub height: usize,
    pub width: usize,
    /// Probability that a frame is replaced by glare.
    pub glare_prob: f64,
    pub glare_scope: GlareScope,
}

impl SynthConfig {
    pub fn new(frames: usize, seed: u64, height: usize, width: usize) -> Self {
        SynthConfig {
            frames,
            seed,
            height,
            width,
            glare_prob: 0.0,
            glare_scope: GlareScope::AllViews,
        }
    }
}

fn line_center(t: usize, rows_above_bottom: usize, width: usize) -> usize {
    let s = steering_signal(t as f64 + rows_above_bottom as f64 / 4.0);
    let center = (width / 2) as i64 + (s * width as f64 / 4.0).round() as i64;
    let lo = LINE_HALF_WIDTH as i64;
    let hi = (width - 1 - LINE_HALF_WIDTH) as i64;
    center.clamp(lo, hi.max(lo)) as usize
}

fn render(t: usize, height: usize, width: usize, rng: &mut ChaCha8Rng) -> Image {
    let mut pixels = Vec::with_capacity(height * width * 3);
    for _ in 0..height * width {
        for base in BACKGROUND {
            let jitter = rng.gen_range(-NOISE..=NOISE);
            pixels.push((i16::from(base) + jitter) as u8);
        }
    }
    for y in 0..height {
        let c = line_center(t, height - 1 - y, width);
        let cols = c.saturating_sub(LINE_HALF_WIDTH)..=(c + LINE_HALF_WIDTH).min(width - 1);
        for x in cols {
            pixels[(y * width + x) * 3..][..3].fill(LINE_VALUE);
        }
    }
    Image { height, width, pixels }
}

/// Generate a labelled sequence at a nominal 20 Hz.
pub fn synth_generate(cfg: &SynthConfig) -> FrameSequence {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut records = Vec::with_capacity(cfg.frames);
    let mut images = Vec::with_capacity(cfg.frames);
    let mut glare = Vec::with_capacity(cfg.frames);
    for t in 0..cfg.frames {
        let glared = cfg.glare_prob > 0.0 && rng.gen::<f64>() < cfg.glare_prob;
        let clean = render(t, cfg.height, cfg.width, &mut rng);
        let image = match (glared, cfg.glare_scope) {
            (true, GlareScope::AllViews) => Image::filled(cfg.height, cfg.width, 255),
            _ => clean,
        };
        glare.push(glared);
        images.push(image);
        records.push(FrameRecord {
            index: t as u64,
            timestamp: t as i64 * FRAME_PERIOD_NS,
            width: cfg.width as u32,
            height: cfg.height as u32,
            frame_id: "center_camera".into(),
            filename: format!("center/{t:06}.png"),
            angle: steering_signal(t as f64),
            torque: 0.0,
            speed: 0.0,
            latitude: 0.0,
            longitude: 0.0,
            altitude: 0.0,
        });
    }
    let seq = FrameSequence::from_images(records, images).expect("generated frames share one size");
    match cfg.glare_scope {
        GlareScope::EgoOnly => seq.with_ego_glare(glare).expect("one flag per frame"),
        GlareScope::AllViews => seq,
    }
}
