use rand::Rng;
use serde::{Deserialize, Serialize};

pub const PIXEL_MIN: f64 = -0.5;
pub const PIXEL_MAX: f64 = 0.5;

/// Random photometric jitter applied to training samples.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AugmentConfig {
    /// Brightness offset drawn from `[-b, b]`.
    pub brightness: f64,
    /// Contrast factor drawn from `[1 - c, 1 + c]`.
    pub contrast: f64,
}

impl Default for AugmentConfig {
    fn default() -> Self {
        AugmentConfig {
            brightness: 0.2,
            contrast: 0.2,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AugmentParams {
    pub delta: f64,
    pub factor: f64,
}

impl AugmentParams {
    pub const IDENTITY: AugmentParams = AugmentParams { delta: 0.0, factor: 1.0 };

    pub fn sample<R: Rng + ?Sized>(cfg: &AugmentConfig, rng: &mut R) -> Self {
        let draw = |rng: &mut R, half: f64| if half > 0.0 { rng.gen_range(-half..=half) } else { 0.0 };
        let delta = draw(rng, cfg.brightness);
        let factor = 1.0 + draw(rng, cfg.contrast);
        AugmentParams { delta, factor }
    }

    /// `mean + factor·(v - mean) + delta`, clamped to the normalized pixel range.
    pub fn apply(&self, image: &mut [f64]) {
        if image.is_empty() {
            return;
        }
        let mean = image.iter().sum::<f64>() / image.len() as f64;
        for v in image.iter_mut() {
            *v = (mean + self.factor * (*v - mean) + self.delta).clamp(PIXEL_MIN, PIXEL_MAX);
        }
    }
}

/// Augment one normalized image with freshly drawn jitter.
pub fn augment<R: Rng + ?Sized>(image: &[f64], cfg: &AugmentConfig, rng: &mut R) -> Vec<f64> {
    let mut out = image.to_vec();
    AugmentParams::sample(cfg, rng).apply(&mut out);
    out
}
