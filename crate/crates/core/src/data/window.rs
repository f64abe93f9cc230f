use std::ops::Range;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Index recipe for one sample: `x` ego frames ending at the anchor and
/// `x` lead-vehicle frames starting `dt` frames after it.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct WindowSpec {
    pub anchor: usize,
    pub x: usize,
    pub dt: usize,
}

impl WindowSpec {
    pub fn new(anchor: usize, x: usize, dt: usize) -> Self {
        WindowSpec { anchor, x, dt }
    }

    /// `anchor - x + 1 ..= anchor`, oldest first.
    pub fn ego_indices(&self) -> Range<usize> {
        self.anchor + 1 - self.x..self.anchor + 1
    }

    /// `anchor + dt ..= anchor + dt + x - 1`.
    pub fn lead_indices(&self) -> Range<usize> {
        self.anchor + self.dt..self.anchor + self.dt + self.x
    }

    /// Whether every referenced frame exists in a sequence of `n` frames.
    pub fn fits(&self, n: usize) -> bool {
        self.x >= 1 && self.anchor + 1 >= self.x && self.anchor + self.dt + self.x <= n
    }

    /// The same anchor with a different lead offset.
    pub fn with_dt(&self, dt: usize) -> Self {
        WindowSpec { dt, ..*self }
    }
}

/// Every valid window over `n` frames, in anchor order.
///
/// Anchors run over `[x - 1, n - dt - x]`, giving `n - dt - 2x + 2` windows
/// when that is positive.
pub fn make_windows(n: usize, x: usize, dt: usize) -> Vec<WindowSpec> {
    if x == 0 {
        return Vec::new();
    }
    let first = x - 1;
    let Some(last) = n.checked_sub(dt + x) else {
        return Vec::new();
    };
    (first..=last).map(|anchor| WindowSpec::new(anchor, x, dt)).collect()
}

/// Seeded window-level split. Each side is returned in anchor order.
pub fn split_train_val(windows: &[WindowSpec], fraction: f64, seed: u64) -> Result<(Vec<WindowSpec>, Vec<WindowSpec>)> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::Config(format!("train fraction {fraction} must lie strictly between 0 and 1")));
    }
    if windows.is_empty() {
        return Err(Error::Usage("cannot split an empty window list".into()));
    }
    let mut order = windows.to_vec();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let n_train = ((windows.len() as f64) * fraction).round() as usize;
    let n_train = n_train.clamp(1, windows.len());
    let mut val = order.split_off(n_train);
    let mut train = order;
    train.sort_unstable();
    val.sort_unstable();
    Ok((train, val))
}
