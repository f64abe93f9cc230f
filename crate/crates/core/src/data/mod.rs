//! Frame streams, the two-vehicle window protocol and batch assembly.
//!
//! The lead vehicle is simulated by reading the same camera stream `dt`
//! frames ahead of the ego vehicle. A sequence may carry a per-frame glare
//! mask that only corrupts frames read in the [`Role::Ego`] role, which lets
//! experiments blind the ego camera while the shared lead frames stay clean.

mod augment;
mod cache;
mod synth;
mod udacity;
mod window;

use std::path::PathBuf;
use std::sync::{Arc, Mutex};

use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use augment::{augment, AugmentConfig, AugmentParams, PIXEL_MAX, PIXEL_MIN};
pub use synth::{steering_signal, synth_generate, GlareScope, SynthConfig, LINE_HALF_WIDTH, LINE_VALUE};
pub use udacity::{export_csv_dataset, load_udacity_csv, resolve_dataset, CSV_COLUMNS, DATASET_CSV, DEFAULT_CACHE_BYTES};
pub use window::{make_windows, split_train_val, WindowSpec};

use crate::error::{Error, Result};
use crate::models::ModelConfig;
use crate::tensor::Tensor;
use cache::DecodeCache;

/// One camera frame's telemetry row.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrameRecord {
    pub index: u64,
    pub timestamp: i64,
    pub width: u32,
    pub height: u32,
    pub frame_id: String,
    pub filename: String,
    /// Steering angle in radians.
    pub angle: f64,
    pub torque: f64,
    pub speed: f64,
    pub latitude: f64,
    pub longitude: f64,
    pub altitude: f64,
}

/// 8-bit RGB image, row-major `[height, width, 3]`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Image {
    pub height: usize,
    pub width: usize,
    pub pixels: Vec<u8>,
}

impl Image {
    pub fn filled(height: usize, width: usize, value: u8) -> Self {
        Image {
            height,
            width,
            pixels: vec![value; height * width * 3],
        }
    }

    pub fn byte_len(&self) -> usize {
        self.pixels.len()
    }

    /// Write pixels mapped from `[0, 255]` to `[-0.5, 0.5]`.
    pub fn normalize_into(&self, out: &mut [f64]) {
        for (o, &p) in out.iter_mut().zip(&self.pixels) {
            *o = f64::from(p) / 255.0 - 0.5;
        }
    }

    pub fn normalized(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.pixels.len()];
        self.normalize_into(&mut out);
        out
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Ego,
    Lead,
}

/// A frame position in the sequence together with the vehicle reading it.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct FrameRef {
    pub index: usize,
    pub role: Role,
}

enum FrameStore {
    Memory(Vec<Arc<Image>>),
    Disk {
        root: PathBuf,
        cache: Mutex<DecodeCache>,
    },
}

/// An ordered camera stream with its steering labels.
pub struct FrameSequence {
    records: Vec<FrameRecord>,
    height: usize,
    width: usize,
    store: FrameStore,
    ego_glare: Option<Vec<bool>>,
    glare_frame: Arc<Image>,
}

impl std::fmt::Debug for FrameSequence {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("FrameSequence")
            .field("frames", &self.records.len())
            .field("height", &self.height)
            .field("width", &self.width)
            .field("ego_glare", &self.ego_glare.as_ref().map(|m| m.iter().filter(|&&g| g).count()))
            .finish()
    }
}

impl FrameSequence {
    /// An in-memory sequence; every image must be `height x width`.
    pub fn from_images(records: Vec<FrameRecord>, images: Vec<Image>) -> Result<Self> {
        if records.len() != images.len() {
            return Err(Error::Config(format!(
                "{} records but {} images",
                records.len(),
                images.len()
            )));
        }
        let (height, width) = images.first().map_or((0, 0), |im| (im.height, im.width));
        if let Some((i, im)) = images.iter().enumerate().find(|(_, im)| (im.height, im.width) != (height, width)) {
            return Err(Error::Config(format!(
                "frame {i} is {}x{}, expected {height}x{width}",
                im.height, im.width
            )));
        }
        Ok(FrameSequence {
            records,
            height,
            width,
            store: FrameStore::Memory(images.into_iter().map(Arc::new).collect()),
            ego_glare: None,
            glare_frame: Arc::new(Image::filled(height, width, 255)),
        })
    }

    pub(crate) fn from_disk(records: Vec<FrameRecord>, root: PathBuf, height: usize, width: usize, cache_bytes: usize) -> Self {
        FrameSequence {
            records,
            height,
            width,
            store: FrameStore::Disk {
                root,
                cache: Mutex::new(DecodeCache::new(cache_bytes)),
            },
            ego_glare: None,
            glare_frame: Arc::new(Image::filled(height, width, 255)),
        }
    }

    /// Replace ego-role reads of the flagged frames with a whiteout image.
    pub fn with_ego_glare(mut self, mask: Vec<bool>) -> Result<Self> {
        if mask.len() != self.records.len() {
            return Err(Error::Config(format!(
                "glare mask has {} entries for {} frames",
                mask.len(),
                self.records.len()
            )));
        }
        self.ego_glare = Some(mask);
        Ok(self)
    }

    pub fn ego_glare(&self) -> Option<&[bool]> {
        self.ego_glare.as_deref()
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn records(&self) -> &[FrameRecord] {
        &self.records
    }

    pub fn frame_size(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    pub fn label(&self, index: usize) -> f64 {
        self.records[index].angle
    }

    pub fn labels(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.angle).collect()
    }

    /// Frames per second estimated from the first and last timestamps (nanoseconds).
    pub fn frame_rate_hz(&self) -> Option<f64> {
        let (first, last) = (self.records.first()?, self.records.last()?);
        let span = (last.timestamp - first.timestamp) as f64 / 1e9;
        (self.records.len() > 1 && span > 0.0).then(|| (self.records.len() - 1) as f64 / span)
    }

    pub fn duration_secs(&self) -> f64 {
        match (self.records.first(), self.records.last()) {
            (Some(a), Some(b)) => (b.timestamp - a.timestamp) as f64 / 1e9,
            _ => 0.0,
        }
    }

    /// The image seen by `r.role` at `r.index`.
    pub fn frame(&self, r: FrameRef) -> Result<Arc<Image>> {
        if r.index >= self.records.len() {
            return Err(Error::Usage(format!(
                "frame {} requested from a {}-frame sequence",
                r.index,
                self.records.len()
            )));
        }
        if r.role == Role::Ego && self.ego_glare.as_ref().is_some_and(|m| m[r.index]) {
            return Ok(Arc::clone(&self.glare_frame));
        }
        match &self.store {
            FrameStore::Memory(images) => Ok(Arc::clone(&images[r.index])),
            FrameStore::Disk { root, cache } => {
                if let Some(hit) = cache.lock().expect("decode cache poisoned").get(r.index) {
                    return Ok(hit);
                }
                let path = root.join(&self.records[r.index].filename);
                let img = udacity::decode_image(&path).map_err(|why| Error::Ingestion {
                    rows: vec![(r.index, format!("{}: {why}", path.display()))],
                })?;
                if (img.height, img.width) != (self.height, self.width) {
                    return Err(Error::Ingestion {
                        rows: vec![(r.index, format!("decoded {}x{}, expected {}x{}", img.height, img.width, self.height, self.width))],
                    });
                }
                let img = Arc::new(img);
                cache.lock().expect("decode cache poisoned").insert(r.index, Arc::clone(&img));
                Ok(img)
            }
        }
    }

    /// Normalized model input for one sample: `[frames, h, w, 3]`.
    pub fn sample(&self, config: &ModelConfig, window: WindowSpec) -> Result<Sample> {
        let refs = config.frame_refs(&window)?;
        let frames = assemble_batch(self, &[refs], None)?;
        let shape = frames.shape()[1..].to_vec();
        Ok(Sample {
            frames: frames.reshape(&shape)?,
            label: self.label(window.anchor),
            window,
        })
    }
}

/// One model input with its steering label.
#[derive(Clone, Debug)]
pub struct Sample {
    pub frames: Tensor,
    pub label: f64,
    pub window: WindowSpec,
}

/// Stack the referenced frames of every sample into `[batch, frames, h, w, 3]`.
///
/// With `augment`, one jitter draw per sample is applied to all of its
/// frames. Draws happen in sample order before decoding fans out, so the
/// result does not depend on the worker count.
pub fn assemble_batch(
    seq: &FrameSequence,
    samples: &[Vec<FrameRef>],
    augment: Option<(&AugmentConfig, &mut ChaCha8Rng)>,
) -> Result<Tensor> {
    let Some(first) = samples.first() else {
        return Err(Error::EmptyBatch("no samples to assemble".into()));
    };
    let frames = first.len();
    if frames == 0 || samples.iter().any(|s| s.len() != frames) {
        return Err(Error::Config("every sample needs the same nonzero number of frames".into()));
    }
    let (h, w) = seq.frame_size();
    let frame_len = h * w * 3;
    let params: Vec<AugmentParams> = match augment {
        Some((cfg, rng)) => samples.iter().map(|_| AugmentParams::sample(cfg, rng)).collect(),
        None => vec![AugmentParams::IDENTITY; samples.len()],
    };
    let mut data = vec![0.0; samples.len() * frames * frame_len];
    data.par_chunks_mut(frames * frame_len)
        .zip(samples.par_iter().zip(&params))
        .try_for_each(|(out, (refs, p))| -> Result<()> {
            for (slot, &r) in out.chunks_exact_mut(frame_len).zip(refs) {
                seq.frame(r)?.normalize_into(slot);
                if *p != AugmentParams::IDENTITY {
                    p.apply(slot);
                }
            }
            Ok(())
        })?;
    Tensor::new(&[samples.len(), frames, h, w, 3], data)
}
