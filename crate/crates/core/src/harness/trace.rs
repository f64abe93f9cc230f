use serde::{Deserialize, Serialize};

use super::{predict_windows, usable_windows};
use crate::data::FrameSequence;
use crate::error::{Error, Result};
use crate::models::Model;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    /// Anchor frame index.
    pub index: usize,
    pub label: f64,
    pub prediction: f64,
    /// `prediction - label`, in radians.
    pub error: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceMarker {
    pub index: usize,
    pub error: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ErrorTrace {
    pub x: usize,
    pub dt: usize,
    pub rows: Vec<TraceRow>,
    /// Largest signed error.
    pub max: TraceMarker,
    /// Smallest signed error.
    pub min: TraceMarker,
}

/// Per-anchor prediction errors over every usable window of `seq`.
pub fn error_trace(model: &Model, seq: &FrameSequence, x: usize, dt: usize, batch_size: usize) -> Result<ErrorTrace> {
    let windows = usable_windows(seq, model.config(), x, dt);
    if windows.is_empty() {
        return Err(Error::EmptySequence(format!("no windows for x = {x}, dt = {dt} over {} frames", seq.len())));
    }
    let preds = predict_windows(model, seq, &windows, batch_size)?;
    let rows: Vec<TraceRow> = windows
        .iter()
        .zip(preds)
        .map(|(w, prediction)| {
            let label = seq.label(w.anchor);
            TraceRow {
                index: w.anchor,
                label,
                prediction,
                error: prediction - label,
            }
        })
        .collect();
    let marker = |r: &TraceRow| TraceMarker {
        index: r.index,
        error: r.error,
    };
    let max = rows.iter().max_by(|a, b| a.error.total_cmp(&b.error)).map(marker).expect("nonempty");
    let min = rows.iter().min_by(|a, b| a.error.total_cmp(&b.error)).map(marker).expect("nonempty");
    Ok(ErrorTrace { x, dt, rows, max, min })
}
