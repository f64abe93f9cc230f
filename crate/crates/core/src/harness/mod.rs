//! Training loop, metrics and the experiment protocols.

mod export;
mod sweep;
mod trace;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::autograd::Graph;
use crate::data::{assemble_batch, make_windows, split_train_val, AugmentConfig, FrameSequence, WindowSpec};
use crate::error::{Error, Result};
use crate::models::{Model, ModelConfig};
use crate::optim::{Adam, AdamConfig};
use crate::tensor::Tensor;

pub use export::{
    format_sig6, read_sweep_csv, read_trace_csv, write_json, write_plot_series, write_sweep_csv, write_trace_csv,
    ResultDocument,
};
pub use sweep::{sweep_dt, sweep_x, DtSweepConfig, RowStatus, SweepParam, SweepRow, SweepTable, DT_GRID, X_GRID};
pub use trace::{error_trace, ErrorTrace, TraceMarker, TraceRow};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub adam: AdamConfig,
    pub seed: u64,
    pub x: usize,
    /// Lead-vehicle offset in frames.
    pub dt: usize,
    pub train_fraction: f64,
    /// Brightness/contrast jitter on training batches; `None` disables it.
    pub augment: Option<AugmentConfig>,
    /// Free-form description of where the frames came from.
    pub source: String,
}

impl TrainConfig {
    pub fn new(x: usize, dt: usize, seed: u64) -> Self {
        TrainConfig {
            epochs: 15,
            batch_size: 64,
            adam: AdamConfig::default(),
            seed,
            x,
            dt,
            train_fraction: 0.8,
            augment: Some(AugmentConfig::default()),
            source: String::new(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::Config("epochs must be at least 1".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch size must be at least 1".into()));
        }
        if self.x == 0 {
            return Err(Error::Config("x must be at least 1".into()));
        }
        if !(self.adam.lr >= 0.0 && self.adam.lr.is_finite()) {
            return Err(Error::Config(format!("learning rate {} must be finite and non-negative", self.adam.lr)));
        }
        Ok(())
    }
}

/// Error statistics over one set of windows.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplitMetrics {
    pub rmse: f64,
    pub mae: f64,
    pub count: usize,
}

impl SplitMetrics {
    pub fn mse(&self) -> f64 {
        self.rmse * self.rmse
    }
}

/// RMSE and MAE of `preds` against `labels`.
pub fn error_metrics(preds: &[f64], labels: &[f64]) -> Result<SplitMetrics> {
    if preds.len() != labels.len() {
        return Err(Error::Config(format!("{} predictions for {} labels", preds.len(), labels.len())));
    }
    if preds.is_empty() {
        return Err(Error::Usage("metrics over zero windows".into()));
    }
    let n = preds.len() as f64;
    let (mut se, mut ae) = (0.0, 0.0);
    for (p, y) in preds.iter().zip(labels) {
        let e = p - y;
        se += e * e;
        ae += e.abs();
    }
    let m = SplitMetrics {
        rmse: (se / n).sqrt(),
        mae: ae / n,
        count: preds.len(),
    };
    if !(m.rmse.is_finite() && m.mae.is_finite()) {
        return Err(Error::Numeric(format!("non-finite metrics: rmse {}, mae {}", m.rmse, m.mae)));
    }
    Ok(m)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Mean minibatch MSE over the epoch, as seen by the optimizer.
    pub train_loss: f64,
    /// Validation MSE after the epoch, if a validation split exists.
    pub val_loss: Option<f64>,
}

/// Outcome of one training run. Wall-clock time is kept out of the
/// serialized form so that repeated runs produce identical files.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub model: ModelConfig,
    pub train_config: TrainConfig,
    pub parameters: usize,
    pub train_windows: usize,
    pub val_windows: usize,
    pub initial_val_loss: Option<f64>,
    pub history: Vec<EpochRecord>,
    /// Epoch (1-based) whose parameters were kept.
    pub best_epoch: usize,
    /// Metrics of the kept parameters.
    pub train: SplitMetrics,
    pub val: Option<SplitMetrics>,
    /// Validation metrics of the last epoch, before restoring the best one.
    pub final_epoch_val: Option<SplitMetrics>,
    #[serde(skip)]
    pub wall_clock_secs: f64,
}

pub struct TrainOutcome {
    pub model: Model,
    pub optimizer: Adam,
    pub report: MetricsReport,
}

/// Windows usable by `config` over `seq`, in anchor order.
pub fn usable_windows(seq: &FrameSequence, config: &ModelConfig, x: usize, dt: usize) -> Vec<WindowSpec> {
    make_windows(seq.len(), x, dt)
        .into_iter()
        .filter(|w| config.frame_refs(w).is_ok())
        .collect()
}

/// The seeded train/validation split used by [`train`].
pub fn split_for(seq: &FrameSequence, config: &ModelConfig, cfg: &TrainConfig) -> Result<(Vec<WindowSpec>, Vec<WindowSpec>)> {
    let windows = usable_windows(seq, config, cfg.x, cfg.dt);
    if windows.is_empty() {
        return Err(Error::EmptySequence(format!(
            "{} frames leave no windows for x = {}, dt = {}",
            seq.len(),
            cfg.x,
            cfg.dt
        )));
    }
    split_train_val(&windows, cfg.train_fraction, cfg.seed)
}

fn batch_input(
    seq: &FrameSequence,
    config: &ModelConfig,
    windows: &[WindowSpec],
    augment: Option<(&AugmentConfig, &mut ChaCha8Rng)>,
) -> Result<(Tensor, Vec<f64>)> {
    let refs = windows.iter().map(|w| config.frame_refs(w)).collect::<Result<Vec<_>>>()?;
    let labels = windows.iter().map(|w| seq.label(w.anchor)).collect();
    Ok((assemble_batch(seq, &refs, augment)?, labels))
}

/// Predictions for `windows` in chunks of `batch_size`, without augmentation.
pub fn predict_windows(model: &Model, seq: &FrameSequence, windows: &[WindowSpec], batch_size: usize) -> Result<Vec<f64>> {
    let mut preds = Vec::with_capacity(windows.len());
    for chunk in windows.chunks(batch_size.max(1)) {
        let (input, _) = batch_input(seq, model.config(), chunk, None)?;
        preds.extend(model.predict(input)?);
    }
    Ok(preds)
}

/// RMSE and MAE of `model` over `windows`.
pub fn evaluate(model: &Model, seq: &FrameSequence, windows: &[WindowSpec], batch_size: usize) -> Result<SplitMetrics> {
    if windows.is_empty() {
        return Err(Error::Usage("evaluate needs at least one window".into()));
    }
    let preds = predict_windows(model, seq, windows, batch_size)?;
    let labels: Vec<f64> = windows.iter().map(|w| seq.label(w.anchor)).collect();
    error_metrics(&preds, &labels)
}

/// [`train_with`] without a checkpoint callback.
pub fn train(model: Model, seq: &FrameSequence, cfg: &TrainConfig) -> Result<TrainOutcome> {
    train_with(model, seq, cfg, |_, _, _| Ok(()))
}

/// Minibatch MSE training with Adam.
///
/// The parameters with the lowest validation loss are kept and returned;
/// `on_best` sees them each time they improve, so a caller can persist the
/// last good state. A non-finite loss or gradient stops training with
/// [`Error::Diverged`].
pub fn train_with(
    mut model: Model,
    seq: &FrameSequence,
    cfg: &TrainConfig,
    mut on_best: impl FnMut(&Model, &Adam, &EpochRecord) -> Result<()>,
) -> Result<TrainOutcome> {
    let started = std::time::Instant::now();
    cfg.validate()?;
    let config = model.config().clone();
    if config.arch == crate::models::Arch::Coop && config.x != cfg.x {
        return Err(Error::Config(format!("model built for x = {}, training asks for x = {}", config.x, cfg.x)));
    }
    let (train_w, val_w) = split_for(seq, &config, cfg)?;
    let names: Vec<String> = model.named_params().into_iter().map(|(n, _)| n).collect();
    let shapes: Vec<Vec<usize>> = model.named_params().iter().map(|(_, t)| t.shape().to_vec()).collect();
    let mut adam = Adam::new(cfg.adam, shapes.iter().map(Vec::as_slice));

    let mut order_rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(0x9e37_79b9_7f4a_7c15));
    let mut augment_rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(0x2545_f491_4f6c_dd1d));

    let val_metrics = |m: &Model| -> Result<Option<SplitMetrics>> {
        if val_w.is_empty() {
            Ok(None)
        } else {
            evaluate(m, seq, &val_w, cfg.batch_size).map(Some)
        }
    };
    let initial_val_loss = val_metrics(&model)?.map(|m| m.mse());

    let mut history = Vec::with_capacity(cfg.epochs);
    let mut best: Option<(f64, usize, Model)> = None;
    let mut last_val = None;
    let mut order = train_w.clone();
    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut order_rng);
        let mut loss_sum = 0.0;
        for (b, chunk) in order.chunks(cfg.batch_size).enumerate() {
            let augment = cfg.augment.as_ref().map(|a| (a, &mut augment_rng));
            let (input, labels) = batch_input(seq, &config, chunk, augment)?;
            let diverged = |detail: String| Error::Diverged {
                epoch,
                batch: b + 1,
                detail,
            };
            let mut g = Graph::new();
            let x = g.constant(input);
            let target = g.constant(Tensor::new(&[labels.len()], labels)?);
            let pred = model.forward(&mut g, x)?;
            let loss = g.mse_loss(pred, target)?;
            let value = g.value(loss).item()?;
            if !value.is_finite() {
                return Err(diverged(format!("minibatch loss is {value}")));
            }
            let grads = g
                .backward(loss)
                .map_err(|e| diverged(e.to_string()))?
                .params();
            adam.step(&mut model.params_mut(), &grads, &names)
                .map_err(|e| match e {
                    Error::Numeric(msg) => diverged(msg),
                    other => other,
                })?;
            loss_sum += value * chunk.len() as f64;
        }
        let val = val_metrics(&model)?;
        let record = EpochRecord {
            epoch,
            train_loss: loss_sum / order.len() as f64,
            val_loss: val.map(|m| m.mse()),
        };
        log::info!(
            "epoch {epoch}/{}: train loss {:.6}, val loss {}",
            cfg.epochs,
            record.train_loss,
            record.val_loss.map_or("n/a".into(), |v| format!("{v:.6}"))
        );
        // Without a validation split the latest parameters are kept.
        let score = record.val_loss.unwrap_or(f64::NEG_INFINITY);
        if best.as_ref().is_none_or(|(s, _, _)| score < *s) {
            on_best(&model, &adam, &record)?;
            best = Some((score, epoch, model.clone()));
        }
        last_val = val;
        history.push(record);
    }

    let (_, best_epoch, best_model) = best.expect("at least one epoch ran");
    let report = MetricsReport {
        model: config,
        train_config: cfg.clone(),
        parameters: best_model.count_params(),
        train_windows: train_w.len(),
        val_windows: val_w.len(),
        initial_val_loss,
        history,
        best_epoch,
        train: evaluate(&best_model, seq, &train_w, cfg.batch_size)?,
        val: val_metrics(&best_model)?,
        final_epoch_val: last_val,
        wall_clock_secs: started.elapsed().as_secs_f64(),
    };
    Ok(TrainOutcome {
        model: best_model,
        optimizer: adam,
        report,
    })
}
