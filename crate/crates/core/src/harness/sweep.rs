use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{evaluate, split_for, train, TrainConfig};
use crate::data::{FrameSequence, WindowSpec};
use crate::error::{Error, Result};
use crate::models::{Model, ModelConfig};

/// Frame counts per vehicle swept in the x experiment.
pub const X_GRID: [usize; 9] = [1, 2, 4, 6, 8, 10, 12, 14, 20];

/// Lead offsets 0, 5, ..., 95.
pub const DT_GRID: [usize; 20] = {
    let mut g = [0; 20];
    let mut i = 0;
    while i < 20 {
        g[i] = 5 * i;
        i += 1;
    }
    g
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SweepParam {
    X,
    Dt,
}

impl SweepParam {
    pub fn name(self) -> &'static str {
        match self {
            SweepParam::X => "x",
            SweepParam::Dt => "dt",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RowStatus {
    Ok,
    /// No windows exist for this value.
    Infeasible,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub value: usize,
    pub rmse_train: Option<f64>,
    pub rmse_val: Option<f64>,
    pub status: RowStatus,
}

impl SweepRow {
    fn infeasible(value: usize) -> Self {
        SweepRow {
            value,
            rmse_train: None,
            rmse_val: None,
            status: RowStatus::Infeasible,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepTable {
    pub parameter: SweepParam,
    pub rows: Vec<SweepRow>,
}

impl SweepTable {
    /// The feasible row with the lowest validation RMSE.
    pub fn best(&self) -> Option<&SweepRow> {
        self.rows
            .iter()
            .filter(|r| r.rmse_val.is_some())
            .min_by(|a, b| a.rmse_val.partial_cmp(&b.rmse_val).expect("finite rmse"))
    }

    pub fn row(&self, value: usize) -> Option<&SweepRow> {
        self.rows.iter().find(|r| r.value == value)
    }
}

fn check_increasing(values: &[usize]) -> Result<()> {
    if values.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Config(format!("sweep values must be strictly increasing: {values:?}")));
    }
    Ok(())
}

fn with_pool<T: Send>(jobs: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| Error::Config(format!("cannot start {jobs} workers: {e}")))?;
    Ok(pool.install(f))
}

/// One independent training run per `x`, seeded `base.seed + run index`.
///
/// Points run in parallel on at most `jobs` workers; rows come back in
/// value order. Values with no windows are marked infeasible.
pub fn sweep_x(
    seq: &FrameSequence,
    model: &ModelConfig,
    base: &TrainConfig,
    values: &[usize],
    jobs: usize,
) -> Result<SweepTable> {
    check_increasing(values)?;
    let rows = with_pool(jobs, || {
        values
            .par_iter()
            .enumerate()
            .map(|(i, &x)| -> Result<SweepRow> {
                let mc = ModelConfig { x, ..model.clone() };
                let cfg = TrainConfig {
                    x,
                    seed: base.seed.wrapping_add(i as u64),
                    ..base.clone()
                };
                match split_for(seq, &mc, &cfg) {
                    Err(Error::EmptySequence(_)) => return Ok(SweepRow::infeasible(x)),
                    Err(e) => return Err(e),
                    Ok(_) => {}
                }
                let out = train(Model::new(mc, cfg.seed)?, seq, &cfg)?;
                log::info!("sweep x = {x}: val rmse {:?}", out.report.val.map(|m| m.rmse));
                Ok(SweepRow {
                    value: x,
                    rmse_train: Some(out.report.train.rmse),
                    rmse_val: out.report.val.map(|m| m.rmse),
                    status: RowStatus::Ok,
                })
            })
            .collect::<Result<Vec<_>>>()
    })??;
    Ok(SweepTable {
        parameter: SweepParam::X,
        rows,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DtSweepConfig {
    /// The training configuration the model came from; its split is reused.
    pub train: TrainConfig,
    pub values: Vec<usize>,
    /// Also evaluate the training anchors at each offset.
    pub include_train: bool,
}

/// Re-evaluate a trained model with the lead frames moved to each offset.
///
/// The anchors of the original split are kept and only those whose lead
/// frames still exist are scored. The model is never modified.
pub fn sweep_dt(seq: &FrameSequence, model: &Model, cfg: &DtSweepConfig, jobs: usize) -> Result<SweepTable> {
    check_increasing(&cfg.values)?;
    let (train_w, val_w) = split_for(seq, model.config(), &cfg.train)?;
    let shifted = |ws: &[WindowSpec], dt: usize| -> Vec<WindowSpec> {
        ws.iter()
            .map(|w| w.with_dt(dt))
            .filter(|w| w.fits(seq.len()))
            .collect()
    };
    let batch = cfg.train.batch_size;
    let rows = with_pool(jobs, || {
        cfg.values
            .par_iter()
            .map(|&dt| -> Result<SweepRow> {
                let val = shifted(&val_w, dt);
                let train = if cfg.include_train { shifted(&train_w, dt) } else { Vec::new() };
                if val.is_empty() && train.is_empty() {
                    return Ok(SweepRow::infeasible(dt));
                }
                let score = |ws: &[WindowSpec]| -> Result<Option<f64>> {
                    if ws.is_empty() {
                        Ok(None)
                    } else {
                        evaluate(model, seq, ws, batch).map(|m| Some(m.rmse))
                    }
                };
                Ok(SweepRow {
                    value: dt,
                    rmse_train: score(&train)?,
                    rmse_val: score(&val)?,
                    status: RowStatus::Ok,
                })
            })
            .collect::<Result<Vec<_>>>()
    })??;
    Ok(SweepTable {
        parameter: SweepParam::Dt,
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{synth_generate, SynthConfig};
    use crate::harness::evaluate;
    use crate::models::Arch;

    #[test]
    fn dt_grid_has_twenty_points() {
        assert_eq!(DT_GRID.len(), 20);
        assert_eq!((DT_GRID[0], DT_GRID[19]), (0, 95));
    }

    #[test]
    fn dt_sweep_leaves_model_alone_and_matches_plain_eval() {
        let seq = synth_generate(&SynthConfig::new(40, 3, 16, 16));
        let model = Model::new(ModelConfig::new(Arch::Coop, 2, 16, 16), 5).unwrap();
        let before = model.checksum();
        let cfg = DtSweepConfig {
            train: TrainConfig::new(2, 5, 11),
            values: vec![0, 5, 10, 40],
            include_train: false,
        };
        let table = sweep_dt(&seq, &model, &cfg, 1).unwrap();
        assert_eq!(model.checksum(), before);
        let (_, val) = split_for(&seq, model.config(), &cfg.train).unwrap();
        let plain = evaluate(&model, &seq, &val, 64).unwrap();
        assert_eq!(table.row(5).unwrap().rmse_val.unwrap().to_bits(), plain.rmse.to_bits());
        assert_eq!(table.row(40).unwrap().status, RowStatus::Infeasible);
    }

    #[test]
    fn x_sweep_marks_infeasible_rows() {
        let seq = synth_generate(&SynthConfig::new(16, 3, 16, 16));
        let mc = ModelConfig::new(Arch::Coop, 1, 16, 16);
        let mut base = TrainConfig::new(1, 2, 4);
        base.epochs = 1;
        base.batch_size = 8;
        let table = sweep_x(&seq, &mc, &base, &[1, 2, 20], 2).unwrap();
        assert_eq!(table.rows.len(), 3);
        assert_eq!(table.rows[2].status, RowStatus::Infeasible);
        assert!(table.rows[..2].iter().all(|r| r.rmse_val.is_some_and(f64::is_finite)));
    }

    #[test]
    fn unordered_values_are_rejected() {
        let seq = synth_generate(&SynthConfig::new(16, 3, 16, 16));
        let mc = ModelConfig::new(Arch::Coop, 1, 16, 16);
        assert!(sweep_x(&seq, &mc, &TrainConfig::new(1, 2, 4), &[2, 1], 1).is_err());
    }
}
