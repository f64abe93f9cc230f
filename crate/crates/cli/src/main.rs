mod config;
mod manifest;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Result};
use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use serde_json::json;

use coopsteer::checkpoint;
use coopsteer::data::{export_csv_dataset, load_udacity_csv, resolve_dataset, synth_generate, AugmentConfig, FrameSequence, GlareScope, SynthConfig, DEFAULT_CACHE_BYTES};
use coopsteer::harness::{
    error_trace, evaluate, split_for, sweep_dt, sweep_x, train_with, write_json, write_plot_series, write_sweep_csv,
    write_trace_csv, DtSweepConfig, ResultDocument, SweepTable, TrainConfig, X_GRID,
};
use coopsteer::models::{Arch, Model, ModelConfig};
use coopsteer::optim::AdamConfig;
use coopsteer::Error;

use manifest::Manifest;

const EXIT_CODES: &str = "\
Exit codes:
  0  success, all outputs written
  1  unexpected internal failure
  2  usage error (bad flags, missing checkpoint)
  3  configuration error (inconsistent settings)
  4  data error (missing column, bad CSV, unreadable images, no windows)
  5  numeric error (non-finite values, training divergence)
  6  filesystem error";

#[derive(Parser)]
#[command(name = "coopsteer", version, about = "Cooperative steering-angle regression", after_help = EXIT_CODES)]
struct Cli {
    /// JSON object of flag values; flags given on the command line take precedence.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    /// Maximum number of sweep points run in parallel.
    #[arg(long, global = true, default_value_t = 1)]
    jobs: usize,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a synthetic dataset (CSV plus PNG frames).
    GenSynth(GenSynthArgs),
    /// Train a model and write model.ckpt, metrics.json and manifest.json.
    Train(TrainArgs),
    /// Evaluate a checkpoint on the split it was trained with.
    Eval(EvalArgs),
    /// Train once per x value and tabulate RMSE.
    SweepX(SweepXArgs),
    /// Evaluate a checkpoint with the lead offset moved across a range.
    SweepDt(SweepDtArgs),
    /// Per-frame prediction errors of a checkpoint.
    Trace(TraceArgs),
}

#[derive(Args, Serialize)]
struct GenSynthArgs {
    #[arg(long)]
    frames: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Frame size as HEIGHTxWIDTH.
    #[arg(long, default_value = "64x64", value_parser = parse_size)]
    size: (usize, usize),
    /// Probability that a frame is whited out.
    #[arg(long, default_value_t = 0.0)]
    glare: f64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Serialize, Clone)]
struct OffsetArgs {
    /// Lead-vehicle offset in frames.
    #[arg(long, conflicts_with = "dt_seconds")]
    dt: Option<usize>,
    /// Lead-vehicle offset in seconds, converted with the dataset's frame rate.
    #[arg(long)]
    dt_seconds: Option<f64>,
}

#[derive(Args, Serialize, Clone)]
struct TrainingArgs {
    #[arg(long, default_value = "coop")]
    arch: Arch,
    /// Frames per vehicle.
    #[arg(long, default_value_t = 8)]
    x: usize,
    #[command(flatten)]
    offset: OffsetArgs,
    #[arg(long, default_value_t = 15)]
    epochs: usize,
    #[arg(long, default_value_t = 64)]
    batch: usize,
    #[arg(long, default_value_t = 1e-3)]
    lr: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 0.8)]
    train_fraction: f64,
    /// Disable brightness/contrast jitter.
    #[arg(long)]
    no_augment: bool,
}

#[derive(Args, Serialize)]
struct TrainArgs {
    /// Dataset directory (holding interpolated.csv) or CSV file.
    #[arg(long)]
    data: PathBuf,
    #[command(flatten)]
    training: TrainingArgs,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Serialize)]
struct EvalArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    ckpt: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Serialize)]
struct SweepXArgs {
    #[arg(long)]
    data: PathBuf,
    #[command(flatten)]
    training: TrainingArgs,
    /// Comma-separated x values.
    #[arg(long, value_delimiter = ',', default_values_t = X_GRID)]
    values: Vec<usize>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Serialize)]
struct SweepDtArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    ckpt: PathBuf,
    /// START:END:STEP in frames, END inclusive.
    #[arg(long, default_value = "0:95:5", value_parser = parse_range)]
    range: DtRange,
    /// Also score the training anchors at each offset.
    #[arg(long)]
    include_train: bool,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Serialize)]
struct TraceArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    ckpt: PathBuf,
    /// Defaults to the offset the checkpoint was trained with.
    #[command(flatten)]
    offset: OffsetArgs,
    #[arg(long, default_value_t = 64)]
    batch: usize,
    #[arg(long)]
    out: PathBuf,
}

fn parse_size(s: &str) -> Result<(usize, usize), String> {
    let (h, w) = s.split_once(['x', 'X']).ok_or_else(|| format!("expected HEIGHTxWIDTH, got `{s}`"))?;
    let h: usize = h.parse().map_err(|_| format!("bad height `{h}`"))?;
    let w: usize = w.parse().map_err(|_| format!("bad width `{w}`"))?;
    if h == 0 || w == 0 {
        return Err("frame size must be positive".into());
    }
    Ok((h, w))
}

#[derive(Clone, Serialize)]
#[serde(transparent)]
struct DtRange(Vec<usize>);

fn parse_range(s: &str) -> Result<DtRange, String> {
    let parts: Vec<&str> = s.split(':').collect();
    let [start, end, step] = parts[..] else {
        return Err(format!("expected START:END:STEP, got `{s}`"));
    };
    let num = |v: &str| v.parse::<usize>().map_err(|_| format!("bad number `{v}` in `{s}`"));
    let (start, end, step) = (num(start)?, num(end)?, num(step)?);
    if step == 0 || end < start {
        return Err(format!("range `{s}` is empty or has a zero step"));
    }
    Ok(DtRange((start..=end).step_by(step).collect()))
}

/// Map an error chain to the documented exit code.
fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if let Some(e) = cause.downcast_ref::<Error>() {
            return match e {
                Error::Usage(_) => 2,
                Error::Config(_) => 3,
                Error::MissingColumn(_)
                | Error::Format(_)
                | Error::Ingestion { .. }
                | Error::EmptySequence(_)
                | Error::EmptyBatch(_) => 4,
                Error::Numeric(_) | Error::Diverged { .. } => 5,
                Error::Io { .. } => 6,
            };
        }
        if cause.downcast_ref::<std::io::Error>().is_some() {
            return 6;
        }
        if cause.downcast_ref::<serde_json::Error>().is_some() {
            return 3;
        }
    }
    1
}

fn cache_bytes() -> Result<usize> {
    match std::env::var("COOPSTEER_CACHE_BYTES") {
        Ok(v) => v
            .trim()
            .parse()
            .map_err(|_| Error::Config(format!("COOPSTEER_CACHE_BYTES must be a byte count, got `{v}`")).into()),
        Err(_) => Ok(DEFAULT_CACHE_BYTES),
    }
}

fn load_dataset(path: &Path) -> Result<FrameSequence> {
    let (csv, root) = resolve_dataset(path);
    Ok(load_udacity_csv(&csv, &root, cache_bytes()?)?)
}

fn resolve_offset(offset: &OffsetArgs, seq: &FrameSequence, default: usize) -> Result<usize> {
    match (offset.dt, offset.dt_seconds) {
        (Some(dt), _) => Ok(dt),
        (None, Some(secs)) => {
            let rate = seq
                .frame_rate_hz()
                .ok_or_else(|| Error::Config("--dt-seconds needs at least two distinct timestamps".into()))?;
            if !(secs >= 0.0 && secs.is_finite()) {
                return Err(Error::Config(format!("--dt-seconds {secs} must be non-negative")).into());
            }
            let dt = (secs * rate).round() as usize;
            log::info!("{secs} s at {rate:.3} Hz is {dt} frames");
            Ok(dt)
        }
        (None, None) => Ok(default),
    }
}

fn train_config(args: &TrainingArgs, seq: &FrameSequence, source: &Path) -> Result<(ModelConfig, TrainConfig)> {
    let dt = resolve_offset(&args.offset, seq, 30)?;
    let (h, w) = seq.frame_size();
    let model = ModelConfig::new(args.arch, args.x, h, w);
    let cfg = TrainConfig {
        epochs: args.epochs,
        batch_size: args.batch,
        adam: AdamConfig {
            lr: args.lr,
            ..AdamConfig::default()
        },
        seed: args.seed,
        x: args.x,
        dt,
        train_fraction: args.train_fraction,
        augment: (!args.no_augment).then(AugmentConfig::default),
        source: source.display().to_string(),
    };
    cfg.validate()?;
    model.validate()?;
    Ok((model, cfg))
}

struct Loaded {
    model: Model,
    train: TrainConfig,
}

fn load_checkpoint(path: &Path) -> Result<Loaded> {
    if !path.is_file() {
        return Err(Error::Usage(format!("checkpoint {} does not exist", path.display())).into());
    }
    let ckpt = checkpoint::load(path)?;
    let train: TrainConfig = serde_json::from_value(ckpt.extra["train_config"].clone())
        .map_err(|e| Error::Format(format!("{}: missing training settings: {e}", path.display())))?;
    Ok(Loaded { model: ckpt.model, train })
}

fn check_frame_size(model: &Model, seq: &FrameSequence) -> Result<()> {
    let cfg = model.config();
    if seq.frame_size() != (cfg.input_h, cfg.input_w) {
        return Err(Error::Config(format!(
            "dataset frames are {}x{}, checkpoint expects {}x{}",
            seq.frame_size().0,
            seq.frame_size().1,
            cfg.input_h,
            cfg.input_w
        ))
        .into());
    }
    Ok(())
}

fn sweep_plot(out: &Path, table: &SweepTable) -> Result<()> {
    let name = table.parameter.name();
    write_plot_series(
        &out.join(format!("plot_rmse_vs_{name}.dat")),
        &[name, "rmse_train", "rmse_val"],
        table.rows.iter().map(|r| {
            vec![
                r.value as f64,
                r.rmse_train.unwrap_or(f64::NAN),
                r.rmse_val.unwrap_or(f64::NAN),
            ]
        }),
    )?;
    Ok(())
}

fn gen_synth(args: &GenSynthArgs) -> Result<()> {
    if !(0.0..=1.0).contains(&args.glare) {
        return Err(Error::Config(format!("--glare {} must lie in [0, 1]", args.glare)).into());
    }
    let cfg = SynthConfig {
        glare_prob: args.glare,
        glare_scope: GlareScope::AllViews,
        ..SynthConfig::new(args.frames, args.seed, args.size.0, args.size.1)
    };
    let seq = synth_generate(&cfg);
    let csv = export_csv_dataset(&seq, &args.out)?;
    log::info!("wrote {} frames to {}", seq.len(), csv.display());
    Ok(())
}

fn cmd_train(args: &TrainArgs) -> Result<()> {
    let seq = load_dataset(&args.data)?;
    let (mc, cfg) = train_config(&args.training, &seq, &args.data)?;
    let model = Model::new(mc, cfg.seed)?;
    log::info!("{} model with {} parameters", model.arch(), model.count_params());
    let ckpt = args.out.join("model.ckpt");
    let outcome = train_with(model, &seq, &cfg, |m, opt, record| {
        checkpoint::save(&ckpt, m, Some(opt), &json!({ "train_config": cfg, "epoch": record.epoch }))
    });
    let outcome = match outcome {
        Err(e @ Error::Diverged { .. }) if ckpt.is_file() => {
            return Err(anyhow::Error::new(e).context(format!("last good checkpoint kept at {}", ckpt.display())));
        }
        other => other?,
    };
    let report = &outcome.report;
    write_json(&args.out.join("metrics.json"), &ResultDocument::Metrics { report: report.clone() })?;
    write_plot_series(
        &args.out.join("plot_loss.dat"),
        &["epoch", "train_loss", "val_loss"],
        report
            .history
            .iter()
            .map(|r| vec![r.epoch as f64, r.train_loss, r.val_loss.unwrap_or(f64::NAN)]),
    )?;
    log::info!(
        "best epoch {}: train rmse {:.6}, val rmse {}",
        report.best_epoch,
        report.train.rmse,
        report.val.map_or("n/a".into(), |m| format!("{:.6}", m.rmse))
    );
    Ok(())
}

fn cmd_eval(args: &EvalArgs) -> Result<()> {
    let loaded = load_checkpoint(&args.ckpt)?;
    let seq = load_dataset(&args.data)?;
    check_frame_size(&loaded.model, &seq)?;
    let (train_w, val_w) = split_for(&seq, loaded.model.config(), &loaded.train)?;
    let batch = loaded.train.batch_size;
    let train = evaluate(&loaded.model, &seq, &train_w, batch)?;
    let val = if val_w.is_empty() { None } else { Some(evaluate(&loaded.model, &seq, &val_w, batch)?) };
    write_json(
        &args.out.join("metrics.json"),
        &ResultDocument::Evaluation {
            config: json!({ "model": loaded.model.config(), "train_config": loaded.train }),
            train,
            val,
        },
    )?;
    log::info!("train rmse {:.6}, val rmse {}", train.rmse, val.map_or("n/a".into(), |m| format!("{:.6}", m.rmse)));
    Ok(())
}

fn cmd_sweep_x(args: &SweepXArgs, jobs: usize) -> Result<()> {
    let seq = load_dataset(&args.data)?;
    let (mc, cfg) = train_config(&args.training, &seq, &args.data)?;
    let table = sweep_x(&seq, &mc, &cfg, &args.values, jobs)?;
    write_sweep_csv(&args.out.join("sweep.csv"), &table)?;
    write_json(
        &args.out.join("sweep.json"),
        &ResultDocument::Sweep {
            config: json!({ "model": mc, "train_config": cfg, "values": args.values }),
            table: table.clone(),
        },
    )?;
    sweep_plot(&args.out, &table)
}

fn cmd_sweep_dt(args: &SweepDtArgs, jobs: usize) -> Result<()> {
    let loaded = load_checkpoint(&args.ckpt)?;
    let seq = load_dataset(&args.data)?;
    check_frame_size(&loaded.model, &seq)?;
    let cfg = DtSweepConfig {
        train: loaded.train,
        values: args.range.0.clone(),
        include_train: args.include_train,
    };
    let table = sweep_dt(&seq, &loaded.model, &cfg, jobs)?;
    write_sweep_csv(&args.out.join("sweep.csv"), &table)?;
    write_json(
        &args.out.join("sweep.json"),
        &ResultDocument::Sweep {
            config: json!({ "model": loaded.model.config(), "sweep": cfg }),
            table: table.clone(),
        },
    )?;
    sweep_plot(&args.out, &table)
}

fn cmd_trace(args: &TraceArgs) -> Result<()> {
    let loaded = load_checkpoint(&args.ckpt)?;
    let seq = load_dataset(&args.data)?;
    check_frame_size(&loaded.model, &seq)?;
    let dt = resolve_offset(&args.offset, &seq, loaded.train.dt)?;
    let trace = error_trace(&loaded.model, &seq, loaded.train.x, dt, args.batch)?;
    write_trace_csv(&args.out.join("trace.csv"), &trace)?;
    write_json(
        &args.out.join("trace.json"),
        &ResultDocument::Trace {
            config: json!({ "model": loaded.model.config(), "x": loaded.train.x, "dt": dt }),
            trace: trace.clone(),
        },
    )?;
    write_plot_series(
        &args.out.join("plot_trace.dat"),
        &["index", "label", "prediction", "error"],
        trace.rows.iter().map(|r| vec![r.index as f64, r.label, r.prediction, r.error]),
    )?;
    log::info!(
        "max error {:.6} at frame {}, min error {:.6} at frame {}",
        trace.max.error,
        trace.max.index,
        trace.min.error,
        trace.min.index
    );
    Ok(())
}

fn command_outputs(cli: &Cli) -> (&'static str, &Path, serde_json::Value, Option<u64>, Vec<&'static str>) {
    fn to_json(v: &impl Serialize) -> serde_json::Value {
        serde_json::to_value(v).expect("flag values serialize")
    }
    match &cli.command {
        Command::GenSynth(a) => ("gen-synth", &a.out, to_json(a), Some(a.seed), vec![coopsteer::data::DATASET_CSV, "center/"]),
        Command::Train(a) => (
            "train",
            &a.out,
            to_json(a),
            Some(a.training.seed),
            vec!["model.ckpt", "metrics.json", "plot_loss.dat"],
        ),
        Command::Eval(a) => ("eval", &a.out, to_json(a), None, vec!["metrics.json"]),
        Command::SweepX(a) => (
            "sweep-x",
            &a.out,
            to_json(a),
            Some(a.training.seed),
            vec!["sweep.csv", "sweep.json", "plot_rmse_vs_x.dat"],
        ),
        Command::SweepDt(a) => ("sweep-dt", &a.out, to_json(a), None, vec!["sweep.csv", "sweep.json", "plot_rmse_vs_dt.dat"]),
        Command::Trace(a) => ("trace", &a.out, to_json(a), None, vec!["trace.csv", "trace.json", "plot_trace.dat"]),
    }
}

fn run(cli: &Cli) -> Result<()> {
    let (name, out, config, seed, outputs) = command_outputs(cli);
    if cli.jobs == 0 {
        bail!(Error::Config("--jobs must be at least 1".into()));
    }
    std::fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    let mut manifest = Manifest::start(name, config, seed, out, &outputs);
    manifest.write(out)?;
    let result = match &cli.command {
        Command::GenSynth(a) => gen_synth(a),
        Command::Train(a) => cmd_train(a),
        Command::Eval(a) => cmd_eval(a),
        Command::SweepX(a) => cmd_sweep_x(a, cli.jobs),
        Command::SweepDt(a) => cmd_sweep_dt(a, cli.jobs),
        Command::Trace(a) => cmd_trace(a),
    };
    manifest.finish(result.as_ref().err().map(|e| format!("{e:#}")));
    manifest.write(out)?;
    result
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let args = match config::merge_config_file(std::env::args_os().collect()) {
        Ok(args) => args,
        Err(e) => {
            eprintln!("error: {e:#}");
            return ExitCode::from(3);
        }
    };
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
