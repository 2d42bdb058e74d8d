//! Command-line interface: `stats`, `select`, `frame`, `train`, `eval`,
//! and `bench`.
//!
//! Pipeline stages communicate through files (manifest -> frames -> model ->
//! reports) so each stage is independently runnable and cacheable. A
//! pipeline config file (`--config` or `AUSCULT_CONFIG`) supplies flag
//! defaults; explicit flags override it.

use std::collections::BTreeMap;
use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use auscult_core::audio::{extract_frames, frame_count, resample, AudioFrame};
use auscult_core::dataset::{
    compute_stats, select_subset, split_subjects, Device, Diagnosis, SplitSpec, StatsOptions,
};
use auscult_core::eval::evaluate;
use auscult_core::model::{build_model, ModelConfig};
use auscult_core::nn::ModelGraph;
use auscult_core::tensor::Tensor;
use auscult_core::train::{examples_from_frames, train, OptimizerKind, TrainConfig};

use crate::bench::{emit_table, measure_latency, read_power_sensor, BenchConfig, BenchReport};
use crate::configfile::{load_model_config, load_pipeline_defaults, PipelineDefaults, CONFIG_ENV_VAR};
use crate::error::{AppError, Result};
use crate::fixtures;
use crate::framefile::{read_frames, write_frames, FramesMeta};
use crate::manifest::{
    demographics_from_manifest, load_demographics, load_manifest, write_manifest, Manifest,
};
use crate::modelfile::{load_model, save_model};
use crate::report::{format_eval_table, write_history_csv, EvalArtifact};
use crate::wav::decode_wav;

#[derive(Parser, Debug)]
#[command(
    name = "auscult",
    version,
    about = "Lung-sound classification pipeline: dataset statistics, subset selection, frame augmentation, training, evaluation, and deployment benchmarking",
    after_help = "Exit codes: 1 usage error, 2 data error, 3 numeric failure."
)]
pub struct Cli {
    /// Pipeline config file supplying flag defaults (or set AUSCULT_CONFIG).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Seed for every stochastic step of the selected command.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Print per-recording and per-epoch progress.
    #[arg(long, global = true, default_value_t = false)]
    pub verbose: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum OutputFormat {
    Text,
    Json,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Print dataset statistics: class/age/device breakdowns, durations,
    /// and respiratory-cycle counts.
    Stats(StatsArgs),
    /// Filter to one device, drop classes, and write a subject-exclusive
    /// train/test split.
    Select(SelectArgs),
    /// Cut recordings into overlapping fixed-length frames and persist them.
    Frame(FrameArgs),
    /// Train a classifier on persisted frames.
    Train(TrainArgs),
    /// Evaluate a trained model: confusion matrix, per-class sensitivity,
    /// accuracy, at frame and subject level.
    Eval(EvalArgs),
    /// Measure single-frame inference latency and derive deployment metrics.
    Bench(BenchArgs),
    /// Generate the bundled synthetic fixture database (for tests and demos).
    #[command(hide = true)]
    GenFixture(GenFixtureArgs),
}

#[derive(Args, Debug)]
pub struct StatsArgs {
    /// Dataset manifest (tab- or comma-separated; see the README).
    #[arg(long)]
    pub manifest: PathBuf,
    /// Age-group width in years (10 groups, last open-ended).
    #[arg(long)]
    pub age_group_width: Option<f64>,
    /// Accept an empty manifest and print all-zero statistics.
    #[arg(long, default_value_t = false)]
    pub allow_empty: bool,
    #[arg(long, value_enum, default_value_t = OutputFormat::Text)]
    pub format: OutputFormat,
}

#[derive(Args, Debug)]
pub struct SelectArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    /// Device whose recordings are kept.
    #[arg(long)]
    pub device: Option<String>,
    /// Comma-separated class tokens to drop.
    #[arg(long, value_delimiter = ',')]
    pub drop_classes: Option<Vec<String>>,
    /// Fraction of each class's subjects assigned to the test side.
    #[arg(long)]
    pub test_fraction: Option<f64>,
    /// Output path for the filtered manifest.
    #[arg(long)]
    pub out_manifest: PathBuf,
    /// Output path for the split (JSON).
    #[arg(long)]
    pub out_split: PathBuf,
}

#[derive(Args, Debug)]
pub struct FrameArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    /// Split file from `select`; when given, train and test frame sets are
    /// written separately.
    #[arg(long)]
    pub split: Option<PathBuf>,
    /// Frame window in seconds.
    #[arg(long)]
    pub window: Option<f64>,
    /// Frame stride in seconds.
    #[arg(long)]
    pub stride: Option<f64>,
    /// Pipeline sample rate; recordings are resampled to it before framing.
    #[arg(long)]
    pub sample_rate: Option<u32>,
    /// Directory receiving `frames_{train,test,all}.{bin,tsv,meta.json}`.
    #[arg(long)]
    pub out_dir: PathBuf,
}

#[derive(Args, Debug)]
pub struct TrainArgs {
    /// Frame-set prefix written by `frame` (e.g. `out/frames_train`).
    #[arg(long)]
    pub frames: PathBuf,
    /// Model config (TOML); see `configs/`.
    #[arg(long)]
    pub model_config: PathBuf,
    /// Output model file.
    #[arg(long)]
    pub out: PathBuf,
    /// Manifest for demographic lookups (required for fusion models).
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    /// Demographics override file (subject_id/age_years/sex), e.g. from an
    /// external estimator.
    #[arg(long)]
    pub demographics: Option<PathBuf>,
    /// Loss-history CSV output path.
    #[arg(long)]
    pub history: Option<PathBuf>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub learning_rate: Option<f64>,
    #[arg(long)]
    pub lr_decay: Option<f64>,
    #[arg(long, value_enum)]
    pub optimizer: Option<OptimizerArg>,
    /// Early-stop patience in epochs (0 disables early stopping).
    #[arg(long)]
    pub patience: Option<usize>,
    /// Fraction of train subjects held out for validation.
    #[arg(long)]
    pub val_fraction: Option<f64>,
    /// Weight the loss by inverse class frequency.
    #[arg(long, default_value_t = false)]
    pub class_weights: bool,
    /// Skip per-frame peak normalization of model inputs.
    #[arg(long, default_value_t = false)]
    pub no_normalize: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum OptimizerArg {
    Sgd,
    Adam,
}

impl From<OptimizerArg> for OptimizerKind {
    fn from(v: OptimizerArg) -> Self {
        match v {
            OptimizerArg::Sgd => OptimizerKind::Sgd,
            OptimizerArg::Adam => OptimizerKind::Adam,
        }
    }
}

#[derive(Args, Debug)]
pub struct EvalArgs {
    /// Frame-set prefix written by `frame`.
    #[arg(long)]
    pub frames: PathBuf,
    /// Trained model file.
    #[arg(long)]
    pub model: PathBuf,
    /// Manifest for demographic lookups (required for fusion models).
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    /// Demographics override file.
    #[arg(long)]
    pub demographics: Option<PathBuf>,
    /// Write the structured report (JSON) here.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = OutputFormat::Text)]
    pub format: OutputFormat,
    /// Skip per-frame peak normalization (must match training).
    #[arg(long, default_value_t = false)]
    pub no_normalize: bool,
}

#[derive(Args, Debug)]
pub struct BenchArgs {
    /// Trained model file.
    #[arg(long)]
    pub model: PathBuf,
    /// Configuration label for the report (e.g. CPU name and frequency).
    #[arg(long)]
    pub label: Option<String>,
    /// Average power draw in milliwatts.
    #[arg(long, conflicts_with = "power_sensor")]
    pub power_mw: Option<f64>,
    /// Sensor file holding one line of integer milliwatts.
    #[arg(long)]
    pub power_sensor: Option<PathBuf>,
    /// Measured runs (at least 10).
    #[arg(long)]
    pub runs: Option<usize>,
    #[arg(long)]
    pub warmup: Option<usize>,
    /// Write the structured report (JSON) here.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = OutputFormat::Text)]
    pub format: OutputFormat,
}

#[derive(Args, Debug)]
pub struct GenFixtureArgs {
    #[arg(long)]
    pub out_dir: PathBuf,
    #[arg(long, default_value_t = 1000)]
    pub sample_rate: u32,
}

/// Parses argv and runs the selected command. Returns the process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => crate::error::EXIT_USAGE,
            };
            // clap already formats help/usage text.
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

struct Globals {
    seed: Option<u64>,
    verbose: bool,
}

fn dispatch(cli: Cli) -> Result<()> {
    let defaults = match cli
        .config
        .or_else(|| std::env::var_os(CONFIG_ENV_VAR).map(PathBuf::from))
    {
        Some(path) => load_pipeline_defaults(path)?,
        None => PipelineDefaults::default(),
    };
    let globals = Globals {
        seed: cli.seed,
        verbose: cli.verbose,
    };
    match cli.command {
        Command::Stats(args) => cmd_stats(args, &defaults),
        Command::Select(args) => cmd_select(args, &defaults, &globals),
        Command::Frame(args) => cmd_frame(args, &defaults, &globals),
        Command::Train(args) => cmd_train(args, &defaults, &globals),
        Command::Eval(args) => cmd_eval(args),
        Command::Bench(args) => cmd_bench(args, &defaults, &globals),
        Command::GenFixture(args) => {
            fixtures::table1_fixture(&args.out_dir, args.sample_rate)?;
            println!("fixture written to {}", args.out_dir.display());
            Ok(())
        }
    }
}

fn fmt_seconds(v: f64) -> String {
    if (v - v.round()).abs() < 1e-9 {
        format!("{:.0}", v)
    } else {
        format!("{v:.1}")
    }
}

fn cmd_stats(args: StatsArgs, defaults: &PipelineDefaults) -> Result<()> {
    let manifest = load_manifest(&args.manifest)?;
    let opts = StatsOptions {
        age_group_width_years: args
            .age_group_width
            .or(defaults.stats.age_group_width_years)
            .unwrap_or(10.0),
        allow_empty: args.allow_empty,
    };
    let stats = compute_stats(&manifest.recordings(), &opts)?;
    match args.format {
        OutputFormat::Json => {
            println!(
                "{}",
                serde_json::to_string_pretty(&stats)
                    .map_err(|e| AppError::Usage(format!("serializing stats: {e}")))?
            );
        }
        OutputFormat::Text => {
            println!(
                "Subjects: {}   Recordings: {}   Total duration: {} s",
                stats.total_subjects,
                stats.total_recordings,
                fmt_seconds(stats.total_duration_s())
            );
            println!();
            println!("{:<16} {:>8} {:>13} {:>7}", "Class", "Subjects", "Duration (s)", "Cycles");
            for diag in Diagnosis::ALL {
                let Some(&count) = stats.class_counts.get(&diag) else {
                    continue;
                };
                println!(
                    "{:<16} {:>8} {:>13} {:>7}",
                    diag.token(),
                    count,
                    fmt_seconds(*stats.class_durations_s.get(&diag).unwrap_or(&0.0)),
                    stats.class_cycle_counts.get(&diag).unwrap_or(&0),
                );
            }
            println!();
            println!(
                "Class x age group (width {} years, last open-ended):",
                opts.age_group_width_years
            );
            for (diag, row) in &stats.class_by_age_group {
                let cells: Vec<String> = row.iter().map(|c| format!("{c:>3}")).collect();
                println!("{:<16} {}", diag.token(), cells.join(" "));
            }
            println!();
            println!("Class x device (subjects):");
            for (diag, devices) in &stats.class_by_device {
                let cells: Vec<String> = devices
                    .iter()
                    .map(|(dev, n)| format!("{}: {}", dev.token(), n))
                    .collect();
                println!("{:<16} {}", diag.token(), cells.join("  "));
            }
        }
    }
    Ok(())
}

fn parse_device(token: &str) -> Result<Device> {
    Device::from_token(token)
        .ok_or_else(|| AppError::Usage(format!("unknown device '{token}' (expected one of {:?})",
            Device::ALL.map(|d| d.token()))))
}

fn parse_classes(tokens: &[String]) -> Result<BTreeSet<Diagnosis>> {
    tokens
        .iter()
        .filter(|t| !t.is_empty())
        .map(|t| {
            Diagnosis::from_token(t)
                .ok_or_else(|| AppError::Usage(format!("unknown class token '{t}'")))
        })
        .collect()
}

fn cmd_select(args: SelectArgs, defaults: &PipelineDefaults, globals: &Globals) -> Result<()> {
    let manifest = load_manifest(&args.manifest)?;
    let device_token = args
        .device
        .or_else(|| defaults.select.device.clone())
        .unwrap_or_else(|| "Meditron".to_string());
    let device = parse_device(&device_token)?;
    let drop_tokens = args
        .drop_classes
        .or_else(|| defaults.select.drop_classes.clone())
        .unwrap_or_else(|| vec!["Asthma".into(), "Pneumonia".into(), "LRTI".into()]);
    let drop = parse_classes(&drop_tokens)?;
    let test_fraction = args
        .test_fraction
        .or(defaults.select.test_fraction)
        .unwrap_or(0.19);
    let seed = globals.seed.or(defaults.select.seed).unwrap_or(0);

    let selected = select_subset(&manifest.recordings(), device, &drop)?;
    let kept: Vec<_> = manifest
        .entries
        .iter()
        .filter(|e| e.meta.device == device && !drop.contains(&e.meta.diagnosis))
        .cloned()
        .collect();
    debug_assert_eq!(kept.len(), selected.len());

    let split = split_subjects(&selected, test_fraction, seed)?;
    write_manifest(&args.out_manifest, &kept)?;
    let json = serde_json::to_string_pretty(&split)
        .map_err(|e| AppError::format(&args.out_split, format!("{e}")))?;
    std::fs::write(&args.out_split, json).map_err(|e| AppError::io(&args.out_split, e))?;
    println!(
        "kept {} of {} recordings ({} train / {} test subjects) -> {}, {}",
        kept.len(),
        manifest.entries.len(),
        split.train_subjects.len(),
        split.test_subjects.len(),
        args.out_manifest.display(),
        args.out_split.display(),
    );
    Ok(())
}

fn load_split(path: &Path) -> Result<SplitSpec> {
    let text = std::fs::read_to_string(path).map_err(|e| AppError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| AppError::format(path, format!("{e}")))
}

fn cmd_frame(args: FrameArgs, defaults: &PipelineDefaults, globals: &Globals) -> Result<()> {
    let manifest = load_manifest(&args.manifest)?;
    if manifest.entries.is_empty() {
        return Err(AppError::Usage("manifest has no rows to frame".into()));
    }
    let window_s = args.window.or(defaults.frame.window_s).unwrap_or(5.0);
    let stride_s = args.stride.or(defaults.frame.stride_s).unwrap_or(1.0);
    let sample_rate = args
        .sample_rate
        .or(defaults.frame.sample_rate_hz)
        .unwrap_or(44_100);
    if !(window_s > 0.0) || !(stride_s > 0.0) {
        return Err(AppError::Usage("window and stride must be positive".into()));
    }
    std::fs::create_dir_all(&args.out_dir).map_err(|e| AppError::io(&args.out_dir, e))?;

    let split = args.split.as_deref().map(load_split).transpose()?;
    let classes: Vec<Diagnosis> = match &split {
        Some(s) => s.classes.clone(),
        None => {
            let present: BTreeSet<Diagnosis> =
                manifest.entries.iter().map(|e| e.meta.diagnosis).collect();
            Diagnosis::ALL
                .iter()
                .copied()
                .filter(|d| present.contains(d))
                .collect()
        }
    };
    let meta = FramesMeta {
        sample_rate_hz: sample_rate,
        window_s,
        stride_s,
        classes: classes.iter().map(|d| d.token().to_string()).collect(),
    };

    let mut buckets: BTreeMap<&'static str, Vec<AudioFrame>> = BTreeMap::new();
    for entry in &manifest.entries {
        let side = match &split {
            None => "all",
            Some(s) if s.is_train(&entry.meta.subject_id) => "train",
            Some(s) if s.is_test(&entry.meta.subject_id) => "test",
            Some(_) => {
                eprintln!(
                    "warning: subject '{}' not in the split, skipping its recordings",
                    entry.meta.subject_id
                );
                continue;
            }
        };
        let decoded = decode_wav(&entry.meta.audio_path)?;
        let wave = resample(&decoded, sample_rate)?;
        let outcome = extract_frames(&wave, &entry.meta, window_s, stride_s);
        if outcome.window_exceeds_duration {
            eprintln!(
                "warning: recording '{}' ({} s) is shorter than the {window_s} s window",
                entry.meta.audio_path, entry.meta.duration_s
            );
        }
        if globals.verbose {
            println!(
                "{}: {} -> {} frames ({side})",
                entry.meta.subject_id,
                entry.raw_audio_path,
                outcome.frames.len()
            );
        }
        buckets.entry(side).or_default().extend(outcome.frames);
    }

    if buckets.is_empty() {
        return Err(AppError::Usage(
            "no recordings matched the split; nothing to frame".into(),
        ));
    }

    // Per-recording counts must sum to the closed-form totals.
    for (side, frames) in &buckets {
        let expected: usize = manifest
            .entries
            .iter()
            .filter(|e| match &split {
                None => true,
                Some(s) => match *side {
                    "train" => s.is_train(&e.meta.subject_id),
                    "test" => s.is_test(&e.meta.subject_id),
                    _ => false,
                },
            })
            .map(|e| frame_count(e.meta.duration_s, window_s, stride_s).frames)
            .sum();
        debug_assert_eq!(frames.len(), expected);
    }

    for (side, frames) in &buckets {
        let prefix = args.out_dir.join(format!("frames_{side}"));
        write_frames(&prefix, frames, &meta)?;
        println!("{} frames written ({side}) -> {}", frames.len(), prefix.display());
    }
    Ok(())
}

fn config_classes(cfg: &ModelConfig) -> Result<Vec<Diagnosis>> {
    cfg.classes
        .iter()
        .map(|t| {
            Diagnosis::from_token(t).ok_or_else(|| {
                AppError::Usage(format!(
                    "model config class '{t}' is not a known diagnosis token"
                ))
            })
        })
        .collect()
}

fn gather_demographics(
    cfg_include_gender: bool,
    manifest: Option<&Manifest>,
    override_path: Option<&Path>,
) -> Result<BTreeMap<String, auscult_core::model::DemographicVector>> {
    let mut demos = match manifest {
        Some(m) => demographics_from_manifest(m, cfg_include_gender)?,
        None => BTreeMap::new(),
    };
    if let Some(path) = override_path {
        for (subject, demo) in load_demographics(path, cfg_include_gender)? {
            demos.insert(subject, demo);
        }
    }
    if demos.is_empty() {
        return Err(AppError::Usage(
            "fusion model needs demographics: pass --manifest and/or --demographics".into(),
        ));
    }
    Ok(demos)
}

fn check_frame_geometry(cfg: &ModelConfig, meta: &FramesMeta) -> Result<()> {
    if meta.sample_rate_hz != cfg.sample_rate_hz || (meta.window_s - cfg.window_s).abs() > 1e-9 {
        return Err(AppError::Usage(format!(
            "frames were cut at {} Hz with a {} s window; the model config expects {} Hz / {} s",
            meta.sample_rate_hz, meta.window_s, cfg.sample_rate_hz, cfg.window_s
        )));
    }
    Ok(())
}

fn cmd_train(args: TrainArgs, defaults: &PipelineDefaults, globals: &Globals) -> Result<()> {
    let (frames, frames_meta) = read_frames(&args.frames)?;
    let cfg = load_model_config(&args.model_config)?;
    check_frame_geometry(&cfg, &frames_meta)?;
    let classes = config_classes(&cfg)?;

    let manifest = args.manifest.as_deref().map(load_manifest).transpose()?;
    let demos = if cfg.fusion.enabled {
        Some(gather_demographics(
            cfg.fusion.include_gender,
            manifest.as_ref(),
            args.demographics.as_deref(),
        )?)
    } else {
        None
    };

    let normalize = !args.no_normalize && defaults.train.normalize.unwrap_or(true);
    let examples = examples_from_frames(&frames, demos.as_ref(), &classes, normalize)?;

    let train_cfg = TrainConfig {
        batch_size: args
            .batch_size
            .or(defaults.train.batch_size)
            .unwrap_or(32),
        epochs: args.epochs.or(defaults.train.epochs).unwrap_or(100),
        learning_rate: args
            .learning_rate
            .or(defaults.train.learning_rate)
            .unwrap_or(1e-3),
        lr_decay: args.lr_decay.or(defaults.train.lr_decay).unwrap_or(1.0),
        optimizer: args
            .optimizer
            .map(OptimizerKind::from)
            .or(defaults.train.optimizer)
            .unwrap_or(OptimizerKind::Adam),
        seed: globals.seed.or(defaults.train.seed).unwrap_or(0),
        patience: args.patience.or(defaults.train.patience).unwrap_or(10),
        val_fraction: args
            .val_fraction
            .or(defaults.train.val_fraction)
            .unwrap_or(0.15),
        class_weights: args.class_weights || defaults.train.class_weights.unwrap_or(false),
    };

    let build = build_model::<f32>(&cfg)?;
    let mut graph = build.graph;
    graph.init_params(train_cfg.seed);
    println!(
        "training {} ({} params, {:.3} GFLOPs/inference) on {} frames",
        if cfg.fusion.enabled { "fusion model" } else { "audio model" },
        build.cost.total_params,
        build.cost.total_flops as f64 / 1e9,
        examples.len(),
    );
    let outcome = train(graph, &examples, &train_cfg)?;
    if globals.verbose {
        for rec in &outcome.history {
            println!(
                "epoch {:>3}: train loss {:.6}{}",
                rec.epoch,
                rec.train_loss,
                rec.val_loss
                    .map(|v| format!(", val loss {v:.6}"))
                    .unwrap_or_default()
            );
        }
    }
    save_model(&outcome.graph, &args.out)?;
    if let Some(history_path) = &args.history {
        write_history_csv(history_path, &outcome.history)?;
    }
    let last = outcome.history.last().expect("at least one epoch");
    println!(
        "done after {} epochs{}; final train loss {:.6}{} -> {}",
        outcome.history.len(),
        if outcome.stopped_early { " (early stop)" } else { "" },
        last.train_loss,
        last.val_accuracy
            .map(|a| format!(", val accuracy {:.1}%", a * 100.0))
            .unwrap_or_default(),
        args.out.display(),
    );
    Ok(())
}

fn cmd_eval(args: EvalArgs) -> Result<()> {
    let graph = load_model(&args.model)?;
    let (frames, frames_meta) = read_frames(&args.frames)?;
    let classes: Vec<Diagnosis> = frames_meta
        .classes
        .iter()
        .map(|t| {
            Diagnosis::from_token(t).ok_or_else(|| {
                AppError::Usage(format!("frame set class '{t}' is not a known diagnosis token"))
            })
        })
        .collect::<Result<_>>()?;
    if classes.len() != graph.output_shape()[0] {
        return Err(AppError::Usage(format!(
            "model predicts {} classes but the frame set lists {}",
            graph.output_shape()[0],
            classes.len()
        )));
    }
    let demos = if graph.aux_ports().is_empty() {
        None
    } else {
        let manifest = args.manifest.as_deref().map(load_manifest).transpose()?;
        let dim = *graph.aux_ports().values().next().expect("one port");
        let include_gender = dim > auscult_core::dataset::AGE_GROUPS;
        Some(gather_demographics(
            include_gender,
            manifest.as_ref(),
            args.demographics.as_deref(),
        )?)
    };
    let examples = examples_from_frames(&frames, demos.as_ref(), &classes, !args.no_normalize)?;
    let outcome = evaluate(&graph, &examples, frames_meta.classes.clone())?;
    let artifact = EvalArtifact::new(
        args.model.display().to_string(),
        &graph.cost(),
        outcome,
    );
    match args.format {
        OutputFormat::Text => print!("{}", format_eval_table(&artifact)),
        OutputFormat::Json => println!("{}", artifact.to_json()?),
    }
    if let Some(out) = &args.out {
        std::fs::write(out, artifact.to_json()?).map_err(|e| AppError::io(out, e))?;
        println!("report written to {}", out.display());
    }
    Ok(())
}

fn cmd_bench(args: BenchArgs, defaults: &PipelineDefaults, globals: &Globals) -> Result<()> {
    let graph = load_model(&args.model)?;
    let cost = graph.cost();
    let power_mw = match (&args.power_mw, &args.power_sensor) {
        (Some(mw), _) => Some(*mw),
        (None, Some(path)) => Some(read_power_sensor(path)?),
        (None, None) => defaults.bench.power_mw,
    };
    let cfg = BenchConfig {
        label: args
            .label
            .or_else(|| defaults.bench.label.clone())
            .unwrap_or_else(|| "local".to_string()),
        warmup_runs: args.warmup.or(defaults.bench.warmup_runs).unwrap_or(5),
        measured_runs: args.runs.or(defaults.bench.measured_runs).unwrap_or(30),
        power_mw,
    };
    cfg.validate()?;

    // Synthetic single frame; input preparation stays outside the timer.
    let mut rng = ChaCha8Rng::seed_from_u64(globals.seed.unwrap_or(0));
    let input_shape = graph.input_shape().to_vec();
    let n: usize = input_shape.iter().product();
    let data: Vec<f32> = (0..n).map(|_| rng.random_range(-1.0f32..1.0)).collect();
    let input = Tensor::new(input_shape, data)
        .map_err(|e| AppError::Usage(format!("building bench input: {e}")))?;
    let mut aux = BTreeMap::new();
    for (port, dim) in graph.aux_ports() {
        aux.insert(port.clone(), Tensor::<f32>::zeros(&[*dim]));
    }
    // Validate once so shape errors surface before timing.
    let _ = graph.forward(&input, &aux)?;
    let graph_ref: &ModelGraph<f32> = &graph;
    let stats = measure_latency(&cfg, || {
        let _ = graph_ref
            .forward(&input, &aux)
            .expect("validated before timing");
    })?;

    let report = BenchReport::new(
        cfg.label.clone(),
        stats,
        cost.total_flops,
        cost.convention.clone(),
        power_mw,
    )?;
    match args.format {
        OutputFormat::Text => print!("{}", emit_table(std::slice::from_ref(&report))?),
        OutputFormat::Json => println!("{}", crate::bench::to_json(std::slice::from_ref(&report))?),
    }
    if let Some(out) = &args.out {
        std::fs::write(out, crate::bench::to_json(std::slice::from_ref(&report))?)
            .map_err(|e| AppError::io(out, e))?;
        println!("report written to {}", out.display());
    }
    Ok(())
}
