//! Command-line pipeline: synthetic data generation, self-supervised
//! training, gait-feature extraction, re-identification evaluation, and
//! attention-matrix export. Every command records a manifest from which
//! `rerun` reproduces its outputs exactly.

use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use gaitenc::artifacts;
use gaitenc::attention::AttentionMode;
use gaitenc::error::{GaitError, Result};
use gaitenc::manifest::{manifest_path, RunManifest};
use gaitenc::reid::{
    average_attention, evaluate, extract_features, train_recognizer, FeatureKind,
    RecognizerConfig,
};
use gaitenc::skeldata::{
    assemble, generate_synthetic, load_raw, save_raw, Dataset, GenConfig, SkeletonSequence,
    DEFAULT_DISCARD,
};
use gaitenc::trainer::{load_checkpoint, save_checkpoint, train, Checkpoint, TrainConfig};

#[derive(Parser)]
#[command(name = "gaitenc", version, about = "Self-supervised gait encoding for person re-identification")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic walking-skeleton dataset (JSONL).
    GenData(GenDataArgs),
    /// Train the per-axis encoder-decoder models.
    Train(TrainArgs),
    /// Extract per-step gait features from a trained checkpoint.
    Extract(ExtractArgs),
    /// Train the recognition head on extracted features and report
    /// Rank-1 / CMC / nAUC.
    Evaluate(EvaluateArgs),
    /// Export averaged attention matrices as CSV and PGM heatmaps.
    ExportAttention(ExportAttentionArgs),
    /// Re-execute a previous run from its manifest.
    Rerun(RerunArgs),
}

#[derive(Args)]
struct GenDataArgs {
    /// Generator config (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Output dataset path (JSONL).
    #[arg(long)]
    out: PathBuf,
    /// Overrides the config's seed.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct TrainArgs {
    /// Dataset path (JSONL).
    #[arg(long)]
    dataset: PathBuf,
    /// Training config (JSON); defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output checkpoint path.
    #[arg(long)]
    out: PathBuf,
    /// Loss-curve CSV path (default: <out>.loss.csv).
    #[arg(long)]
    loss_out: Option<PathBuf>,
    /// Attention mode: none, bas, mbas, or las.
    #[arg(long)]
    attention: Option<String>,
    /// Reconstruct in original order instead of reverse order.
    #[arg(long)]
    no_reverse: bool,
    /// Frames per sequence (even).
    #[arg(long)]
    f: Option<usize>,
    /// Hidden units per recurrent layer.
    #[arg(long)]
    k: Option<usize>,
    /// Locality window radius.
    #[arg(long = "D")]
    window_radius: Option<usize>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct ExtractArgs {
    /// Dataset path (JSONL).
    #[arg(long)]
    dataset: PathBuf,
    /// Trained checkpoint path.
    #[arg(long)]
    checkpoint: PathBuf,
    /// Output features CSV.
    #[arg(long)]
    out: PathBuf,
    /// Feature kind: age or encoded-state.
    #[arg(long, default_value = "age")]
    feature: String,
    /// Which sequences to encode: train, test, or all.
    #[arg(long, default_value = "all")]
    split: String,
}

#[derive(Args)]
struct EvaluateArgs {
    /// Features CSV the recognition head trains on.
    #[arg(long)]
    train_features: PathBuf,
    /// Features CSV to score.
    #[arg(long)]
    test_features: PathBuf,
    /// Output report path (JSON).
    #[arg(long)]
    out: PathBuf,
    /// CMC-curve CSV path (default: <out>.cmc.csv).
    #[arg(long)]
    cmc_out: Option<PathBuf>,
    /// Recognizer config (JSON); defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides recognizer training epochs.
    #[arg(long)]
    epochs: Option<usize>,
    /// Overrides the recognizer init seed.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct ExportAttentionArgs {
    /// Dataset path (JSONL).
    #[arg(long)]
    dataset: PathBuf,
    /// Trained attention-enabled checkpoint.
    #[arg(long)]
    checkpoint: PathBuf,
    /// Files are written as <prefix>.<axis>.csv / .pgm.
    #[arg(long)]
    out_prefix: PathBuf,
    /// Which sequences to average over: train, test, or all.
    #[arg(long, default_value = "train")]
    split: String,
}

#[derive(Args)]
struct RerunArgs {
    /// Manifest of the run to reproduce.
    manifest: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
enum Split {
    Train,
    Test,
    All,
}

impl Split {
    fn parse(s: &str) -> Result<Split> {
        match s {
            "train" => Ok(Split::Train),
            "test" => Ok(Split::Test),
            "all" => Ok(Split::All),
            other => Err(GaitError::Config(format!(
                "unknown split '{other}' (expected train, test, or all)"
            ))),
        }
    }

    fn sequences(self, ds: &Dataset) -> Vec<SkeletonSequence> {
        match self {
            Split::Train => ds.train.clone(),
            Split::Test => ds.test.clone(),
            Split::All => {
                let mut all = ds.train.clone();
                all.extend(ds.test.iter().cloned());
                all
            }
        }
    }
}

// Fully resolved per-command parameter blocks. These are what manifests
// store, and `rerun` deserializes them back to re-execute a run.

#[derive(Serialize, Deserialize)]
struct GenDataRun {
    config: GenConfig,
    out: PathBuf,
}

#[derive(Serialize, Deserialize)]
struct TrainRun {
    config: TrainConfig,
    dataset: PathBuf,
    out: PathBuf,
    loss_out: PathBuf,
}

#[derive(Serialize, Deserialize)]
struct ExtractRun {
    dataset: PathBuf,
    checkpoint: PathBuf,
    feature: FeatureKind,
    split: Split,
    out: PathBuf,
}

#[derive(Serialize, Deserialize)]
struct EvaluateRun {
    config: RecognizerConfig,
    train_features: PathBuf,
    test_features: PathBuf,
    out: PathBuf,
    cmc_out: PathBuf,
}

#[derive(Serialize, Deserialize)]
struct ExportAttentionRun {
    dataset: PathBuf,
    checkpoint: PathBuf,
    split: Split,
    out_prefix: PathBuf,
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            std::process::exit(code);
        }
    };
    if let Err(e) = dispatch(cli.command) {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}

fn dispatch(command: Command) -> Result<()> {
    match command {
        Command::GenData(args) => {
            let mut config: GenConfig = load_json(&args.config)?;
            if let Some(seed) = args.seed {
                config.seed = seed;
            }
            run_gen_data(&GenDataRun { config, out: args.out })
        }
        Command::Train(args) => {
            let mut config: TrainConfig = match &args.config {
                Some(p) => load_json(p)?,
                None => TrainConfig::default(),
            };
            if let Some(mode) = &args.attention {
                config.attention = AttentionMode::parse(mode)?;
            }
            if args.no_reverse {
                config.reverse = false;
            }
            if let Some(f) = args.f {
                config.seq_len = f;
            }
            if let Some(k) = args.k {
                config.hidden = k;
            }
            if let Some(d) = args.window_radius {
                config.window_radius = d;
            }
            if let Some(epochs) = args.epochs {
                config.epochs = epochs;
            }
            if let Some(seed) = args.seed {
                config.seed = seed;
            }
            let loss_out = args
                .loss_out
                .unwrap_or_else(|| derived_path(&args.out, ".loss.csv"));
            run_train(&TrainRun {
                config,
                dataset: args.dataset,
                out: args.out,
                loss_out,
            })
        }
        Command::Extract(args) => run_extract(&ExtractRun {
            dataset: args.dataset,
            checkpoint: args.checkpoint,
            feature: FeatureKind::parse(&args.feature)?,
            split: Split::parse(&args.split)?,
            out: args.out,
        }),
        Command::Evaluate(args) => {
            let mut config: RecognizerConfig = match &args.config {
                Some(p) => load_json(p)?,
                None => RecognizerConfig::default(),
            };
            if let Some(epochs) = args.epochs {
                config.epochs = epochs;
            }
            if let Some(seed) = args.seed {
                config.seed = seed;
            }
            let cmc_out = args
                .cmc_out
                .unwrap_or_else(|| derived_path(&args.out, ".cmc.csv"));
            run_evaluate(&EvaluateRun {
                config,
                train_features: args.train_features,
                test_features: args.test_features,
                out: args.out,
                cmc_out,
            })
        }
        Command::ExportAttention(args) => run_export_attention(&ExportAttentionRun {
            dataset: args.dataset,
            checkpoint: args.checkpoint,
            split: Split::parse(&args.split)?,
            out_prefix: args.out_prefix,
        }),
        Command::Rerun(args) => rerun(&args.manifest),
    }
}

fn rerun(manifest: &Path) -> Result<()> {
    let m = RunManifest::load(manifest)?;
    match m.command.as_str() {
        "gen-data" => run_gen_data(&from_value(m.config)?),
        "train" => run_train(&from_value(m.config)?),
        "extract" => run_extract(&from_value(m.config)?),
        "evaluate" => run_evaluate(&from_value(m.config)?),
        "export-attention" => run_export_attention(&from_value(m.config)?),
        other => Err(GaitError::Data(format!(
            "manifest names unknown command '{other}'"
        ))),
    }
}

fn run_gen_data(run: &GenDataRun) -> Result<()> {
    let started = Instant::now();
    run.config.validate()?;
    let raw = generate_synthetic(&run.config)?;
    save_raw(&run.out, &raw)?;
    let mut m = RunManifest::new("gen-data", run.config.seed, run)?
        .output("dataset", &run.out);
    m.duration_seconds = started.elapsed().as_secs_f64();
    m.save(&manifest_path(&run.out))?;
    println!(
        "wrote {} identities x {} videos ({} joints) to {}",
        raw.identities,
        raw.videos.len(),
        raw.joint_count,
        run.out.display()
    );
    Ok(())
}

fn run_train(run: &TrainRun) -> Result<()> {
    let started = Instant::now();
    run.config.validate()?;
    let raw = load_raw(&run.dataset)?;
    let dataset = assemble(&raw, run.config.seq_len, DEFAULT_DISCARD, true)?;
    let (ckpt, records) = train(&dataset, &run.config)?;
    save_checkpoint(&ckpt, &run.out)?;
    artifacts::write_text(&run.loss_out, &artifacts::loss_csv(&records))?;
    let mut m = RunManifest::new("train", run.config.seed, run)?
        .input("dataset", &run.dataset)
        .output("checkpoint", &run.out)
        .output("loss_csv", &run.loss_out);
    m.duration_seconds = started.elapsed().as_secs_f64();
    m.save(&manifest_path(&run.out))?;
    match records.last() {
        Some(last) => println!(
            "trained {} epochs on {} sequences; final loss {:.6}; wrote {}",
            records.len(),
            dataset.train.len(),
            last.total,
            run.out.display()
        ),
        None => println!("initialized (0 epochs); wrote {}", run.out.display()),
    }
    Ok(())
}

fn load_dataset_for(ckpt: &Checkpoint, path: &Path) -> Result<Dataset> {
    let raw = load_raw(path)?;
    assemble(&raw, ckpt.config.seq_len, DEFAULT_DISCARD, true)
}

fn run_extract(run: &ExtractRun) -> Result<()> {
    let started = Instant::now();
    let ckpt = load_checkpoint(&run.checkpoint)?;
    let dataset = load_dataset_for(&ckpt, &run.dataset)?;
    let sequences = run.split.sequences(&dataset);
    let rows = extract_features(&sequences, &ckpt, run.feature)?;
    artifacts::write_text(&run.out, &artifacts::features_csv(&rows)?)?;
    let mut m = RunManifest::new("extract", 0, run)?
        .input("dataset", &run.dataset)
        .input("checkpoint", &run.checkpoint)
        .output("features_csv", &run.out);
    m.duration_seconds = started.elapsed().as_secs_f64();
    m.save(&manifest_path(&run.out))?;
    let width = rows.first().map(|r| r.values.len()).unwrap_or(0);
    println!(
        "wrote {} feature rows ({} values wide) to {}",
        rows.len(),
        width,
        run.out.display()
    );
    Ok(())
}

fn run_evaluate(run: &EvaluateRun) -> Result<()> {
    let started = Instant::now();
    run.config.validate()?;
    let train_rows = artifacts::parse_features_csv(&artifacts::read_text(&run.train_features)?)?;
    let test_rows = artifacts::parse_features_csv(&artifacts::read_text(&run.test_features)?)?;
    let classes = train_rows.iter().map(|r| r.label).max().unwrap_or(0);
    let recognizer = train_recognizer(&train_rows, classes, &run.config)?;
    let report = evaluate(&recognizer, &test_rows)?;
    artifacts::write_text(&run.out, &artifacts::report_json(&report)?)?;
    artifacts::write_text(&run.cmc_out, &artifacts::cmc_csv(&report.cmc))?;
    let mut m = RunManifest::new("evaluate", run.config.seed, run)?
        .input("train_features", &run.train_features)
        .input("test_features", &run.test_features)
        .output("report_json", &run.out)
        .output("cmc_csv", &run.cmc_out);
    m.duration_seconds = started.elapsed().as_secs_f64();
    m.save(&manifest_path(&run.out))?;
    println!(
        "rank-1 {:.4}, nAUC {:.4} over {} test sequences; wrote {}",
        report.rank1,
        report.nauc,
        report.labels.len(),
        run.out.display()
    );
    Ok(())
}

fn run_export_attention(run: &ExportAttentionRun) -> Result<()> {
    let started = Instant::now();
    let ckpt = load_checkpoint(&run.checkpoint)?;
    let dataset = load_dataset_for(&ckpt, &run.dataset)?;
    let sequences = run.split.sequences(&dataset);
    let averaged = average_attention(&sequences, &ckpt)?;
    let mut m = RunManifest::new("export-attention", 0, run)?
        .input("dataset", &run.dataset)
        .input("checkpoint", &run.checkpoint);
    for (matrix, axis) in averaged.iter().zip(["x", "y", "z"]) {
        let csv_path = derived_path(&run.out_prefix, &format!(".{axis}.csv"));
        let pgm_path = derived_path(&run.out_prefix, &format!(".{axis}.pgm"));
        artifacts::write_text(&csv_path, &artifacts::attention_csv(matrix))?;
        artifacts::write_text(&pgm_path, &artifacts::attention_pgm(matrix))?;
        m = m
            .output(&format!("{axis}_csv"), &csv_path)
            .output(&format!("{axis}_pgm"), &pgm_path);
    }
    m.duration_seconds = started.elapsed().as_secs_f64();
    m.save(&manifest_path(&run.out_prefix))?;
    println!(
        "wrote averaged {}x{} attention matrices over {} sequences to {}.<axis>.csv/.pgm",
        ckpt.config.seq_len,
        ckpt.config.seq_len,
        sequences.len(),
        run.out_prefix.display()
    );
    Ok(())
}

fn load_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path)?;
    serde_json::from_str(&text)
        .map_err(|e| GaitError::Config(format!("{}: {e}", path.display())))
}

fn from_value<T: DeserializeOwned>(value: serde_json::Value) -> Result<T> {
    serde_json::from_value(value)
        .map_err(|e| GaitError::Data(format!("manifest config block: {e}")))
}

/// Appends a suffix to the file name: runs/model.ckpt -> runs/model.ckpt<suffix>.
fn derived_path(base: &Path, suffix: &str) -> PathBuf {
    let mut name = base
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| "out".to_string());
    name.push_str(suffix);
    base.with_file_name(name)
}
