//! The `artaug` command line.
//!
//! Exit status: 0 on success, 2 when generation finished with failures, 1 on
//! any other error, 64 on a usage error. Logs go to standard error; results
//! go to the files named by the flags.

use std::ffi::OsString;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::time::Duration;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::augment::{
    execute_plan, load_synthetic, plan_variations, GenParams, GeneratorBackend, MockBackend, RemoteBackend,
    RetryPolicy, SyntheticDataset,
};
use crate::capmetrics::{evaluate_captions, load_caption_pairs, render_csv, render_markdown, BertTokens, Metric};
use crate::corpus::{load_manifest_with, CaptionMode, LoadOptions};
use crate::embedstore::{load_embeddings, similarity_report};
use crate::retrieval::{pooled_recall, recall_at_k, similarity_matrix, Direction, RecallReport};
use crate::sampler::{variation_histogram, MixedSampler, Origin, SamplerConfig};
use crate::seed::stream_seed;

pub const EXIT_OK: i32 = 0;
pub const EXIT_ERROR: i32 = 1;
pub const EXIT_PARTIAL: i32 = 2;
pub const EXIT_USAGE: i32 = 64;

const SUBCOMMANDS: [&str; 6] = [
    "augment",
    "sample",
    "embed-stats",
    "eval-captions",
    "eval-retrieval",
    "validate",
];

#[derive(Debug, Parser)]
#[command(
    name = "artaug",
    version,
    about = "Synthetic variation augmentation and caption/retrieval evaluation"
)]
struct Cli {
    /// JSON object of flag values; flags given on the command line win.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    /// Maximum concurrent work items.
    #[arg(long, global = true, default_value_t = 1, value_parser = clap::value_parser!(u32).range(1..=1024))]
    jobs: u32,

    /// More log output (repeatable).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate M synthetic variations per artwork.
    Augment(AugmentArgs),
    /// Emit alpha-mixed training batches.
    Sample(SampleArgs),
    /// Cosine statistics between images, captions and variations.
    EmbedStats(EmbedStatsArgs),
    /// Score candidate captions against references.
    EvalCaptions(EvalCaptionsArgs),
    /// Cross-modal Recall@K.
    EvalRetrieval(EvalRetrievalArgs),
    /// Check a manifest (and optionally its synthetic manifest).
    Validate(ValidateArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
enum Format {
    Json,
    Csv,
    Markdown,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
enum BackendKind {
    Mock,
    Remote,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
enum DirectionArg {
    Both,
    Im2t,
    T2im,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
enum CaptionModeArg {
    Joined,
    PerSentence,
}

impl From<CaptionModeArg> for CaptionMode {
    fn from(m: CaptionModeArg) -> Self {
        match m {
            CaptionModeArg::Joined => CaptionMode::Joined,
            CaptionModeArg::PerSentence => CaptionMode::PerSentence,
        }
    }
}

fn unit_interval(s: &str) -> Result<f64, String> {
    let v: f64 = s.parse().map_err(|e| format!("{e}"))?;
    if (0.0..=1.0).contains(&v) {
        Ok(v)
    } else {
        Err(format!("{v} is outside [0, 1]"))
    }
}

fn positive_real(s: &str) -> Result<f64, String> {
    let v: f64 = s.parse().map_err(|e| format!("{e}"))?;
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(format!("{v} must be positive"))
    }
}

#[derive(Debug, Args, Serialize)]
struct ManifestArgs {
    /// Dataset manifest (one JSON record per line).
    #[arg(long)]
    manifest: PathBuf,
    /// Warn about unknown manifest fields instead of rejecting them.
    #[arg(long)]
    lax: bool,
    #[arg(long, value_enum, default_value_t = CaptionModeArg::Joined)]
    caption_mode: CaptionModeArg,
}

impl ManifestArgs {
    fn load(&self) -> Result<crate::corpus::Dataset> {
        let opts = LoadOptions {
            strict: !self.lax,
            caption_mode: self.caption_mode.into(),
        };
        load_manifest_with(&self.manifest, opts).with_context(|| format!("loading {}", self.manifest.display()))
    }
}

#[derive(Debug, Args, Serialize)]
struct AugmentArgs {
    #[command(flatten)]
    #[serde(flatten)]
    manifest: ManifestArgs,
    /// Output directory for images and the synthetic manifest.
    #[arg(long)]
    out_dir: PathBuf,
    /// Variations per artwork.
    #[arg(short = 'm', long = "variations", visible_alias = "m", default_value_t = 4,
          value_parser = clap::value_parser!(u32).range(1..))]
    variations: u32,
    #[arg(long, default_value_t = 17)]
    seed: u64,
    #[arg(long, default_value_t = 0.75, value_parser = unit_interval)]
    strength: f64,
    #[arg(long, default_value_t = 7.5, value_parser = positive_real)]
    guidance_scale: f64,
    #[arg(long, default_value_t = 512, value_parser = clap::value_parser!(u32).range(1..=8192))]
    width: u32,
    #[arg(long, default_value_t = 512, value_parser = clap::value_parser!(u32).range(1..=8192))]
    height: u32,
    /// Separator between visual sentences in the prompt.
    #[arg(long, default_value = " ")]
    joiner: String,
    /// Directory image paths in the manifest are relative to (default: the manifest's directory).
    #[arg(long)]
    image_root: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = BackendKind::Mock)]
    backend: BackendKind,
    /// Base URL of the generation service (remote backend).
    #[arg(long)]
    endpoint: Option<String>,
    #[arg(long, default_value_t = 120_000)]
    timeout_ms: u64,
    #[arg(long, default_value_t = 3)]
    retries: u32,
    #[arg(long, default_value_t = 200)]
    retry_delay_ms: u64,
    /// Also write a JSON run report here.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
struct SampleArgs {
    #[command(flatten)]
    #[serde(flatten)]
    manifest: ManifestArgs,
    #[arg(long)]
    synthetic: Option<PathBuf>,
    #[arg(long, default_value_t = 0.5, value_parser = unit_interval)]
    alpha: f64,
    #[arg(long, default_value_t = 8, value_parser = clap::value_parser!(u32).range(1..))]
    batch_size: u32,
    #[arg(long, default_value_t = 1)]
    epochs: u32,
    #[arg(long, default_value_t = 17)]
    seed: u64,
    /// Keep manifest order within each epoch.
    #[arg(long)]
    no_shuffle: bool,
    /// Batch items, one JSON object per line.
    #[arg(long)]
    out: PathBuf,
    /// Summary report (real fraction, variation histogram).
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
struct EmbedStatsArgs {
    #[command(flatten)]
    #[serde(flatten)]
    manifest: ManifestArgs,
    #[arg(long)]
    synthetic: PathBuf,
    #[arg(long)]
    image_emb: PathBuf,
    #[arg(long)]
    text_emb: PathBuf,
    #[arg(long)]
    report: PathBuf,
}

#[derive(Debug, Args, Serialize)]
struct EvalCaptionsArgs {
    /// Candidates and references, one `{"id", "candidate", "references"}` per line.
    #[arg(long)]
    input: PathBuf,
    /// Metrics to compute (default: all that the inputs allow).
    #[arg(long, value_delimiter = ',')]
    metrics: Vec<Metric>,
    /// Candidate token embeddings keyed `{id}#{token}` (BERTScore).
    #[arg(long, requires = "bert_ref_emb")]
    bert_cand_emb: Option<PathBuf>,
    /// Reference token embeddings keyed `{id}#{token}` or `{id}/{ref}#{token}`.
    #[arg(long, requires = "bert_cand_emb")]
    bert_ref_emb: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
    /// Row label in csv/markdown output.
    #[arg(long, default_value = "candidate")]
    label: String,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
struct EvalRetrievalArgs {
    #[arg(long)]
    image_emb: PathBuf,
    #[arg(long)]
    text_emb: PathBuf,
    /// Ground-truth pairs, one `{"image", "text"}` per line.
    #[arg(long)]
    pairs: PathBuf,
    #[arg(long = "k", value_delimiter = ',', default_values_t = vec![1, 5, 10])]
    ks: Vec<usize>,
    /// Rank against this many retrievable items instead of the full gallery.
    #[arg(long)]
    pool: Option<usize>,
    #[arg(long, default_value_t = 10)]
    trials: usize,
    #[arg(long, default_value_t = 17)]
    seed: u64,
    #[arg(long, value_enum, default_value_t = DirectionArg::Both)]
    direction: DirectionArg,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
struct ValidateArgs {
    #[command(flatten)]
    #[serde(flatten)]
    manifest: ManifestArgs,
    /// Synthetic manifest whose parents must exist in the manifest.
    #[arg(long)]
    synthetic: Option<PathBuf>,
    #[arg(long)]
    report: Option<PathBuf>,
}

/// Runs the command line and returns the process exit status.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let argv: Vec<OsString> = argv.into_iter().map(Into::into).collect();
    let argv = match merge_config(argv) {
        Ok(a) => a,
        Err(e) => {
            eprintln!("error: {e:#}");
            return EXIT_USAGE;
        }
    };
    let cli = match Cli::try_parse_from(&argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    let level = match cli.verbose {
        0 => "info",
        1 => "debug",
        _ => "trace",
    };
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .try_init();

    match dispatch(&cli) {
        Ok(code) => code,
        Err(e) => {
            log::error!("{e:#}");
            EXIT_ERROR
        }
    }
}

/// Splices `--config` values into argv as flags, skipping any flag the user
/// already passed.
fn merge_config(argv: Vec<OsString>) -> Result<Vec<OsString>> {
    let strs: Vec<String> = argv.iter().map(|a| a.to_string_lossy().into_owned()).collect();
    let config_path = strs.iter().enumerate().find_map(|(i, a)| {
        if a == "--config" {
            strs.get(i + 1).cloned()
        } else {
            a.strip_prefix("--config=").map(str::to_string)
        }
    });
    let Some(config_path) = config_path else {
        return Ok(argv);
    };
    let text = fs::read_to_string(&config_path).with_context(|| format!("reading config {config_path}"))?;
    let Value::Object(map) = serde_json::from_str(&text).with_context(|| format!("parsing config {config_path}"))?
    else {
        bail!("config {config_path} must be a JSON object");
    };
    let given = |flag: &str| strs.iter().any(|a| a == flag || a.starts_with(&format!("{flag}=")));
    let mut extra: Vec<OsString> = Vec::new();
    for (key, value) in map {
        let flag = format!("--{}", key.replace('_', "-"));
        if given(&flag) {
            continue;
        }
        match value {
            Value::Bool(true) => extra.push(flag.into()),
            Value::Bool(false) | Value::Null => {}
            Value::Array(items) => {
                let joined: Vec<String> = items.iter().map(scalar_text).collect();
                extra.push(flag.into());
                extra.push(joined.join(",").into());
            }
            other => {
                extra.push(flag.into());
                extra.push(scalar_text(&other).into());
            }
        }
    }
    let Some(pos) = strs.iter().position(|a| SUBCOMMANDS.contains(&a.as_str())) else {
        return Ok(argv);
    };
    let mut merged = argv;
    merged.splice(pos + 1..pos + 1, extra);
    Ok(merged)
}

fn scalar_text(v: &Value) -> String {
    match v {
        Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

fn dispatch(cli: &Cli) -> Result<i32> {
    match &cli.command {
        Command::Augment(a) => augment(a, cli.jobs as usize),
        Command::Sample(a) => sample(a, cli.jobs),
        Command::EmbedStats(a) => embed_stats(a, cli.jobs),
        Command::EvalCaptions(a) => eval_captions(a, cli.jobs),
        Command::EvalRetrieval(a) => eval_retrieval(a, cli.jobs),
        Command::Validate(a) => validate(a, cli.jobs),
    }
}

fn run_config<A: Serialize>(subcommand: &str, args: &A, jobs: u32) -> Value {
    let mut config = serde_json::to_value(args).expect("arguments serialize");
    if let Value::Object(map) = &mut config {
        map.insert("subcommand".into(), json!(subcommand));
        map.insert("jobs".into(), json!(jobs));
    }
    config
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).with_context(|| format!("creating {}", parent.display()))?;
    }
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn write_json(path: &Path, value: &Value) -> Result<()> {
    write_text(path, &(serde_json::to_string_pretty(value)? + "\n"))
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(path) => write_text(path, text),
        None => {
            std::io::stdout().write_all(text.as_bytes())?;
            Ok(())
        }
    }
}

fn augment(args: &AugmentArgs, jobs: usize) -> Result<i32> {
    let dataset = args.manifest.load()?;
    let image_root = args.image_root.clone().unwrap_or_else(|| {
        args.manifest
            .manifest
            .parent()
            .map(Path::to_path_buf)
            .unwrap_or_default()
    });
    let params = GenParams {
        strength: args.strength,
        guidance_scale: args.guidance_scale,
        width: args.width,
        height: args.height,
        joiner: args.joiner.clone(),
    };
    let base_seed = stream_seed(args.seed, "plan", 0);
    let plan = plan_variations(&dataset, args.variations as usize, base_seed, &params, &image_root)?;

    let backend: Box<dyn GeneratorBackend> = match args.backend {
        BackendKind::Mock => Box::new(MockBackend),
        BackendKind::Remote => {
            let Some(endpoint) = &args.endpoint else {
                bail!("--backend remote needs --endpoint");
            };
            let retry = RetryPolicy {
                retries: args.retries,
                base_delay: Duration::from_millis(args.retry_delay_ms),
            };
            Box::new(RemoteBackend::new(
                endpoint.clone(),
                Duration::from_millis(args.timeout_ms),
                retry,
            ))
        }
    };

    let outcome = execute_plan(&plan, backend.as_ref(), &args.out_dir, jobs)?;
    log::info!(
        "{} of {} variations present ({} generated, {} reused, {} failed)",
        outcome.synthetic.len(),
        plan.requests.len(),
        outcome.backend_calls - outcome.failures.len(),
        outcome.reused,
        outcome.failures.len()
    );
    if let Some(out) = &args.out {
        write_json(
            out,
            &json!({
                "config": run_config("augment", args, jobs as u32),
                "requested": plan.requests.len(),
                "generated": outcome.synthetic.len(),
                "failures": outcome.failures,
            }),
        )?;
    }
    Ok(if outcome.is_complete() { EXIT_OK } else { EXIT_PARTIAL })
}

fn load_synthetic_or_empty(path: Option<&Path>) -> Result<SyntheticDataset> {
    match path {
        Some(p) => load_synthetic(p).with_context(|| format!("loading {}", p.display())),
        None => Ok(SyntheticDataset::empty()),
    }
}

#[derive(Serialize)]
struct BatchLine<'a> {
    epoch: u32,
    batch: usize,
    position: usize,
    parent_id: &'a str,
    origin: Origin,
    variation_index: Option<usize>,
    image: &'a str,
}

fn sample(args: &SampleArgs, jobs: u32) -> Result<i32> {
    let dataset = args.manifest.load()?;
    let synthetic = load_synthetic_or_empty(args.synthetic.as_deref())?;
    let sampler = MixedSampler::new(&dataset, &synthetic)?;

    let mut lines = String::new();
    let mut epochs = Vec::with_capacity(args.epochs as usize);
    for epoch in 0..args.epochs {
        let cfg = SamplerConfig {
            alpha: args.alpha,
            batch_size: args.batch_size as usize,
            epoch_seed: stream_seed(args.seed, "sampler", epoch as u64),
            shuffle: !args.no_shuffle,
        };
        let batches = sampler.epoch(&cfg)?;
        for (b, batch) in batches.iter().enumerate() {
            for (p, item) in batch.items.iter().enumerate() {
                let line = BatchLine {
                    epoch,
                    batch: b,
                    position: p,
                    parent_id: &item.parent_id,
                    origin: item.origin,
                    variation_index: item.variation_index,
                    image: &item.image_ref,
                };
                lines.push_str(&serde_json::to_string(&line)?);
                lines.push('\n');
            }
        }
        epochs.push(batches);
    }
    write_text(&args.out, &lines)?;

    let items: Vec<_> = epochs.iter().flatten().flat_map(|b| &b.items).collect();
    let real = items.iter().filter(|i| i.origin == Origin::Real).count();
    log::info!("{} items over {} epochs, {} real", items.len(), args.epochs, real);
    if let Some(report) = &args.report {
        let histogram = variation_histogram(epochs.iter().flatten());
        write_json(
            report,
            &json!({
                "config": run_config("sample", args, jobs),
                "items": items.len(),
                "real": real,
                "real_fraction": if items.is_empty() { 0.0 } else { real as f64 / items.len() as f64 },
                "variation_histogram": histogram,
            }),
        )?;
    }
    Ok(EXIT_OK)
}

fn embed_stats(args: &EmbedStatsArgs, jobs: u32) -> Result<i32> {
    let dataset = args.manifest.load()?;
    let synthetic = load_synthetic(&args.synthetic).with_context(|| format!("loading {}", args.synthetic.display()))?;
    synthetic.check_parents(&dataset)?;
    let images = load_embeddings(&args.image_emb).with_context(|| format!("loading {}", args.image_emb.display()))?;
    let texts = load_embeddings(&args.text_emb).with_context(|| format!("loading {}", args.text_emb.display()))?;
    let report = similarity_report(&dataset, &synthetic, &images, &texts)?;
    log::info!(
        "cosine means: real/caption {:.4}, synthetic/caption {:.4}, real/variation {:.4}",
        report.real_vs_caption.mean,
        report.synthetic_vs_caption.mean,
        report.real_vs_variation.mean
    );
    write_json(
        &args.report,
        &json!({ "config": run_config("embed-stats", args, jobs), "report": report }),
    )?;
    Ok(EXIT_OK)
}

fn eval_captions(args: &EvalCaptionsArgs, jobs: u32) -> Result<i32> {
    let pairs = load_caption_pairs(&args.input)?;
    let bert = match (&args.bert_cand_emb, &args.bert_ref_emb) {
        (Some(c), Some(r)) => Some(BertTokens {
            candidates: load_embeddings(c).with_context(|| format!("loading {}", c.display()))?,
            references: load_embeddings(r).with_context(|| format!("loading {}", r.display()))?,
        }),
        _ => None,
    };
    let metrics: Vec<Metric> = if args.metrics.is_empty() {
        Metric::ALL
            .into_iter()
            .filter(|m| *m != Metric::Bertscore || bert.is_some())
            .collect()
    } else {
        args.metrics.clone()
    };
    if metrics.contains(&Metric::Bertscore) && bert.is_none() {
        bail!("bertscore needs --bert-cand-emb and --bert-ref-emb");
    }
    let report = evaluate_captions(&pairs, &metrics, bert.as_ref())?;
    let text = match args.format {
        Format::Json => {
            serde_json::to_string_pretty(&json!({
                "config": run_config("eval-captions", args, jobs),
                "per_item": report.per_item,
                "corpus": report.corpus,
            }))? + "\n"
        }
        Format::Csv => render_csv(&report, &args.label),
        Format::Markdown => render_markdown(&report, &args.label),
    };
    emit(args.out.as_deref(), &text)?;
    Ok(EXIT_OK)
}

#[derive(Deserialize)]
struct PairLine {
    image: String,
    text: String,
}

fn load_pairs(path: &Path) -> Result<Vec<(String, String)>> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            let p: PairLine = serde_json::from_str(l).with_context(|| format!("{} line {}", path.display(), i + 1))?;
            Ok((p.image, p.text))
        })
        .collect()
}

fn recall_table(reports: &[RecallReport], ks: &[usize], sep: &str, markdown: bool) -> String {
    let mut header = vec!["Task".to_string()];
    header.extend(ks.iter().map(|k| format!("R@{k}")));
    let mut out = String::new();
    let row = |cells: &[String]| {
        if markdown {
            format!("| {} |\n", cells.join(" | "))
        } else {
            cells.join(sep) + "\n"
        }
    };
    out.push_str(&row(&header));
    if markdown {
        out.push_str(&format!("|---|{}\n", "---:|".repeat(ks.len())));
    }
    for r in reports {
        let mut cells = vec![r.direction.to_string()];
        cells.extend(ks.iter().map(|k| format!("{:.4}", r.recalls[k])));
        out.push_str(&row(&cells));
    }
    out
}

fn eval_retrieval(args: &EvalRetrievalArgs, jobs: u32) -> Result<i32> {
    let images = load_embeddings(&args.image_emb).with_context(|| format!("loading {}", args.image_emb.display()))?;
    let texts = load_embeddings(&args.text_emb).with_context(|| format!("loading {}", args.text_emb.display()))?;
    let pairs = load_pairs(&args.pairs)?;
    let matrix = similarity_matrix(&images, &texts, &pairs)?;
    let directions: &[Direction] = match args.direction {
        DirectionArg::Both => &[Direction::Im2t, Direction::T2im],
        DirectionArg::Im2t => &[Direction::Im2t],
        DirectionArg::T2im => &[Direction::T2im],
    };
    let pool_seed = stream_seed(args.seed, "pools", 0);
    let reports = directions
        .iter()
        .map(|&d| match args.pool {
            Some(pool) => pooled_recall(&matrix, pool, args.trials, pool_seed, &args.ks, d),
            None => recall_at_k(&matrix, &args.ks, d),
        })
        .collect::<Result<Vec<_>, _>>()?;
    let text = match args.format {
        Format::Json => {
            serde_json::to_string_pretty(&json!({
                "config": run_config("eval-retrieval", args, jobs),
                "reports": reports,
            }))? + "\n"
        }
        Format::Csv => recall_table(&reports, &args.ks, ",", false),
        Format::Markdown => recall_table(&reports, &args.ks, "", true),
    };
    emit(args.out.as_deref(), &text)?;
    Ok(EXIT_OK)
}

fn validate(args: &ValidateArgs, jobs: u32) -> Result<i32> {
    let dataset = args.manifest.load()?;
    let [train, val, test] = dataset.split_counts();
    let mut summary = format!(
        "{}: {} records (train {train}, val {val}, test {test})",
        args.manifest.manifest.display(),
        dataset.len()
    );
    let mut synthetic_count = None;
    if let Some(path) = &args.synthetic {
        let synthetic = load_synthetic(path).with_context(|| format!("loading {}", path.display()))?;
        synthetic.check_parents(&dataset)?;
        summary.push_str(&format!("; {} synthetic variations", synthetic.len()));
        synthetic_count = Some(synthetic.len());
    }
    println!("{summary}");
    if let Some(report) = &args.report {
        write_json(
            report,
            &json!({
                "config": run_config("validate", args, jobs),
                "records": dataset.len(),
                "splits": { "train": train, "val": val, "test": test },
                "synthetic_variations": synthetic_count,
            }),
        )?;
    }
    Ok(EXIT_OK)
}
