//! `embedviz` — t-SNE maps, SMOTE balancing, six classifiers, and metrics
//! for imbalanced binary data, from the command line.
//!
//! Exit codes: 0 success, 1 usage error, 2 data/processing error. Every run
//! is fully specified by its flags and seed; `EMBEDVIZ_THREADS` caps worker
//! parallelism (0 or unset = automatic).

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Parser, Subcommand, ValueEnum};

use embedviz_core::classifiers::{fit, ClassifierKind, ClassifierSpec};
use embedviz_core::data::{self, Dataset, Label};
use embedviz_core::metrics;
use embedviz_core::pipeline::{self, PipelineConfig, PipelineOption};
use embedviz_core::smote::{smote_oversample, SmoteConfig};
use embedviz_core::tsne::{self, TsneConfig};

#[derive(Parser)]
#[command(
    name = "embedviz",
    version,
    about = "Visualize and classify imbalanced binary data"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Base seed for every randomized stage.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Directory for output artifacts.
    #[arg(long, global = true, default_value = "out")]
    out_dir: PathBuf,
    /// Suppress progress messages (file outputs are unaffected).
    #[arg(long, global = true)]
    quiet: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experimental pipeline (options 1-4) and write all artifacts.
    Run(RunArgs),
    /// Embed a dataset to 2-D with t-SNE and write an x,y,label CSV.
    Embed(EmbedArgs),
    /// Oversample the minority class of a CSV with SMOTE.
    Smote(SmoteArgs),
    /// Fit classifiers on a stratified split and print their metrics.
    Classify(ClassifyArgs),
    /// Compute metrics from a predictions CSV (columns y_true,y_pred[,score]).
    Metrics(MetricsArgs),
    /// Generate a synthetic imbalanced dataset CSV.
    Synth(SynthArgs),
}

#[derive(clap::Args)]
struct RunArgs {
    /// Input dataset CSV.
    #[arg(long)]
    input: PathBuf,
    #[arg(long, default_value = "label")]
    label_column: String,
    /// Comma-separated pipeline options to run, e.g. "1,2,3,4".
    #[arg(long, default_value = "1,2,3,4")]
    options: String,
    #[arg(long, default_value_t = 0.25)]
    test_fraction: f64,
    /// t-SNE perplexity for options 3/4 (the figures use 100).
    #[arg(long, default_value_t = 100.0)]
    perplexity: f64,
    #[arg(long, default_value_t = 1000)]
    iterations: usize,
    #[arg(long, default_value_t = 200.0)]
    learning_rate: f64,
    #[arg(long, default_value_t = 5)]
    smote_k: usize,
    #[arg(long, default_value_t = 1.0)]
    smote_ratio: f64,
    /// Comma-separated perplexities for the sweep maps; "none" skips them.
    #[arg(long, default_value = "5,30,50,100")]
    sweep: String,
    /// Decision-surface grid cells per axis.
    #[arg(long, default_value_t = 200)]
    surface_resolution: usize,
}

#[derive(clap::Args)]
struct EmbedArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long, default_value = "label")]
    label_column: String,
    #[arg(long, default_value_t = 100.0)]
    perplexity: f64,
    #[arg(long, default_value_t = 1000)]
    iterations: usize,
    #[arg(long, default_value_t = 200.0)]
    learning_rate: f64,
    /// Output CSV path (default <out-dir>/embedding.csv).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(clap::Args)]
struct SmoteArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long, default_value = "label")]
    label_column: String,
    /// Minority nearest neighbors to interpolate toward.
    #[arg(long, default_value_t = 5)]
    k: usize,
    /// Minority/majority ratio after resampling, in (0, 1].
    #[arg(long, default_value_t = 1.0)]
    ratio: f64,
    /// Output CSV path (default <out-dir>/resampled.csv).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ClassifierChoice {
    Knn,
    Svm,
    Dt,
    Rf,
    Mlp,
    Adaboost,
    All,
}

#[derive(clap::Args)]
struct ClassifyArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long, default_value = "label")]
    label_column: String,
    #[arg(long, value_enum, default_value_t = ClassifierChoice::All)]
    classifier: ClassifierChoice,
    #[arg(long, default_value_t = 0.25)]
    test_fraction: f64,
}

#[derive(clap::Args)]
struct MetricsArgs {
    /// CSV with header y_true,y_pred and an optional score column.
    #[arg(long)]
    predictions: PathBuf,
}

#[derive(clap::Args)]
struct SynthArgs {
    #[arg(long, default_value_t = 8000)]
    n: usize,
    #[arg(long, default_value_t = 49)]
    d: usize,
    /// Minority class fraction, in (0, 0.5).
    #[arg(long, default_value_t = 0.1329)]
    minority: f64,
    /// Distance between the class means.
    #[arg(long, default_value_t = 3.0)]
    separation: f64,
    /// Output CSV path (default <out-dir>/synthetic.csv).
    #[arg(long)]
    out: Option<PathBuf>,
}

enum AppError {
    Usage(String),
    Data(String),
}

impl AppError {
    fn data(err: impl std::fmt::Display) -> AppError {
        AppError::Data(err.to_string())
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };

    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    init_thread_pool();

    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(AppError::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(AppError::Data(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}

/// Applies the EMBEDVIZ_THREADS cap before any rayon pool exists.
fn init_thread_pool() {
    if let Ok(raw) = std::env::var("EMBEDVIZ_THREADS") {
        match raw.trim().parse::<usize>() {
            Ok(0) => {}
            Ok(n) => {
                let _ = rayon::ThreadPoolBuilder::new()
                    .num_threads(n)
                    .build_global();
            }
            Err(_) => eprintln!("warning: ignoring non-numeric EMBEDVIZ_THREADS={raw:?}"),
        }
    }
}

fn dispatch(cli: Cli) -> Result<(), AppError> {
    let progress = |msg: &str| {
        if !cli.quiet {
            eprintln!("{msg}");
        }
    };
    match &cli.command {
        Command::Run(args) => cmd_run(&cli, args, &progress),
        Command::Embed(args) => cmd_embed(&cli, args, &progress),
        Command::Smote(args) => cmd_smote(&cli, args, &progress),
        Command::Classify(args) => cmd_classify(&cli, args, &progress),
        Command::Metrics(args) => cmd_metrics(args),
        Command::Synth(args) => cmd_synth(&cli, args, &progress),
    }
}

fn parse_options(raw: &str) -> Result<Vec<PipelineOption>, AppError> {
    let mut options = Vec::new();
    for part in raw.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        let id: u8 = part
            .parse()
            .map_err(|_| AppError::Usage(format!("bad option {part:?} in --options")))?;
        let option = PipelineOption::try_from(id).map_err(AppError::Usage)?;
        if !options.contains(&option) {
            options.push(option);
        }
    }
    if options.is_empty() {
        return Err(AppError::Usage("--options selected nothing".into()));
    }
    Ok(options)
}

fn parse_sweep(raw: &str) -> Result<Vec<f64>, AppError> {
    let raw = raw.trim();
    if raw.is_empty() || raw.eq_ignore_ascii_case("none") {
        return Ok(vec![]);
    }
    raw.split(',')
        .map(str::trim)
        .filter(|p| !p.is_empty())
        .map(|p| {
            p.parse::<f64>()
                .map_err(|_| AppError::Usage(format!("bad perplexity {p:?} in --sweep")))
        })
        .collect()
}

fn out_path(
    cli: &Cli,
    explicit: Option<&PathBuf>,
    default_name: &str,
) -> Result<PathBuf, AppError> {
    let path = match explicit {
        Some(p) => p.clone(),
        None => cli.out_dir.join(default_name),
    };
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent).map_err(AppError::data)?;
        }
    }
    Ok(path)
}

fn load(input: &Path, label_column: &str) -> Result<Dataset, AppError> {
    data::load_csv(input, label_column).map_err(AppError::data)
}

fn cmd_run(cli: &Cli, args: &RunArgs, progress: &dyn Fn(&str)) -> Result<(), AppError> {
    let options = parse_options(&args.options)?;
    let sweep = parse_sweep(&args.sweep)?;
    let ds = load(&args.input, &args.label_column)?;
    progress(&format!(
        "loaded {} samples x {} features ({} positive)",
        ds.len(),
        ds.dim(),
        ds.class_counts().1
    ));

    let mut cfg = PipelineConfig::with_seed(&cli.out_dir, cli.seed);
    cfg.split.test_fraction = args.test_fraction;
    cfg.tsne.perplexity = args.perplexity;
    cfg.tsne.iterations = args.iterations;
    cfg.tsne.learning_rate = args.learning_rate;
    cfg.smote.k_neighbors = args.smote_k;
    cfg.smote.target_ratio = args.smote_ratio;
    cfg.sweep_perplexities = sweep;
    cfg.surface_resolution = args.surface_resolution;

    for option in &options {
        progress(&format!("will run {option}"));
    }
    let run = pipeline::run_options(&ds, &cfg, &options).map_err(AppError::data)?;
    print!("{}", metrics::table_text(&run.reports()));
    progress(&format!("artifacts written to {}", cli.out_dir.display()));
    Ok(())
}

fn cmd_embed(cli: &Cli, args: &EmbedArgs, progress: &dyn Fn(&str)) -> Result<(), AppError> {
    let ds = load(&args.input, &args.label_column)?;
    let normalized = data::normalize(&ds);
    let cfg = TsneConfig {
        perplexity: args.perplexity,
        iterations: args.iterations,
        learning_rate: args.learning_rate,
        seed: cli.seed,
        ..TsneConfig::default()
    };
    progress(&format!(
        "embedding {} samples at perplexity {}",
        ds.len(),
        args.perplexity
    ));
    let embedding = tsne::run_tsne(&normalized.samples().view(), &cfg).map_err(AppError::data)?;
    let out = out_path(cli, args.out.as_ref(), "embedding.csv")?;
    tsne::write_embedding_csv(&embedding.points.view(), normalized.labels(), &out)
        .map_err(AppError::data)?;
    progress(&format!(
        "final KL {:.6}; wrote {}",
        embedding.final_kl,
        out.display()
    ));
    Ok(())
}

fn cmd_smote(cli: &Cli, args: &SmoteArgs, progress: &dyn Fn(&str)) -> Result<(), AppError> {
    let ds = load(&args.input, &args.label_column)?;
    let cfg = SmoteConfig {
        k_neighbors: args.k,
        seed: cli.seed,
        target_ratio: args.ratio,
    };
    let resampled = smote_oversample(&ds, &cfg).map_err(AppError::data)?;
    let out = out_path(cli, args.out.as_ref(), "resampled.csv")?;
    data::write_csv(&resampled, &out).map_err(AppError::data)?;
    let (neg, pos) = resampled.class_counts();
    progress(&format!(
        "resampled to {neg} negative / {pos} positive rows; wrote {}",
        out.display()
    ));
    Ok(())
}

fn cmd_classify(cli: &Cli, args: &ClassifyArgs, progress: &dyn Fn(&str)) -> Result<(), AppError> {
    let ds = load(&args.input, &args.label_column)?;
    let normalized = data::normalize(&ds);
    let split = data::stratified_split(&normalized, args.test_fraction, cli.seed)
        .map_err(AppError::data)?;

    let wanted = |kind: ClassifierKind| match args.classifier {
        ClassifierChoice::All => true,
        ClassifierChoice::Knn => kind == ClassifierKind::Knn,
        ClassifierChoice::Svm => kind == ClassifierKind::SvmRbf,
        ClassifierChoice::Dt => kind == ClassifierKind::DecisionTree,
        ClassifierChoice::Rf => kind == ClassifierKind::RandomForest,
        ClassifierChoice::Mlp => kind == ClassifierKind::Mlp,
        ClassifierChoice::Adaboost => kind == ClassifierKind::AdaBoost,
    };

    let mut reports = Vec::new();
    for spec in ClassifierSpec::default_suite(cli.seed) {
        if !wanted(spec.kind()) {
            continue;
        }
        progress(&format!("fitting {}", spec.kind()));
        let model = fit(&spec, &split.train).map_err(AppError::data)?;
        let scores = model
            .predict_score(&split.test.samples().view())
            .map_err(AppError::data)?;
        let threshold = model.score_threshold();
        let preds: Vec<Label> = scores
            .iter()
            .map(|&s| {
                if s >= threshold {
                    Label::Pos
                } else {
                    Label::Neg
                }
            })
            .collect();
        let report = metrics::evaluate(spec.kind(), 1, split.test.labels(), &preds, &scores)
            .map_err(AppError::data)?;
        reports.push(report);
    }
    print!("{}", metrics::table_text(&reports));
    Ok(())
}

fn cmd_metrics(args: &MetricsArgs) -> Result<(), AppError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(&args.predictions)
        .map_err(AppError::data)?;
    let headers: Vec<String> = reader
        .headers()
        .map_err(AppError::data)?
        .iter()
        .map(str::to_owned)
        .collect();
    let col = |name: &str| headers.iter().position(|h| h == name);
    let (Some(true_col), Some(pred_col)) = (col("y_true"), col("y_pred")) else {
        return Err(AppError::Data(
            "predictions CSV needs y_true and y_pred columns".into(),
        ));
    };
    let score_col = col("score");

    let mut y_true = Vec::new();
    let mut y_pred = Vec::new();
    let mut scores = Vec::new();
    for (row, record) in reader.records().enumerate() {
        let record = record.map_err(AppError::data)?;
        let parse_label = |idx: usize| -> Result<Label, AppError> {
            let raw = record.get(idx).unwrap_or("");
            raw.parse()
                .map_err(|()| AppError::Data(format!("row {row}: label {raw:?} is not -1 or +1")))
        };
        y_true.push(parse_label(true_col)?);
        y_pred.push(parse_label(pred_col)?);
        match score_col {
            Some(idx) => {
                let raw = record.get(idx).unwrap_or("");
                let v: f64 = raw.trim().parse().map_err(|_| {
                    AppError::Data(format!("row {row}: score {raw:?} is not a number"))
                })?;
                scores.push(v);
            }
            None => scores.push(y_pred[row].as_f64()),
        }
    }

    let cm = metrics::confusion(&y_true, &y_pred).map_err(AppError::data)?;
    let auc = metrics::auc_roc(&y_true, &scores).map_err(AppError::data)?;
    println!("precision {:.4}", cm.precision());
    println!("recall {:.4}", cm.recall());
    println!("f1 {:.4}", cm.f1());
    println!("balanced_accuracy {:.4}", cm.balanced_accuracy());
    println!("auc {auc:.4}");
    println!(
        "tp {} fp {} tn {} fn {}",
        cm.true_positives, cm.false_positives, cm.true_negatives, cm.false_negatives
    );
    Ok(())
}

fn cmd_synth(cli: &Cli, args: &SynthArgs, progress: &dyn Fn(&str)) -> Result<(), AppError> {
    let ds = data::generate_synthetic(args.n, args.d, args.minority, args.separation, cli.seed)
        .map_err(AppError::data)?;
    let out = out_path(cli, args.out.as_ref(), "synthetic.csv")?;
    data::write_csv(&ds, &out).map_err(AppError::data)?;
    let (neg, pos) = ds.class_counts();
    progress(&format!(
        "wrote {} ({neg} negative / {pos} positive rows)",
        out.display()
    ));
    Ok(())
}
