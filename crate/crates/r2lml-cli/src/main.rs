//! Command-line surface: train, predict, evaluate, compare, synth, sweep.
//!
//! All randomness flows from `--seed` through named substreams; with
//! `--threads 1` (the default) every command writes byte-identical outputs
//! for identical inputs and flags.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand};
use nalgebra::DMatrix;

use r2lml::{
    cross_validate, evaluate, holm, load_csv, load_features_csv, load_model, mcnemar, save_model,
    standardize, synth_gaussian_mixture, train_e_r2lml_restarted, train_t_r2lml_restarted,
    write_csv, Dataset, HyperGrid, Hyperparams, LocalMetricModel, McNemarOutcome, Method,
    PredictionSet, SynthConfig, SynthKind, TrainingTrace,
};

mod config;
use config::ConfigFile;

#[derive(Parser)]
#[command(
    name = "r2lml",
    version,
    about = "Local metric learning for k-NN classification"
)]
struct Cli {
    /// Worker threads for intra-run parallelism (1 is bit-reproducible).
    #[arg(long, global = true, default_value_t = 1)]
    threads: usize,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a model and write it with its convergence trace.
    Train(TrainArgs),
    /// Predict labels for unlabeled feature rows.
    Predict(PredictArgs),
    /// Score a model on a labeled test set.
    Evaluate(EvaluateArgs),
    /// Pairwise McNemar tests with Holm correction over prediction files.
    Compare(CompareArgs),
    /// Generate synthetic two-class Gaussian train/test sets.
    Synth(SynthArgs),
    /// Cross-validation sweep over hyperparameter grids.
    Sweep(SweepArgs),
}

#[derive(Args)]
struct HyperFlags {
    /// Config file (TOML key = value, keys mirror flag names); flags win.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Number of local metrics K.
    #[arg(long)]
    k_metrics: Option<usize>,
    /// Nuclear-norm regularization weight.
    #[arg(long)]
    lambda: Option<f64>,
    /// Hinge penalty on dissimilar pairs.
    #[arg(long)]
    c: Option<f64>,
    /// Subgradient step length.
    #[arg(long)]
    step: Option<f64>,
    #[arg(long)]
    epochs: Option<usize>,
    /// Subgradient iterations per epoch.
    #[arg(long)]
    psd_iters: Option<usize>,
    #[arg(long)]
    mm_max_iters: Option<usize>,
    #[arg(long)]
    mm_tol: Option<f64>,
    #[arg(long)]
    outer_tol: Option<f64>,
    /// Outer iterations of the transductive three-block loop.
    #[arg(long)]
    max_outer_blocks: Option<usize>,
    #[arg(long)]
    bisection_tol: Option<f64>,
    /// Output dimension of each transform (defaults to the input dimension).
    #[arg(long)]
    p: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    restarts: Option<usize>,
    /// Skip per-feature standardization.
    #[arg(long)]
    no_standardize: bool,
}

#[derive(Args)]
struct TrainArgs {
    /// Learning variant: e-r2lml or t-r2lml.
    #[arg(long, default_value = "e-r2lml")]
    method: String,
    /// Labeled training CSV.
    #[arg(long)]
    input: PathBuf,
    /// 0-based label column (default: last).
    #[arg(long)]
    label_column: Option<usize>,
    /// Unlabeled test features (required for t-r2lml).
    #[arg(long)]
    test_features: Option<PathBuf>,
    /// Output model file.
    #[arg(long)]
    out: PathBuf,
    /// Outer-iteration trace CSV.
    #[arg(long)]
    trace: Option<PathBuf>,
    /// Per-iterate subgradient trace CSV (iteration, k, objective, nuclear norm).
    #[arg(long)]
    psd_trace: Option<PathBuf>,
    /// Learned similarity matrix CSV (t-r2lml only).
    #[arg(long)]
    out_similarity: Option<PathBuf>,
    #[command(flatten)]
    hyper: HyperFlags,
}

#[derive(Args)]
struct PredictArgs {
    #[arg(long)]
    model: PathBuf,
    /// Unlabeled feature CSV.
    #[arg(long)]
    input: PathBuf,
    /// Coefficient source: e-r2lml copies from the nearest training sample;
    /// t-r2lml uses the jointly learned columns (input must be the same
    /// rows, in order, as --test-features at training time).
    #[arg(long, default_value = "e-r2lml")]
    method: String,
    /// Neighbors in the vote.
    #[arg(long, default_value_t = 5)]
    k: usize,
    /// Output label CSV.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct EvaluateArgs {
    #[arg(long)]
    model: PathBuf,
    /// Labeled test CSV.
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    label_column: Option<usize>,
    #[arg(long, default_value = "e-r2lml")]
    method: String,
    #[arg(long, default_value_t = 5)]
    k: usize,
    /// Prediction CSV (index, predicted, true_label, correct).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct CompareArgs {
    /// Prediction CSVs from `evaluate --out`; repeat for each model (>= 2).
    #[arg(long = "pred", required = true, num_args = 1)]
    preds: Vec<PathBuf>,
    /// Family-wise significance level.
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    /// Machine-readable table CSV.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SynthArgs {
    /// overlap or sparse-overlap.
    #[arg(long, default_value = "overlap")]
    kind: String,
    #[arg(long, default_value_t = 30)]
    dim: usize,
    #[arg(long, default_value_t = 80)]
    n_train: usize,
    #[arg(long, default_value_t = 320)]
    n_test: usize,
    #[arg(long, default_value_t = 0.3)]
    spectral_radius: f64,
    /// Per-feature zeroing probability (sparse-overlap).
    #[arg(long, default_value_t = 0.5)]
    sparsity_prob: f64,
    /// Class-mean offset along the first axis (default targets heavy overlap).
    #[arg(long)]
    mean_offset: Option<f64>,
    /// Fraction of samples in class 0.
    #[arg(long, default_value_t = 0.5)]
    class_weight: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out_train: PathBuf,
    #[arg(long)]
    out_test: PathBuf,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long, default_value = "e-r2lml")]
    method: String,
    /// Labeled training CSV.
    #[arg(long)]
    input: PathBuf,
    /// Labeled validation CSV.
    #[arg(long)]
    val: PathBuf,
    #[arg(long)]
    label_column: Option<usize>,
    /// Comma-separated K values (default 1..7).
    #[arg(long)]
    k_grid: Option<String>,
    /// Comma-separated lambda values (default: the per-method decades).
    #[arg(long)]
    lambda_grid: Option<String>,
    /// Comma-separated step lengths (default: the base step).
    #[arg(long)]
    step_grid: Option<String>,
    /// Score table CSV.
    #[arg(long)]
    out: PathBuf,
    /// Best hyperparameters, written as a config file.
    #[arg(long)]
    best_out: Option<PathBuf>,
    #[command(flatten)]
    hyper: HyperFlags,
}

/// Errors split by exit code: 2 for usage/config, 1 for runtime.
enum CliError {
    Usage(String),
    Runtime(String),
}

impl From<r2lml::Error> for CliError {
    fn from(e: r2lml::Error) -> Self {
        CliError::Runtime(e.to_string())
    }
}

type CliResult = Result<(), CliError>;

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if cli.threads == 0 {
        eprintln!("error: --threads must be at least 1");
        return ExitCode::from(2);
    }
    if let Err(e) = rayon::ThreadPoolBuilder::new()
        .num_threads(cli.threads)
        .build_global()
    {
        eprintln!("error: failed to size the thread pool: {e}");
        return ExitCode::from(1);
    }
    let outcome = match cli.command {
        Command::Train(args) => cmd_train(args),
        Command::Predict(args) => cmd_predict(args),
        Command::Evaluate(args) => cmd_evaluate(args),
        Command::Compare(args) => cmd_compare(args),
        Command::Synth(args) => cmd_synth(args),
        Command::Sweep(args) => cmd_sweep(args),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(CliError::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}

fn parse_method(s: &str) -> Result<Method, CliError> {
    Method::from_str(s).map_err(|e| usage(e.to_string()))
}

/// Flags, then config file, then defaults.
struct EffectiveConfig {
    hyper: Hyperparams,
    restarts: usize,
    standardize: bool,
}

fn effective_config(flags: &HyperFlags) -> Result<EffectiveConfig, CliError> {
    let file = match &flags.config {
        Some(path) => ConfigFile::load(path).map_err(CliError::Usage)?,
        None => ConfigFile::empty(),
    };
    let defaults = Hyperparams::default();
    let hyper = Hyperparams {
        k: flags
            .k_metrics
            .or(file.get_usize("k-metrics")?)
            .unwrap_or(defaults.k),
        lambda: flags
            .lambda
            .or(file.get_f64("lambda")?)
            .unwrap_or(defaults.lambda),
        c: flags.c.or(file.get_f64("c")?).unwrap_or(defaults.c),
        step_length: flags
            .step
            .or(file.get_f64("step")?)
            .unwrap_or(defaults.step_length),
        epochs: flags
            .epochs
            .or(file.get_usize("epochs")?)
            .unwrap_or(defaults.epochs),
        psd_iters_per_epoch: flags
            .psd_iters
            .or(file.get_usize("psd-iters")?)
            .unwrap_or(defaults.psd_iters_per_epoch),
        mm_max_iters: flags
            .mm_max_iters
            .or(file.get_usize("mm-max-iters")?)
            .unwrap_or(defaults.mm_max_iters),
        mm_tol: flags
            .mm_tol
            .or(file.get_f64("mm-tol")?)
            .unwrap_or(defaults.mm_tol),
        outer_tol: flags
            .outer_tol
            .or(file.get_f64("outer-tol")?)
            .unwrap_or(defaults.outer_tol),
        max_outer_blocks: flags
            .max_outer_blocks
            .or(file.get_usize("max-outer-blocks")?)
            .unwrap_or(defaults.max_outer_blocks),
        bisection_tol: flags
            .bisection_tol
            .or(file.get_f64("bisection-tol")?)
            .unwrap_or(defaults.bisection_tol),
        p: flags.p.or(file.get_usize("p")?),
        seed: flags
            .seed
            .or(file.get_u64("seed")?)
            .unwrap_or(defaults.seed),
    };
    let restarts = flags.restarts.or(file.get_usize("restarts")?).unwrap_or(1);
    let standardize = if flags.no_standardize {
        false
    } else {
        file.get_bool("standardize")?.unwrap_or(true)
    };
    Ok(EffectiveConfig {
        hyper,
        restarts,
        standardize,
    })
}

fn format_f64(v: f64) -> String {
    format!("{v}")
}

fn write_trace_csv(trace: &TrainingTrace<f64>, k: usize, path: &Path) -> CliResult {
    let mut writer = csv::Writer::from_path(path)
        .map_err(|e| CliError::Runtime(format!("cannot write {}: {e}", path.display())))?;
    let mut header = vec![
        "epoch".to_string(),
        "objective_after_block1".to_string(),
        "objective_after_block2".to_string(),
        "objective_after_block3".to_string(),
    ];
    for i in 0..k {
        header.push(format!("nuclear_norm_{i}"));
    }
    for i in 0..k {
        header.push(format!("zero_columns_{i}"));
    }
    header.push("wall_time_s".to_string());
    let io_err = |e: csv::Error| CliError::Runtime(format!("csv write failed: {e}"));
    writer.write_record(&header).map_err(io_err)?;
    for rec in &trace.outer {
        let mut row = vec![
            rec.epoch.to_string(),
            format_f64(rec.objective_after_block1),
            format_f64(rec.objective_after_block2),
            rec.objective_after_block3
                .map(format_f64)
                .unwrap_or_default(),
        ];
        for v in &rec.nuclear_norms {
            row.push(format_f64(*v));
        }
        for v in &rec.zero_column_counts {
            row.push(v.to_string());
        }
        row.push(format!("{:.6}", rec.wall_time.as_secs_f64()));
        writer.write_record(&row).map_err(io_err)?;
    }
    writer
        .flush()
        .map_err(|e| CliError::Runtime(format!("csv flush failed: {e}")))?;
    Ok(())
}

fn write_psd_trace_csv(trace: &TrainingTrace<f64>, path: &Path) -> CliResult {
    let mut writer = csv::Writer::from_path(path)
        .map_err(|e| CliError::Runtime(format!("cannot write {}: {e}", path.display())))?;
    let io_err = |e: csv::Error| CliError::Runtime(format!("csv write failed: {e}"));
    writer
        .write_record(["iteration", "k", "objective", "nuclear_norm"])
        .map_err(io_err)?;
    for row in &trace.psd_rows {
        writer
            .write_record([
                row.iteration.to_string(),
                row.metric.to_string(),
                format_f64(row.objective),
                format_f64(row.nuclear_norm),
            ])
            .map_err(io_err)?;
    }
    writer
        .flush()
        .map_err(|e| CliError::Runtime(format!("csv flush failed: {e}")))?;
    Ok(())
}

fn write_similarity_csv(s: &r2lml::SimilarityMatrix, path: &Path) -> CliResult {
    let mut writer = csv::Writer::from_path(path)
        .map_err(|e| CliError::Runtime(format!("cannot write {}: {e}", path.display())))?;
    for m in 0..s.len() {
        let row: Vec<String> = (0..s.len())
            .map(|n| if s.is_similar(m, n) { "1" } else { "0" }.to_string())
            .collect();
        writer
            .write_record(&row)
            .map_err(|e| CliError::Runtime(format!("csv write failed: {e}")))?;
    }
    writer
        .flush()
        .map_err(|e| CliError::Runtime(format!("csv flush failed: {e}")))?;
    Ok(())
}

fn cmd_train(args: TrainArgs) -> CliResult {
    let method = parse_method(&args.method)?;
    let cfg = effective_config(&args.hyper)?;
    if method == Method::Transductive && args.test_features.is_none() {
        return Err(usage(
            "--method t-r2lml requires --test-features (the unlabeled test rows join training)",
        ));
    }
    let train: Dataset<f64> = load_csv(&args.input, args.label_column)?;
    let mut test_features: Option<DMatrix<f64>> = match &args.test_features {
        Some(path) => Some(load_features_csv(path)?),
        None => None,
    };

    let (train, params) = if cfg.standardize {
        let (std_train, _, params) = standardize(&train, &[])?;
        if let Some(tf) = test_features.as_mut() {
            params.apply_matrix(tf)?;
        }
        (std_train, Some(params))
    } else {
        (train, None)
    };

    let (mut model, similarity, trace) = match method {
        Method::Efficient => {
            let (model, trace) = train_e_r2lml_restarted(&train, &cfg.hyper, cfg.restarts)?;
            (model, None, trace)
        }
        Method::Transductive => {
            let tf = test_features.expect("checked above");
            let (model, s, trace) = train_t_r2lml_restarted(&train, &tf, &cfg.hyper, cfg.restarts)?;
            (model, Some(s), trace)
        }
    };
    model.standardization = params;
    save_model(&model, &args.out)?;
    if let Some(path) = &args.trace {
        write_trace_csv(&trace, model.k(), path)?;
    }
    if let Some(path) = &args.psd_trace {
        write_psd_trace_csv(&trace, path)?;
    }
    if let Some(path) = &args.out_similarity {
        match &similarity {
            Some(s) => write_similarity_csv(s, path)?,
            None => return Err(usage("--out-similarity applies only to --method t-r2lml")),
        }
    }
    println!(
        "trained {}: final objective {:.6}, outer iterations {}, termination {}",
        method,
        trace.final_objective,
        trace.outer.len(),
        trace.termination
    );
    Ok(())
}

fn apply_standardization(model: &LocalMetricModel<f64>, features: &mut DMatrix<f64>) -> CliResult {
    if let Some(params) = &model.standardization {
        params.apply_matrix(features)?;
    }
    Ok(())
}

fn cmd_predict(args: PredictArgs) -> CliResult {
    let method = parse_method(&args.method)?;
    let model: LocalMetricModel<f64> = load_model(&args.model)?;
    let mut features: DMatrix<f64> = load_features_csv(&args.input)?;
    apply_standardization(&model, &mut features)?;

    let g_table = match method {
        Method::Efficient => None,
        Method::Transductive => {
            let g = model.transductive_coefficients().ok_or_else(|| {
                usage("model holds no transductive coefficients; train with --method t-r2lml")
            })?;
            if g.ncols() != features.nrows() {
                return Err(usage(format!(
                    "input has {} rows but the model learned coefficients for {} test rows",
                    features.nrows(),
                    g.ncols()
                )));
            }
            Some(g)
        }
    };
    let mut predicted = Vec::with_capacity(features.nrows());
    for i in 0..features.nrows() {
        let x = features.row(i).transpose();
        let g = match &g_table {
            Some(table) => table.column(i).into_owned(),
            None => model.assign_test_g(&x)?,
        };
        predicted.push(r2lml::knn_predict(&model, &x, &g, args.k)?);
    }
    let mut writer = csv::Writer::from_path(&args.out)
        .map_err(|e| CliError::Runtime(format!("cannot write {}: {e}", args.out.display())))?;
    writer
        .write_record(["predicted"])
        .map_err(|e| CliError::Runtime(e.to_string()))?;
    for p in &predicted {
        writer
            .write_record([p.to_string()])
            .map_err(|e| CliError::Runtime(e.to_string()))?;
    }
    writer
        .flush()
        .map_err(|e| CliError::Runtime(e.to_string()))?;
    println!("predicted {} samples", predicted.len());
    Ok(())
}

fn write_predictions_csv(preds: &PredictionSet, path: &Path) -> CliResult {
    let mut writer = csv::Writer::from_path(path)
        .map_err(|e| CliError::Runtime(format!("cannot write {}: {e}", path.display())))?;
    let io_err = |e: csv::Error| CliError::Runtime(format!("csv write failed: {e}"));
    writer
        .write_record(["index", "predicted", "true_label", "correct"])
        .map_err(io_err)?;
    let labels = preds.true_labels.as_ref();
    let correct = preds.correct.as_ref();
    for (i, p) in preds.predicted.iter().enumerate() {
        writer
            .write_record([
                i.to_string(),
                p.to_string(),
                labels.map(|l| l[i].to_string()).unwrap_or_default(),
                correct
                    .map(|c| if c[i] { "1" } else { "0" }.to_string())
                    .unwrap_or_default(),
            ])
            .map_err(io_err)?;
    }
    writer
        .flush()
        .map_err(|e| CliError::Runtime(format!("csv flush failed: {e}")))?;
    Ok(())
}

fn cmd_evaluate(args: EvaluateArgs) -> CliResult {
    let method = parse_method(&args.method)?;
    let model: LocalMetricModel<f64> = load_model(&args.model)?;
    let mut test: Dataset<f64> = load_csv(&args.input, args.label_column)?;
    apply_standardization(&model, &mut test.features)?;

    let g_table = match method {
        Method::Efficient => None,
        Method::Transductive => Some(model.transductive_coefficients().ok_or_else(|| {
            usage("model holds no transductive coefficients; train with --method t-r2lml")
        })?),
    };
    let (accuracy, preds) = evaluate(&model, &test, method, g_table.as_ref(), args.k)?;
    println!("accuracy {accuracy:.4}");
    if let Some(path) = &args.out {
        write_predictions_csv(&preds, path)?;
    }
    Ok(())
}

/// Correctness bits parsed back from an `evaluate --out` file.
fn load_correctness(path: &Path) -> Result<Vec<bool>, CliError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .map_err(|e| CliError::Runtime(format!("cannot read {}: {e}", path.display())))?;
    let headers = reader
        .headers()
        .map_err(|e| CliError::Runtime(e.to_string()))?
        .clone();
    let col = headers
        .iter()
        .position(|h| h == "correct")
        .ok_or_else(|| usage(format!("{} has no 'correct' column", path.display())))?;
    let mut bits = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| CliError::Runtime(e.to_string()))?;
        let cell = rec.get(col).unwrap_or("");
        let bit = match cell.trim() {
            "1" | "true" => true,
            "0" | "false" => false,
            other => {
                return Err(CliError::Runtime(format!(
                    "{} row {}: unparseable correctness {other:?}",
                    path.display(),
                    i + 1
                )))
            }
        };
        bits.push(bit);
    }
    Ok(bits)
}

fn cmd_compare(args: CompareArgs) -> CliResult {
    if args.preds.len() < 2 {
        return Err(usage("compare needs at least two --pred files"));
    }
    if !(0.0 < args.alpha && args.alpha < 1.0) {
        return Err(usage(format!(
            "--alpha must lie in (0,1), got {}",
            args.alpha
        )));
    }
    let names: Vec<String> = args
        .preds
        .iter()
        .map(|p| {
            p.file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| p.display().to_string())
        })
        .collect();
    let bits: Vec<Vec<bool>> = args
        .preds
        .iter()
        .map(|p| load_correctness(p))
        .collect::<Result<_, _>>()?;
    let len = bits[0].len();
    if bits.iter().any(|b| b.len() != len) {
        return Err(usage("prediction files cover different sample counts"));
    }

    let mut pairs: Vec<(usize, usize, McNemarOutcome)> = Vec::new();
    for i in 0..bits.len() {
        for j in (i + 1)..bits.len() {
            let outcome = mcnemar(&bits[i], &bits[j])?;
            pairs.push((i, j, outcome));
        }
    }
    let p_values: Vec<f64> = pairs.iter().map(|(_, _, o)| o.p_value).collect();
    let rejected = holm(&p_values, args.alpha)?;

    let mut table = String::new();
    writeln!(
        table,
        "{:<24} {:>5} {:>5} {:<14} {:>12} {:>10} {:<9}",
        "pair", "b", "c", "branch", "statistic", "p", "holm"
    )
    .unwrap();
    for ((i, j, o), rej) in pairs.iter().zip(rejected.iter()) {
        writeln!(
            table,
            "{:<24} {:>5} {:>5} {:<14} {:>12} {:>10.4e} {:<9}",
            format!("{} vs {}", names[*i], names[*j]),
            o.b,
            o.c,
            o.branch.to_string(),
            o.statistic.map(|s| format!("{s:.4}")).unwrap_or_default(),
            o.p_value,
            if *rej { "reject" } else { "accept" },
        )
        .unwrap();
    }
    print!("{table}");

    if let Some(path) = &args.out {
        let mut writer = csv::Writer::from_path(path)
            .map_err(|e| CliError::Runtime(format!("cannot write {}: {e}", path.display())))?;
        let io_err = |e: csv::Error| CliError::Runtime(format!("csv write failed: {e}"));
        writer
            .write_record([
                "a",
                "b",
                "n01",
                "n10",
                "branch",
                "statistic",
                "p_value",
                "holm_reject",
            ])
            .map_err(io_err)?;
        for ((i, j, o), rej) in pairs.iter().zip(rejected.iter()) {
            writer
                .write_record([
                    names[*i].clone(),
                    names[*j].clone(),
                    o.b.to_string(),
                    o.c.to_string(),
                    o.branch.to_string(),
                    o.statistic.map(format_f64).unwrap_or_default(),
                    format_f64(o.p_value),
                    if *rej { "1" } else { "0" }.to_string(),
                ])
                .map_err(io_err)?;
        }
        writer
            .flush()
            .map_err(|e| CliError::Runtime(format!("csv flush failed: {e}")))?;
    }
    Ok(())
}

fn cmd_synth(args: SynthArgs) -> CliResult {
    let kind = match args.kind.as_str() {
        "overlap" => SynthKind::Overlap,
        "sparse-overlap" => SynthKind::SparseOverlap,
        other => return Err(usage(format!("unknown synth kind {other:?}"))),
    };
    let config = SynthConfig {
        kind,
        dim: args.dim,
        n_train: args.n_train,
        n_test: args.n_test,
        spectral_radius: args.spectral_radius,
        sparsity_prob: args.sparsity_prob,
        mean_offset: args.mean_offset,
        class_weight: args.class_weight,
        seed: args.seed,
    };
    let (train, test) = synth_gaussian_mixture::<f64>(&config)?;
    write_csv(&train, &args.out_train)?;
    write_csv(&test, &args.out_test)?;
    println!(
        "synthesized {} train and {} test samples of dimension {}",
        train.n_samples(),
        test.n_samples(),
        train.dim()
    );
    Ok(())
}

fn parse_grid<T: FromStr>(spec: &str, what: &str) -> Result<Vec<T>, CliError>
where
    T::Err: std::fmt::Display,
{
    spec.split(',')
        .map(|tok| {
            tok.trim()
                .parse::<T>()
                .map_err(|e| usage(format!("bad {what} entry {tok:?}: {e}")))
        })
        .collect()
}

fn cmd_sweep(args: SweepArgs) -> CliResult {
    let method = parse_method(&args.method)?;
    let cfg = effective_config(&args.hyper)?;
    let train: Dataset<f64> = load_csv(&args.input, args.label_column)?;
    let val: Dataset<f64> = load_csv(&args.val, args.label_column)?;
    let (train, mut others, _) = if cfg.standardize {
        let (t, o, p) = standardize(&train, &[&val])?;
        (t, o, Some(p))
    } else {
        (train, vec![val.clone()], None)
    };
    let val = others.pop().expect("one standardized companion");

    let defaults = HyperGrid::standard(method, cfg.hyper.step_length);
    let grid = HyperGrid {
        ks: match &args.k_grid {
            Some(s) => parse_grid(s, "--k-grid")?,
            None => defaults.ks,
        },
        lambdas: match &args.lambda_grid {
            Some(s) => parse_grid(s, "--lambda-grid")?,
            None => defaults.lambdas,
        },
        step_lengths: match &args.step_grid {
            Some(s) => parse_grid(s, "--step-grid")?,
            None => defaults.step_lengths,
        },
    };
    let (best, rows) = cross_validate(&train, &val, &grid, method, &cfg.hyper)?;

    let mut writer = csv::Writer::from_path(&args.out)
        .map_err(|e| CliError::Runtime(format!("cannot write {}: {e}", args.out.display())))?;
    let io_err = |e: csv::Error| CliError::Runtime(format!("csv write failed: {e}"));
    writer
        .write_record(["k", "lambda", "step", "accuracy", "error"])
        .map_err(io_err)?;
    for row in &rows {
        writer
            .write_record([
                row.k.to_string(),
                format_f64(row.lambda),
                format_f64(row.step_length),
                row.accuracy.map(format_f64).unwrap_or_default(),
                row.error.clone().unwrap_or_default(),
            ])
            .map_err(io_err)?;
    }
    writer
        .flush()
        .map_err(|e| CliError::Runtime(format!("csv flush failed: {e}")))?;

    if let Some(path) = &args.best_out {
        let text = config::render_hyper(&best, cfg.restarts, cfg.standardize);
        std::fs::write(path, text)
            .map_err(|e| CliError::Runtime(format!("cannot write {}: {e}", path.display())))?;
    }
    println!(
        "swept {} points: best k={} lambda={} step={}",
        rows.len(),
        best.k,
        best.lambda,
        best.step_length
    );
    Ok(())
}
