//! Command-line front end: data synthesis, training, evaluation,
//! inference, and explanation export.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use mrcgat::data::io::{load_csv, save_csv};
use mrcgat::data::synth::{synth_generate, SynthSpec};
use mrcgat::data::{Dataset, DiagnosisClass};
use mrcgat::error::Error;
use mrcgat::explain::{
    attention_json, evaluate_episodes, export_attention_named, export_gating,
    write_attention_edge_list, write_gating_csv,
};
use mrcgat::graph::write_edge_list;
use mrcgat::metrics::{argmax_class, write_roc_csv, MetricsReport, ScoredPrediction};
use mrcgat::model::ModelParameters;
use mrcgat::numeric::rng::{streams, RngStream};
use mrcgat::train::{
    cross_validate, evaluate_single_split, infer_one, train, write_loss_trace, QueryInput,
    TrainingConfig,
};

#[derive(Parser)]
#[command(
    name = "mrcgat",
    version,
    about = "Copula-aligned relational graph attention pipeline"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic multimodal cohort CSV.
    Synth(SynthArgs),
    /// Train a model with episodic meta-updates.
    Train(TrainArgs),
    /// Cross-validated evaluation (default) or single-split evaluation of
    /// a saved model (--no-cv).
    Eval(EvalArgs),
    /// Classify query subjects inductively against a labeled support pool.
    Infer(InferArgs),
    /// Export gating and attention coefficients for trained models.
    Explain(ExplainArgs),
}

/// Training configuration; defaults in brackets. A --config file
/// overrides these flags.
#[derive(Args)]
struct ConfigFlags {
    /// Support subjects per class per episode [10]
    #[arg(long)]
    q: Option<usize>,
    /// Episodes per iteration, batch size B [32]
    #[arg(long)]
    episodes_per_iteration: Option<usize>,
    /// Meta-training iterations [1200]
    #[arg(long)]
    iterations: Option<usize>,
    /// KNN neighbor budget k [6]
    #[arg(long)]
    knn_k: Option<usize>,
    /// Distance threshold tau for edge retention [1.0]
    #[arg(long)]
    tau: Option<f64>,
    /// Learning rate [0.01]
    #[arg(long)]
    learning_rate: Option<f64>,
    /// Dropout rate on attention coefficients [0.2]
    #[arg(long)]
    dropout: Option<f64>,
    /// Focal loss focusing parameter gamma [2.0]
    #[arg(long)]
    focal_gamma: Option<f64>,
    /// Covariance shrinkage intensity in [0,1], or "auto" for the
    /// Ledoit-Wolf estimate with floor 0.05 [0.85]
    #[arg(long)]
    lambda: Option<String>,
    /// Master seed [42]
    #[arg(long)]
    seed: Option<u64>,
    /// Append the one-hot support-label channel to node features [true]
    #[arg(long)]
    label_channel: Option<bool>,
    /// Cross-validation folds [5]
    #[arg(long = "folds", alias = "fold-count")]
    fold_count: Option<usize>,
    /// Support redraws averaged per query at inference, R [5]
    #[arg(long)]
    infer_ensemble: Option<usize>,
    /// Update rule: adam | sgd [adam]
    #[arg(long)]
    optimizer: Option<String>,
    /// Rank statistics scope: episode | split [episode]
    #[arg(long)]
    copula_scope: Option<String>,
    /// Isolated-node handling: on | error [on]
    #[arg(long)]
    fallback: Option<String>,
    /// Layer-1 width per attention head [16]
    #[arg(long)]
    head_dim_1: Option<usize>,
    /// Layer-1 attention heads [4]
    #[arg(long)]
    heads_1: Option<usize>,
    /// Layer-2 width per attention head [32]
    #[arg(long)]
    head_dim_2: Option<usize>,
    /// Layer-2 attention heads [2]
    #[arg(long)]
    heads_2: Option<usize>,
    /// Classifier hidden width [32]
    #[arg(long)]
    classifier_hidden: Option<usize>,
    /// Flat key-value (TOML) config file; keys are the flag names above.
    /// File values override flags.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Worker thread cap; 0 picks the machine default
    /// [env MRCGAT_THREADS]
    #[arg(long, default_value_t = default_threads())]
    threads: usize,
    /// Restrict to a class subset, e.g. CN,AD for a binary task
    #[arg(long, value_delimiter = ',')]
    classes: Option<Vec<String>>,
}

fn default_threads() -> usize {
    std::env::var("MRCGAT_THREADS")
        .ok()
        .and_then(|v| v.parse().ok())
        .unwrap_or(0)
}

impl ConfigFlags {
    fn resolve(&self) -> Result<TrainingConfig, Error> {
        let mut config = TrainingConfig::default();
        macro_rules! apply {
            ($($field:ident),*) => {
                $(if let Some(v) = &self.$field { config.$field = v.clone(); })*
            };
        }
        apply!(
            q,
            episodes_per_iteration,
            iterations,
            knn_k,
            tau,
            learning_rate,
            dropout,
            focal_gamma,
            seed,
            label_channel,
            fold_count,
            infer_ensemble,
            head_dim_1,
            heads_1,
            head_dim_2,
            heads_2,
            classifier_hidden
        );
        for (key, value) in [
            ("lambda", &self.lambda),
            ("optimizer", &self.optimizer),
            ("copula_scope", &self.copula_scope),
            ("fallback", &self.fallback),
        ] {
            if let Some(v) = value {
                config.set_key(key, v)?;
            }
        }
        if let Some(path) = &self.config {
            config.apply_file(path)?;
        }
        config.validate()?;
        Ok(config)
    }

    fn load_dataset(&self, path: &Path) -> Result<Dataset, Error> {
        let dataset = load_csv(path)?;
        match &self.classes {
            None => Ok(dataset),
            Some(names) => {
                let mut classes = Vec::new();
                for name in names {
                    classes.push(DiagnosisClass::parse(name).ok_or_else(|| {
                        Error::Config(format!("unknown class '{name}' (expect CN/MCI/AD)"))
                    })?);
                }
                dataset.filter_classes(&classes)
            }
        }
    }
}

fn print_config(config: &TrainingConfig) {
    println!("resolved config (seed {}):", config.seed);
    let text = toml::to_string(config).unwrap_or_default();
    for line in text.lines() {
        println!("  {line}");
    }
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Subjects per diagnostic class
    #[arg(long, default_value_t = 50)]
    n_per_class: usize,
    /// Feature dimensions per relation: d_rf,d_cog,d_mri
    #[arg(long, value_delimiter = ',', default_values_t = [5, 8, 20])]
    dims: Vec<usize>,
    /// Class-mean spacing along a random direction per relation
    #[arg(long, default_value_t = 3.0)]
    separation: f64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct TrainArgs {
    /// Training data CSV
    #[arg(long)]
    data: PathBuf,
    #[command(flatten)]
    flags: ConfigFlags,
    /// Output model file (JSON)
    #[arg(long)]
    out: PathBuf,
    /// Optional loss trace CSV (iteration,mean_loss)
    #[arg(long)]
    trace: Option<PathBuf>,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    data: PathBuf,
    #[command(flatten)]
    flags: ConfigFlags,
    /// Output report (JSON)
    #[arg(long)]
    report: PathBuf,
    /// Saved model for --no-cv evaluation; ignored during
    /// cross-validation
    #[arg(long)]
    model: Option<PathBuf>,
    /// Evaluate the saved model on a single split instead of retraining
    /// per fold
    #[arg(long, default_value_t = false)]
    no_cv: bool,
    /// Directory for ROC point CSVs
    #[arg(long)]
    roc_dir: Option<PathBuf>,
}

#[derive(Args)]
struct InferArgs {
    /// Labeled support pool CSV
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    model: PathBuf,
    /// Query subjects CSV (labels ignored)
    #[arg(long)]
    queries: PathBuf,
    /// Output predictions CSV
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    flags: ConfigFlags,
}

#[derive(Args)]
struct ExplainArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    model: PathBuf,
    /// Episodes to evaluate and export
    #[arg(long, default_value_t = 10)]
    episodes: usize,
    #[arg(long)]
    out_dir: PathBuf,
    /// Also dump the sparsified relational graphs as edge lists
    #[arg(long, default_value_t = false)]
    dump_graphs: bool,
    #[command(flatten)]
    flags: ConfigFlags,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Synth(args) => run_synth(args),
        Command::Train(args) => with_pool(args.flags.threads, || run_train(args)),
        Command::Eval(args) => with_pool(args.flags.threads, || run_eval(args)),
        Command::Infer(args) => with_pool(args.flags.threads, || run_infer(args)),
        Command::Explain(args) => with_pool(args.flags.threads, || run_explain(args)),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_)
        | Error::Schema(_)
        | Error::Row { .. }
        | Error::Sampling(_)
        | Error::DegenerateEpisode(_)
        | Error::Graph(_)
        | Error::ModelFile(_)
        | Error::UndefinedAuc(_)
        | Error::Shape(_) => 2,
        Error::NotSpd(_) | Error::Numeric(_) | Error::Domain(_) => 3,
        Error::Io(_) | Error::Json(_) => 1,
    }
}

fn with_pool(threads: usize, f: impl FnOnce() -> Result<(), Error> + Send) -> Result<(), Error> {
    if threads == 0 {
        return f();
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    pool.install(f)
}

fn run_synth(args: &SynthArgs) -> Result<(), Error> {
    if args.dims.len() != 3 {
        return Err(Error::Config(format!(
            "--dims needs exactly three values d_rf,d_cog,d_mri, got {}",
            args.dims.len()
        )));
    }
    let spec = SynthSpec {
        seed: args.seed,
        n_per_class: args.n_per_class,
        dims: (args.dims[0], args.dims[1], args.dims[2]),
        separation: args.separation,
    };
    println!(
        "synth: seed {} n_per_class {} dims ({},{},{}) separation {}",
        spec.seed, spec.n_per_class, spec.dims.0, spec.dims.1, spec.dims.2, spec.separation
    );
    let dataset = synth_generate(&spec)?;
    save_csv(&dataset, &args.out)?;
    println!(
        "wrote {} subjects x {} features to {}",
        dataset.records.len(),
        dataset.num_features(),
        args.out.display()
    );
    Ok(())
}

fn run_train(args: &TrainArgs) -> Result<(), Error> {
    let config = args.flags.resolve()?;
    print_config(&config);
    let dataset = args.flags.load_dataset(&args.data)?;
    println!(
        "data: {} subjects, {} features, {} classes",
        dataset.records.len(),
        dataset.num_features(),
        dataset.num_classes()
    );
    let outcome = train(&dataset, &config)?;
    outcome.params.save(&args.out)?;
    println!("wrote model to {}", args.out.display());
    if let Some(trace_path) = &args.trace {
        let mut out = std::io::BufWriter::new(std::fs::File::create(trace_path)?);
        write_loss_trace(&outcome.trace, &mut out)?;
        println!("wrote loss trace to {}", trace_path.display());
    }
    if let Some((t, loss)) = outcome.trace.last() {
        println!("final iteration {t}: mean loss {loss:.6}");
    }
    Ok(())
}

#[derive(Serialize)]
struct FoldEntry {
    fold: usize,
    report: MetricsReport,
    predictions: Vec<ScoredPrediction>,
}

#[derive(Serialize)]
struct CvReportFile<'a> {
    mode: &'static str,
    seed: u64,
    config: &'a TrainingConfig,
    accuracy_mean: f64,
    accuracy_std: f64,
    micro_auc_mean: f64,
    micro_auc_std: f64,
    folds: Vec<FoldEntry>,
}

#[derive(Serialize)]
struct SingleReportFile<'a> {
    mode: &'static str,
    seed: u64,
    config: &'a TrainingConfig,
    report: MetricsReport,
    predictions: Vec<ScoredPrediction>,
}

fn run_eval(args: &EvalArgs) -> Result<(), Error> {
    let config = args.flags.resolve()?;
    print_config(&config);
    let dataset = args.flags.load_dataset(&args.data)?;

    if args.no_cv {
        let model_path = args
            .model
            .as_ref()
            .ok_or_else(|| Error::Config("--no-cv evaluation needs --model".into()))?;
        let params = ModelParameters::load(model_path)?;
        let (report, predictions) = evaluate_single_split(&params, &dataset, &config)?;
        if let Some(dir) = &args.roc_dir {
            write_curves(dir, "single", &report)?;
        }
        println!(
            "single split: accuracy {:.4}, micro AUC {:.4} over {} subjects",
            report.accuracy, report.micro_auc, report.n_samples
        );
        let file = SingleReportFile {
            mode: "single_split",
            seed: config.seed,
            config: &config,
            report,
            predictions,
        };
        std::fs::write(&args.report, serde_json::to_string_pretty(&file)?)?;
    } else {
        let outcome = cross_validate(&dataset, &config)?;
        if let Some(dir) = &args.roc_dir {
            for (f, report) in outcome.folds.iter().enumerate() {
                write_curves(dir, &format!("fold{f}"), report)?;
            }
        }
        println!(
            "cross-validation: accuracy {:.4} +/- {:.4}, micro AUC {:.4} +/- {:.4}",
            outcome.accuracy_mean,
            outcome.accuracy_std,
            outcome.micro_auc_mean,
            outcome.micro_auc_std
        );
        let folds = outcome
            .folds
            .into_iter()
            .zip(outcome.fold_predictions)
            .enumerate()
            .map(|(fold, (report, predictions))| FoldEntry {
                fold,
                report,
                predictions,
            })
            .collect();
        let file = CvReportFile {
            mode: "cross_validation",
            seed: config.seed,
            config: &config,
            accuracy_mean: outcome.accuracy_mean,
            accuracy_std: outcome.accuracy_std,
            micro_auc_mean: outcome.micro_auc_mean,
            micro_auc_std: outcome.micro_auc_std,
            folds,
        };
        std::fs::write(&args.report, serde_json::to_string_pretty(&file)?)?;
    }
    println!("wrote report to {}", args.report.display());
    Ok(())
}

fn write_curves(dir: &Path, prefix: &str, report: &MetricsReport) -> Result<(), Error> {
    std::fs::create_dir_all(dir)?;
    let mut out = std::io::BufWriter::new(std::fs::File::create(
        dir.join(format!("roc_{prefix}_micro.csv")),
    )?);
    write_roc_csv(&report.micro_curve, &mut out)?;
    for (name, curve) in report.class_names.iter().zip(&report.class_curves) {
        let mut out = std::io::BufWriter::new(std::fs::File::create(
            dir.join(format!("roc_{prefix}_{name}_vs_rest.csv")),
        )?);
        write_roc_csv(curve, &mut out)?;
    }
    for pair in &report.deeproc {
        let mut out = std::io::BufWriter::new(std::fs::File::create(
            dir.join(format!("roc_{prefix}_{}.csv", pair.task)),
        )?);
        write_roc_csv(&pair.curve, &mut out)?;
    }
    Ok(())
}

fn run_infer(args: &InferArgs) -> Result<(), Error> {
    let config = args.flags.resolve()?;
    print_config(&config);
    let pool_data = args.flags.load_dataset(&args.data)?;
    let queries = load_csv(&args.queries)?;
    if queries.partition != pool_data.partition {
        return Err(Error::Schema(
            "query CSV feature layout differs from the support pool".into(),
        ));
    }
    let params = ModelParameters::load(&args.model)?;
    let pool = pool_data.labeled_indices();
    let infer_root = RngStream::new(config.seed, streams::INFER);

    let mut out = std::io::BufWriter::new(std::fs::File::create(&args.out)?);
    use std::io::Write;
    write!(out, "subject_id,predicted")?;
    for class in &pool_data.class_names {
        write!(out, ",p_{}", class.name())?;
    }
    writeln!(out)?;
    for (i, record) in queries.records.iter().enumerate() {
        let probs = infer_one(
            &params,
            &pool_data,
            &pool,
            QueryInput {
                subject_id: &record.subject_id,
                features: &record.features,
            },
            &config,
            &infer_root.substream(i as u64),
            None,
        )?;
        let predicted = pool_data.class_names[argmax_class(&probs)].name();
        write!(out, "{},{predicted}", record.subject_id)?;
        for p in &probs {
            write!(out, ",{p}")?;
        }
        writeln!(out)?;
    }
    println!(
        "wrote predictions for {} queries to {}",
        queries.records.len(),
        args.out.display()
    );
    Ok(())
}

fn run_explain(args: &ExplainArgs) -> Result<(), Error> {
    let config = args.flags.resolve()?;
    print_config(&config);
    let dataset = args.flags.load_dataset(&args.data)?;
    let params = ModelParameters::load(&args.model)?;
    std::fs::create_dir_all(&args.out_dir)?;

    let evaluated = evaluate_episodes(&params, &dataset, &config, args.episodes, config.seed)?;
    let gating = export_gating(&evaluated)?;
    let mut gate_out =
        std::io::BufWriter::new(std::fs::File::create(args.out_dir.join("gating.csv"))?);
    write_gating_csv(&gating, &mut gate_out)?;

    for (e, ev) in evaluated.iter().enumerate() {
        let attention = export_attention_named(ev, &dataset)?;
        std::fs::write(
            args.out_dir.join(format!("episode_{e}_attention.json")),
            attention_json(&attention)?,
        )?;
        let mut edges = std::io::BufWriter::new(std::fs::File::create(
            args.out_dir.join(format!("episode_{e}_attention.txt")),
        )?);
        write_attention_edge_list(&attention, &mut edges)?;
        if args.dump_graphs {
            let mut gout = std::io::BufWriter::new(std::fs::File::create(
                args.out_dir.join(format!("episode_{e}_graphs.txt")),
            )?);
            let labeled: Vec<(&str, &mrcgat::graph::RelationalGraph)> = mrcgat::data::Relation::ALL
                .iter()
                .map(|r| (r.name(), &ev.episode.graphs[r.index()]))
                .collect();
            write_edge_list(&mut gout, &labeled)?;
        }
    }
    println!(
        "wrote gating.csv and {} episode exports to {}",
        evaluated.len(),
        args.out_dir.display()
    );
    Ok(())
}
