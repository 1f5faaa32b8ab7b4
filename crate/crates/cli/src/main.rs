//! `latentbench`: ingest data, fit embeddings and classifiers, run sweeps and
//! turn results files into tables.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use nalgebra::DMatrix;

use latentbench_core::classify::{accuracy, dump_trees, Classifier, ClassifierSettings};
use latentbench_core::container::{
    classifier_from_container, classifier_to_container, dataset_to_container, embedding_from_container,
    embedding_to_container, Container,
};
use latentbench_core::embed::{fit_embedding, EmbedderSettings};
use latentbench_core::harness::{
    read_results, resolve_dataset, run_sweep, EffectBaseline, EmbeddingCache, Experiment, PipelineSettings,
    SweepOptions,
};
use latentbench_core::ingest::{read_idx_pair, read_table, Modality, SurrogateSpec};
use latentbench_core::report::{
    aggregate, attach_effects, emit_figure_table, summarize_effects, write_aggregate_table, Figure, SummaryConfig,
};
use latentbench_core::{binarize_target, ClassifierKind, Dataset, EmbedderKind, Error, ExperimentPlan, Result};

#[derive(Parser)]
#[command(name = "latentbench", version, about = "Semisupervised sample-complexity benchmarks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Convert IDX or delimited-table input into a dataset container.
    Ingest(IngestArgs),
    /// Write an imaging-shaped synthetic dataset.
    Surrogate(SurrogateArgs),
    /// Fit an embedding or apply a fitted one.
    #[command(subcommand)]
    Embed(EmbedCommand),
    /// Fit a classifier or predict with a fitted one.
    #[command(subcommand)]
    Classify(ClassifyCommand),
    #[command(subcommand)]
    Bench(BenchCommand),
    /// Aggregate results files into tables and summaries.
    #[command(subcommand)]
    Report(ReportCommand),
}

#[derive(Clone, Copy, ValueEnum)]
enum InputFormat {
    Idx,
    Csv,
}

#[derive(Args)]
struct IngestArgs {
    #[arg(long, value_enum)]
    format: InputFormat,
    /// IDX image file (idx3-ubyte).
    #[arg(long, required_if_eq("format", "idx"))]
    images: Option<PathBuf>,
    /// IDX label file (idx1-ubyte).
    #[arg(long, required_if_eq("format", "idx"))]
    labels: Option<PathBuf>,
    /// Delimited table with a header row.
    #[arg(long, required_if_eq("format", "csv"))]
    table: Option<PathBuf>,
    #[arg(long, default_value_t = ',')]
    delimiter: char,
    /// Column holding a target; repeat for several targets.
    #[arg(long = "target")]
    targets: Vec<String>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SurrogateArgs {
    /// t1, rfmri or dmri.
    #[arg(long, default_value = "t1")]
    modality: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Full generator spec as JSON; overrides --modality and --seed.
    #[arg(long)]
    spec: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Subcommand)]
enum EmbedCommand {
    /// Fit on every row of a dataset. Tabular data is used as given.
    Fit {
        /// Dataset id: container path, IDX directory or surrogate:<modality>[@seed].
        #[arg(long)]
        data: String,
        #[arg(long)]
        embedder: EmbedderKind,
        #[arg(long, default_value_t = 50)]
        dim: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Embedder settings as JSON (`isomap`, `vae` sections).
        #[arg(long)]
        settings: Option<PathBuf>,
        #[arg(long)]
        max_geodesic_memory: Option<u64>,
        #[arg(long)]
        out: PathBuf,
        /// Per-epoch VAE loss curve as CSV.
        #[arg(long)]
        curve: Option<PathBuf>,
    },
    /// Embed every row of a dataset and write the coordinates as CSV.
    Transform {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        data: String,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Subcommand)]
enum ClassifyCommand {
    Fit {
        #[arg(long)]
        data: String,
        #[arg(long)]
        target: String,
        #[arg(long)]
        classifier: ClassifierKind,
        /// Fitted embedding applied to the features first.
        #[arg(long)]
        embedding: Option<PathBuf>,
        /// Recode the target as above/below its mean.
        #[arg(long)]
        binarize: bool,
        /// Classifier settings as JSON (`logreg_lambda`, `forest`).
        #[arg(long)]
        settings: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        /// Write a readable dump of every forest tree.
        #[arg(long)]
        dump_trees: Option<PathBuf>,
    },
    /// Predict every row; prints accuracy when the target is present.
    Predict {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        data: String,
        #[arg(long)]
        embedding: Option<PathBuf>,
        #[arg(long)]
        target: Option<String>,
        #[arg(long)]
        binarize: bool,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Subcommand)]
enum BenchCommand {
    /// Run every cell of a plan, appending to a results CSV.
    Run {
        #[arg(long)]
        plan: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, env = "LATENTBENCH_WORKERS", default_value_t = 1)]
        workers: usize,
        /// Skip cells already present in --out.
        #[arg(long)]
        resume: bool,
        /// Pipeline settings as JSON.
        #[arg(long)]
        settings: Option<PathBuf>,
        /// Record zero wall time so results files compare bitwise.
        #[arg(long)]
        no_timing: bool,
        /// Refuse Isomap fits whose geodesic matrix exceeds this many bytes.
        #[arg(long)]
        max_geodesic_memory: Option<u64>,
        /// Embedding cache budget in bytes (0 disables the cache).
        #[arg(long, default_value_t = 1 << 30)]
        cache_bytes: usize,
    },
}

#[derive(Args)]
struct EffectArgs {
    /// Labeled and unlabeled size of the ceiling cell.
    #[arg(long, default_value_t = 7000)]
    l_ceiling: usize,
    /// Unlabeled size of the semisupervised cell (default: largest run).
    #[arg(long)]
    u_max: Option<usize>,
    #[arg(long, value_enum, default_value = "pipeline")]
    baseline: BaselineArg,
    /// Per-target weights as name=weight,... (default uniform).
    #[arg(long)]
    weights: Option<String>,
}

#[derive(Clone, Copy, ValueEnum)]
enum BaselineArg {
    Pipeline,
    Raw,
}

#[derive(Subcommand)]
enum ReportCommand {
    /// Mean, std and count per (dataset, target, embedder, classifier, L, U).
    Aggregate {
        #[arg(long, num_args = 1.., required = true)]
        results: Vec<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// Attach semisupervision effects to the semisupervised rows.
        #[arg(long)]
        effects: bool,
        #[command(flatten)]
        effect: EffectArgs,
    },
    /// Plot-ready table for one figure.
    Figure {
        #[arg(long, num_args = 1.., required = true)]
        results: Vec<PathBuf>,
        #[arg(long)]
        which: Figure,
        /// Labeled size of the f1 curves (default: smallest present).
        #[arg(long)]
        labeled: Option<usize>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Cross-target semisupervision effects per (embedder, classifier, L).
    Effects {
        #[arg(long, num_args = 1.., required = true)]
        results: Vec<PathBuf>,
        #[command(flatten)]
        effect: EffectArgs,
        #[arg(long)]
        json: Option<PathBuf>,
        /// Aligned text table; printed to stdout when omitted.
        #[arg(long)]
        text: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::Ingest(a) => ingest(a),
        Command::Surrogate(a) => surrogate(a),
        Command::Embed(c) => embed(c),
        Command::Classify(c) => classify(c),
        Command::Bench(c) => bench(c),
        Command::Report(c) => report(c),
    }
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn ingest(a: IngestArgs) -> Result<()> {
    let ds = match a.format {
        InputFormat::Idx => {
            let (images, labels) = (a.images.expect("clap"), a.labels.expect("clap"));
            read_idx_pair(&images, &labels)?
        }
        InputFormat::Csv => {
            let table = a.table.expect("clap");
            let names: Vec<&str> = a.targets.iter().map(String::as_str).collect();
            let read = read_table(&table, a.delimiter, &names)?;
            if read.dropped_rows > 0 {
                log::warn!("dropped {} rows with unparseable cells", read.dropped_rows);
            }
            read.dataset
        }
    };
    dataset_to_container(&ds).write(&a.out)?;
    println!("{} rows x {} features, {} targets -> {}", ds.n(), ds.p(), ds.targets().len(), a.out.display());
    Ok(())
}

fn surrogate(a: SurrogateArgs) -> Result<()> {
    let spec = match &a.spec {
        Some(path) => serde_json::from_str::<SurrogateSpec>(&read_text(path)?)
            .map_err(|e| Error::Config(format!("surrogate spec: {e}")))?,
        None => SurrogateSpec::ukbb_like(Modality::parse(&a.modality)?, a.seed),
    };
    let ds = latentbench_core::ingest::generate_surrogate(&spec)?;
    dataset_to_container(&ds).write(&a.out)?;
    println!("{} rows x {} features, {} targets -> {}", ds.n(), ds.p(), ds.targets().len(), a.out.display());
    Ok(())
}

fn embed(c: EmbedCommand) -> Result<()> {
    match c {
        EmbedCommand::Fit {
            data,
            embedder,
            dim,
            seed,
            settings,
            max_geodesic_memory,
            out,
            curve,
        } => {
            let ds = resolve_dataset(&data, None)?;
            let mut settings: EmbedderSettings = match settings {
                Some(p) => serde_json::from_str(&read_text(&p)?)
                    .map_err(|e| Error::Config(format!("embedder settings: {e}")))?,
                None => EmbedderSettings::default(),
            };
            if max_geodesic_memory.is_some() {
                settings.isomap.max_geodesic_bytes = max_geodesic_memory;
            }
            let fitted = fit_embedding(embedder, &ds.without_targets(), dim, &settings, seed)?;
            embedding_to_container(&fitted.model).write(&out)?;
            if let Some(path) = curve {
                match &fitted.curve {
                    Some(fit) => write_text(&path, &fit.curve_csv())?,
                    None => log::warn!("--curve ignored: only the VAE has a training curve"),
                }
            }
            println!("{}", serde_json::to_string(&fitted.info)?);
            Ok(())
        }
        EmbedCommand::Transform { model, data, out } => {
            let model = embedding_from_container(&Container::read(&model)?)?;
            let ds = resolve_dataset(&data, None)?;
            write_matrix_csv(&out, &model.transform(ds.features())?)
        }
    }
}

fn write_matrix_csv(path: &Path, m: &DMatrix<f64>) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record((0..m.ncols()).map(|j| format!("z{j}")))?;
    for i in 0..m.nrows() {
        w.write_record(m.row(i).iter().map(|v| v.to_string()))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Features after the optional embedding, and the focused (optionally binarized) dataset.
fn classifier_inputs(
    data: &str,
    target: &str,
    embedding: Option<&Path>,
    binarize: bool,
) -> Result<(DMatrix<f64>, Dataset)> {
    let mut ds = resolve_dataset(data, None)?.focus_target(target)?;
    if binarize {
        let mean = ds.target()?.mean();
        ds = binarize_target(&ds, mean)?;
    }
    let x = match embedding {
        Some(path) => embedding_from_container(&Container::read(path)?)?.transform(ds.features())?,
        None => ds.features().clone(),
    };
    Ok((x, ds))
}

fn classify(c: ClassifyCommand) -> Result<()> {
    match c {
        ClassifyCommand::Fit {
            data,
            target,
            classifier,
            embedding,
            binarize,
            settings,
            seed,
            out,
            dump_trees: dump,
        } => {
            let (x, ds) = classifier_inputs(&data, &target, embedding.as_deref(), binarize)?;
            let settings: ClassifierSettings = match settings {
                Some(p) => serde_json::from_str(&read_text(&p)?)
                    .map_err(|e| Error::Config(format!("classifier settings: {e}")))?,
                None => ClassifierSettings::default(),
            };
            let t = ds.target()?;
            let model = Classifier::fit(classifier, &x, &t.values, t.class_count, &settings, seed)?;
            classifier_to_container(&model).write(&out)?;
            let train_acc = accuracy(&model.predict(&x)?, &t.values)?;
            println!("training accuracy {train_acc:.4}");
            if let Some(path) = dump {
                match &model {
                    Classifier::Forest(f) => write_text(&path, &dump_trees(f))?,
                    Classifier::LogReg(_) => log::warn!("--dump-trees ignored for logistic regression"),
                }
            }
            Ok(())
        }
        ClassifyCommand::Predict {
            model,
            data,
            embedding,
            target,
            binarize,
            out,
        } => {
            let model = classifier_from_container(&Container::read(&model)?)?;
            let (x, truth) = match &target {
                Some(t) => {
                    let (x, ds) = classifier_inputs(&data, t, embedding.as_deref(), binarize)?;
                    (x, Some(ds.target()?.values.clone()))
                }
                None => {
                    let ds = resolve_dataset(&data, None)?;
                    let x = match &embedding {
                        Some(p) => embedding_from_container(&Container::read(p)?)?.transform(ds.features())?,
                        None => ds.features().clone(),
                    };
                    (x, None)
                }
            };
            let pred = model.predict(&x)?;
            let mut w = csv::Writer::from_path(&out)?;
            w.write_record(["row", "predicted"])?;
            for (i, p) in pred.iter().enumerate() {
                w.write_record([i.to_string(), p.to_string()])?;
            }
            w.flush().map_err(|e| Error::io(&out, e))?;
            if let Some(truth) = truth {
                println!("accuracy {:.4}", accuracy(&pred, &truth)?);
            }
            Ok(())
        }
    }
}

fn bench(c: BenchCommand) -> Result<()> {
    let BenchCommand::Run {
        plan,
        out,
        workers,
        resume,
        settings,
        no_timing,
        max_geodesic_memory,
        cache_bytes,
    } = c;
    let plan_path = plan;
    let plan = ExperimentPlan::from_json(&read_text(&plan_path)?)?;
    let mut settings = match settings {
        Some(p) => PipelineSettings::from_json(&read_text(&p)?)?,
        None => PipelineSettings::default(),
    };
    if max_geodesic_memory.is_some() {
        settings.embedding.isomap.max_geodesic_bytes = max_geodesic_memory;
    }
    let dataset = resolve_dataset(&plan.dataset_id, plan_path.parent())?;
    let cache = if cache_bytes == 0 {
        EmbeddingCache::disabled()
    } else {
        EmbeddingCache::new(cache_bytes)
    };
    let mut exp = Experiment::new(plan, settings, &dataset, &cache)?;
    exp.record_timing = !no_timing;
    let summary = run_sweep(
        &exp,
        &out,
        &SweepOptions {
            workers: workers.max(1),
            resume,
            stop_after: None,
        },
    )?;
    println!(
        "fingerprint {}: {} cells run, {} skipped, {} failed -> {}",
        exp.fingerprint(),
        summary.executed,
        summary.skipped,
        summary.failed,
        out.display()
    );
    Ok(())
}

fn load_records(paths: &[PathBuf]) -> Result<Vec<latentbench_core::ResultRecord>> {
    let mut records = Vec::new();
    for p in paths {
        let file = read_results(p)?;
        if file.truncated_tail {
            log::warn!("{}: ignoring a partial last line", p.display());
        }
        records.extend(file.records);
    }
    Ok(records)
}

fn summary_config(a: &EffectArgs) -> Result<SummaryConfig> {
    let weights = match &a.weights {
        None => None,
        Some(spec) => {
            let mut w = BTreeMap::new();
            for item in spec.split(',').filter(|s| !s.is_empty()) {
                let (name, value) = item
                    .split_once('=')
                    .ok_or_else(|| Error::Config(format!("weight {item:?} is not name=value")))?;
                let value: f64 = value
                    .parse()
                    .map_err(|_| Error::Config(format!("weight {item:?} is not a number")))?;
                w.insert(name.to_string(), value);
            }
            Some(w)
        }
    };
    Ok(SummaryConfig {
        l_ceiling: a.l_ceiling,
        u_max: a.u_max,
        baseline: match a.baseline {
            BaselineArg::Pipeline => EffectBaseline::Pipeline,
            BaselineArg::Raw => EffectBaseline::Raw,
        },
        weights,
    })
}

fn report(c: ReportCommand) -> Result<()> {
    match c {
        ReportCommand::Aggregate {
            results,
            out,
            effects,
            effect,
        } => {
            let records = load_records(&results)?;
            let mut rows = aggregate(&records)?;
            if effects {
                attach_effects(&mut rows, &records, &summary_config(&effect)?)?;
            }
            write_text(&out, &write_aggregate_table(&rows))?;
            println!("{} rows -> {}", rows.len(), out.display());
            Ok(())
        }
        ReportCommand::Figure {
            results,
            which,
            labeled,
            out,
        } => {
            let rows = aggregate(&load_records(&results)?)?;
            let table = emit_figure_table(&rows, which, labeled)?;
            write_text(&out, &table.text)?;
            println!("{} -> {} ({} absent cells)", which.name(), out.display(), table.absent.len());
            Ok(())
        }
        ReportCommand::Effects {
            results,
            effect,
            json,
            text,
        } => {
            let summary = summarize_effects(&load_records(&results)?, &summary_config(&effect)?)?;
            if let Some(p) = json {
                write_text(&p, &summary.to_json())?;
            }
            match text {
                Some(p) => write_text(&p, &summary.to_text())?,
                None => print!("{}", summary.to_text()),
            }
            Ok(())
        }
    }
}
