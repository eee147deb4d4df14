//! `phirisk` — file-based pipeline for sentence-level PHI risk
//! classification.
//!
//! Subcommands: `synth` (generate a synthetic corpus), `stats` (tag counts),
//! `prepare` (segment and label into JSON Lines), `cv` (cross-validate one
//! feature/model cell), `report` (merge run reports into a summary table).
//!
//! Exit codes: 0 success, 1 usage error, 2 data error, 3 success with a
//! convergence warning (notice on stderr). Every command is deterministic
//! given its flags: re-running with identical inputs overwrites
//! byte-identical files.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use phirisk_core::corpus::{self, LoadOptions, ParseOptions};
use phirisk_core::eval::{self, CvConfig, EvalReport, FoldStrategy, ReportFormat};
use phirisk_core::features::{load_embeddings, FeatureKind};
use phirisk_core::models::{ModelKind, TieBreak};
use phirisk_core::segment::{self, jsonl};
use phirisk_core::synth::{self, SynthConfig};

#[derive(Parser)]
#[command(
    name = "phirisk",
    version,
    about = "Classify clinical-note sentences as high or low PHI risk"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Count gold PHI tags per category over a corpus directory
    Stats(StatsArgs),
    /// Segment and label a corpus into a JSON Lines sentence file
    Prepare(PrepareArgs),
    /// Cross-validate one feature/model combination on prepared sentences
    Cv(CvArgs),
    /// Generate a synthetic corpus, ground-truth ledger, and test embeddings
    Synth(SynthArgs),
    /// Merge cross-validation reports into a summary table
    Report(ReportArgs),
}

#[derive(Args)]
struct StatsArgs {
    /// Corpus directory of XML documents
    #[arg(long)]
    input: PathBuf,
    /// CSV output path (table always prints to stdout)
    #[arg(long)]
    output: Option<PathBuf>,
    /// Keep tags whose literal disagrees with the text span (warn instead
    /// of failing the document)
    #[arg(long)]
    lenient: bool,
}

#[derive(Args)]
struct PrepareArgs {
    /// Corpus directory of XML documents
    #[arg(long)]
    input: PathBuf,
    /// JSON Lines output path, one sentence record per line
    #[arg(long)]
    output: PathBuf,
    #[arg(long)]
    lenient: bool,
}

#[derive(Args)]
struct CvArgs {
    /// Prepared JSON Lines sentence file
    #[arg(long)]
    input: PathBuf,
    /// Directory for the report files
    #[arg(long)]
    output: PathBuf,
    /// Feature kind: bow | w2v
    #[arg(long)]
    features: String,
    /// Model kind: bnb | gnb | ada | rf | lsvm | svm
    #[arg(long)]
    model: String,
    #[arg(long, default_value_t = 5)]
    k: usize,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Embedding file in the text vector format; required with
    /// `--features w2v`
    #[arg(long)]
    embeddings: Option<PathBuf>,
    /// Assign whole documents to folds instead of stratified sentences
    #[arg(long)]
    group_by_document: bool,
    /// Binarize real-valued features at this threshold for Bernoulli NB
    #[arg(long)]
    binarize_at: Option<f64>,
    /// Resolve exact score ties to high risk instead of low
    #[arg(long)]
    tie_high: bool,
}

#[derive(Args)]
struct SynthArgs {
    /// Output directory; receives corpus/, ledger.json, embeddings.txt
    #[arg(long)]
    output: PathBuf,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long, default_value_t = 100)]
    notes: usize,
    #[arg(long, default_value_t = 4)]
    sentences_min: usize,
    #[arg(long, default_value_t = 10)]
    sentences_max: usize,
    /// Probability that a sentence carries a PHI tag
    #[arg(long, default_value_t = 0.45)]
    high_fraction: f64,
    /// Dimension of the emitted test embeddings
    #[arg(long, default_value_t = 25)]
    dim: usize,
}

#[derive(Args)]
struct ReportArgs {
    /// Directory containing `report_*.json` files from `cv` runs
    #[arg(long)]
    input: PathBuf,
    /// Directory for summary.csv and confusion.csv
    #[arg(long)]
    output: PathBuf,
}

enum CliError {
    Usage(String),
    Data(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Usage(m) | CliError::Data(m) => m,
        }
    }
}

macro_rules! data_error_from {
    ($($ty:ty),*) => {
        $(impl From<$ty> for CliError {
            fn from(e: $ty) -> Self {
                CliError::Data(e.to_string())
            }
        })*
    };
}

data_error_from!(
    corpus::CorpusError,
    phirisk_core::eval::EvalError,
    phirisk_core::features::FeatureError,
    phirisk_core::segment::JsonlError,
    phirisk_core::synth::SynthError,
    std::io::Error
);

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    if let Ok(threads) = std::env::var("PHIRISK_THREADS") {
        match threads.parse::<usize>() {
            Ok(n) if n >= 1 => {
                let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
            }
            _ => {
                eprintln!("error: PHIRISK_THREADS must be a positive integer, got {threads:?}");
                return ExitCode::from(1);
            }
        }
    }
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {}", e.message());
            ExitCode::from(e.code())
        }
    }
}

fn run(cli: Cli) -> Result<u8, CliError> {
    match cli.command {
        Command::Stats(args) => cmd_stats(args),
        Command::Prepare(args) => cmd_prepare(args),
        Command::Cv(args) => cmd_cv(args),
        Command::Synth(args) => cmd_synth(args),
        Command::Report(args) => cmd_report(args),
    }
}

fn load_documents(
    dir: &Path,
    lenient: bool,
) -> Result<(Vec<corpus::RawDocument>, usize), CliError> {
    let opts = LoadOptions {
        parse: ParseOptions {
            lenient_literals: lenient,
        },
        ..Default::default()
    };
    let load = corpus::load_corpus_with(dir, &opts).map_err(|e| match e {
        corpus::CorpusError::EmptyCorpus { ref failures, .. } => {
            for f in failures {
                eprintln!("{f}");
            }
            CliError::Data(format!("no parseable documents in {}", dir.display()))
        }
        other => CliError::Data(other.to_string()),
    })?;
    for f in &load.failures {
        eprintln!("{f}");
    }
    Ok((load.documents, load.failures.len()))
}

fn cmd_stats(args: StatsArgs) -> Result<u8, CliError> {
    let (documents, failures) = load_documents(&args.input, args.lenient)?;
    let report = corpus::corpus_stats(&documents);
    print!("{}", report.to_table());
    if let Some(path) = &args.output {
        std::fs::write(path, report.to_csv())?;
    }
    if failures > 0 {
        return Err(CliError::Data(format!("{failures} file(s) failed to parse")));
    }
    Ok(0)
}

fn cmd_prepare(args: PrepareArgs) -> Result<u8, CliError> {
    let (documents, failures) = load_documents(&args.input, args.lenient)?;
    let records = segment::label_corpus(&documents);
    let summary = segment::corpus_label_summary(&records);
    let file = std::fs::File::create(&args.output)?;
    jsonl::write_records(std::io::BufWriter::new(file), &records)?;
    println!("Low    {}", summary.low);
    println!("High   {}", summary.high);
    println!("Total  {}", summary.total);
    if failures > 0 {
        return Err(CliError::Data(format!("{failures} file(s) failed to parse")));
    }
    Ok(0)
}

fn cmd_cv(args: CvArgs) -> Result<u8, CliError> {
    let feature_kind = match args.features.as_str() {
        "bow" => FeatureKind::Bow,
        "w2v" => FeatureKind::Emb,
        other => {
            return Err(CliError::Usage(format!(
                "unknown feature kind {other:?} (expected bow or w2v)"
            )))
        }
    };
    let model_kind: ModelKind = args.model.parse().map_err(CliError::Usage)?;
    if args.k < 2 {
        return Err(CliError::Usage(format!("--k must be at least 2, got {}", args.k)));
    }
    let table = match (feature_kind, &args.embeddings) {
        (FeatureKind::Emb, Some(path)) => Some(load_embeddings(path)?),
        (FeatureKind::Emb, None) => {
            return Err(CliError::Usage(
                "--features w2v requires --embeddings <path>".to_string(),
            ))
        }
        (FeatureKind::Bow, _) => None,
    };

    let file = std::fs::File::open(&args.input)?;
    let records = jsonl::read_records(std::io::BufReader::new(file))?;

    let mut cfg = CvConfig::new(feature_kind, model_kind);
    cfg.k = args.k;
    cfg.seed = args.seed;
    cfg.strategy = if args.group_by_document {
        FoldStrategy::DocumentGrouped
    } else {
        FoldStrategy::StratifiedSentence
    };
    cfg.tie_break = if args.tie_high { TieBreak::High } else { TieBreak::Low };
    cfg.binarize_at = args.binarize_at;

    let report = eval::cross_validate(&records, table.as_ref(), &cfg)?;
    write_report_files(&report, &args.output)?;

    print!(
        "{}",
        String::from_utf8_lossy(&eval::render_report(&report, ReportFormat::Csv)?)
    );
    println!("pooled confusion (rows true, columns predicted):");
    print!("{}", report.pooled.to_table());

    if !report.meta.all_converged {
        eprintln!("warning: at least one fold stopped before reaching the convergence tolerance");
        return Ok(3);
    }
    Ok(0)
}

fn report_basename(report: &EvalReport) -> String {
    format!("{}_{}", report.meta.features, report.meta.model)
}

fn write_report_files(report: &EvalReport, dir: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(dir)?;
    let base = report_basename(report);
    std::fs::write(
        dir.join(format!("report_{base}.csv")),
        eval::render_report(report, ReportFormat::Csv)?,
    )?;
    std::fs::write(
        dir.join(format!("confusion_{base}.csv")),
        eval::render_report(report, ReportFormat::ConfusionCsv)?,
    )?;
    std::fs::write(
        dir.join(format!("report_{base}.json")),
        eval::render_report(report, ReportFormat::Json)?,
    )?;
    Ok(())
}

fn cmd_synth(args: SynthArgs) -> Result<u8, CliError> {
    let config = SynthConfig {
        seed: args.seed,
        notes: args.notes,
        sentences_min: args.sentences_min,
        sentences_max: args.sentences_max,
        high_fraction: args.high_fraction,
        embedding_dim: args.dim,
        ..Default::default()
    };
    let corpus = synth::generate_corpus(&config).map_err(|e| match e {
        synth::SynthError::InvalidConfig(m) => CliError::Usage(m),
        other => CliError::Data(other.to_string()),
    })?;
    synth::write_corpus(&corpus, &args.output)?;
    println!(
        "wrote {} notes, ledger.json, embeddings.txt under {}",
        corpus.notes.len(),
        args.output.display()
    );
    println!(
        "Low    {}\nHigh   {}\nTotal  {}",
        corpus.ledger.label_counts.low,
        corpus.ledger.label_counts.high,
        corpus.ledger.label_counts.total
    );
    Ok(0)
}

fn cmd_report(args: ReportArgs) -> Result<u8, CliError> {
    let mut paths: Vec<PathBuf> = std::fs::read_dir(&args.input)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.is_file()
                && p.file_name()
                    .map(|n| {
                        let n = n.to_string_lossy();
                        n.starts_with("report_") && n.ends_with(".json")
                    })
                    .unwrap_or(false)
        })
        .collect();
    paths.sort();
    if paths.is_empty() {
        return Err(CliError::Data(format!(
            "no report_*.json files in {}",
            args.input.display()
        )));
    }
    let mut reports = Vec::with_capacity(paths.len());
    for p in &paths {
        let report = eval::parse_report(&std::fs::read(p)?)
            .map_err(|e| CliError::Data(format!("{}: {e}", p.display())))?;
        reports.push(report);
    }
    std::fs::create_dir_all(&args.output)?;
    let summary = eval::render_summary(&reports);
    std::fs::write(args.output.join("summary.csv"), &summary)?;
    std::fs::write(
        args.output.join("confusion.csv"),
        eval::render_summary_confusions(&reports),
    )?;
    print!("{summary}");
    Ok(0)
}
