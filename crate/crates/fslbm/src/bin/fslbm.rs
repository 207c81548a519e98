//! Command-line front-end: template building, encoding, training,
//! prediction, evaluation, and benchmarking.
//!
//! Exit codes: 0 ok, 1 data error, 2 configuration error, 3 resource
//! refusal (memory budget).

use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};

use fslbm::bitcode::HammingRadius;
use fslbm::dataset;
use fslbm::error::Error;
use fslbm::eval;
use fslbm::metafeature::{self, MetaFeatureTemplate, RawTable};
use fslbm::sht::{Fallback, StorageMode, SupervisedHashTable, TrainConfig, ZetaPolicy};
use fslbm::Codeword;

const EXIT_DATA: u8 = 1;
const EXIT_CONFIG: u8 = 2;
const EXIT_RESOURCE: u8 = 3;

#[derive(Parser)]
#[command(
    name = "fslbm",
    version,
    about = "Fuzzy supervised classification over binary meta-feature codewords"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build a meta-feature template from a labeled CSV file.
    MakeTemplate(MakeTemplateArgs),
    /// Encode CSV records into a codeword dataset using a template.
    Encode(EncodeArgs),
    /// Train a model from a codeword dataset.
    Train(TrainArgs),
    /// Predict label distributions for query codewords.
    Predict(PredictArgs),
    /// Evaluate a model against a labeled codeword dataset.
    Evaluate(EvaluateArgs),
    /// Measure build/query scaling on seeded synthetic data.
    Bench(BenchArgs),
}

#[derive(Args)]
struct MakeTemplateArgs {
    /// Labeled CSV input with a header row.
    #[arg(long)]
    input: PathBuf,
    /// Name of the label column.
    #[arg(long = "label-col")]
    label_col: String,
    /// Template width in bits.
    #[arg(long)]
    f: u8,
    /// Discard candidates above this error when enough survive.
    #[arg(long, default_value_t = 0.5)]
    error_tolerance: f64,
    #[arg(long)]
    output: PathBuf,
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Args)]
struct EncodeArgs {
    /// Template file written by make-template.
    #[arg(long)]
    template: PathBuf,
    /// CSV input with a header row.
    #[arg(long)]
    input: PathBuf,
    /// Label column to carry into the output; omit for unlabeled output.
    #[arg(long = "label-col")]
    label_col: Option<String>,
    #[arg(long)]
    output: PathBuf,
}

#[derive(Args)]
struct TrainArgs {
    /// Codeword dataset (binary string TAB labels per line).
    #[arg(long)]
    input: PathBuf,
    /// Codeword width; inferred from the dataset when omitted.
    #[arg(long)]
    f: Option<u8>,
    /// Hamming-ball radius for training expansion.
    #[arg(long, default_value_t = 1)]
    radius: u8,
    /// Increment policy: const:<value> or decay:<value>.
    #[arg(long, default_value = "const:1", value_parser = parse_zeta)]
    zeta: ZetaPolicy,
    /// Entry storage: dense, sparse, or auto.
    #[arg(long, default_value = "auto", value_parser = parse_storage)]
    storage: StorageMode,
    /// Memory budget in bytes for table storage.
    #[arg(long = "memory-budget")]
    memory_budget: Option<u64>,
    /// Model file to write.
    #[arg(long)]
    output: PathBuf,
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Args)]
struct PredictArgs {
    #[arg(long)]
    model: PathBuf,
    /// Query codewords, one binary string per line.
    #[arg(long)]
    input: PathBuf,
    /// Unmatched-slot policy: none or expand:<radius>.
    #[arg(long, default_value = "none", value_parser = parse_fallback)]
    fallback: Fallback,
    /// Output path; stdout when omitted.
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct EvaluateArgs {
    #[arg(long)]
    model: PathBuf,
    /// Labeled codeword dataset to score against.
    #[arg(long)]
    input: PathBuf,
    #[arg(long, default_value = "none", value_parser = parse_fallback)]
    fallback: Fallback,
    /// Also write the report as a single CSV row to this path.
    #[arg(long)]
    csv: Option<PathBuf>,
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Args)]
struct BenchArgs {
    #[arg(long, default_value_t = 24)]
    f: u8,
    #[arg(long, default_value_t = 2)]
    radius: u8,
    /// Comma-separated training-set sizes.
    #[arg(long, default_value = "1000,10000,100000", value_delimiter = ',')]
    phi: Vec<u64>,
    /// Queries per timing pass.
    #[arg(long, default_value_t = 10000)]
    queries: usize,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Runs per row; the median is reported.
    #[arg(long, default_value_t = 1)]
    repeats: usize,
    /// Output path for the CSV table; stdout when omitted.
    #[arg(long)]
    output: Option<PathBuf>,
}

fn parse_zeta(text: &str) -> Result<ZetaPolicy, String> {
    let (kind, value) = text
        .split_once(':')
        .ok_or_else(|| format!("expected <const|decay>:<value>, got {text:?}"))?;
    let value: f64 = value.parse().map_err(|_| format!("bad zeta value {value:?}"))?;
    let policy = match kind {
        "const" => ZetaPolicy::Constant(value),
        "decay" => ZetaPolicy::DistanceDecay(value),
        other => return Err(format!("unknown zeta policy {other:?}")),
    };
    policy.validate().map_err(|e| e.to_string())?;
    Ok(policy)
}

fn parse_storage(text: &str) -> Result<StorageMode, String> {
    match text {
        "dense" => Ok(StorageMode::Dense),
        "sparse" => Ok(StorageMode::Sparse),
        "auto" => Ok(StorageMode::Auto),
        other => Err(format!("unknown storage mode {other:?}")),
    }
}

fn parse_fallback(text: &str) -> Result<Fallback, String> {
    if text == "none" {
        return Ok(Fallback::None);
    }
    match text.split_once(':') {
        Some(("expand", radius)) => {
            let max_extra_radius: u8 = radius
                .parse()
                .map_err(|_| format!("bad fallback radius {radius:?}"))?;
            Ok(Fallback::Expand { max_extra_radius })
        }
        _ => Err(format!("expected none or expand:<radius>, got {text:?}")),
    }
}

fn exit_code_for(err: &Error) -> u8 {
    match err {
        Error::BudgetExceeded { .. } => EXIT_RESOURCE,
        Error::InvalidWidth(_)
        | Error::RadiusTooLarge { .. }
        | Error::BadZeta(_)
        | Error::InsufficientCandidates { .. }
        | Error::UnknownColumn(_) => EXIT_CONFIG,
        _ => EXIT_DATA,
    }
}

/// Write through a temp file in the target directory and rename into place,
/// so an interrupted run never leaves a truncated output.
fn write_atomic(path: &Path, write: impl FnOnce(&mut dyn Write) -> Result<(), Error>) -> Result<(), Error> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    {
        let mut writer = BufWriter::new(&mut tmp);
        write(&mut writer)?;
        writer.flush()?;
    }
    tmp.persist(path).map_err(|e| Error::Io(e.error))?;
    Ok(())
}

fn open_input(path: &Path) -> Result<BufReader<File>, Error> {
    Ok(BufReader::new(File::open(path)?))
}

fn install_thread_pool(threads: Option<usize>) -> Result<(), Error> {
    if let Some(n) = threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::Io(io::Error::other(e)))?;
    }
    Ok(())
}

fn cmd_make_template(args: MakeTemplateArgs) -> Result<(), Error> {
    install_thread_pool(args.threads)?;
    let table = RawTable::from_csv_reader(open_input(&args.input)?);
    let table = table?;
    let label_col = table.column_index(&args.label_col)?;
    let (labels, names) = metafeature::extract_labels(&table, label_col)?;
    let candidates = metafeature::auto_candidates(&table, label_col, names.len());
    let template =
        metafeature::rank_and_select(candidates, &table.rows, &labels, args.f, args.error_tolerance)?;
    write_atomic(&args.output, |w| template.save_to(w))?;
    println!(
        "template: f={} rules from {} records, {} classes",
        template.width(),
        table.rows.len(),
        names.len()
    );
    for (rank, (rule, score)) in template.rules().iter().zip(template.scores()).enumerate() {
        println!(
            "  rank {rank}: column {} ({}) error {score:.4}",
            rule.source_column, table.columns[rule.source_column]
        );
    }
    Ok(())
}

fn cmd_encode(args: EncodeArgs) -> Result<(), Error> {
    let template = MetaFeatureTemplate::load_from(open_input(&args.template)?)?;
    let table = RawTable::from_csv_reader(open_input(&args.input)?)?;

    let labels = match &args.label_col {
        Some(name) => {
            let label_col = table.column_index(name)?;
            Some(metafeature::extract_labels(&table, label_col)?)
        }
        None => None,
    };

    let mut codes = Vec::with_capacity(table.rows.len());
    for record in &table.rows {
        codes.push(template.encode(record)?);
    }

    write_atomic(&args.output, |w| {
        if let Some((labels, names)) = &labels {
            for (id, name) in names.iter().enumerate() {
                writeln!(w, "# class {id} = {name}")?;
            }
            for (code, dist) in codes.iter().zip(labels) {
                writeln!(w, "{}", dataset::format_record(*code, dist))?;
            }
        } else {
            for code in &codes {
                writeln!(w, "{}", code.to_binary_string())?;
            }
        }
        Ok(())
    })?;
    println!("encoded {} records at f={}", codes.len(), template.width());
    Ok(())
}

fn cmd_train(args: TrainArgs) -> Result<(), Error> {
    install_thread_pool(args.threads)?;
    let data = dataset::read_labeled(open_input(&args.input)?)?;
    if let Some(f) = args.f {
        if f != data.width {
            return Err(Error::WidthMismatch {
                left: f,
                right: data.width,
            });
        }
    }
    let mut config = TrainConfig::new(data.width, HammingRadius::new(args.radius))?
        .with_zeta(args.zeta)?
        .with_storage(args.storage);
    if let Some(budget) = args.memory_budget {
        config = config.with_memory_budget(budget);
    }

    let start = Instant::now();
    let table = SupervisedHashTable::build_parallel(&data.records, config, data.class_count)?;
    let build_seconds = start.elapsed().as_secs_f64();

    write_atomic(&args.output, |w| table.save_to(w))?;
    println!(
        "trained {} points: {} entries, {} classes, f={}, e={}, {build_seconds:.3} s",
        table.trained_count(),
        table.entry_count(),
        table.class_count(),
        table.width(),
        table.radius()
    );
    Ok(())
}

/// Stream predictions for each query line, reporting bad lines on stderr and
/// counting them rather than stopping.
fn predict_stream(
    table: &SupervisedHashTable,
    input: impl BufRead,
    fallback: Fallback,
    sink: &mut dyn Write,
) -> Result<usize, Error> {
    let mut line_errors = 0usize;
    for (i, line) in input.lines().enumerate() {
        let line_no = i + 1;
        let line = line?;
        let trimmed = line.trim_end_matches(['\r', '\n']);
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let code_text = trimmed.split('\t').next().unwrap_or(trimmed);
        let code = match Codeword::from_binary_str(code_text) {
            Ok(c) if c.width() == table.width() => c,
            Ok(c) => {
                eprintln!(
                    "line {line_no}: codeword width {} does not match model width {}",
                    c.width(),
                    table.width()
                );
                line_errors += 1;
                continue;
            }
            Err(e) => {
                eprintln!("line {line_no}: {e}");
                line_errors += 1;
                continue;
            }
        };
        let prediction = table.query(code, fallback)?;
        match (&prediction.distribution, prediction.fallback_radius_used) {
            (Some(dist), None) => writeln!(sink, "{code}\tmatched\t{dist}")?,
            (Some(dist), Some(radius)) => writeln!(sink, "{code}\tfallback:{radius}\t{dist}")?,
            (None, _) => writeln!(sink, "{code}\tunmatched\t-")?,
        }
    }
    Ok(line_errors)
}

fn cmd_predict(args: PredictArgs) -> Result<(), Error> {
    let table = SupervisedHashTable::load_from(open_input(&args.model)?)?;
    let input = open_input(&args.input)?;

    let mut line_errors = 0usize;
    match &args.output {
        Some(path) => write_atomic(path, |w| {
            line_errors = predict_stream(&table, input, args.fallback, w)?;
            Ok(())
        })?,
        None => {
            let stdout = io::stdout();
            let mut sink = BufWriter::new(stdout.lock());
            line_errors = predict_stream(&table, input, args.fallback, &mut sink)?;
            sink.flush()?;
        }
    }
    if line_errors > 0 {
        return Err(Error::Parse {
            line: 0,
            msg: format!("{line_errors} query line(s) rejected"),
        });
    }
    Ok(())
}

fn cmd_evaluate(args: EvaluateArgs) -> Result<(), Error> {
    install_thread_pool(args.threads)?;
    let table = SupervisedHashTable::load_from(open_input(&args.model)?)?;
    let data = dataset::read_labeled(open_input(&args.input)?)?;
    if data.width != table.width() {
        return Err(Error::WidthMismatch {
            left: table.width(),
            right: data.width,
        });
    }
    if data.class_count > table.class_count() {
        return Err(Error::ClassMismatch {
            expected: table.class_count(),
            got: data.class_count,
        });
    }
    // Datasets whose labels happen to span fewer classes than the model
    // still evaluate; widen each truth distribution to the model's k.
    let test: Vec<_> = data
        .records
        .into_iter()
        .map(|(code, dist)| {
            let mut probs = dist.probs().to_vec();
            probs.resize(table.class_count(), 0.0);
            Ok((code, fslbm::LabelDistribution::new(probs)?))
        })
        .collect::<Result<_, Error>>()?;

    let report = eval::evaluate(&table, &test, args.fallback)?;
    println!("{report}");
    if let Some(path) = &args.csv {
        write_atomic(path, |w| {
            writeln!(w, "{}", eval::EvalReport::csv_header())?;
            writeln!(w, "{}", report.csv_row())?;
            Ok(())
        })?;
    }
    Ok(())
}

fn cmd_bench(args: BenchArgs) -> Result<(), Error> {
    let rows = eval::bench_scaling(
        args.f,
        HammingRadius::new(args.radius),
        &args.phi,
        args.queries,
        args.seed,
        args.repeats.max(1),
    )?;
    let emit = |w: &mut dyn Write| -> Result<(), Error> {
        writeln!(w, "{}", eval::BENCH_CSV_HEADER)?;
        for row in &rows {
            writeln!(w, "{}", row.csv_row())?;
        }
        Ok(())
    };
    match &args.output {
        Some(path) => write_atomic(path, emit)?,
        None => {
            let stdout = io::stdout();
            let mut sink = BufWriter::new(stdout.lock());
            emit(&mut sink)?;
            sink.flush()?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::MakeTemplate(args) => cmd_make_template(args),
        Command::Encode(args) => cmd_encode(args),
        Command::Train(args) => cmd_train(args),
        Command::Predict(args) => cmd_predict(args),
        Command::Evaluate(args) => cmd_evaluate(args),
        Command::Bench(args) => cmd_bench(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(exit_code_for(&err))
        }
    }
}
