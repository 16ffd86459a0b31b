use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use kscbench::corpus_io::{hash_embed, load_corpus, save_embeddings, save_embeddings_csv, CorpusFormat};
use kscbench::harness::{
    embed_source, emit_report, ifc_trend, load_report, metric_by_name, run_evaluation, EmbeddingSource,
    Evaluation, ReportFormat, RunConfig,
};
use kscbench::ksc::build_ksc;
use kscbench::metrics::{MetricConfig, MetricId};
use kscbench::sdc_prob::{
    monte_carlo_intersection, unique_count_pmf, DiscretePmf, LotteryMode, SdcModel, SimilarityKind,
};
use kscbench::{Error, MeasureReport, Sample};

const EXIT_CONFIG: u8 = 1;
const EXIT_DATA: u8 = 2;
const EXIT_PARTIAL: u8 = 3;

#[derive(Parser)]
#[command(
    name = "ksc",
    version,
    about = "Known-similarity corpora benchmark for corpus distance metrics"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Hash-embed a corpus into an EMBV (or CSV) embedding file.
    Embed(EmbedArgs),
    /// Build known-similarity corpora.
    Ksc {
        #[command(subcommand)]
        command: KscCommand,
    },
    /// Run a full metric evaluation and write the reports.
    Evaluate(EvaluateArgs),
    /// Similarity-count distributions of the double-lottery model.
    Sdc {
        #[command(subcommand)]
        command: SdcCommand,
    },
    /// Distance trend from a reference corpus to an ordered list of corpora.
    Ifc(IfcArgs),
    /// Re-emit the reports of a finished evaluation.
    Report(ReportArgs),
}

#[derive(Args)]
struct SourceFormat {
    /// Corpus format (jsonl, txt, csv); guessed from the extension when absent.
    #[arg(long)]
    format: Option<CorpusFormat>,
}

#[derive(Args)]
struct EmbedArgs {
    input: PathBuf,
    #[arg(short, long)]
    output: PathBuf,
    #[arg(long, default_value_t = 64)]
    dims: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Write the CSV fallback format instead of EMBV.
    #[arg(long)]
    csv: bool,
    #[command(flatten)]
    format: SourceFormat,
}

#[derive(Subcommand)]
enum KscCommand {
    /// Draw a KSC collection and write it as JSON.
    Build(BuildArgs),
}

#[derive(Args)]
struct BuildArgs {
    #[arg(long)]
    a: PathBuf,
    #[arg(long)]
    b: PathBuf,
    #[arg(short, long, default_value_t = 100)]
    n: usize,
    #[arg(short, long, default_value_t = 7)]
    k: usize,
    #[arg(long)]
    seed: u64,
    /// Collection JSON; stdout when absent.
    #[arg(short, long)]
    output: Option<PathBuf>,
    /// Also write each corpus as `c{i}.txt` into this directory.
    #[arg(long)]
    materialize: Option<PathBuf>,
    #[command(flatten)]
    format: SourceFormat,
}

#[derive(Args)]
struct EvaluateArgs {
    /// TOML or JSON run configuration. Relative paths inside it are
    /// resolved against its directory.
    #[arg(short, long)]
    config: Option<PathBuf>,
    /// Run seed; required so that no run is seeded from the clock.
    #[arg(long)]
    seed: u64,
    #[arg(long)]
    source_a: Option<PathBuf>,
    #[arg(long)]
    source_b: Option<PathBuf>,
    #[arg(short, long)]
    output: Option<PathBuf>,
    #[arg(short, long)]
    n: Option<usize>,
    #[arg(short, long)]
    k: Option<usize>,
    #[arg(long)]
    repetitions: Option<usize>,
    /// Comma-separated metric names.
    #[arg(long, value_delimiter = ',')]
    metrics: Option<Vec<MetricId>>,
    #[arg(long)]
    no_robustness: bool,
    #[arg(long)]
    no_time: bool,
}

#[derive(Subcommand)]
enum SdcCommand {
    /// Exact pmf of a similarity count as CSV `z,probability`.
    Pmf(PmfArgs),
    /// Expected similarity for every (i, j) as a CSV grid, rows i and columns j.
    Expect(ExpectArgs),
    /// Monte-Carlo pmf of the similarity count as CSV `z,probability`.
    Simulate(SimulateArgs),
}

#[derive(Args)]
struct PmfArgs {
    #[arg(short, long)]
    n: usize,
    #[arg(short, long)]
    i: usize,
    /// Second corpus index; not used by `unique`.
    #[arg(short, long)]
    j: Option<usize>,
    /// semantic, nonsemantic, nondistributional-semantic or unique.
    #[arg(long, default_value = "semantic")]
    model: String,
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct ExpectArgs {
    #[arg(short, long)]
    n: usize,
    #[arg(long, default_value = "semantic")]
    model: SdcModel,
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(short, long)]
    n: usize,
    #[arg(short, long)]
    i: usize,
    #[arg(short, long)]
    j: usize,
    #[arg(long, default_value = "semantic")]
    mode: LotteryMode,
    #[arg(long, default_value = "set-intersection")]
    kind: SimilarityKind,
    #[arg(long, default_value_t = 200_000)]
    trials: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct IfcArgs {
    #[arg(long)]
    reference: PathBuf,
    /// Ordered step corpora, at least three.
    #[arg(long, num_args = 1.., required = true)]
    steps: Vec<PathBuf>,
    #[arg(long)]
    metric: String,
    #[arg(long, default_value_t = 64)]
    dims: usize,
    #[arg(long, default_value_t = 0)]
    embed_seed: u64,
    #[arg(long, default_value_t = 5)]
    baseline_reps: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Trend JSON; stdout when absent.
    #[arg(short, long)]
    output: Option<PathBuf>,
    #[command(flatten)]
    format: SourceFormat,
}

#[derive(Args)]
struct ReportArgs {
    /// Directory holding `report.json`.
    #[arg(short, long)]
    dir: PathBuf,
    #[arg(long, value_delimiter = ',', default_value = "json,csv,plotdata")]
    format: Vec<ReportFormat>,
    /// Where to write; defaults to `--dir`.
    #[arg(short, long)]
    output: Option<PathBuf>,
}

/// A failure with the exit code it maps to.
struct Failure {
    code: u8,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = if e.is_data_error() { EXIT_DATA } else { EXIT_CONFIG };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

fn config_failure(message: impl Into<String>) -> Failure {
    Failure {
        code: EXIT_CONFIG,
        message: message.into(),
    }
}

type Outcome = std::result::Result<u8, Failure>;

fn format_for(path: &Path, format: Option<CorpusFormat>) -> CorpusFormat {
    format.unwrap_or_else(|| CorpusFormat::from_path(path))
}

/// Write to `path`, or to stdout when it is `None`.
fn write_out(path: Option<&Path>, text: &str) -> Result<(), Failure> {
    match path {
        Some(p) => {
            if let Some(parent) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
                fs::create_dir_all(parent).map_err(|e| io_failure(parent, e))?;
            }
            fs::write(p, text).map_err(|e| io_failure(p, e))
        }
        None => io::stdout()
            .write_all(text.as_bytes())
            .map_err(|e| io_failure(Path::new("<stdout>"), e)),
    }
}

fn io_failure(path: &Path, e: io::Error) -> Failure {
    Failure {
        code: EXIT_DATA,
        message: format!("cannot write {}: {e}", path.display()),
    }
}

fn to_json(value: &impl serde::Serialize) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("serializable value");
    s.push('\n');
    s
}

fn pmf_csv(pmf: &DiscretePmf) -> String {
    let mut out = String::from("z,probability\n");
    for (z, p) in pmf.values() {
        out.push_str(&format!("{z},{p}\n"));
    }
    out
}

fn embed(args: EmbedArgs) -> Outcome {
    let corpus = load_corpus(&args.input, format_for(&args.input, args.format.format))?;
    let ec = hash_embed(&corpus, args.dims, args.seed)?;
    if args.csv {
        save_embeddings_csv(&ec, &args.output)?;
    } else {
        save_embeddings(&ec, &args.output)?;
    }
    eprintln!(
        "{} rows x {} dims -> {}",
        ec.rows(),
        ec.dim(),
        args.output.display()
    );
    Ok(0)
}

fn ksc_build(args: BuildArgs) -> Outcome {
    let a = load_corpus(&args.a, format_for(&args.a, args.format.format))?;
    let b = load_corpus(&args.b, format_for(&args.b, args.format.format))?;
    let ksc = build_ksc(&a, &b, args.n, args.k, args.seed)?;
    write_out(args.output.as_deref(), &to_json(&ksc))?;
    if let Some(dir) = args.materialize {
        let (sa, sb) = (Sample::new(a, None)?, Sample::new(b, None)?);
        fs::create_dir_all(&dir).map_err(|e| io_failure(&dir, e))?;
        for c in ksc.materialize(&sa, &sb)? {
            let path = dir.join(format!("{}.txt", c.id()));
            let mut text = c.text().sentences().join("\n");
            text.push('\n');
            fs::write(&path, text).map_err(|e| io_failure(&path, e))?;
        }
    }
    Ok(0)
}

fn run_config(args: &EvaluateArgs) -> Result<RunConfig, Failure> {
    let mut cfg = match &args.config {
        Some(path) => {
            let base = path.parent().unwrap_or(Path::new(""));
            RunConfig::from_path(path)
                .map_err(|e| config_failure(e.to_string()))?
                .rebase(base)
        }
        None => RunConfig::default(),
    };
    cfg.seed = args.seed;
    if let Some(p) = &args.source_a {
        cfg.source_a = Some(p.clone());
    }
    if let Some(p) = &args.source_b {
        cfg.source_b = Some(p.clone());
    }
    if let Some(p) = &args.output {
        cfg.output_dir = p.clone();
    }
    if let Some(n) = args.n {
        cfg.n = n;
    }
    if let Some(k) = args.k {
        cfg.k = k;
    }
    if let Some(r) = args.repetitions {
        cfg.repetitions = r;
    }
    if let Some(m) = &args.metrics {
        cfg.metrics = m.clone();
    }
    if args.no_robustness {
        cfg.measure_robustness = false;
    }
    if args.no_time {
        cfg.measure_time = false;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn summary(ev: &Evaluation) -> String {
    let mut out = MeasureReport::CSV_HEADER.join(",");
    out.push('\n');
    for r in ev.reports() {
        out.push_str(&r.csv_row().join(","));
        out.push('\n');
    }
    out
}

fn evaluate(args: EvaluateArgs) -> Outcome {
    let cfg = run_config(&args)?;
    let ev = run_evaluation(&cfg)?;
    emit_report(&ev, &ReportFormat::ALL, &cfg.output_dir)?;
    print!("{}", summary(&ev));
    eprintln!("reports written to {}", cfg.output_dir.display());
    if ev.has_failures() {
        for r in ev.reports() {
            if let Some(e) = &r.error {
                eprintln!("{} failed: {e}", r.metric);
            }
        }
        return Ok(EXIT_PARTIAL);
    }
    Ok(0)
}

fn sdc_pmf(args: PmfArgs) -> Outcome {
    let pmf = if args.model.eq_ignore_ascii_case("unique") {
        unique_count_pmf(args.n, args.i)?
    } else {
        let model: SdcModel = args.model.parse()?;
        let j = args
            .j
            .ok_or_else(|| config_failure(format!("model {} needs --j", args.model)))?;
        model.pmf(args.n, args.i, j)?
    };
    write_out(args.output.as_deref(), &pmf_csv(&pmf))?;
    Ok(0)
}

fn sdc_expect(args: ExpectArgs) -> Outcome {
    let grid = args.model.expectation_grid(args.n)?;
    let mut out = String::from("i");
    for j in 0..=args.n {
        out.push_str(&format!(",{j}"));
    }
    out.push('\n');
    for (i, row) in grid.iter().enumerate() {
        out.push_str(&i.to_string());
        for v in row {
            out.push_str(&format!(",{v}"));
        }
        out.push('\n');
    }
    write_out(args.output.as_deref(), &out)?;
    Ok(0)
}

fn sdc_simulate(args: SimulateArgs) -> Outcome {
    let sim = monte_carlo_intersection(
        args.n,
        args.i,
        args.j,
        args.mode,
        args.kind,
        args.trials,
        args.seed,
    )?;
    write_out(args.output.as_deref(), &pmf_csv(&sim))?;
    let model = match (args.mode, args.kind) {
        (LotteryMode::Semantic, SimilarityKind::SetIntersection) => SdcModel::Semantic,
        (LotteryMode::Semantic, SimilarityKind::Avd) => SdcModel::NonDistributionalSemantic,
        (LotteryMode::NonSemantic, _) => SdcModel::NonSemantic,
    };
    let exact = model.pmf(args.n, args.i, args.j)?;
    if exact.lattice == sim.lattice {
        eprintln!("total variation to the exact pmf: {:.5}", exact.tv_distance(&sim));
    }
    Ok(0)
}

fn ifc(args: IfcArgs) -> Outcome {
    let metric = metric_by_name(
        &args.metric,
        MetricConfig {
            seed: args.seed,
            ..MetricConfig::default()
        },
    )?;
    let embeddings = EmbeddingSource::Hash {
        dims: args.dims,
        seed: args.embed_seed,
    };
    let load = |path: &PathBuf| -> Result<Sample, Failure> {
        let corpus = load_corpus(path, format_for(path, args.format.format))?;
        Ok(embed_source(corpus, &embeddings, None)?)
    };
    let reference = load(&args.reference)?;
    let steps = args.steps.iter().map(load).collect::<Result<Vec<_>, _>>()?;
    let trend = ifc_trend(&reference, &steps, metric.as_ref(), args.baseline_reps, args.seed)?;
    write_out(args.output.as_deref(), &to_json(&trend))?;
    Ok(0)
}

fn report(args: ReportArgs) -> Outcome {
    let ev = load_report(&args.dir)?;
    let out = args.output.unwrap_or(args.dir);
    for path in emit_report(&ev, &args.format, &out)? {
        println!("{}", path.display());
    }
    Ok(0)
}

fn run(cli: Cli) -> Outcome {
    match cli.command {
        Command::Embed(a) => embed(a),
        Command::Ksc {
            command: KscCommand::Build(a),
        } => ksc_build(a),
        Command::Evaluate(a) => evaluate(a),
        Command::Sdc { command } => match command {
            SdcCommand::Pmf(a) => sdc_pmf(a),
            SdcCommand::Expect(a) => sdc_expect(a),
            SdcCommand::Simulate(a) => sdc_simulate(a),
        },
        Command::Ifc(a) => ifc(a),
        Command::Report(a) => report(a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
