//! End-to-end evaluation runs: configuration, orchestration over
//! repetitions and metrics, and the IFC trend utilities.

use std::path::{Path, PathBuf};

use rand::seq::index;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus_io::{hash_embed, load_corpus, load_embeddings, Corpus, CorpusFormat};
use crate::error::{Error, Result};
use crate::ksc::{build_ksc, compute_distances, judgement_set, DistanceTable};
use crate::measures::{
    imbalance_robustness, size_robustness, time_efficiency, MeasureReport, RobustnessConfig, RobustnessResult,
};
use crate::metrics::{CorpusMetric, Metric, MetricConfig, MetricId, Sample};
use crate::rng::{derive_seed, rng_for};

mod report;
mod trend;

pub use report::{emit_report, load_report, ReportFormat, CSV_FILE, REPORT_FILE, TIMING_FILE};
pub use trend::{ifc_trend, self_distance, ttr, TrendReport};

/// Environment variable holding the worker budget of an evaluation.
pub const WORKERS_ENV: &str = "KSCBENCH_WORKERS";

const TIMING_SIZE: usize = 100;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum EmbeddingSource {
    /// Signed feature hashing of the tokens.
    Hash { dims: usize, seed: u64 },
    /// Embedding files with one row per sentence of each source.
    Precomputed { a: PathBuf, b: PathBuf },
    /// Lexical metrics only.
    None,
}

impl Default for EmbeddingSource {
    fn default() -> Self {
        EmbeddingSource::Hash { dims: 64, seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub source_a: Option<PathBuf>,
    pub source_b: Option<PathBuf>,
    /// Corpus file format; guessed from the extension when absent.
    pub format: Option<CorpusFormat>,
    pub embeddings: EmbeddingSource,
    pub n: usize,
    pub k: usize,
    pub repetitions: usize,
    pub metrics: Vec<MetricId>,
    pub metric: MetricConfig,
    pub measure_robustness: bool,
    pub robustness: RobustnessConfig,
    pub measure_time: bool,
    pub time_ops: usize,
    pub output_dir: PathBuf,
    pub seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            source_a: None,
            source_b: None,
            format: None,
            embeddings: EmbeddingSource::default(),
            n: 100,
            k: 7,
            repetitions: 5,
            metrics: MetricId::ALL.to_vec(),
            metric: MetricConfig::default(),
            measure_robustness: true,
            robustness: RobustnessConfig::default(),
            measure_time: true,
            time_ops: 100,
            output_dir: PathBuf::from("ksc-report"),
            seed: 0,
        }
    }
}

impl RunConfig {
    /// Read a TOML file, or JSON when the extension is `.json`.
    pub fn from_path(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let is_json = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json"));
        if is_json {
            serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
        } else {
            toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
        }
    }

    /// Resolve relative source and embedding paths against `base`,
    /// normally the directory holding the config file.
    pub fn rebase(mut self, base: &Path) -> Self {
        let join = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        self.source_a.iter_mut().for_each(join);
        self.source_b.iter_mut().for_each(join);
        if let EmbeddingSource::Precomputed { a, b } = &mut self.embeddings {
            join(a);
            join(b);
        }
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.k < 3 {
            return bad(format!("k must be >= 3, got {}", self.k));
        }
        if self.n < self.k - 1 {
            return bad(format!("n must be >= k - 1 = {}, got {}", self.k - 1, self.n));
        }
        if self.repetitions == 0 {
            return bad("repetitions must be >= 1".into());
        }
        if self.metrics.is_empty() {
            return bad("no metrics requested".into());
        }
        if self.measure_time && self.time_ops < 100 {
            return bad(format!("time_ops must be >= 100, got {}", self.time_ops));
        }
        if let EmbeddingSource::Hash { dims, .. } = self.embeddings {
            if dims < 2 {
                return bad(format!("hash embedding dims must be >= 2, got {dims}"));
            }
        }
        self.metric.validate()?;
        if self.measure_robustness {
            self.robustness.validate()?;
        }
        Ok(())
    }
}

fn load_source(path: Option<&PathBuf>, which: &str, format: Option<CorpusFormat>) -> Result<Corpus> {
    let path = path.ok_or_else(|| Error::Config(format!("source_{which} is not set")))?;
    load_corpus(path, format.unwrap_or_else(|| CorpusFormat::from_path(path)))
}

/// Attach embeddings to a corpus according to `source`.
pub fn embed_source(corpus: Corpus, source: &EmbeddingSource, precomputed: Option<&Path>) -> Result<Sample> {
    let embedded = match source {
        EmbeddingSource::Hash { dims, seed } => Some(hash_embed(&corpus, *dims, *seed)?),
        EmbeddingSource::Precomputed { .. } => {
            let path = precomputed.ok_or_else(|| Error::Config("missing embedding path".into()))?;
            Some(load_embeddings(path)?)
        }
        EmbeddingSource::None => None,
    };
    Sample::new(corpus, embedded)
}

/// Load both sources and their embeddings.
pub fn load_sources(cfg: &RunConfig) -> Result<(Sample, Sample)> {
    let a = load_source(cfg.source_a.as_ref(), "a", cfg.format)?;
    let b = load_source(cfg.source_b.as_ref(), "b", cfg.format)?;
    let (pa, pb) = match &cfg.embeddings {
        EmbeddingSource::Precomputed { a, b } => (Some(a.as_path()), Some(b.as_path())),
        _ => (None, None),
    };
    Ok((
        embed_source(a, &cfg.embeddings, pa)?,
        embed_source(b, &cfg.embeddings, pb)?,
    ))
}

/// Everything computed for one metric.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricRun {
    pub report: MeasureReport,
    pub table: Option<DistanceTable>,
    pub size_sweep: Option<RobustnessResult>,
    pub imbalance_sweep: Option<RobustnessResult>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub config: RunConfig,
    pub runs: Vec<MetricRun>,
}

impl Evaluation {
    pub fn reports(&self) -> Vec<&MeasureReport> {
        self.runs.iter().map(|r| &r.report).collect()
    }

    pub fn has_failures(&self) -> bool {
        self.runs.iter().any(|r| r.report.error.is_some())
    }
}

/// Worker budget from the environment, if set.
pub fn worker_budget() -> Result<Option<usize>> {
    match std::env::var(WORKERS_ENV) {
        Err(_) => Ok(None),
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(Some(n)),
            _ => Err(Error::Config(format!(
                "{WORKERS_ENV} must be a positive integer, got {v:?}"
            ))),
        },
    }
}

fn metric_for(cfg: &RunConfig, id: MetricId, tags: &[u64]) -> Metric {
    let mut config = cfg.metric.clone();
    let mut all = vec![cfg.seed, id as u64];
    all.extend_from_slice(tags);
    config.seed = derive_seed(cfg.metric.seed, &all);
    Metric::new(id, config)
}

fn subsample(s: &Sample, size: usize, seed: u64, tag: u64) -> Sample {
    let size = size.min(s.len());
    let mut idx = index::sample(&mut rng_for(seed, &[tag]), s.len(), size).into_vec();
    idx.sort_unstable();
    s.subset(s.id(), &idx)
}

/// Run every requested metric over `cfg.repetitions` fresh KSC collections
/// built from `a` and `b`, then the robustness sweeps and, last and
/// single-threaded, the timing runs. A failing metric is recorded in its
/// report and does not affect the others; a KSC that cannot be built fails
/// the whole run.
pub fn evaluate(a: &Sample, b: &Sample, cfg: &RunConfig) -> Result<Evaluation> {
    cfg.validate()?;
    let collections = (0..cfg.repetitions)
        .map(|rep| {
            let ksc = build_ksc(
                a.text(),
                b.text(),
                cfg.n,
                cfg.k,
                derive_seed(cfg.seed, &[0x4b5c, rep as u64]),
            )?;
            ksc.materialize(a, b)
        })
        .collect::<Result<Vec<_>>>()?;
    let judgements = judgement_set(cfg.k);

    let jobs: Vec<(usize, usize)> = (0..cfg.metrics.len())
        .flat_map(|m| (0..cfg.repetitions).map(move |rep| (m, rep)))
        .collect();
    let tables: Vec<Result<DistanceTable>> = jobs
        .par_iter()
        .map(|&(m, rep)| {
            let metric = metric_for(cfg, cfg.metrics[m], &[rep as u64]);
            compute_distances(&collections[rep], &metric)
        })
        .collect();
    let mut tables = tables.into_iter();

    let mut runs: Vec<MetricRun> = cfg
        .metrics
        .iter()
        .map(|&id| {
            // drain the whole chunk first: collecting into a Result stops at
            // the first error and would hand the rest to the next metric
            let chunk: Vec<Result<DistanceTable>> = tables.by_ref().take(cfg.repetitions).collect();
            let per_rep: Result<Vec<DistanceTable>> = chunk.into_iter().collect();
            let outcome = per_rep
                .and_then(DistanceTable::pool)
                .and_then(|t| MeasureReport::from_table(&t, &judgements).map(|r| (r, t)));
            match outcome {
                Ok((report, table)) => MetricRun {
                    report,
                    table: Some(table),
                    size_sweep: None,
                    imbalance_sweep: None,
                },
                Err(e) => {
                    let mut report = MeasureReport::empty(id.name(), cfg.repetitions);
                    report.error = Some(e.to_string());
                    MetricRun {
                        report,
                        table: None,
                        size_sweep: None,
                        imbalance_sweep: None,
                    }
                }
            }
        })
        .collect();

    if cfg.measure_robustness {
        let sweeps: Vec<(Result<RobustnessResult>, Result<RobustnessResult>)> = cfg
            .metrics
            .par_iter()
            .zip(runs.par_iter())
            .map(|(&id, run)| {
                if run.report.error.is_some() {
                    let skipped = || Err(Error::Degenerate("skipped".into()));
                    return (skipped(), skipped());
                }
                let metric = metric_for(cfg, id, &[0x5e]);
                let seed = derive_seed(cfg.seed, &[0x5e, id as u64]);
                (
                    size_robustness(a, b, &metric, &cfg.robustness, seed),
                    imbalance_robustness(a, b, &metric, &cfg.robustness, seed),
                )
            })
            .collect();
        for (run, (size, imbalance)) in runs.iter_mut().zip(sweeps) {
            if run.report.error.is_some() {
                continue;
            }
            let mut errors = Vec::new();
            match size {
                Ok(s) => {
                    run.report.size_robustness = Some(s.score);
                    run.size_sweep = Some(s);
                }
                Err(e) => errors.push(format!("size robustness: {e}")),
            }
            match imbalance {
                Ok(s) => {
                    run.report.imbalance_robustness = Some(s.score);
                    run.imbalance_sweep = Some(s);
                }
                Err(e) => errors.push(format!("imbalance robustness: {e}")),
            }
            if !errors.is_empty() {
                run.report.error = Some(errors.join("; "));
            }
        }
    }

    if cfg.measure_time {
        let p = subsample(a, TIMING_SIZE, cfg.seed, 0x7a);
        let q = subsample(b, TIMING_SIZE, cfg.seed, 0x7b);
        for (run, &id) in runs.iter_mut().zip(&cfg.metrics) {
            if run.table.is_some() {
                let metric = metric_for(cfg, id, &[0x7e]);
                run.report.time_t = time_efficiency(&metric, &p, &q, cfg.time_ops).ok();
            }
        }
    }

    Ok(Evaluation {
        config: cfg.clone(),
        runs,
    })
}

/// Load the sources named in `cfg` and evaluate them inside a thread pool
/// sized by the worker budget.
pub fn run_evaluation(cfg: &RunConfig) -> Result<Evaluation> {
    cfg.validate()?;
    let (a, b) = load_sources(cfg)?;
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = worker_budget()? {
        builder = builder.num_threads(n);
    }
    let pool = builder
        .build()
        .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))?;
    pool.install(|| evaluate(&a, &b, cfg))
}

/// Look up a built-in metric by (case-insensitive) name.
pub fn metric_by_name(name: &str, config: MetricConfig) -> Result<Box<dyn CorpusMetric>> {
    let id: MetricId = name.parse()?;
    Ok(Box::new(Metric::new(id, config)))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn vocab_corpus(id: &str, words: &[&str], n: usize, offset: usize) -> Corpus {
        let lines = (0..n)
            .map(|t| {
                let s = t + offset;
                (0..6)
                    .map(|w| words[(s * 7 + w * 3 + s / 5) % words.len()])
                    .collect::<Vec<_>>()
                    .join(" ")
            })
            .collect();
        Corpus::new(id, lines).unwrap()
    }

    fn fast_config() -> RunConfig {
        RunConfig {
            n: 20,
            k: 4,
            repetitions: 2,
            metrics: vec![MetricId::Chi, MetricId::Fid],
            measure_robustness: false,
            measure_time: false,
            ..Default::default()
        }
    }

    fn sources() -> (Sample, Sample) {
        let wa = ["apple", "pear", "plum", "fig", "kiwi", "lime", "date", "grape"];
        let wb = ["iron", "zinc", "gold", "lead", "tin", "neon", "argon", "boron"];
        let emb = EmbeddingSource::Hash { dims: 16, seed: 1 };
        let a = embed_source(vocab_corpus("a", &wa, 80, 0), &emb, None).unwrap();
        let b = embed_source(vocab_corpus("b", &wb, 80, 3), &emb, None).unwrap();
        (a, b)
    }

    #[test]
    fn config_defaults_and_round_trip() {
        let cfg = RunConfig::default();
        cfg.validate().unwrap();
        let toml_text = toml::to_string(&cfg).unwrap();
        assert_eq!(toml::from_str::<RunConfig>(&toml_text).unwrap(), cfg);
        let json = serde_json::to_string(&cfg).unwrap();
        assert_eq!(serde_json::from_str::<RunConfig>(&json).unwrap(), cfg);
        let partial: RunConfig = toml::from_str(
            "k = 5\nmetrics = [\"fid\", \"CHI\"]\n[embeddings]\nkind = \"hash\"\ndims = 8\nseed = 3\n",
        )
        .unwrap();
        assert_eq!(partial.k, 5);
        assert_eq!(partial.metrics, vec![MetricId::Fid, MetricId::Chi]);
        assert!(toml::from_str::<RunConfig>("bogus = 1").is_err());
        assert!(toml::from_str::<RunConfig>("metrics = [\"nope\"]").is_err());
    }

    #[test]
    fn config_validation() {
        for cfg in [
            RunConfig {
                k: 2,
                ..Default::default()
            },
            RunConfig {
                n: 3,
                k: 7,
                ..Default::default()
            },
            RunConfig {
                metrics: vec![],
                ..Default::default()
            },
            RunConfig {
                time_ops: 10,
                ..Default::default()
            },
        ] {
            assert!(matches!(cfg.validate(), Err(Error::Config(_))), "{cfg:?}");
        }
    }

    #[test]
    fn evaluation_is_deterministic_and_complete() {
        let (a, b) = sources();
        let cfg = fast_config();
        let one = evaluate(&a, &b, &cfg).unwrap();
        let two = evaluate(&a, &b, &cfg).unwrap();
        assert_eq!(one, two);
        assert_eq!(one.runs.len(), 2);
        for run in &one.runs {
            assert!(run.report.error.is_none(), "{:?}", run.report.error);
            let t = run.table.as_ref().unwrap();
            assert_eq!(t.entries.len(), 2 * 6);
            assert!(run.report.accuracy.unwrap() >= 0.9, "{}", run.report.metric);
        }
    }

    #[test]
    fn failing_metric_is_isolated() {
        let (a, b) = sources();
        let strip = |s: &Sample| Sample::new(s.text().clone(), None).unwrap();
        let cfg = fast_config();
        let ev = evaluate(&strip(&a), &strip(&b), &cfg).unwrap();
        assert!(ev.has_failures());
        assert!(ev.runs[0].report.error.is_none());
        assert!(ev.runs[1].report.error.as_deref().unwrap().contains("embeddings"));
        let clean = evaluate(&a, &b, &cfg).unwrap();
        assert_eq!(ev.runs[0], clean.runs[0]);
    }

    #[test]
    fn robustness_and_timing_fill_the_report() {
        let (a, b) = sources();
        let cfg = RunConfig {
            measure_robustness: true,
            measure_time: true,
            metrics: vec![MetricId::Chi],
            robustness: RobustnessConfig {
                size_grid: vec![10, 20],
                imbalance_grid: vec![10, 20],
                imbalance_total: 30,
                repetitions: 2,
                asymptote_size: 40,
                asymptote_repetitions: 2,
            },
            ..fast_config()
        };
        let ev = evaluate(&a, &b, &cfg).unwrap();
        let r = &ev.runs[0].report;
        assert!(r.size_robustness.is_some() && r.imbalance_robustness.is_some());
        assert!(r.time_t.unwrap() > 0.0);
        assert_eq!(ev.runs[0].size_sweep.as_ref().unwrap().points.len(), 4);
    }

    #[test]
    fn small_sources_fail_the_run() {
        let (a, b) = sources();
        let cfg = RunConfig {
            n: 50,
            ..fast_config()
        };
        assert!(matches!(
            evaluate(&a, &b, &cfg),
            Err(Error::InsufficientSource(_))
        ));
    }
}
