//! Python bindings: corpora, embeddings, metrics, KSC collections,
//! measures, the double-lottery model and full evaluations.

use std::path::PathBuf;

use kscbench::corpus_io::{self, CorpusFormat};
use kscbench::harness::{self, ReportFormat, RunConfig};
use kscbench::ksc::{self, Provenance};
use kscbench::measures::{self, RobustnessConfig};
use kscbench::metrics::{ClusterCount, CorpusMetric, MetricConfig};
use kscbench::sdc_prob::{self, DiscretePmf, LotteryMode, SdcModel, SimilarityKind};
use kscbench::Error;
use pyo3::exceptions::{PyIOError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

fn py_err(e: Error) -> PyErr {
    match e {
        Error::Io { .. } => PyIOError::new_err(e.to_string()),
        Error::Config(_) | Error::InvalidParameter(_) | Error::UnknownMetric(_) => {
            PyValueError::new_err(e.to_string())
        }
        _ => PyRuntimeError::new_err(e.to_string()),
    }
}

trait OrPy<T> {
    fn or_py(self) -> PyResult<T>;
}

impl<T> OrPy<T> for kscbench::Result<T> {
    fn or_py(self) -> PyResult<T> {
        self.map_err(py_err)
    }
}

/// Serialize through JSON into plain Python objects.
fn to_python(py: Python<'_>, value: &impl serde::Serialize) -> PyResult<Py<PyAny>> {
    let text = serde_json::to_string(value).map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    Ok(py.import("json")?.call_method1("loads", (text,))?.unbind())
}

fn from_python<T: serde::de::DeserializeOwned>(py: Python<'_>, value: &Bound<'_, PyAny>) -> PyResult<T> {
    let text: String = py.import("json")?.call_method1("dumps", (value,))?.extract()?;
    serde_json::from_str(&text).map_err(|e| PyValueError::new_err(e.to_string()))
}

fn parse<T: std::str::FromStr<Err = Error>>(s: &str) -> PyResult<T> {
    s.parse().or_py()
}

#[pyclass(name = "Corpus", module = "kscbench_py", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyCorpus(corpus_io::Corpus);

#[pymethods]
impl PyCorpus {
    #[new]
    fn new(id: String, sentences: Vec<String>) -> PyResult<Self> {
        corpus_io::Corpus::new(id, sentences).or_py().map(PyCorpus)
    }

    /// Read a jsonl, txt or csv corpus; the format defaults to the extension.
    #[staticmethod]
    #[pyo3(signature = (path, format=None))]
    fn load(path: PathBuf, format: Option<&str>) -> PyResult<Self> {
        let format = match format {
            Some(f) => parse(f)?,
            None => CorpusFormat::from_path(&path),
        };
        corpus_io::load_corpus(&path, format).or_py().map(PyCorpus)
    }

    #[getter]
    fn id(&self) -> &str {
        self.0.id()
    }

    #[getter]
    fn sentences(&self) -> Vec<String> {
        self.0.sentences().to_vec()
    }

    #[getter]
    fn tokens(&self) -> Vec<Vec<String>> {
        self.0.tokens().to_vec()
    }

    fn ttr(&self) -> f64 {
        harness::ttr(&self.0)
    }

    fn __len__(&self) -> usize {
        self.0.len()
    }

    fn __repr__(&self) -> String {
        format!("Corpus(id={:?}, sentences={})", self.0.id(), self.0.len())
    }
}

#[pyclass(name = "EmbeddedCorpus", module = "kscbench_py", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyEmbedded(corpus_io::EmbeddedCorpus);

#[pymethods]
impl PyEmbedded {
    #[new]
    fn new(source_id: String, rows: Vec<Vec<f64>>) -> PyResult<Self> {
        corpus_io::EmbeddedCorpus::from_rows(source_id, &rows)
            .or_py()
            .map(PyEmbedded)
    }

    /// Read an EMBV or CSV embedding file.
    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        corpus_io::load_embeddings(path).or_py().map(PyEmbedded)
    }

    #[pyo3(signature = (path, csv=false))]
    fn save(&self, path: PathBuf, csv: bool) -> PyResult<()> {
        if csv {
            corpus_io::save_embeddings_csv(&self.0, path).or_py()
        } else {
            corpus_io::save_embeddings(&self.0, path).or_py()
        }
    }

    #[getter]
    fn source_id(&self) -> &str {
        self.0.source_id()
    }

    #[getter]
    fn rows(&self) -> usize {
        self.0.rows()
    }

    #[getter]
    fn dim(&self) -> usize {
        self.0.dim()
    }

    fn to_list(&self) -> Vec<Vec<f64>> {
        self.0.iter_rows().map(<[f64]>::to_vec).collect()
    }

    fn __len__(&self) -> usize {
        self.0.rows()
    }

    fn __repr__(&self) -> String {
        format!(
            "EmbeddedCorpus(source_id={:?}, rows={}, dim={})",
            self.0.source_id(),
            self.0.rows(),
            self.0.dim()
        )
    }
}

#[pyfunction]
#[pyo3(signature = (corpus, dims=64, seed=0))]
fn hash_embed(corpus: &PyCorpus, dims: usize, seed: u64) -> PyResult<PyEmbedded> {
    corpus_io::hash_embed(&corpus.0, dims, seed)
        .or_py()
        .map(PyEmbedded)
}

#[pyfunction]
fn tokenize(text: &str) -> Vec<String> {
    corpus_io::tokenize(text)
}

/// A corpus with optional embeddings, as consumed by metrics.
#[pyclass(name = "Sample", module = "kscbench_py", frozen, from_py_object)]
#[derive(Clone)]
struct PySample(kscbench::Sample);

#[pymethods]
impl PySample {
    #[new]
    #[pyo3(signature = (corpus, embedded=None))]
    fn new(corpus: &PyCorpus, embedded: Option<&PyEmbedded>) -> PyResult<Self> {
        kscbench::Sample::new(corpus.0.clone(), embedded.map(|e| e.0.clone()))
            .or_py()
            .map(PySample)
    }

    /// Load a corpus and hash-embed it in one step.
    #[staticmethod]
    #[pyo3(signature = (path, dims=64, seed=0, format=None))]
    fn load(path: PathBuf, dims: usize, seed: u64, format: Option<&str>) -> PyResult<Self> {
        let corpus = PyCorpus::load(path, format)?;
        let embedded = corpus_io::hash_embed(&corpus.0, dims, seed).or_py()?;
        kscbench::Sample::new(corpus.0, Some(embedded))
            .or_py()
            .map(PySample)
    }

    #[getter]
    fn id(&self) -> &str {
        self.0.id()
    }

    #[getter]
    fn corpus(&self) -> PyCorpus {
        PyCorpus(self.0.text().clone())
    }

    #[getter]
    fn embedded(&self) -> Option<PyEmbedded> {
        self.0.embedded().cloned().map(PyEmbedded)
    }

    fn __len__(&self) -> usize {
        self.0.len()
    }

    fn __repr__(&self) -> String {
        format!(
            "Sample(id={:?}, rows={}, embedded={})",
            self.0.id(),
            self.0.len(),
            self.0.embedded().is_some()
        )
    }
}

/// A built-in metric. Keyword arguments override the metric settings,
/// e.g. `Metric("PR", knn_k=3)`.
#[pyclass(name = "Metric", module = "kscbench_py", frozen)]
struct PyMetric(kscbench::Metric);

#[pymethods]
impl PyMetric {
    #[new]
    #[pyo3(signature = (name, **config))]
    fn new(py: Python<'_>, name: &str, config: Option<&Bound<'_, PyDict>>) -> PyResult<Self> {
        let config: MetricConfig = match config {
            Some(c) => from_python(py, c.as_any())?,
            None => MetricConfig::default(),
        };
        config.validate().or_py()?;
        Ok(PyMetric(kscbench::Metric::new(parse(name)?, config)))
    }

    #[getter]
    fn name(&self) -> String {
        self.0.name()
    }

    #[getter]
    fn config(&self, py: Python<'_>) -> PyResult<Py<PyAny>> {
        to_python(py, &self.0.config)
    }

    fn distance(&self, py: Python<'_>, reference: &PySample, target: &PySample) -> PyResult<f64> {
        py.detach(|| self.0.distance(&reference.0, &target.0)).or_py()
    }

    fn __repr__(&self) -> String {
        let clusters = match self.0.config.mauve_num_clusters {
            ClusterCount::Auto => "auto".to_owned(),
            ClusterCount::Fixed(k) => k.to_string(),
        };
        format!(
            "Metric({}, knn_k={}, clusters={clusters})",
            self.0.name(),
            self.0.config.knn_k
        )
    }
}

#[pyfunction]
fn metric_names() -> Vec<&'static str> {
    kscbench::MetricId::ALL.iter().map(|m| m.name()).collect()
}

#[pyclass(name = "KscCollection", module = "kscbench_py", frozen)]
struct PyKsc(ksc::KscCollection);

#[pymethods]
impl PyKsc {
    #[getter]
    fn n(&self) -> usize {
        self.0.n
    }

    #[getter]
    fn k(&self) -> usize {
        self.0.k
    }

    /// Members of `c_i` (1-based) as `(source, index)` with source "A" or "B".
    fn corpus(&self, i: usize) -> PyResult<Vec<(&'static str, usize)>> {
        if i == 0 || i > self.0.k {
            return Err(PyValueError::new_err(format!(
                "corpus index {i} outside 1..={}",
                self.0.k
            )));
        }
        Ok(self
            .0
            .corpus(i)
            .iter()
            .map(|m| (if m.source == Provenance::A { "A" } else { "B" }, m.index))
            .collect())
    }

    fn a_counts(&self) -> Vec<usize> {
        (1..=self.0.k).map(|i| self.0.a_count(i)).collect()
    }

    fn materialize(&self, a: &PySample, b: &PySample) -> PyResult<Vec<PySample>> {
        Ok(self
            .0
            .materialize(&a.0, &b.0)
            .or_py()?
            .into_iter()
            .map(PySample)
            .collect())
    }

    fn to_dict(&self, py: Python<'_>) -> PyResult<Py<PyAny>> {
        to_python(py, &self.0)
    }

    fn __len__(&self) -> usize {
        self.0.k
    }

    fn __repr__(&self) -> String {
        format!(
            "KscCollection(n={}, k={}, seed={})",
            self.0.n, self.0.k, self.0.seed
        )
    }
}

#[pyfunction]
fn build_ksc(a: &PyCorpus, b: &PyCorpus, n: usize, k: usize, seed: u64) -> PyResult<PyKsc> {
    ksc::build_ksc(&a.0, &b.0, n, k, seed).or_py().map(PyKsc)
}

#[pyfunction]
fn a_counts(n: usize, k: usize) -> Vec<usize> {
    ksc::a_counts(n, k)
}

/// Judgements as `((q, r), (i, j))`, inner interval first.
#[pyfunction]
fn judgement_set(k: usize) -> Vec<((usize, usize), (usize, usize))> {
    ksc::judgement_set(k).iter().map(|j| (j.inner, j.outer)).collect()
}

#[pyclass(name = "DistanceTable", module = "kscbench_py", frozen)]
struct PyTable(ksc::DistanceTable);

#[pymethods]
impl PyTable {
    /// Table from raw distances in `(rep, i, j)` order, `i < j`.
    #[staticmethod]
    #[pyo3(signature = (k, values, metric="custom"))]
    fn from_values(k: usize, values: Vec<f64>, metric: &str) -> PyResult<Self> {
        let pairs = k * k.saturating_sub(1) / 2;
        if k < 3 || values.is_empty() || !values.len().is_multiple_of(pairs) {
            return Err(PyValueError::new_err(format!(
                "need k >= 3 and a whole number of repetitions of {pairs} values, got {}",
                values.len()
            )));
        }
        let mut it = values.iter();
        ksc::DistanceTable::from_fn(metric, k, values.len() / pairs, |_, _, _| *it.next().unwrap())
            .or_py()
            .map(PyTable)
    }

    /// Distances of `metric` between every pair of `corpora`.
    #[staticmethod]
    fn compute(py: Python<'_>, corpora: Vec<PySample>, metric: &PyMetric) -> PyResult<Self> {
        let samples: Vec<kscbench::Sample> = corpora.into_iter().map(|s| s.0).collect();
        py.detach(|| ksc::compute_distances(&samples, &metric.0))
            .or_py()
            .map(PyTable)
    }

    #[getter]
    fn k(&self) -> usize {
        self.0.k
    }

    #[getter]
    fn repetitions(&self) -> usize {
        self.0.repetitions
    }

    /// Rows `(rep, i, j, ell, raw, z)`.
    fn entries(&self) -> Vec<(usize, usize, usize, usize, f64, f64)> {
        self.0
            .entries
            .iter()
            .map(|e| (e.rep, e.i, e.j, e.ell, e.raw, e.z))
            .collect()
    }

    fn raw(&self, rep: usize, i: usize, j: usize) -> PyResult<f64> {
        self.0.raw(rep, i, j).or_py()
    }

    /// All five table measures as a dict.
    fn measures(&self, py: Python<'_>) -> PyResult<Py<PyAny>> {
        let report = kscbench::MeasureReport::from_table(&self.0, &ksc::judgement_set(self.0.k)).or_py()?;
        to_python(py, &report)
    }

    fn __len__(&self) -> usize {
        self.0.entries.len()
    }
}

#[pyfunction]
fn pool_tables(tables: Vec<Bound<'_, PyTable>>) -> PyResult<PyTable> {
    let tables = tables.iter().map(|t| t.get().0.clone()).collect();
    ksc::DistanceTable::pool(tables).or_py().map(PyTable)
}

#[pyfunction]
fn spearman(xs: Vec<f64>, ys: Vec<f64>) -> PyResult<f64> {
    measures::spearman(&xs, &ys).or_py()
}

#[pyfunction]
fn r_squared(xs: Vec<f64>, ys: Vec<f64>) -> PyResult<f64> {
    measures::r_squared(&xs, &ys).or_py()
}

#[pyfunction]
fn omega_squared(groups: Vec<Vec<f64>>) -> PyResult<f64> {
    measures::omega_squared(&groups).or_py()
}

#[pyfunction]
fn robustness_score(distances: Vec<f64>, asymptote: f64) -> PyResult<f64> {
    measures::robustness_score(&distances, asymptote).or_py()
}

fn robustness_config(py: Python<'_>, cfg: Option<&Bound<'_, PyDict>>) -> PyResult<RobustnessConfig> {
    match cfg {
        Some(c) => from_python(py, c.as_any()),
        None => Ok(RobustnessConfig::default()),
    }
}

/// Size robustness sweep; `config` is a dict of sweep settings.
#[pyfunction]
#[pyo3(signature = (a, b, metric, seed, config=None))]
fn size_robustness(
    py: Python<'_>,
    a: &PySample,
    b: &PySample,
    metric: &PyMetric,
    seed: u64,
    config: Option<&Bound<'_, PyDict>>,
) -> PyResult<Py<PyAny>> {
    let cfg = robustness_config(py, config)?;
    let r = py
        .detach(|| measures::size_robustness(&a.0, &b.0, &metric.0, &cfg, seed))
        .or_py()?;
    to_python(py, &r)
}

#[pyfunction]
#[pyo3(signature = (a, b, metric, seed, config=None))]
fn imbalance_robustness(
    py: Python<'_>,
    a: &PySample,
    b: &PySample,
    metric: &PyMetric,
    seed: u64,
    config: Option<&Bound<'_, PyDict>>,
) -> PyResult<Py<PyAny>> {
    let cfg = robustness_config(py, config)?;
    let r = py
        .detach(|| measures::imbalance_robustness(&a.0, &b.0, &metric.0, &cfg, seed))
        .or_py()?;
    to_python(py, &r)
}

fn pmf_pairs(pmf: &DiscretePmf) -> Vec<(f64, f64)> {
    pmf.values().collect()
}

#[pyfunction]
fn hypergeom_pmf(population: usize, successes: usize, draws: usize, x: usize) -> PyResult<f64> {
    sdc_prob::hypergeom_pmf(population, successes, draws, x).or_py()
}

/// `[(u, p)]` for the number of unique elements in one double lottery.
#[pyfunction]
fn unique_count_pmf(n: usize, i: usize) -> PyResult<Vec<(f64, f64)>> {
    Ok(pmf_pairs(&sdc_prob::unique_count_pmf(n, i).or_py()?))
}

/// `[(z, p)]` for one of the models semantic, nonsemantic or
/// nondistributional-semantic.
#[pyfunction]
#[pyo3(signature = (n, i, j, model="semantic"))]
fn sdc_pmf(n: usize, i: usize, j: usize, model: &str) -> PyResult<Vec<(f64, f64)>> {
    let model: SdcModel = parse(model)?;
    Ok(pmf_pairs(&model.pmf(n, i, j).or_py()?))
}

#[pyfunction]
#[pyo3(signature = (n, i, j, model="semantic"))]
fn sdc_expected(n: usize, i: usize, j: usize, model: &str) -> PyResult<f64> {
    parse::<SdcModel>(model)?.expected(n, i, j).or_py()
}

#[pyfunction]
#[pyo3(signature = (n, model="semantic"))]
fn expectation_grid(n: usize, model: &str) -> PyResult<Vec<Vec<f64>>> {
    parse::<SdcModel>(model)?.expectation_grid(n).or_py()
}

#[pyfunction]
fn sdc_distance_approx(n: usize, i: usize, j: usize) -> f64 {
    sdc_prob::sdc_distance_approx(n, i, j)
}

#[allow(clippy::too_many_arguments)]
#[pyfunction]
#[pyo3(signature = (n, i, j, trials=200_000, seed=0, mode="semantic", kind="set-intersection"))]
fn monte_carlo(
    py: Python<'_>,
    n: usize,
    i: usize,
    j: usize,
    trials: usize,
    seed: u64,
    mode: &str,
    kind: &str,
) -> PyResult<Vec<(f64, f64)>> {
    let (mode, kind): (LotteryMode, SimilarityKind) = (parse(mode)?, parse(kind)?);
    let pmf = py
        .detach(|| sdc_prob::monte_carlo_intersection(n, i, j, mode, kind, trials, seed))
        .or_py()?;
    Ok(pmf_pairs(&pmf))
}

#[pyfunction]
fn avd_distance(a: Vec<i64>, b: Vec<i64>) -> PyResult<f64> {
    sdc_prob::avd_distance(&a, &b).or_py()
}

fn run_config(py: Python<'_>, config: &Bound<'_, PyAny>) -> PyResult<RunConfig> {
    if let Ok(path) = config.extract::<PathBuf>() {
        let base = path.parent().map(PathBuf::from).unwrap_or_default();
        return RunConfig::from_path(&path).or_py().map(|c| c.rebase(&base));
    }
    from_python(py, config)
}

/// Full evaluation. `config` is a path to a TOML/JSON file or a dict with
/// the same keys; `seed` overrides its seed. Returns the report as a dict
/// and, when `output_dir` is given, writes all report files there.
#[pyfunction]
#[pyo3(signature = (config, seed, output_dir=None))]
fn evaluate(
    py: Python<'_>,
    config: &Bound<'_, PyAny>,
    seed: u64,
    output_dir: Option<PathBuf>,
) -> PyResult<Py<PyAny>> {
    let mut cfg = run_config(py, config)?;
    cfg.seed = seed;
    let ev = py.detach(|| harness::run_evaluation(&cfg)).or_py()?;
    if let Some(dir) = output_dir {
        harness::emit_report(&ev, &ReportFormat::ALL, dir).or_py()?;
    }
    to_python(py, &ev)
}

#[pyfunction]
#[pyo3(signature = (reference, steps, metric, baseline_reps=5, seed=0))]
fn ifc_trend(
    py: Python<'_>,
    reference: &PySample,
    steps: Vec<PySample>,
    metric: &PyMetric,
    baseline_reps: usize,
    seed: u64,
) -> PyResult<Py<PyAny>> {
    let steps: Vec<kscbench::Sample> = steps.into_iter().map(|s| s.0).collect();
    let trend = py
        .detach(|| harness::ifc_trend(&reference.0, &steps, &metric.0, baseline_reps, seed))
        .or_py()?;
    to_python(py, &trend)
}

#[pyfunction]
#[pyo3(signature = (a, metric, sub_size, reps, seed=0))]
fn self_distance(a: &PySample, metric: &PyMetric, sub_size: usize, reps: usize, seed: u64) -> PyResult<f64> {
    harness::self_distance(&a.0, &metric.0, sub_size, reps, seed).or_py()
}

#[pymodule]
fn kscbench_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyCorpus>()?;
    m.add_class::<PyEmbedded>()?;
    m.add_class::<PySample>()?;
    m.add_class::<PyMetric>()?;
    m.add_class::<PyKsc>()?;
    m.add_class::<PyTable>()?;
    m.add_function(wrap_pyfunction!(hash_embed, m)?)?;
    m.add_function(wrap_pyfunction!(tokenize, m)?)?;
    m.add_function(wrap_pyfunction!(metric_names, m)?)?;
    m.add_function(wrap_pyfunction!(build_ksc, m)?)?;
    m.add_function(wrap_pyfunction!(a_counts, m)?)?;
    m.add_function(wrap_pyfunction!(judgement_set, m)?)?;
    m.add_function(wrap_pyfunction!(pool_tables, m)?)?;
    m.add_function(wrap_pyfunction!(spearman, m)?)?;
    m.add_function(wrap_pyfunction!(r_squared, m)?)?;
    m.add_function(wrap_pyfunction!(omega_squared, m)?)?;
    m.add_function(wrap_pyfunction!(robustness_score, m)?)?;
    m.add_function(wrap_pyfunction!(size_robustness, m)?)?;
    m.add_function(wrap_pyfunction!(imbalance_robustness, m)?)?;
    m.add_function(wrap_pyfunction!(hypergeom_pmf, m)?)?;
    m.add_function(wrap_pyfunction!(unique_count_pmf, m)?)?;
    m.add_function(wrap_pyfunction!(sdc_pmf, m)?)?;
    m.add_function(wrap_pyfunction!(sdc_expected, m)?)?;
    m.add_function(wrap_pyfunction!(expectation_grid, m)?)?;
    m.add_function(wrap_pyfunction!(sdc_distance_approx, m)?)?;
    m.add_function(wrap_pyfunction!(monte_carlo, m)?)?;
    m.add_function(wrap_pyfunction!(avd_distance, m)?)?;
    m.add_function(wrap_pyfunction!(evaluate, m)?)?;
    m.add_function(wrap_pyfunction!(ifc_trend, m)?)?;
    m.add_function(wrap_pyfunction!(self_distance, m)?)?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    Ok(())
}
