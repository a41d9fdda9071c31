//! Python bindings for `embstab_core`.

use std::collections::{BTreeMap, HashMap};

use pyo3::exceptions::{PyIOError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use embstab_core as core;
use embstab_core::{CsvTable, SpaceFormat};

fn to_py(e: core::Error) -> PyErr {
    if e.is_io() {
        PyIOError::new_err(e.to_string())
    } else {
        PyValueError::new_err(e.to_string())
    }
}

fn parse_format(format: Option<&str>) -> PyResult<Option<SpaceFormat>> {
    format.map(|f| f.parse::<SpaceFormat>().map_err(to_py)).transpose()
}

#[pyclass(name = "EmbeddingSpace", module = "embstab", frozen)]
struct PyEmbeddingSpace {
    inner: core::EmbeddingSpace,
}

#[pymethods]
impl PyEmbeddingSpace {
    #[new]
    #[pyo3(signature = (label, words, vectors))]
    fn new(label: &str, words: Vec<String>, vectors: Vec<Vec<f64>>) -> PyResult<Self> {
        if words.len() != vectors.len() {
            return Err(PyValueError::new_err(format!("{} words but {} vectors", words.len(), vectors.len())));
        }
        let inner = core::EmbeddingSpace::from_rows(label, words.into_iter().zip(vectors).collect()).map_err(to_py)?;
        Ok(PyEmbeddingSpace { inner })
    }

    /// Load a word2vec or GloVe text file; the layout is detected when `format` is None.
    #[staticmethod]
    #[pyo3(signature = (path, format=None))]
    fn load(path: &str, format: Option<&str>) -> PyResult<Self> {
        let inner = core::open_space(path, parse_format(format)?).map_err(to_py)?;
        Ok(PyEmbeddingSpace { inner })
    }

    fn save(&self, path: &str) -> PyResult<()> {
        core::save_space(&self.inner, path).map_err(to_py)
    }

    #[getter]
    fn id(&self) -> &str {
        self.inner.id()
    }

    #[getter]
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    #[getter]
    fn vocabulary(&self) -> Vec<String> {
        self.inner.vocabulary().to_vec()
    }

    fn vector(&self, word: &str) -> Option<Vec<f64>> {
        self.inner.vector(word).map(<[f64]>::to_vec)
    }

    fn digest(&self) -> String {
        self.inner.digest()
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn __contains__(&self, word: &str) -> bool {
        self.inner.contains(word)
    }

    fn __repr__(&self) -> String {
        format!("EmbeddingSpace(id={:?}, words={}, dim={})", self.inner.id(), self.inner.len(), self.inner.dim())
    }
}

#[pyclass(name = "NeighborTable", module = "embstab", frozen)]
struct PyNeighborTable {
    inner: core::NeighborTable,
}

#[pymethods]
impl PyNeighborTable {
    #[getter]
    fn k(&self) -> usize {
        self.inner.k()
    }

    #[getter]
    fn space_id(&self) -> &str {
        self.inner.space_id()
    }

    #[getter]
    fn vocabulary(&self) -> Vec<String> {
        self.inner.vocabulary().to_vec()
    }

    fn neighbors(&self, word: &str) -> PyResult<Vec<String>> {
        self.inner
            .neighbor_words(word)
            .map(|ws| ws.into_iter().map(str::to_string).collect())
            .ok_or_else(|| PyValueError::new_err(format!("word `{word}` not found")))
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }
}

#[pyclass(name = "StabilityReport", module = "embstab", frozen)]
struct PyStabilityReport {
    inner: core::StabilityReport,
}

#[pymethods]
impl PyStabilityReport {
    #[getter]
    fn aggregate(&self) -> f64 {
        self.inner.aggregate
    }

    #[getter]
    fn k(&self) -> usize {
        self.inner.k
    }

    #[getter]
    fn per_word(&self) -> BTreeMap<String, f64> {
        self.inner.per_word.clone()
    }

    /// `(space_a, space_b, aggregate)` for every compared pair.
    #[getter]
    fn pairs(&self) -> Vec<(String, String, f64)> {
        self.inner
            .space_pair_ids
            .iter()
            .zip(&self.inner.pair_aggregates)
            .map(|((a, b), s)| (a.clone(), b.clone(), *s))
            .collect()
    }

    fn to_csv(&self) -> String {
        self.inner.to_csv_string()
    }

    fn __repr__(&self) -> String {
        format!("StabilityReport(k={}, words={}, aggregate={})", self.inner.k, self.inner.per_word.len(), self.inner.aggregate)
    }
}

#[pyclass(name = "Clustering", module = "embstab", frozen)]
struct PyClustering {
    inner: core::Clustering,
}

#[pymethods]
impl PyClustering {
    /// Load a `word,cluster_id,role` CSV.
    #[staticmethod]
    fn load(path: &str) -> PyResult<Self> {
        Ok(PyClustering {
            inner: core::Clustering::load_csv(path).map_err(to_py)?,
        })
    }

    /// Build from `{word: cluster_id or None}`.
    #[staticmethod]
    fn from_labels(labels: BTreeMap<String, Option<usize>>) -> PyResult<Self> {
        Ok(PyClustering {
            inner: core::Clustering::from_labels(labels.into_iter().collect()).map_err(to_py)?,
        })
    }

    /// `{word: cluster_id}`, with None for noise.
    #[getter]
    fn labels(&self) -> BTreeMap<String, Option<usize>> {
        self.inner.words().iter().cloned().zip(self.inner.labels().iter().copied()).collect()
    }

    #[getter]
    fn roles(&self) -> BTreeMap<String, &'static str> {
        self.inner.words().iter().cloned().zip(self.inner.roles().iter().map(|r| r.name())).collect()
    }

    #[getter]
    fn cluster_count(&self) -> usize {
        self.inner.cluster_count()
    }

    #[getter]
    fn noise_count(&self) -> usize {
        self.inner.noise_count()
    }

    fn to_csv(&self) -> String {
        self.inner.to_csv_string()
    }
}

#[pyclass(name = "WeatQuery", module = "embstab", frozen)]
struct PyWeatQuery {
    inner: core::WeatQuery,
}

#[pymethods]
impl PyWeatQuery {
    #[new]
    fn new(name: &str, x: Vec<String>, y: Vec<String>, a: Vec<String>, b: Vec<String>) -> PyResult<Self> {
        fn r(v: &[String]) -> Vec<&str> {
            v.iter().map(String::as_str).collect()
        }
        let inner = core::WeatQuery::new(name, &r(&x), &r(&y), &r(&a), &r(&b)).map_err(to_py)?;
        Ok(PyWeatQuery { inner })
    }

    /// Load a word-list file with `X:`, `Y:`, `A:` and `B:` sections.
    #[staticmethod]
    fn load(path: &str) -> PyResult<Self> {
        Ok(PyWeatQuery {
            inner: core::WeatQuery::load(path).map_err(to_py)?,
        })
    }

    #[getter]
    fn name(&self) -> &str {
        &self.inner.name
    }
}

fn weat_dict<'py>(py: Python<'py>, r: &core::WeatResult) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("query", &r.query)?;
    d.set_item("space", &r.space)?;
    d.set_item("effect_size", r.effect_size)?;
    d.set_item("coverage", r.coverage)?;
    d.set_item("dropped_words", &r.dropped_words)?;
    d.set_item("per_word_association", r.per_word_association.clone())?;
    Ok(d)
}

#[pyfunction]
fn cosine(u: Vec<f64>, v: Vec<f64>) -> PyResult<f64> {
    core::cosine(&u, &v).map_err(to_py)
}

/// Exact top-k cosine neighbors of every word in `vocab` (default: the whole
/// vocabulary), searched among `vocab` only.
#[pyfunction]
#[pyo3(signature = (space, k, vocab=None))]
fn top_k_all(py: Python<'_>, space: &PyEmbeddingSpace, k: usize, vocab: Option<Vec<String>>) -> PyResult<PyNeighborTable> {
    let vocab = vocab.unwrap_or_else(|| {
        let mut v = space.inner.vocabulary().to_vec();
        v.sort();
        v
    });
    let inner = py.detach(|| core::top_k_all(&space.inner, &vocab, k)).map_err(to_py)?;
    Ok(PyNeighborTable { inner })
}

#[pyfunction]
fn intersect_vocab(spaces: Vec<PyRef<'_, PyEmbeddingSpace>>) -> PyResult<Vec<String>> {
    let refs: Vec<&core::EmbeddingSpace> = spaces.iter().map(|s| &s.inner).collect();
    core::intersect_vocab(&refs).map_err(to_py)
}

#[pyfunction]
fn pair_stability(t1: &PyNeighborTable, t2: &PyNeighborTable) -> PyResult<PyStabilityReport> {
    let inner = core::pair_stability(&t1.inner, &t2.inner).map_err(to_py)?;
    Ok(PyStabilityReport { inner })
}

#[pyfunction]
fn multi_space_stability(tables: Vec<PyRef<'_, PyNeighborTable>>) -> PyResult<PyStabilityReport> {
    let refs: Vec<&core::NeighborTable> = tables.iter().map(|t| &t.inner).collect();
    let inner = core::multi_space_stability(&refs, core::MultiSpaceMode::AllPairs).map_err(to_py)?;
    Ok(PyStabilityReport { inner })
}

/// Stability summary per frequency quintile, as a list of dicts in
/// VL, L, M, H, VH order. Statistics are None for an empty bucket.
#[pyfunction]
fn frequency_buckets<'py>(
    py: Python<'py>,
    freqs: HashMap<String, u64>,
    report: &PyStabilityReport,
) -> PyResult<Vec<Bound<'py, PyDict>>> {
    let r = core::frequency_buckets(&freqs, &report.inner).map_err(to_py)?;
    r.per_bucket
        .iter()
        .map(|b| {
            let d = PyDict::new(py);
            d.set_item("bucket", b.bucket.label())?;
            d.set_item("count", b.count)?;
            for (key, value) in [
                ("min", b.stats.as_ref().map(|s| s.min)),
                ("q1", b.stats.as_ref().map(|s| s.q1)),
                ("median", b.stats.as_ref().map(|s| s.median)),
                ("q3", b.stats.as_ref().map(|s| s.q3)),
                ("max", b.stats.as_ref().map(|s| s.max)),
                ("mean", b.stats.as_ref().map(|s| s.mean)),
                ("variance", b.stats.as_ref().map(|s| s.variance)),
            ] {
                d.set_item(key, value)?;
            }
            Ok(d)
        })
        .collect()
}

/// `{method: share}` from `{method: StabilityReport}`.
#[pyfunction]
fn best_method_share(reports: BTreeMap<String, PyRef<'_, PyStabilityReport>>) -> PyResult<BTreeMap<String, f64>> {
    let pairs: Vec<(String, &core::StabilityReport)> = reports.iter().map(|(n, r)| (n.clone(), &r.inner)).collect();
    let share = core::best_method_share(&pairs).map_err(to_py)?;
    Ok(share.methods.into_iter().zip(share.shares).collect())
}

/// SNND clustering of a neighbor table whose k equals `knn_size`.
#[pyfunction]
#[pyo3(signature = (table, delta_sim=6, delta_degree=10, strict=false))]
fn snnd_cluster(table: &PyNeighborTable, delta_sim: usize, delta_degree: usize, strict: bool) -> PyResult<PyClustering> {
    let mut params = core::SnndParams::new(table.inner.k(), delta_sim, delta_degree).map_err(to_py)?;
    params.strict = strict;
    let graph = core::build_snn_graph(&table.inner, &params).map_err(to_py)?;
    Ok(PyClustering {
        inner: core::snnd_cluster(&graph, &params),
    })
}

#[pyfunction]
fn clustering_agreement(clusterings: Vec<PyRef<'_, PyClustering>>) -> PyResult<f64> {
    let refs: Vec<&core::Clustering> = clusterings.iter().map(|c| &c.inner).collect();
    core::clustering_agreement(&refs).map_err(to_py)
}

#[pyfunction]
fn agreement_curve(clusterings: Vec<PyRef<'_, PyClustering>>) -> PyResult<Vec<f64>> {
    let refs: Vec<&core::Clustering> = clusterings.iter().map(|c| &c.inner).collect();
    core::agreement_curve(&refs).map_err(to_py)
}

#[pyfunction]
fn effect_size<'py>(py: Python<'py>, query: &PyWeatQuery, space: &PyEmbeddingSpace) -> PyResult<Bound<'py, PyDict>> {
    let r = core::effect_size(&query.inner, &space.inner).map_err(to_py)?;
    weat_dict(py, &r)
}

#[pyfunction]
fn weat_stability<'py>(
    py: Python<'py>,
    query: &PyWeatQuery,
    spaces: Vec<PyRef<'_, PyEmbeddingSpace>>,
) -> PyResult<Bound<'py, PyDict>> {
    let refs: Vec<&core::EmbeddingSpace> = spaces.iter().map(|s| &s.inner).collect();
    let r = core::weat_stability(&query.inner, &refs).map_err(to_py)?;
    let d = PyDict::new(py);
    d.set_item("query", &r.query)?;
    d.set_item("max", r.max)?;
    d.set_item("min", r.min)?;
    d.set_item("spread", r.spread)?;
    let per: Vec<Bound<'py, PyDict>> = r.per_space.iter().map(|w| weat_dict(py, w)).collect::<PyResult<_>>()?;
    d.set_item("per_space", per)?;
    Ok(d)
}

#[pyfunction]
fn average_spaces(spaces: Vec<PyRef<'_, PyEmbeddingSpace>>) -> PyResult<PyEmbeddingSpace> {
    let refs: Vec<&core::EmbeddingSpace> = spaces.iter().map(|s| &s.inner).collect();
    Ok(PyEmbeddingSpace {
        inner: core::average_spaces(&refs).map_err(to_py)?,
    })
}

/// Run a sweep config file; returns `[(axis_value, stability)]`.
#[pyfunction]
fn run_sweep(py: Python<'_>, config: &str) -> PyResult<Vec<(u64, f64)>> {
    let spec = core::SweepSpec::load(config).map_err(to_py)?;
    let table = py.detach(|| core::run_sweep(&spec)).map_err(to_py)?;
    Ok(table.rows.iter().map(|r| (r.axis_value, r.stability)).collect())
}

/// Clean text (one sentence per line). Returns `(sentences, frequencies)`.
#[pyfunction]
#[pyo3(signature = (text, stopwords=None, min_count=5))]
fn preprocess_text(text: &str, stopwords: Option<Vec<String>>, min_count: u64) -> PyResult<(Vec<String>, BTreeMap<String, u64>)> {
    let sw = match stopwords {
        Some(ws) => core::Stopwords::new(ws),
        None => core::Stopwords::english(),
    };
    let p = core::preprocess_text(text, &sw, min_count).map_err(to_py)?;
    Ok((p.sentences, p.frequencies))
}

#[pymodule]
fn embstab(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyEmbeddingSpace>()?;
    m.add_class::<PyNeighborTable>()?;
    m.add_class::<PyStabilityReport>()?;
    m.add_class::<PyClustering>()?;
    m.add_class::<PyWeatQuery>()?;
    m.add_function(wrap_pyfunction!(cosine, m)?)?;
    m.add_function(wrap_pyfunction!(top_k_all, m)?)?;
    m.add_function(wrap_pyfunction!(intersect_vocab, m)?)?;
    m.add_function(wrap_pyfunction!(pair_stability, m)?)?;
    m.add_function(wrap_pyfunction!(multi_space_stability, m)?)?;
    m.add_function(wrap_pyfunction!(frequency_buckets, m)?)?;
    m.add_function(wrap_pyfunction!(best_method_share, m)?)?;
    m.add_function(wrap_pyfunction!(snnd_cluster, m)?)?;
    m.add_function(wrap_pyfunction!(clustering_agreement, m)?)?;
    m.add_function(wrap_pyfunction!(agreement_curve, m)?)?;
    m.add_function(wrap_pyfunction!(effect_size, m)?)?;
    m.add_function(wrap_pyfunction!(weat_stability, m)?)?;
    m.add_function(wrap_pyfunction!(average_spaces, m)?)?;
    m.add_function(wrap_pyfunction!(run_sweep, m)?)?;
    m.add_function(wrap_pyfunction!(preprocess_text, m)?)?;
    Ok(())
}
