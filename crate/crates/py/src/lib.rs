//! Python bindings: configuration, the end-to-end pipeline, follow
//! inference, and graph metrics.
//!
//! Metrics that are undefined for a graph come back as `None`; every other
//! library error is raised as a Python exception.

use std::collections::BTreeSet;
use std::path::PathBuf;

use latent_graph_core::chains::{extract_chains, Caps, ChainNode, Thread};
use latent_graph_core::config::RunConfig;
use latent_graph_core::graph::{self, EdgeClass, InteractionGraph};
use latent_graph_core::inference::{self, infer_all, FollowEdge, FollowStatus, InteractionEvent, Thresholds, WindowGrid, DAY_SECS};
use latent_graph_core::metrics::{self, Direction, MetricsConfig};
use latent_graph_core::pipeline;
use latent_graph_core::profiles::SparseVec;
use latent_graph_core::synthetic::{generate, SyntheticSpec};
use latent_graph_core::temporal::{triad_series, ClosureTime};
use latent_graph_core::Error;
use pyo3::exceptions::{PyIOError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

fn to_py(e: Error) -> PyErr {
    match e {
        Error::Io { .. } => PyIOError::new_err(e.to_string()),
        Error::Config(_) | Error::Usage(_) | Error::Schema { .. } | Error::Parse { .. } | Error::UnmappedAuthor(_) => {
            PyValueError::new_err(e.to_string())
        }
        Error::UndefinedMetric { .. } | Error::Invariant(_) => PyRuntimeError::new_err(e.to_string()),
    }
}

fn metric(r: latent_graph_core::Result<f64>) -> PyResult<Option<f64>> {
    match r {
        Ok(x) => Ok(Some(x)),
        Err(Error::UndefinedMetric { .. }) => Ok(None),
        Err(e) => Err(to_py(e)),
    }
}

fn json_to_py<'py>(py: Python<'py>, value: &serde_json::Value) -> PyResult<Bound<'py, PyAny>> {
    let text = serde_json::to_string(value).map_err(|e| PyValueError::new_err(e.to_string()))?;
    py.import("json")?.call_method1("loads", (text,))
}

fn parse_config(json: Option<&str>) -> PyResult<RunConfig> {
    match json {
        Some(text) => serde_json::from_str(text).map_err(|e| PyValueError::new_err(format!("config: {e}"))),
        None => Ok(RunConfig::default()),
    }
}

fn status(name: &str) -> PyResult<FollowStatus> {
    match name {
        "none" => Ok(FollowStatus::None),
        "maybe" => Ok(FollowStatus::Maybe),
        "forsure" => Ok(FollowStatus::ForSure),
        other => Err(PyValueError::new_err(format!("unknown status {other:?} (none|maybe|forsure)"))),
    }
}

/// Default configuration for a domain, as a JSON string.
#[pyfunction]
#[pyo3(signature = (domain = "technology"))]
fn default_config(domain: &str) -> String {
    RunConfig::for_domain(domain).to_json_pretty()
}

/// Every violated invariant of a JSON configuration; empty when valid.
#[pyfunction]
fn validate_config(json: &str) -> PyResult<Vec<String>> {
    Ok(parse_config(Some(json))?.validate())
}

/// Runs every stage and returns the run manifest as a dict.
#[pyfunction]
#[pyo3(signature = (posts, comments, out, config = None, replicate = false))]
fn run_all<'py>(
    py: Python<'py>,
    posts: PathBuf,
    comments: PathBuf,
    out: PathBuf,
    config: Option<&str>,
    replicate: bool,
) -> PyResult<Bound<'py, PyAny>> {
    let mut cfg = parse_config(config)?;
    cfg.paths.posts = Some(posts);
    cfg.paths.comments = Some(comments);
    cfg.paths.out = Some(out);
    let summary = py.detach(|| pipeline::run_all(&cfg, replicate)).map_err(to_py)?;
    json_to_py(py, &summary.manifest)
}

/// Writes a synthetic dump into `out` and returns the planted per-stage counts.
#[pyfunction]
#[pyo3(signature = (out, posts = 300, comments = 1800, seed = 7))]
fn synth<'py>(py: Python<'py>, out: PathBuf, posts: usize, comments: usize, seed: u64) -> PyResult<Bound<'py, PyDict>> {
    let base = SyntheticSpec::default();
    let spec = if posts == base.posts && comments == base.comments {
        SyntheticSpec { seed, ..base }
    } else {
        SyntheticSpec::scaled(posts, comments, seed)
    };
    let dump = generate(&spec).map_err(to_py)?;
    dump.write(&out).map_err(to_py)?;
    let d = PyDict::new(py);
    d.set_item("posts", dump.planted.posts.to_vec())?;
    d.set_item("comments", dump.planted.comments.to_vec())?;
    let removed: Vec<Vec<(String, usize)>> = dump.planted.removed.iter().map(|m| m.clone().into_iter().collect()).collect();
    d.set_item("removed", removed)?;
    Ok(d)
}

/// Directed density `e / (n (n - 1))`.
#[pyfunction]
fn density(nodes: usize, edges: usize) -> PyResult<Option<f64>> {
    metric(metrics::density_from_counts(nodes, edges))
}

/// Classifies `(source, target, time, comment_id)` events into follow edges.
/// The window grid starts at the earliest event.
#[pyfunction]
#[pyo3(signature = (events, window_days = 30, maybe_min = 2, forsure_min = 3))]
fn infer<'py>(
    py: Python<'py>,
    events: Vec<(String, String, i64, String)>,
    window_days: i64,
    maybe_min: u64,
    forsure_min: u64,
) -> PyResult<Vec<Bound<'py, PyDict>>> {
    let events: Vec<InteractionEvent> = events
        .into_iter()
        .map(|(source, target, time, comment_id)| InteractionEvent {
            source,
            target,
            time,
            post_id: String::new(),
            comment_id,
        })
        .collect();
    if events.is_empty() {
        return Ok(Vec::new());
    }
    let grid = WindowGrid::from_days(&events, window_days).map_err(to_py)?;
    let thresholds = Thresholds::new(maybe_min, forsure_min).map_err(to_py)?;
    infer_all(&events, &grid, thresholds)
        .iter()
        .map(|e| {
            let d = PyDict::new(py);
            d.set_item("source", &e.source)?;
            d.set_item("target", &e.target)?;
            d.set_item("windows_hit", e.windows_hit)?;
            d.set_item("total_comments", e.total_comments)?;
            d.set_item("status", e.status.as_str())?;
            d.set_item("first_seen", e.first_seen)?;
            d.set_item("last_seen", e.last_seen)?;
            d.set_item("status_time", e.status_time)?;
            d.set_item("maybe_time", e.maybe_time)?;
            Ok(d)
        })
        .collect()
}

/// Maximal similarity chains of one thread given `(record_id, time, vector)` nodes.
/// Returns record-id paths.
#[pyfunction]
#[pyo3(signature = (nodes, threshold = 0.1))]
fn chains(nodes: Vec<(String, i64, Vec<f64>)>, threshold: f64) -> Vec<Vec<String>> {
    let nodes = nodes
        .into_iter()
        .map(|(id, time, v)| ChainNode::new(&id, "", time, SparseVec::from_dense(&v)))
        .collect();
    let (found, _) = extract_chains(&[Thread::new("thread", nodes)], threshold, Caps::default());
    found
        .into_iter()
        .map(|c| c.nodes.into_iter().map(|n| n.record_id).collect())
        .collect()
}

/// A directed, weighted follow graph.
#[pyclass(name = "Graph", module = "latent_graph", frozen)]
struct PyGraph {
    inner: InteractionGraph,
}

#[pymethods]
impl PyGraph {
    /// Builds a graph from `(source, target, weight, status)` tuples; edges of
    /// status "none" are dropped.
    #[new]
    #[pyo3(signature = (edges, nodes = None))]
    fn new(edges: Vec<(String, String, u64, String)>, nodes: Option<Vec<String>>) -> PyResult<Self> {
        let edges = edges
            .into_iter()
            .map(|(source, target, weight, st)| {
                Ok(FollowEdge {
                    source,
                    target,
                    windows_hit: 0,
                    total_comments: weight,
                    status: status(&st)?,
                    first_seen: 0,
                    last_seen: 0,
                    status_time: 0,
                    maybe_time: None,
                })
            })
            .collect::<PyResult<Vec<_>>>()?;
        let keep = nodes.is_some();
        let known = nodes.unwrap_or_default();
        Ok(PyGraph {
            inner: InteractionGraph::build(&edges, EdgeClass::All, known.iter().map(String::as_str), keep),
        })
    }

    /// Reads a classified edge table (`.csv`) or a GraphML export.
    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        let inner = if path.extension().is_some_and(|e| e == "csv") {
            let edges = inference::read_edges_csv(&path).map_err(to_py)?;
            InteractionGraph::build(&edges, EdgeClass::All, [], false)
        } else {
            graph::import(&path).map_err(to_py)?
        };
        Ok(PyGraph { inner })
    }

    fn nodes(&self) -> Vec<String> {
        self.inner.nodes().iter().cloned().collect()
    }

    fn edges(&self) -> Vec<(String, String, u64, &'static str)> {
        self.inner
            .edges()
            .iter()
            .map(|e| (e.source.clone(), e.target.clone(), e.weight(), e.status.as_str()))
            .collect()
    }

    fn __len__(&self) -> usize {
        self.inner.node_count()
    }

    fn __repr__(&self) -> String {
        format!("Graph(nodes={}, edges={})", self.inner.node_count(), self.inner.edge_count())
    }

    #[getter]
    fn edge_count(&self) -> usize {
        self.inner.edge_count()
    }

    fn forsure_only(&self) -> Self {
        PyGraph {
            inner: self.inner.forsure_only(),
        }
    }

    fn apply_coverage(&self, fraction: f64) -> PyResult<Self> {
        Ok(PyGraph {
            inner: self.inner.apply_coverage(fraction).map_err(to_py)?,
        })
    }

    fn density(&self) -> PyResult<Option<f64>> {
        metric(metrics::density(&self.inner))
    }

    fn reciprocity(&self) -> PyResult<Option<f64>> {
        metric(metrics::reciprocity(&self.inner))
    }

    fn clustering(&self) -> PyResult<Option<f64>> {
        metric(metrics::clustering(&self.inner))
    }

    fn avg_path_length(&self) -> PyResult<Option<f64>> {
        metric(metrics::avg_path_length(&self.inner))
    }

    fn assortativity(&self) -> PyResult<Option<f64>> {
        metric(metrics::assortativity(&self.inner))
    }

    fn triangles(&self) -> usize {
        metrics::triangle_count(&self.inner)
    }

    /// `(node, distinct neighbours)` pairs, highest first, ties by id.
    #[pyo3(signature = (direction = "out", k = 10))]
    fn degree_ranking(&self, direction: &str, k: usize) -> PyResult<Vec<(String, usize)>> {
        let dir: Direction = direction.parse().map_err(to_py)?;
        let ranked = metrics::degree_ranking(&self.inner, dir, k).map_err(to_py)?;
        Ok(ranked.into_iter().map(|r| (r.id, r.count)).collect())
    }

    /// Greedy modularity communities as `(partition, modularity)`.
    #[pyo3(signature = (seed = 42))]
    fn communities(&self, seed: u64) -> PyResult<(Vec<Vec<String>>, f64)> {
        let c = metrics::communities(&self.inner, seed).map_err(to_py)?;
        Ok((c.partition, c.modularity))
    }

    fn modularity(&self, partition: Vec<Vec<String>>) -> PyResult<f64> {
        metrics::modularity(&self.inner, &partition).map_err(to_py)
    }

    fn filter_bubble(&self, partition: Vec<Vec<String>>) -> PyResult<Option<f64>> {
        metric(metrics::filter_bubble(&self.inner, &partition))
    }

    /// The full metrics report as a dict.
    #[pyo3(signature = (seed = 42, top_k = 10))]
    fn report<'py>(&self, py: Python<'py>, seed: u64, top_k: usize) -> PyResult<Bound<'py, PyAny>> {
        let r = metrics::full_report(&self.inner, &MetricsConfig { seed, top_k });
        json_to_py(py, &r.to_json())
    }

    /// Cumulative triangle closures per interval for all and ForSure edges.
    #[pyo3(signature = (interval_days = 182))]
    fn triads<'py>(&self, py: Python<'py>, interval_days: i64) -> PyResult<Bound<'py, PyAny>> {
        let s = triad_series(self.inner.edges(), interval_days.saturating_mul(DAY_SECS), ClosureTime::FirstSeen).map_err(to_py)?;
        let value = serde_json::to_value(&s).map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
        json_to_py(py, &value)
    }

    fn to_graphml(&self) -> String {
        graph::to_graphml(&self.inner)
    }

    fn to_dot(&self) -> String {
        graph::to_dot(&self.inner)
    }

    fn neighbours(&self, node: &str) -> BTreeSet<String> {
        self.inner
            .edges()
            .iter()
            .filter_map(|e| match (e.source == node, e.target == node) {
                (true, _) => Some(e.target.clone()),
                (_, true) => Some(e.source.clone()),
                _ => None,
            })
            .collect()
    }
}

#[pymodule]
fn latent_graph(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    m.add_class::<PyGraph>()?;
    m.add_function(wrap_pyfunction!(default_config, m)?)?;
    m.add_function(wrap_pyfunction!(validate_config, m)?)?;
    m.add_function(wrap_pyfunction!(run_all, m)?)?;
    m.add_function(wrap_pyfunction!(synth, m)?)?;
    m.add_function(wrap_pyfunction!(density, m)?)?;
    m.add_function(wrap_pyfunction!(infer, m)?)?;
    m.add_function(wrap_pyfunction!(chains, m)?)?;
    Ok(())
}
