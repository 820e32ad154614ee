//! Time-resolved analyses: triadic-closure series, growing-prefix snapshots
//! and parameter sweeps.

use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::graph::GraphSpec;
use crate::inference::{
    csv_err, csv_writer, infer_all, FollowEdge, FollowStatus, InteractionEvent, Thresholds, WindowGrid, DAY_SECS,
};
use crate::metrics::{full_report, MetricsConfig, MetricsReport};

pub const DEFAULT_INTERVAL_DAYS: i64 = 182;

pub const TRIADS_HEADER: [&str; 6] = ["interval_start", "interval_end", "cum_all", "new_all", "cum_forsure", "new_forsure"];

pub const SWEEP_HEADER: [&str; 10] = [
    "window_days",
    "maybe_min",
    "forsure_min",
    "coverage",
    "nodes",
    "edges",
    "forsure_edges",
    "clustering",
    "reciprocity",
    "modularity",
];

/// Which edge timestamp marks the appearance of an edge.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum ClosureTime {
    #[default]
    FirstSeen,
    StatusTime,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TriadSeries {
    pub interval_len: i64,
    /// Half-open `[start, end)` intervals.
    pub intervals: Vec<(i64, i64)>,
    pub cumulative_all: Vec<u64>,
    pub new_all: Vec<u64>,
    pub cumulative_forsure: Vec<u64>,
    pub new_forsure: Vec<u64>,
}

/// Undirected edge times: the earliest appearance over both directions.
fn undirected_times(edges: &[&FollowEdge], closure: ClosureTime) -> HashMap<(usize, usize), i64> {
    let mut ids: BTreeMap<&str, usize> = BTreeMap::new();
    for e in edges {
        for id in [e.source.as_str(), e.target.as_str()] {
            let next = ids.len();
            ids.entry(id).or_insert(next);
        }
    }
    let mut times = HashMap::new();
    for e in edges.iter().filter(|e| e.source != e.target) {
        let (a, b) = (ids[e.source.as_str()], ids[e.target.as_str()]);
        let t = match closure {
            ClosureTime::FirstSeen => e.first_seen,
            ClosureTime::StatusTime => e.status_time,
        };
        let slot = times.entry((a.min(b), a.max(b))).or_insert(t);
        *slot = (*slot).min(t);
    }
    times
}

/// Closure time of every triangle: the latest of its three edge times.
fn closure_times(times: &HashMap<(usize, usize), i64>) -> Vec<i64> {
    let mut adj: BTreeMap<usize, Vec<(usize, i64)>> = BTreeMap::new();
    for (&(a, b), &t) in times {
        adj.entry(a).or_default().push((b, t));
    }
    adj.values_mut().for_each(|v| v.sort_unstable());
    let mut out = Vec::new();
    for (&u, higher) in &adj {
        for (i, &(v, tuv)) in higher.iter().enumerate() {
            for &(w, tuw) in &higher[i + 1..] {
                if let Some(&tvw) = times.get(&(v, w)) {
                    debug_assert!(u < v && v < w);
                    out.push(tuv.max(tuw).max(tvw));
                }
            }
        }
    }
    out
}

fn cumulate(closures: &[i64], start: i64, len: i64, n: usize) -> (Vec<u64>, Vec<u64>) {
    let mut new = vec![0u64; n];
    for &t in closures {
        new[((t - start) / len) as usize] += 1;
    }
    let cumulative = new
        .iter()
        .scan(0u64, |acc, x| {
            *acc += x;
            Some(*acc)
        })
        .collect();
    (cumulative, new)
}

/// Counts triangle closures per interval on the undirected projection, once
/// for all positive edges and once for `ForSure` edges only. Edges with
/// status `None` are ignored.
pub fn triad_series(edges: &[FollowEdge], interval_len: i64, closure: ClosureTime) -> Result<TriadSeries> {
    if interval_len <= 0 {
        return Err(Error::Usage(format!("interval length {interval_len} must be positive")));
    }
    let all: Vec<&FollowEdge> = edges.iter().filter(|e| e.status != FollowStatus::None).collect();
    let sure: Vec<&FollowEdge> = all.iter().copied().filter(|e| e.status == FollowStatus::ForSure).collect();
    let all_times = undirected_times(&all, closure);
    let sure_times = undirected_times(&sure, closure);
    // ForSure-only edges can appear later than their reciprocal Maybe edge
    let last = all_times.values().chain(sure_times.values()).max();
    let (Some(&start), Some(&end)) = (all_times.values().min(), last) else {
        return Ok(TriadSeries {
            interval_len,
            intervals: Vec::new(),
            cumulative_all: Vec::new(),
            new_all: Vec::new(),
            cumulative_forsure: Vec::new(),
            new_forsure: Vec::new(),
        });
    };
    let n = ((end - start) / interval_len) as usize + 1;
    let (cumulative_all, new_all) = cumulate(&closure_times(&all_times), start, interval_len, n);
    let (cumulative_forsure, new_forsure) =
        cumulate(&closure_times(&sure_times), start, interval_len, n);
    let intervals = (0..n as i64)
        .map(|i| (start + i * interval_len, start + (i + 1) * interval_len))
        .collect();
    Ok(TriadSeries {
        interval_len,
        intervals,
        cumulative_all,
        new_all,
        cumulative_forsure,
        new_forsure,
    })
}

impl TriadSeries {
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv_writer(path)?;
        w.write_record(TRIADS_HEADER).map_err(csv_err(path))?;
        for i in 0..self.intervals.len() {
            let (s, e) = self.intervals[i];
            w.write_record([
                s.to_string(),
                e.to_string(),
                self.cumulative_all[i].to_string(),
                self.new_all[i].to_string(),
                self.cumulative_forsure[i].to_string(),
                self.new_forsure[i].to_string(),
            ])
            .map_err(csv_err(path))?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }
}

/// Settings for turning an event stream into a metrics report.
#[derive(Debug, Clone, PartialEq)]
pub struct AnalysisSpec {
    pub thresholds: Thresholds,
    pub graph: GraphSpec,
    pub metrics: MetricsConfig,
    /// Nodes kept when `graph.keep_isolated` is set.
    pub known_nodes: Vec<String>,
}

impl AnalysisSpec {
    pub fn report(&self, events: &[InteractionEvent], grid: &WindowGrid) -> Result<(Vec<FollowEdge>, MetricsReport)> {
        let edges = infer_all(events, grid, self.thresholds);
        let graph = self.graph.build(&edges, self.known_nodes.iter().map(String::as_str))?;
        Ok((edges, full_report(&graph, &self.metrics)))
    }
}

/// For each checkpoint `T`, the report over events with `time <= T`,
/// classified on the full-data `grid`.
pub fn snapshot_series(
    events: &[InteractionEvent],
    grid: &WindowGrid,
    spec: &AnalysisSpec,
    checkpoints: &[i64],
) -> Result<Vec<MetricsReport>> {
    if checkpoints.windows(2).any(|w| w[0] > w[1]) {
        return Err(Error::Usage("checkpoints must be ascending".into()));
    }
    checkpoints
        .par_iter()
        .map(|&t| {
            let prefix: Vec<InteractionEvent> = events.iter().filter(|e| e.time <= t).cloned().collect();
            spec.report(&prefix, grid).map(|(_, r)| r)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepParams {
    pub window_days: Vec<i64>,
    pub maybe_min: Vec<u64>,
    pub forsure_min: Vec<u64>,
    pub coverage: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub window_days: i64,
    pub maybe_min: u64,
    pub forsure_min: u64,
    pub coverage: f64,
    pub nodes: usize,
    pub edges: usize,
    pub forsure_edges: usize,
    pub clustering: Option<f64>,
    pub reciprocity: Option<f64>,
    pub modularity: Option<f64>,
}

/// Runs inference and metrics for every valid cell of the parameter grid, in
/// parameter order. Cells with `maybe_min > forsure_min` are skipped.
pub fn sweep(events: &[InteractionEvent], params: &SweepParams, base: &AnalysisSpec) -> Result<Vec<SweepRow>> {
    if params.window_days.is_empty()
        || params.maybe_min.is_empty()
        || params.forsure_min.is_empty()
        || params.coverage.is_empty()
    {
        return Err(Error::Usage("every sweep parameter list needs at least one value".into()));
    }
    let mut cells = Vec::new();
    for &w in &params.window_days {
        for &m in &params.maybe_min {
            for &f in &params.forsure_min {
                for &c in &params.coverage {
                    if m >= 1 && m <= f {
                        cells.push((w, m, f, c));
                    }
                }
            }
        }
    }
    cells
        .par_iter()
        .map(|&(w, m, f, c)| {
            let grid = WindowGrid::covering(events, w.saturating_mul(DAY_SECS))?;
            let mut spec = base.clone();
            spec.thresholds = Thresholds::new(m, f)?;
            spec.graph.coverage = c;
            let edges = infer_all(events, &grid, spec.thresholds);
            let graph = spec.graph.build(&edges, spec.known_nodes.iter().map(String::as_str))?;
            let report = full_report(&graph, &spec.metrics);
            Ok(SweepRow {
                window_days: w,
                maybe_min: m,
                forsure_min: f,
                coverage: c,
                nodes: report.nodes,
                edges: report.edges,
                forsure_edges: graph.edges().iter().filter(|e| e.status == FollowStatus::ForSure).count(),
                clustering: report.clustering,
                reciprocity: report.reciprocity,
                modularity: report.modularity,
            })
        })
        .collect()
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn write_sweep_csv(path: &Path, rows: &[SweepRow]) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(SWEEP_HEADER).map_err(csv_err(path))?;
    for r in rows {
        w.write_record([
            r.window_days.to_string(),
            r.maybe_min.to_string(),
            r.forsure_min.to_string(),
            r.coverage.to_string(),
            r.nodes.to_string(),
            r.edges.to_string(),
            r.forsure_edges.to_string(),
            opt(r.clustering),
            opt(r.reciprocity),
            opt(r.modularity),
        ])
        .map_err(csv_err(path))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    const DAY: i64 = DAY_SECS;

    fn edge(s: &str, t: &str, first: i64, status: FollowStatus) -> FollowEdge {
        FollowEdge {
            source: s.into(),
            target: t.into(),
            windows_hit: 3,
            total_comments: 3,
            status,
            first_seen: first,
            last_seen: first + 10,
            status_time: first + 5,
            maybe_time: None,
        }
    }

    fn event(s: &str, t: &str, time: i64, id: &str) -> InteractionEvent {
        InteractionEvent {
            source: s.into(),
            target: t.into(),
            time,
            post_id: "p".into(),
            comment_id: id.into(),
        }
    }

    #[test]
    fn triangle_closes_in_third_interval() {
        let edges = [
            edge("a", "b", 0, FollowStatus::ForSure),
            edge("b", "c", 10 * DAY, FollowStatus::ForSure),
            edge("c", "a", 400 * DAY, FollowStatus::ForSure),
        ];
        let s = triad_series(&edges, 182 * DAY, ClosureTime::FirstSeen).unwrap();
        assert_eq!(s.cumulative_all, [0, 0, 1]);
        assert_eq!(s.new_all, [0, 0, 1]);
        assert_eq!(s.cumulative_forsure, [0, 0, 1]);
        assert_eq!(s.intervals[2], (364 * DAY, 546 * DAY));
    }

    #[test]
    fn single_edge_and_empty() {
        let s = triad_series(&[edge("a", "b", 0, FollowStatus::Maybe)], DAY, ClosureTime::FirstSeen).unwrap();
        assert_eq!(s.cumulative_all, [0]);
        let empty = triad_series(&[], DAY, ClosureTime::FirstSeen).unwrap();
        assert!(empty.intervals.is_empty());
        assert!(triad_series(&[], 0, ClosureTime::FirstSeen).is_err());
    }

    #[test]
    fn maybe_triangle_is_not_forsure() {
        let edges = [
            edge("a", "b", 0, FollowStatus::Maybe),
            edge("b", "c", DAY, FollowStatus::Maybe),
            edge("a", "c", 2 * DAY, FollowStatus::Maybe),
        ];
        let s = triad_series(&edges, 182 * DAY, ClosureTime::FirstSeen).unwrap();
        assert_eq!(s.cumulative_all, [1]);
        assert_eq!(s.cumulative_forsure, [0]);
    }

    #[test]
    fn reciprocal_edges_use_earliest_time_and_none_is_ignored() {
        let edges = [
            edge("a", "b", 500 * DAY, FollowStatus::ForSure),
            edge("b", "a", 0, FollowStatus::Maybe),
            edge("b", "c", DAY, FollowStatus::ForSure),
            edge("a", "c", 2 * DAY, FollowStatus::ForSure),
            edge("c", "d", 2 * DAY, FollowStatus::None),
            edge("a", "d", 2 * DAY, FollowStatus::ForSure),
        ];
        let s = triad_series(&edges, 100 * DAY, ClosureTime::FirstSeen).unwrap();
        assert_eq!(s.cumulative_all, [1; 6]);
        assert_eq!(s.cumulative_forsure, [0, 0, 0, 0, 0, 1]);
        let late = triad_series(&edges, 100 * DAY, ClosureTime::StatusTime).unwrap();
        assert_eq!(late.cumulative_all[0], 1);
    }

    fn spec() -> AnalysisSpec {
        AnalysisSpec {
            thresholds: Thresholds::new(2, 3).unwrap(),
            graph: GraphSpec::default(),
            metrics: MetricsConfig::default(),
            known_nodes: Vec::new(),
        }
    }

    fn two_phase() -> Vec<InteractionEvent> {
        let mut ev = Vec::new();
        for w in 0..4 {
            ev.push(event("a", "b", w * 7 * DAY, &format!("ab{w}")));
            ev.push(event("b", "a", w * 7 * DAY + 1, &format!("ba{w}")));
            ev.push(event("c", "a", w * 7 * DAY + 2, &format!("ca{w}")));
        }
        ev.push(event("d", "a", 40 * 7 * DAY, "da0"));
        ev.push(event("d", "a", 41 * 7 * DAY, "da1"));
        ev
    }

    #[test]
    fn snapshots_accumulate() {
        let ev = two_phase();
        let grid = WindowGrid::from_days(&ev, 7).unwrap();
        let cps = [-1, 3 * 7 * DAY, 40 * 7 * DAY, i64::MAX];
        let snaps = snapshot_series(&ev, &grid, &spec(), &cps).unwrap();
        assert_eq!(snaps[0].edges, 0);
        let counts: Vec<usize> = snaps.iter().map(|r| r.edges).collect();
        assert!(counts.windows(2).all(|w| w[0] <= w[1]), "{counts:?}");
        let (_, whole) = spec().report(&ev, &grid).unwrap();
        assert_eq!(snaps[3], whole);
        assert!(snapshot_series(&ev, &grid, &spec(), &[5, 1]).is_err());
    }

    #[test]
    fn sweep_cells_and_monotonicity() {
        let ev = two_phase();
        let params = SweepParams {
            window_days: vec![1, 7, 30],
            maybe_min: vec![2],
            forsure_min: vec![2, 3, 4],
            coverage: vec![0.0],
        };
        let rows = sweep(&ev, &params, &spec()).unwrap();
        assert_eq!(rows.len(), 9);
        for chunk in rows.chunks(3) {
            assert!(chunk.windows(2).all(|w| w[0].forsure_edges >= w[1].forsure_edges));
            assert!(chunk.windows(2).all(|w| w[0].edges >= w[1].edges));
        }
        let skip = SweepParams {
            maybe_min: vec![3],
            forsure_min: vec![2],
            ..params.clone()
        };
        assert!(sweep(&ev, &skip, &spec()).unwrap().is_empty());
    }

    #[test]
    fn single_cell_matches_direct_run() {
        let ev = two_phase();
        let params = SweepParams {
            window_days: vec![7],
            maybe_min: vec![2],
            forsure_min: vec![3],
            coverage: vec![0.0],
        };
        let row = &sweep(&ev, &params, &spec()).unwrap()[0];
        let (_, r) = spec().report(&ev, &WindowGrid::from_days(&ev, 7).unwrap()).unwrap();
        assert_eq!((row.nodes, row.edges, row.clustering, row.reciprocity, row.modularity), (r.nodes, r.edges, r.clustering, r.reciprocity, r.modularity));
    }
}
