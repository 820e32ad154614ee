//! Latent follow inference from temporally consistent commenting.
//!
//! A comment by `u` replying to content authored by `v` is an interaction
//! `u -> v`. Time is cut into fixed-length windows; the number of distinct
//! windows containing at least one `u -> v` interaction decides the status:
//!
//! * fewer than `maybe_min` windows: `None`
//! * at least `forsure_min` windows: `ForSure`
//! * otherwise: `Maybe`
//!
//! With the default thresholds (2 and 3) this is: 0 or 1 windows none,
//! exactly 2 maybe, 3 or more for sure.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::RawRecord;

pub const DAY_SECS: i64 = 86_400;
pub const DEFAULT_WINDOW_DAYS: i64 = 30;

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct InteractionEvent {
    pub source: String,
    pub target: String,
    pub time: i64,
    pub post_id: String,
    pub comment_id: String,
}

/// Counters reported by [`extract_events`].
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct ExtractionStats {
    pub comments: usize,
    pub events: usize,
    pub self_replies: usize,
    pub orphans: usize,
    pub unmapped: usize,
}

/// Maps raw authors to graph node ids (agents, or the users themselves).
pub trait IdMap {
    fn node_id(&self, author: &str) -> Option<String>;
}

/// User-level inference: every author is its own node.
pub struct UserLevel;

impl IdMap for UserLevel {
    fn node_id(&self, author: &str) -> Option<String> {
        Some(author.to_string())
    }
}

impl<F: Fn(&str) -> Option<String>> IdMap for F {
    fn node_id(&self, author: &str) -> Option<String> {
        self(author)
    }
}

/// One event per comment whose parent resolves; source is the commenter,
/// target the parent's author, both passed through `id_map`. Sorted by
/// `(time, comment_id)`.
pub fn extract_events(records: &[RawRecord], id_map: &dyn IdMap) -> (Vec<InteractionEvent>, ExtractionStats) {
    let authors: HashMap<&str, &str> = records.iter().map(|r| (r.id.as_str(), r.author.as_str())).collect();
    let mut stats = ExtractionStats::default();
    let mut events = Vec::new();
    for c in records.iter().filter(|r| !r.is_post()) {
        stats.comments += 1;
        let parent = c.parent_id.as_deref().unwrap_or_default();
        let Some(parent_author) = authors.get(parent) else {
            stats.orphans += 1;
            continue;
        };
        let (Some(source), Some(target)) = (id_map.node_id(&c.author), id_map.node_id(parent_author)) else {
            stats.unmapped += 1;
            continue;
        };
        if source == target {
            stats.self_replies += 1;
            continue;
        }
        events.push(InteractionEvent {
            source,
            target,
            time: c.created_utc,
            post_id: c.link_id.clone().unwrap_or_default(),
            comment_id: c.id.clone(),
        });
    }
    sort_events(&mut events);
    stats.events = events.len();
    (events, stats)
}

pub fn sort_events(events: &mut [InteractionEvent]) {
    events.sort_by(|a, b| (a.time, &a.comment_id, &a.source, &a.target).cmp(&(b.time, &b.comment_id, &b.source, &b.target)));
}

/// Fixed-length observation windows anchored at the earliest event.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct WindowGrid {
    pub origin: i64,
    pub window_len: i64,
    pub n: u64,
}

impl WindowGrid {
    pub fn new(origin: i64, window_len: i64, n: u64) -> Result<Self> {
        if window_len <= 0 {
            return Err(Error::Config(format!("window length {window_len} must be positive")));
        }
        Ok(WindowGrid { origin, window_len, n })
    }

    /// The grid spanning `events`; empty input gives `n = 0`.
    pub fn covering(events: &[InteractionEvent], window_len: i64) -> Result<Self> {
        let (Some(lo), Some(hi)) = (events.iter().map(|e| e.time).min(), events.iter().map(|e| e.time).max()) else {
            return WindowGrid::new(0, window_len, 0);
        };
        WindowGrid::new(lo, window_len, ((hi - lo) / window_len) as u64 + 1)
    }

    pub fn from_days(events: &[InteractionEvent], days: i64) -> Result<Self> {
        WindowGrid::covering(events, days.saturating_mul(DAY_SECS))
    }

    /// Window index of `t`; `None` outside `[origin, origin + n * len)`.
    pub fn index(&self, t: i64) -> Option<u64> {
        if t < self.origin {
            return None;
        }
        let idx = ((t - self.origin) / self.window_len) as u64;
        (idx < self.n).then_some(idx)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FollowStatus {
    None,
    Maybe,
    ForSure,
}

impl FollowStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            FollowStatus::None => "none",
            FollowStatus::Maybe => "maybe",
            FollowStatus::ForSure => "forsure",
        }
    }
}

impl fmt::Display for FollowStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for FollowStatus {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(FollowStatus::None),
            "maybe" => Ok(FollowStatus::Maybe),
            "forsure" | "for_sure" => Ok(FollowStatus::ForSure),
            other => Err(Error::Usage(format!("unknown follow status {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Thresholds {
    pub maybe_min: u64,
    pub forsure_min: u64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Thresholds {
            maybe_min: 2,
            forsure_min: 3,
        }
    }
}

impl Thresholds {
    pub fn new(maybe_min: u64, forsure_min: u64) -> Result<Self> {
        if maybe_min == 0 || maybe_min > forsure_min {
            return Err(Error::Config(format!(
                "thresholds need 1 <= maybe_min <= forsure_min, got {maybe_min} and {forsure_min}"
            )));
        }
        Ok(Thresholds { maybe_min, forsure_min })
    }

    pub fn status(&self, windows_hit: u64) -> FollowStatus {
        if windows_hit >= self.forsure_min {
            FollowStatus::ForSure
        } else if windows_hit >= self.maybe_min {
            FollowStatus::Maybe
        } else {
            FollowStatus::None
        }
    }
}

/// Classified ordered pair.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FollowEdge {
    pub source: String,
    pub target: String,
    pub windows_hit: u64,
    pub total_comments: u64,
    pub status: FollowStatus,
    pub first_seen: i64,
    pub last_seen: i64,
    /// Time of the event whose window crossed the current status threshold.
    pub status_time: i64,
    /// Time the pair first reached `Maybe`, when it ever held that status.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub maybe_time: Option<i64>,
}

impl FollowEdge {
    pub fn weight(&self) -> u64 {
        self.total_comments
    }

    pub fn key(&self) -> (&str, &str) {
        (&self.source, &self.target)
    }
}

/// Classifies one ordered pair. `events` must all share the same source and
/// target; events outside the grid are ignored.
pub fn classify(events: &[&InteractionEvent], grid: &WindowGrid, thresholds: Thresholds) -> FollowEdge {
    let mut sorted: Vec<&InteractionEvent> = events.iter().copied().filter(|e| grid.index(e.time).is_some()).collect();
    sorted.sort_by(|a, b| (a.time, &a.comment_id).cmp(&(b.time, &b.comment_id)));
    let (source, target) = events
        .first()
        .map(|e| (e.source.clone(), e.target.clone()))
        .unwrap_or_default();
    let mut seen: BTreeSet<u64> = BTreeSet::new();
    let mut maybe_time = None;
    let mut forsure_time = None;
    for e in &sorted {
        let w = grid.index(e.time).expect("filtered to grid");
        if seen.insert(w) {
            let hit = seen.len() as u64;
            match thresholds.status(hit) {
                FollowStatus::Maybe if maybe_time.is_none() => maybe_time = Some(e.time),
                FollowStatus::ForSure if forsure_time.is_none() => forsure_time = Some(e.time),
                _ => {}
            }
        }
    }
    let windows_hit = seen.len() as u64;
    let status = thresholds.status(windows_hit);
    let first_seen = sorted.first().map_or(0, |e| e.time);
    let last_seen = sorted.last().map_or(0, |e| e.time);
    let status_time = match status {
        FollowStatus::ForSure => forsure_time.expect("reached forsure"),
        FollowStatus::Maybe => maybe_time.expect("reached maybe"),
        FollowStatus::None => first_seen,
    };
    FollowEdge {
        source,
        target,
        windows_hit,
        total_comments: sorted.len() as u64,
        status,
        first_seen,
        last_seen,
        status_time,
        maybe_time,
    }
}

/// Classifies every ordered pair present in `events`, sorted by `(source, target)`.
pub fn infer_all(events: &[InteractionEvent], grid: &WindowGrid, thresholds: Thresholds) -> Vec<FollowEdge> {
    let mut pairs: BTreeMap<(&str, &str), Vec<&InteractionEvent>> = BTreeMap::new();
    for e in events {
        pairs.entry((e.source.as_str(), e.target.as_str())).or_default().push(e);
    }
    let groups: Vec<Vec<&InteractionEvent>> = pairs.into_values().collect();
    groups
        .par_iter()
        .map(|g| classify(g, grid, thresholds))
        .filter(|e| e.total_comments > 0)
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TimelineRow {
    pub time: i64,
    pub source: String,
    pub target: String,
    pub status: FollowStatus,
}

/// One row per status an edge attained: a `maybe` row when it passed through
/// `Maybe`, a `forsure` row when it reached `ForSure`. Sorted by time.
pub fn event_timeline(edges: &[FollowEdge]) -> Vec<TimelineRow> {
    let mut rows = Vec::new();
    for e in edges.iter().filter(|e| e.status != FollowStatus::None) {
        if let Some(t) = e.maybe_time {
            rows.push(TimelineRow {
                time: t,
                source: e.source.clone(),
                target: e.target.clone(),
                status: FollowStatus::Maybe,
            });
        }
        if e.status == FollowStatus::ForSure {
            rows.push(TimelineRow {
                time: e.status_time,
                source: e.source.clone(),
                target: e.target.clone(),
                status: FollowStatus::ForSure,
            });
        }
    }
    rows.sort_by(|a, b| (a.time, &a.source, &a.target, a.status).cmp(&(b.time, &b.source, &b.target, b.status)));
    rows
}

pub const EDGES_HEADER: [&str; 8] = [
    "source",
    "target",
    "status",
    "windows_hit",
    "total_comments",
    "first_seen",
    "last_seen",
    "status_time",
];

pub const TIMELINE_HEADER: [&str; 4] = ["time", "source", "target", "status"];

pub(crate) fn edge_fields(e: &FollowEdge) -> [String; 8] {
    [
        e.source.clone(),
        e.target.clone(),
        e.status.to_string(),
        e.windows_hit.to_string(),
        e.total_comments.to_string(),
        e.first_seen.to_string(),
        e.last_seen.to_string(),
        e.status_time.to_string(),
    ]
}

pub(crate) fn csv_writer(path: &Path) -> Result<csv::Writer<File>> {
    csv::Writer::from_path(path).map_err(|e| Error::parse(path, e))
}

pub(crate) fn csv_err(path: &Path) -> impl Fn(csv::Error) -> Error + '_ {
    move |e| Error::parse(path, e)
}

pub fn write_edges_csv(path: &Path, edges: &[FollowEdge]) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(EDGES_HEADER).map_err(csv_err(path))?;
    for e in edges {
        w.write_record(edge_fields(e)).map_err(csv_err(path))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Reads an edges CSV (with or without a trailing `weight` column).
pub fn read_edges_csv(path: &Path) -> Result<Vec<FollowEdge>> {
    let mut r = csv::Reader::from_path(path).map_err(csv_err(path))?;
    let headers = r.headers().map_err(csv_err(path))?.clone();
    if headers.len() < EDGES_HEADER.len() || headers.iter().zip(EDGES_HEADER).any(|(a, b)| a != b) {
        return Err(Error::parse(path, format!("unexpected header {:?}", headers)));
    }
    let mut out = Vec::new();
    for (i, row) in r.records().enumerate() {
        let row = row.map_err(csv_err(path))?;
        let bad = |what: &str| Error::parse(path, format!("row {}: bad {what}", i + 1));
        let num = |j: usize, what: &str| row[j].parse::<i64>().map_err(|_| bad(what));
        let status: FollowStatus = row[2].parse().map_err(|_| bad("status"))?;
        let windows_hit = num(3, "windows_hit")? as u64;
        let edge = FollowEdge {
            source: row[0].to_string(),
            target: row[1].to_string(),
            status,
            windows_hit,
            total_comments: num(4, "total_comments")? as u64,
            first_seen: num(5, "first_seen")?,
            last_seen: num(6, "last_seen")?,
            status_time: num(7, "status_time")?,
            maybe_time: (status == FollowStatus::Maybe).then(|| num(7, "status_time")).transpose()?,
        };
        if row.len() > 8 && row[8].parse::<u64>().ok() != Some(edge.weight()) {
            return Err(bad("weight"));
        }
        out.push(edge);
    }
    Ok(out)
}

pub fn write_timeline_csv(path: &Path, rows: &[TimelineRow]) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(TIMELINE_HEADER).map_err(csv_err(path))?;
    for r in rows {
        w.write_record([r.time.to_string(), r.source.clone(), r.target.clone(), r.status.to_string()])
            .map_err(csv_err(path))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn write_events(path: &Path, events: &[InteractionEvent]) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    for e in events {
        serde_json::to_writer(&mut out, e).map_err(|e| Error::parse(path, e))?;
        out.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    }
    out.flush().map_err(|e| Error::io(path, e))
}

pub fn read_events(path: &Path) -> Result<Vec<InteractionEvent>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut events = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        events.push(serde_json::from_str(&line).map_err(|e| Error::parse(path, format!("line {}: {e}", i + 1)))?);
    }
    sort_events(&mut events);
    Ok(events)
}
