//! Linear interaction chains inside post threads.
//!
//! Records of a thread are linked earlier-to-later when their topic vectors
//! are similar enough; every maximal path through that DAG becomes a chain.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::inference::{csv_err, csv_writer};
use crate::ingest::{RawRecord, RecordKind};
use crate::profiles::SparseVec;

pub const DEFAULT_SIM_THRESHOLD: f64 = 0.1;
pub const DEFAULT_TOP: usize = 35;
pub const CENSUS_HEADER: [&str; 4] = ["threshold", "no_chain", "len_eq_1", "len_gt_1"];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChainNode {
    pub record_id: String,
    #[serde(rename = "agent")]
    pub author_agent: String,
    pub time: i64,
    #[serde(skip)]
    pub topic_vector: SparseVec,
}

impl ChainNode {
    /// The vector is scaled to unit length (zero stays zero).
    pub fn new(record_id: &str, author_agent: &str, time: i64, topic_vector: SparseVec) -> Self {
        ChainNode {
            record_id: record_id.to_string(),
            author_agent: author_agent.to_string(),
            time,
            topic_vector: topic_vector.normalized(),
        }
    }
}

/// A post and its comments, ordered by `(time, record_id)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Thread {
    pub post_id: String,
    pub nodes: Vec<ChainNode>,
}

impl Thread {
    pub fn new(post_id: &str, mut nodes: Vec<ChainNode>) -> Self {
        nodes.sort_by(|a, b| (a.time, &a.record_id).cmp(&(b.time, &b.record_id)));
        Thread {
            post_id: post_id.to_string(),
            nodes,
        }
    }
}

/// Groups records into threads, one per post present in `records`. Comments
/// whose post is absent are skipped. Threads are ordered by post id.
pub fn build_threads(
    records: &[RawRecord],
    vector_of: &(dyn Fn(&RawRecord) -> SparseVec + Sync),
    agent_of: &(dyn Fn(&RawRecord) -> String + Sync),
) -> Vec<Thread> {
    let mut groups: BTreeMap<&str, Vec<&RawRecord>> = records
        .iter()
        .filter(|r| r.kind == RecordKind::Post)
        .map(|r| (r.id.as_str(), vec![r]))
        .collect();
    for r in records.iter().filter(|r| r.kind == RecordKind::Comment) {
        if let Some(group) = r.link_id.as_deref().and_then(|l| groups.get_mut(l)) {
            group.push(r);
        }
    }
    groups
        .into_par_iter()
        .map(|(post, rs)| {
            let nodes = rs
                .iter()
                .map(|r| ChainNode::new(&r.id, &agent_of(r), r.created_utc, vector_of(r)))
                .collect();
            Thread::new(post, nodes)
        })
        .collect()
}

/// Directed similarity graph over one thread's node indices.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SemanticGraph {
    /// Successors of each node, ordered by record id.
    pub children: Vec<Vec<usize>>,
    pub in_degree: Vec<usize>,
}

impl SemanticGraph {
    pub fn edge_count(&self) -> usize {
        self.children.iter().map(Vec::len).sum()
    }

    /// Edges on the longest path.
    pub fn longest_path(&self) -> usize {
        // indices are already a topological order
        let mut best = vec![0usize; self.children.len()];
        for i in (0..self.children.len()).rev() {
            best[i] = self.children[i].iter().map(|&j| best[j] + 1).max().unwrap_or(0);
        }
        best.into_iter().max().unwrap_or(0)
    }
}

/// Links `i -> j` when `i` precedes `j` in thread order and their cosine
/// similarity strictly exceeds `threshold`.
pub fn connect(thread: &Thread, threshold: f64) -> SemanticGraph {
    let n = thread.nodes.len();
    let mut children = vec![Vec::new(); n];
    let mut in_degree = vec![0; n];
    for i in 0..n {
        for j in i + 1..n {
            if thread.nodes[i].topic_vector.dot(&thread.nodes[j].topic_vector) > threshold {
                children[i].push(j);
                in_degree[j] += 1;
            }
        }
        children[i].sort_by(|&a, &b| thread.nodes[a].record_id.cmp(&thread.nodes[b].record_id));
    }
    SemanticGraph { children, in_degree }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Caps {
    pub max_chains: usize,
    /// Maximum chain length in edges.
    pub max_depth: usize,
}

impl Default for Caps {
    fn default() -> Self {
        Caps {
            max_chains: 200,
            max_depth: 64,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Paths {
    /// Node-index sequences, each with at least two nodes.
    pub paths: Vec<Vec<usize>>,
    pub truncated: bool,
}

/// Enumerates maximal source-to-sink paths. Sources are nodes with no
/// predecessor and at least one successor, taken in thread order; children
/// are visited by record id. Paths cut by `max_depth` are emitted at the cap.
pub fn linearize(graph: &SemanticGraph, caps: Caps) -> Paths {
    let mut out = Paths {
        paths: Vec::new(),
        truncated: false,
    };
    let mut stack = Vec::new();
    for s in 0..graph.children.len() {
        if graph.in_degree[s] != 0 || graph.children[s].is_empty() {
            continue;
        }
        stack.push(s);
        if !walk(graph, caps, &mut stack, &mut out) {
            out.truncated = true;
            break;
        }
        stack.pop();
    }
    out
}

/// Returns false once the chain cap is hit.
fn walk(graph: &SemanticGraph, caps: Caps, stack: &mut Vec<usize>, out: &mut Paths) -> bool {
    let last = *stack.last().expect("non-empty path");
    let at_depth = stack.len() > caps.max_depth;
    if graph.children[last].is_empty() || at_depth {
        if out.paths.len() >= caps.max_chains {
            return false;
        }
        out.truncated |= at_depth && !graph.children[last].is_empty();
        out.paths.push(stack.clone());
        return true;
    }
    for &c in &graph.children[last] {
        stack.push(c);
        let more = walk(graph, caps, stack, out);
        stack.pop();
        if !more {
            return false;
        }
    }
    true
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InteractionChain {
    pub post_id: String,
    pub length: usize,
    pub nodes: Vec<ChainNode>,
}

impl InteractionChain {
    fn from_path(thread: &Thread, path: &[usize]) -> Self {
        InteractionChain {
            post_id: thread.post_id.clone(),
            length: path.len() - 1,
            nodes: path.iter().map(|&i| thread.nodes[i].clone()).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChainsManifest {
    pub threshold: f64,
    pub caps: Caps,
    pub threads: usize,
    pub chains: usize,
    pub truncated_posts: Vec<String>,
}

/// Chains of every thread, in thread order, with a manifest of truncations.
pub fn extract_chains(threads: &[Thread], threshold: f64, caps: Caps) -> (Vec<InteractionChain>, ChainsManifest) {
    let per_thread: Vec<(Vec<InteractionChain>, bool)> = threads
        .par_iter()
        .map(|t| {
            let found = linearize(&connect(t, threshold), caps);
            let chains = found.paths.iter().map(|p| InteractionChain::from_path(t, p)).collect();
            (chains, found.truncated)
        })
        .collect();
    let mut chains = Vec::new();
    let mut truncated_posts = Vec::new();
    for (t, (cs, truncated)) in threads.iter().zip(per_thread) {
        if truncated {
            truncated_posts.push(t.post_id.clone());
        }
        chains.extend(cs);
    }
    let manifest = ChainsManifest {
        threshold,
        caps,
        threads: threads.len(),
        chains: chains.len(),
        truncated_posts,
    };
    (chains, manifest)
}

/// Longest first; ties by earliest start, then first record id.
pub fn rank_and_select(mut chains: Vec<InteractionChain>, k: usize) -> Vec<InteractionChain> {
    let key = |c: &InteractionChain| (c.nodes.first().map(|n| n.time), c.nodes.first().map(|n| n.record_id.clone()));
    chains.sort_by(|a, b| {
        b.length
            .cmp(&a.length)
            .then_with(|| key(a).cmp(&key(b)))
            .then_with(|| {
                let ids = |c: &InteractionChain| c.nodes.iter().map(|n| n.record_id.clone()).collect::<Vec<_>>();
                ids(a).cmp(&ids(b))
            })
    });
    chains.truncate(k);
    chains
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CensusRow {
    pub threshold: f64,
    pub no_chain: usize,
    pub len_eq_1: usize,
    pub len_gt_1: usize,
}

/// Posts per threshold with no chain, only single-edge chains, or a longer chain.
pub fn chain_census(threads: &[Thread], thresholds: &[f64]) -> Result<Vec<CensusRow>> {
    if let Some(t) = thresholds.iter().find(|t| !(**t > 0.0 && **t < 1.0)) {
        return Err(Error::Usage(format!("threshold {t} outside (0, 1)")));
    }
    Ok(thresholds
        .iter()
        .map(|&threshold| {
            let longest: Vec<usize> = threads.par_iter().map(|t| connect(t, threshold).longest_path()).collect();
            CensusRow {
                threshold,
                no_chain: longest.iter().filter(|&&l| l == 0).count(),
                len_eq_1: longest.iter().filter(|&&l| l == 1).count(),
                len_gt_1: longest.iter().filter(|&&l| l > 1).count(),
            }
        })
        .collect())
}

pub fn write_chains_jsonl(path: &Path, chains: &[InteractionChain]) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    for c in chains {
        let line = serde_json::to_string(c).map_err(|e| Error::parse(path, e))?;
        writeln!(w, "{line}").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn write_census_csv(path: &Path, rows: &[CensusRow]) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(CENSUS_HEADER).map_err(csv_err(path))?;
    for r in rows {
        w.write_record([
            r.threshold.to_string(),
            r.no_chain.to_string(),
            r.len_eq_1.to_string(),
            r.len_gt_1.to_string(),
        ])
        .map_err(csv_err(path))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}
