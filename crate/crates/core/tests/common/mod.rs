//! Brute-force reference implementations shared by the integration tests.
//! Each one works from first definitions (matrices, subsets, materialized
//! windows) rather than reusing library code paths.

#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

use latent_graph_core::graph::{EdgeClass, InteractionGraph};
use latent_graph_core::inference::{FollowEdge, FollowStatus, InteractionEvent, WindowGrid};
use rand::Rng;

pub fn edge(s: &str, t: &str, weight: u64, status: FollowStatus, first_seen: i64) -> FollowEdge {
    FollowEdge {
        source: s.into(),
        target: t.into(),
        windows_hit: 3,
        total_comments: weight,
        status,
        first_seen,
        last_seen: first_seen,
        status_time: first_seen,
        maybe_time: None,
    }
}

pub fn node_name(i: usize) -> String {
    format!("n{i:02}")
}

/// Random directed graph on `n` nodes with edge probability `p` and weights in `1..=max_w`.
pub fn random_graph(rng: &mut impl Rng, n: usize, p: f64, max_w: u64) -> InteractionGraph {
    let nodes: BTreeSet<String> = (0..n).map(node_name).collect();
    let mut edges = Vec::new();
    for i in 0..n {
        for j in 0..n {
            if i != j && rng.gen_bool(p) {
                edges.push(edge(&node_name(i), &node_name(j), rng.gen_range(1..=max_w), FollowStatus::ForSure, 0));
            }
        }
    }
    InteractionGraph::from_parts(nodes, edges, 0, EdgeClass::All).unwrap()
}

/// Node ids in sorted order and the directed weight matrix.
pub fn matrix(g: &InteractionGraph) -> (Vec<String>, Vec<Vec<u64>>) {
    let ids: Vec<String> = g.nodes().iter().cloned().collect();
    let pos: BTreeMap<&str, usize> = ids.iter().enumerate().map(|(i, s)| (s.as_str(), i)).collect();
    let mut w = vec![vec![0u64; ids.len()]; ids.len()];
    for e in g.edges() {
        w[pos[e.source.as_str()]][pos[e.target.as_str()]] = e.weight();
    }
    (ids, w)
}

fn undirected(w: &[Vec<u64>]) -> Vec<Vec<bool>> {
    let n = w.len();
    (0..n)
        .map(|i| (0..n).map(|j| i != j && (w[i][j] > 0 || w[j][i] > 0)).collect())
        .collect()
}

pub fn density(g: &InteractionGraph) -> f64 {
    let (_, w) = matrix(g);
    let n = w.len() as f64;
    let e = w.iter().flatten().filter(|&&x| x > 0).count() as f64;
    e / (n * (n - 1.0))
}

pub fn reciprocity(g: &InteractionGraph) -> f64 {
    let (_, w) = matrix(g);
    let n = w.len();
    let (mut e, mut mutual) = (0, 0);
    for i in 0..n {
        for j in 0..n {
            if w[i][j] > 0 {
                e += 1;
                if w[j][i] > 0 {
                    mutual += 1;
                }
            }
        }
    }
    mutual as f64 / e as f64
}

pub fn clustering(g: &InteractionGraph) -> f64 {
    let (_, w) = matrix(g);
    let a = undirected(&w);
    let n = a.len();
    let mut total = 0.0;
    for i in 0..n {
        let deg = (0..n).filter(|&j| a[i][j]).count();
        if deg < 2 {
            continue;
        }
        let mut links = 0;
        for j in 0..n {
            for k in 0..n {
                if j != k && a[i][j] && a[i][k] && a[j][k] {
                    links += 1;
                }
            }
        }
        // ordered pairs counted twice
        total += links as f64 / (deg * (deg - 1)) as f64;
    }
    total / n as f64
}

/// Floyd-Warshall over the undirected projection.
pub fn avg_path_length(g: &InteractionGraph) -> Option<f64> {
    let (_, w) = matrix(g);
    let a = undirected(&w);
    let n = a.len();
    const INF: u64 = u64::MAX / 4;
    let mut d = vec![vec![INF; n]; n];
    for i in 0..n {
        d[i][i] = 0;
        for j in 0..n {
            if a[i][j] {
                d[i][j] = 1;
            }
        }
    }
    for k in 0..n {
        for i in 0..n {
            for j in 0..n {
                if d[i][k] + d[k][j] < d[i][j] {
                    d[i][j] = d[i][k] + d[k][j];
                }
            }
        }
    }
    let (mut sum, mut pairs) = (0u64, 0u64);
    for i in 0..n {
        for j in 0..n {
            if i != j && d[i][j] < INF {
                sum += d[i][j];
                pairs += 1;
            }
        }
    }
    (pairs > 0).then(|| sum as f64 / pairs as f64)
}

pub fn triangles(g: &InteractionGraph) -> usize {
    let (_, w) = matrix(g);
    let a = undirected(&w);
    let n = a.len();
    let mut count = 0;
    for i in 0..n {
        for j in i + 1..n {
            for k in j + 1..n {
                if a[i][j] && a[j][k] && a[i][k] {
                    count += 1;
                }
            }
        }
    }
    count
}

/// Two-pass floating Pearson correlation over both orientations of every undirected edge.
pub fn assortativity(g: &InteractionGraph) -> Option<f64> {
    let (_, w) = matrix(g);
    let a = undirected(&w);
    let n = a.len();
    let deg: Vec<f64> = (0..n).map(|i| (0..n).filter(|&j| a[i][j]).count() as f64).collect();
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for i in 0..n {
        for j in 0..n {
            if a[i][j] {
                xs.push(deg[i]);
                ys.push(deg[j]);
            }
        }
    }
    if xs.len() < 4 {
        return None;
    }
    let m = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / m;
    let my = ys.iter().sum::<f64>() / m;
    let cov: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let vx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let vy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    if vx == 0.0 || vy == 0.0 {
        return None;
    }
    Some(cov / (vx * vy).sqrt())
}

/// Newman modularity from the symmetric weight matrix: `1/2m sum_ij (A_ij - k_i k_j / 2m) [c_i = c_j]`.
pub fn modularity_of_labels(w: &[Vec<u64>], labels: &[usize]) -> f64 {
    let n = w.len();
    let a: Vec<Vec<f64>> = (0..n)
        .map(|i| (0..n).map(|j| (w[i][j] + w[j][i]) as f64).collect())
        .collect();
    let k: Vec<f64> = a.iter().map(|row| row.iter().sum()).collect();
    let two_m: f64 = k.iter().sum();
    if two_m == 0.0 {
        return 0.0;
    }
    let mut q = 0.0;
    for i in 0..n {
        for j in 0..n {
            if labels[i] == labels[j] {
                q += a[i][j] - k[i] * k[j] / two_m;
            }
        }
    }
    q / two_m
}

/// Labels of a partition given as id lists.
pub fn labels_of(ids: &[String], partition: &[Vec<String>]) -> Vec<usize> {
    let mut labels = vec![usize::MAX; ids.len()];
    for (c, block) in partition.iter().enumerate() {
        for id in block {
            labels[ids.iter().position(|x| x == id).unwrap()] = c;
        }
    }
    labels
}

/// Best modularity over every partition (restricted growth strings), small n only.
pub fn best_modularity(g: &InteractionGraph) -> f64 {
    let (_, w) = matrix(g);
    let n = w.len();
    let mut labels = vec![0usize; n];
    let mut best = f64::NEG_INFINITY;
    fn rec(i: usize, max: usize, labels: &mut Vec<usize>, w: &[Vec<u64>], best: &mut f64) {
        if i == labels.len() {
            *best = best.max(modularity_of_labels(w, labels));
            return;
        }
        for c in 0..=max + 1 {
            labels[i] = c;
            rec(i + 1, max.max(c), labels, w, best);
        }
    }
    if n == 0 {
        return 0.0;
    }
    rec(1, 0, &mut labels, &w, &mut best);
    best
}

/// Reference classification built by materializing every window.
#[derive(Debug, PartialEq, Eq)]
pub struct BruteEdge {
    pub windows_hit: u64,
    pub total: u64,
    pub status: FollowStatus,
    pub first_seen: i64,
    pub last_seen: i64,
    pub status_time: i64,
    pub maybe_time: Option<i64>,
}

fn distinct_windows(events: &[&InteractionEvent], grid: &WindowGrid) -> u64 {
    let mut hit = 0;
    for t in 0..grid.n as i64 {
        let lo = grid.origin + t * grid.window_len;
        let hi = lo + grid.window_len;
        if events.iter().any(|e| e.time >= lo && e.time < hi) {
            hit += 1;
        }
    }
    hit
}

pub fn brute_classify(events: &[InteractionEvent], grid: &WindowGrid, maybe_min: u64, forsure_min: u64) -> BruteEdge {
    let end = grid.origin + grid.n as i64 * grid.window_len;
    let mut inside: Vec<&InteractionEvent> = events.iter().filter(|e| e.time >= grid.origin && e.time < end).collect();
    inside.sort_by(|a, b| (a.time, &a.comment_id).cmp(&(b.time, &b.comment_id)));
    let hit = distinct_windows(&inside, grid);
    let status = if hit >= forsure_min {
        FollowStatus::ForSure
    } else if hit >= maybe_min {
        FollowStatus::Maybe
    } else {
        FollowStatus::None
    };
    // time of the first prefix whose window count reaches `k`
    let reach = |k: u64| (1..=inside.len()).find(|&p| distinct_windows(&inside[..p], grid) >= k).map(|p| inside[p - 1].time);
    let first_seen = inside.first().map_or(0, |e| e.time);
    let status_time = match status {
        FollowStatus::ForSure => reach(forsure_min).unwrap(),
        FollowStatus::Maybe => reach(maybe_min).unwrap(),
        FollowStatus::None => first_seen,
    };
    let maybe_time = if maybe_min < forsure_min && hit >= maybe_min { reach(maybe_min) } else { None };
    BruteEdge {
        windows_hit: hit,
        total: inside.len() as u64,
        status,
        first_seen,
        last_seen: inside.last().map_or(0, |e| e.time),
        status_time,
        maybe_time,
    }
}

/// Maximal paths of a DAG over `0..n` (edges only from lower to higher
/// index), found by checking every node subset in index order.
pub fn brute_maximal_paths(adj: &[Vec<bool>]) -> BTreeSet<Vec<usize>> {
    let n = adj.len();
    let has_in = |j: usize| (0..n).any(|i| adj[i][j]);
    let has_out = |i: usize| (0..n).any(|j| adj[i][j]);
    let mut out = BTreeSet::new();
    for mask in 0u32..(1 << n) {
        let nodes: Vec<usize> = (0..n).filter(|i| mask & (1 << i) != 0).collect();
        if nodes.len() < 2 {
            continue;
        }
        if nodes.windows(2).all(|p| adj[p[0]][p[1]]) && !has_in(nodes[0]) && !has_out(*nodes.last().unwrap()) {
            out.insert(nodes);
        }
    }
    out
}

/// Labels of a best partition (first found in restricted-growth order).
pub fn best_labels(g: &InteractionGraph) -> Vec<usize> {
    let (_, w) = matrix(g);
    let n = w.len();
    let mut labels = vec![0usize; n];
    let mut best = (f64::NEG_INFINITY, labels.clone());
    fn rec(i: usize, max: usize, labels: &mut Vec<usize>, w: &[Vec<u64>], best: &mut (f64, Vec<usize>)) {
        if i == labels.len() {
            let q = modularity_of_labels(w, labels);
            if q > best.0 {
                *best = (q, labels.clone());
            }
            return;
        }
        for c in 0..=max + 1 {
            labels[i] = c;
            rec(i + 1, max.max(c), labels, w, best);
        }
    }
    rec(1, 0, &mut labels, &w, &mut best);
    best.1
}
