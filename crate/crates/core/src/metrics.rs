//! Structural metrics over an [`InteractionGraph`].
//!
//! Conventions: density and reciprocity use the directed graph; clustering,
//! path length, triangles, assortativity and communities use the undirected
//! projection, where the weight of `{u, v}` is `w(u->v) + w(v->u)`.

use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};
use std::fs;
use std::path::Path;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::{json, Map, Value};

use crate::error::{Error, Result};
use crate::graph::InteractionGraph;

/// Index-based adjacency for one graph.
struct View {
    ids: Vec<String>,
    out: Vec<BTreeSet<usize>>,
    inn: Vec<BTreeSet<usize>>,
    /// Undirected neighbours with summed weights.
    und: Vec<BTreeMap<usize, f64>>,
}

impl View {
    fn new(g: &InteractionGraph) -> Self {
        let ids: Vec<String> = g.nodes().iter().cloned().collect();
        let index: HashMap<&str, usize> = ids.iter().enumerate().map(|(i, s)| (s.as_str(), i)).collect();
        let n = ids.len();
        let mut out = vec![BTreeSet::new(); n];
        let mut inn = vec![BTreeSet::new(); n];
        let mut und = vec![BTreeMap::new(); n];
        for e in g.edges() {
            let (s, t) = (index[e.source.as_str()], index[e.target.as_str()]);
            out[s].insert(t);
            inn[t].insert(s);
            let w = e.weight() as f64;
            *und[s].entry(t).or_insert(0.0) += w;
            *und[t].entry(s).or_insert(0.0) += w;
        }
        View { ids, out, inn, und }
    }

    fn n(&self) -> usize {
        self.ids.len()
    }

    fn degree(&self, i: usize) -> usize {
        self.und[i].len()
    }

    fn undirected_edges(&self) -> usize {
        self.und.iter().map(BTreeMap::len).sum::<usize>() / 2
    }
}

/// Directed density from raw counts: `e / (n (n - 1))`.
pub fn density_from_counts(nodes: usize, edges: usize) -> Result<f64> {
    if nodes < 2 {
        return Err(Error::undefined("density", format!("{nodes} nodes (need at least 2)")));
    }
    Ok(edges as f64 / (nodes as f64 * (nodes as f64 - 1.0)))
}

pub fn density(g: &InteractionGraph) -> Result<f64> {
    density_from_counts(g.node_count(), g.edge_count())
}

/// Fraction of directed edges whose reverse edge also exists.
pub fn reciprocity(g: &InteractionGraph) -> Result<f64> {
    if g.edge_count() == 0 {
        return Err(Error::undefined("reciprocity", "graph has no edges"));
    }
    let keys: BTreeSet<(&str, &str)> = g.edges().iter().map(|e| e.key()).collect();
    let mutual = keys.iter().filter(|(s, t)| keys.contains(&(*t, *s))).count();
    Ok(mutual as f64 / keys.len() as f64)
}

/// Mean local clustering coefficient of the undirected projection; nodes of
/// degree below 2 contribute 0.
pub fn clustering(g: &InteractionGraph) -> Result<f64> {
    let v = View::new(g);
    if v.n() == 0 {
        return Err(Error::undefined("clustering", "graph has no nodes"));
    }
    let total: f64 = (0..v.n()).map(|i| local_clustering(&v, i)).sum();
    Ok(total / v.n() as f64)
}

fn local_clustering(v: &View, i: usize) -> f64 {
    let nb: Vec<usize> = v.und[i].keys().copied().collect();
    let d = nb.len();
    if d < 2 {
        return 0.0;
    }
    let mut links = 0usize;
    for (a, &x) in nb.iter().enumerate() {
        for &y in &nb[a + 1..] {
            if v.und[x].contains_key(&y) {
                links += 1;
            }
        }
    }
    2.0 * links as f64 / (d * (d - 1)) as f64
}

/// Triangles in the undirected projection.
pub fn triangle_count(g: &InteractionGraph) -> usize {
    let v = View::new(g);
    let mut count = 0;
    for u in 0..v.n() {
        for &w in v.und[u].keys().filter(|&&w| w > u) {
            count += v.und[w].keys().filter(|&&x| x > w && v.und[u].contains_key(&x)).count();
        }
    }
    count
}

/// Mean shortest-path length over ordered reachable pairs of the undirected
/// projection; unreachable pairs are ignored.
pub fn avg_path_length(g: &InteractionGraph) -> Result<f64> {
    let v = View::new(g);
    let (mut total, mut pairs) = (0u64, 0u64);
    let mut dist = vec![usize::MAX; v.n()];
    let mut queue = VecDeque::new();
    for s in 0..v.n() {
        dist.iter_mut().for_each(|d| *d = usize::MAX);
        dist[s] = 0;
        queue.push_back(s);
        while let Some(x) = queue.pop_front() {
            for &y in v.und[x].keys() {
                if dist[y] == usize::MAX {
                    dist[y] = dist[x] + 1;
                    total += dist[y] as u64;
                    pairs += 1;
                    queue.push_back(y);
                }
            }
        }
    }
    if pairs == 0 {
        return Err(Error::undefined("avg_path_length", "no connected pairs"));
    }
    Ok(total as f64 / pairs as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    In,
    Out,
}

impl FromStr for Direction {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "in" => Ok(Direction::In),
            "out" => Ok(Direction::Out),
            other => Err(Error::Usage(format!("unknown direction {other:?} (in|out)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RankedNode {
    pub id: String,
    pub count: usize,
}

/// Top `k` nodes by number of distinct in- or out-neighbours; ties by id.
pub fn degree_ranking(g: &InteractionGraph, direction: Direction, k: usize) -> Result<Vec<RankedNode>> {
    if k == 0 {
        return Err(Error::Usage("ranking size must be positive".into()));
    }
    let v = View::new(g);
    let side = match direction {
        Direction::In => &v.inn,
        Direction::Out => &v.out,
    };
    let mut ranked: Vec<RankedNode> = v
        .ids
        .iter()
        .zip(side)
        .map(|(id, set)| RankedNode {
            id: id.clone(),
            count: set.len(),
        })
        .collect();
    ranked.sort_by(|a, b| b.count.cmp(&a.count).then_with(|| a.id.cmp(&b.id)));
    ranked.truncate(k);
    Ok(ranked)
}

/// Degree assortativity: Pearson correlation of endpoint degrees over the
/// edges of the undirected projection, each edge counted in both orientations.
pub fn assortativity(g: &InteractionGraph) -> Result<f64> {
    let v = View::new(g);
    if v.undirected_edges() < 2 {
        return Err(Error::undefined("assortativity", "fewer than 2 edges"));
    }
    // exact integer moments; both orientations make x and y share their marginals
    let (mut m, mut sx, mut sxx, mut sxy) = (0i128, 0i128, 0i128, 0i128);
    for u in 0..v.n() {
        let du = v.degree(u) as i128;
        for &w in v.und[u].keys() {
            let dw = v.degree(w) as i128;
            m += 1;
            sx += du;
            sxx += du * du;
            sxy += du * dw;
        }
    }
    let var = m * sxx - sx * sx;
    if var == 0 {
        return Err(Error::undefined("assortativity", "degree variance is zero"));
    }
    Ok((m * sxy - sx * sx) as f64 / var as f64)
}

/// A node partition with its modularity.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Communities {
    /// Each community sorted by id; communities ordered by their first id.
    pub partition: Vec<Vec<String>>,
    pub modularity: f64,
}

impl Communities {
    pub fn largest(&self) -> usize {
        self.partition.iter().map(Vec::len).max().unwrap_or(0)
    }
}

fn membership(v: &View, partition: &[Vec<String>]) -> Result<Vec<usize>> {
    let index: HashMap<&str, usize> = v.ids.iter().enumerate().map(|(i, s)| (s.as_str(), i)).collect();
    let mut member = vec![usize::MAX; v.n()];
    for (c, block) in partition.iter().enumerate() {
        for id in block {
            let Some(&i) = index.get(id.as_str()) else {
                return Err(Error::Usage(format!("partition names unknown node {id:?}")));
            };
            if member[i] != usize::MAX {
                return Err(Error::Usage(format!("node {id:?} appears in two communities")));
            }
            member[i] = c;
        }
    }
    if let Some(i) = member.iter().position(|&c| c == usize::MAX) {
        return Err(Error::Usage(format!("partition misses node {:?}", v.ids[i])));
    }
    Ok(member)
}

fn modularity_of(v: &View, member: &[usize], blocks: usize) -> f64 {
    let two_m: f64 = v.und.iter().flat_map(|nb| nb.values()).sum();
    if two_m == 0.0 {
        return 0.0;
    }
    let mut internal = vec![0.0; blocks];
    let mut strength = vec![0.0; blocks];
    for u in 0..v.n() {
        for (&w, &x) in &v.und[u] {
            strength[member[u]] += x;
            if member[u] == member[w] {
                internal[member[u]] += x;
            }
        }
    }
    (0..blocks)
        .map(|c| internal[c] / two_m - (strength[c] / two_m).powi(2))
        .sum()
}

/// Newman modularity of `partition` on the weighted undirected projection.
/// An edgeless graph has modularity 0.
pub fn modularity(g: &InteractionGraph, partition: &[Vec<String>]) -> Result<f64> {
    let v = View::new(g);
    let member = membership(&v, partition)?;
    Ok(modularity_of(&v, &member, partition.len()))
}

/// Greedy agglomerative modularity maximization (Clauset-Newman-Moore).
///
/// Starting from singletons, repeatedly merges the connected pair of
/// communities with the largest modularity gain while that gain is positive.
/// Equal gains are resolved toward the pair whose smallest member ids are
/// lexicographically smallest. The merged partition is then polished with
/// single-node moves, and merging and moving alternate until neither
/// improves the partition. Extra passes shuffle the node order and start from
/// singletons or random splits drawn from `seed`; the partition with the
/// highest modularity wins.
pub fn communities(g: &InteractionGraph, seed: u64) -> Result<Communities> {
    let v = View::new(g);
    if v.n() == 0 {
        return Err(Error::undefined("modularity", "graph has no nodes"));
    }
    let two_m: f64 = v.und.iter().flat_map(|nb| nb.values()).sum();
    let mut member: Vec<usize> = (0..v.n()).collect();
    if two_m > 0.0 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut order: Vec<usize> = (0..v.n()).collect();
        let mut best_q = f64::NEG_INFINITY;
        for restart in 0..=RESTARTS {
            let mut m: Vec<usize> = (0..v.n()).collect();
            if restart > 0 {
                order.shuffle(&mut rng);
                // odd restarts start from singletons, even ones from a random split
                if restart % 2 == 0 {
                    let groups = (2 + restart / 2 % 3).min(v.n());
                    m.iter_mut().for_each(|c| *c = rng.gen_range(0..groups));
                }
            }
            for round in 0..POLISH_ROUNDS {
                // restarts begin with moves so their visiting order shapes the result
                let merged = (restart == 0 || round > 0) && merge(&v, &mut m, two_m);
                let moved = refine(&v, &mut m, two_m, &order);
                let swapped = v.n() <= KL_MAX_NODES && kl_pass(&v, &mut m, two_m);
                if !merged && !moved && !swapped && round > 0 {
                    break;
                }
            }
            let q = modularity_of(&v, &m, v.n());
            if q > best_q + 1e-12 {
                best_q = q;
                member = m;
            }
        }
    }
    let mut blocks: BTreeMap<usize, Vec<String>> = BTreeMap::new();
    for (i, &c) in member.iter().enumerate() {
        blocks.entry(c).or_default().push(v.ids[i].clone());
    }
    let mut partition: Vec<Vec<String>> = blocks.into_values().collect();
    partition.sort();
    let modularity = modularity(g, &partition)?;
    Ok(Communities { partition, modularity })
}

/// Extra passes with shuffled node orders and varied starting partitions.
const RESTARTS: usize = 8;
const POLISH_ROUNDS: usize = 32;

/// Greedy merging starting from the communities in `member`. Afterwards each
/// label is the smallest node index of its community. Returns whether any
/// merge happened.
fn merge(v: &View, member: &mut [usize], two_m: f64) -> bool {
    // community key = smallest member index
    let mut members: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    let mut groups: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (i, &c) in member.iter().enumerate() {
        groups.entry(c).or_default().push(i);
    }
    let mut key = vec![0usize; v.n()];
    for m in groups.into_values() {
        m.iter().for_each(|&i| key[i] = m[0]);
        members.insert(m[0], m);
    }
    let mut a: BTreeMap<usize, f64> = members.keys().map(|&c| (c, 0.0)).collect();
    // e[i][j]: half the fraction of edge weight between communities i and j
    let mut e: BTreeMap<usize, BTreeMap<usize, f64>> = members.keys().map(|&c| (c, BTreeMap::new())).collect();
    for u in 0..v.n() {
        for (&w, &x) in &v.und[u] {
            *a.get_mut(&key[u]).unwrap() += x / two_m;
            if key[u] != key[w] {
                *e.get_mut(&key[u]).unwrap().entry(key[w]).or_insert(0.0) += x / two_m;
            }
        }
    }
    let mut merged = false;
    loop {
        let mut best: Option<(f64, usize, usize)> = None;
        for (&i, row) in &e {
            for (&j, &eij) in row.range(i + 1..) {
                let gain = 2.0 * (eij - a[&i] * a[&j]);
                let better = match best {
                    None => true,
                    Some((bg, _, _)) => gain > bg + 1e-12 * bg.abs().max(1e-300),
                };
                if better {
                    best = Some((gain, i, j));
                }
            }
        }
        let Some((gain, keep, gone)) = best else { break };
        if gain <= 1e-15 {
            break;
        }
        // merge `gone` into `keep` (keep < gone)
        let row = e.remove(&gone).expect("community row");
        for (k, w) in row {
            if k == keep {
                continue;
            }
            *e.get_mut(&keep).unwrap().entry(k).or_insert(0.0) += w;
            let other = e.get_mut(&k).unwrap();
            other.remove(&gone);
            *other.entry(keep).or_insert(0.0) += w;
        }
        e.get_mut(&keep).unwrap().remove(&gone);
        let ag = a.remove(&gone).unwrap();
        *a.get_mut(&keep).unwrap() += ag;
        let moved = members.remove(&gone).unwrap();
        members.get_mut(&keep).unwrap().extend(moved);
        merged = true;
    }
    for (&c, m) in &members {
        m.iter().for_each(|&i| member[i] = c);
    }
    merged
}

/// Single-node moves: each node, visited in `order`, joins the neighbouring
/// community with the largest modularity gain, or a community of its own
/// when every option loses. Repeats until a full sweep moves nothing. Ties
/// keep the current community, then prefer the lowest label. Returns whether
/// any node moved.
fn refine(v: &View, member: &mut [usize], two_m: f64, order: &[usize]) -> bool {
    let k: Vec<f64> = v.und.iter().map(|nb| nb.values().sum()).collect();
    let mut tot = vec![0.0; v.n()];
    let mut size = vec![0usize; v.n()];
    for (i, &c) in member.iter().enumerate() {
        tot[c] += k[i];
        size[c] += 1;
    }
    let mut any = false;
    for _ in 0..REFINE_SWEEPS {
        let mut moved = false;
        for &u in order {
            let own = member[u];
            tot[own] -= k[u];
            size[own] -= 1;
            let mut links: BTreeMap<usize, f64> = BTreeMap::new();
            for (&w, &x) in &v.und[u] {
                *links.entry(member[w]).or_insert(0.0) += x;
            }
            let gain = |c: usize, l: f64| l - tot[c] * k[u] / two_m;
            let mut best = (gain(own, links.get(&own).copied().unwrap_or(0.0)), own);
            for (&c, &l) in &links {
                let g = gain(c, l);
                if g > best.0 + 1e-12 * best.0.abs().max(1e-12) {
                    best = (g, c);
                }
            }
            // an empty community gains exactly zero
            if size[own] > 0 && best.0 < -1e-12 * k[u] / two_m {
                let free = (0..v.n()).find(|&c| size[c] == 0).expect("fewer communities than nodes");
                best = (0.0, free);
            }
            tot[best.1] += k[u];
            size[best.1] += 1;
            if best.1 != own {
                member[u] = best.1;
                moved = true;
            }
        }
        any |= moved;
        if !moved {
            break;
        }
    }
    any
}

/// Graphs above this size skip the quadratic move-sequence pass.
const KL_MAX_NODES: usize = 512;

/// One Kernighan-Lin style pass: repeatedly applies the best single-node move
/// even when it lowers modularity, moving each node at most once, then keeps
/// the best prefix of that move sequence. Returns whether modularity rose.
fn kl_pass(v: &View, member: &mut [usize], two_m: f64) -> bool {
    let n = v.n();
    let k: Vec<f64> = v.und.iter().map(|nb| nb.values().sum()).collect();
    let mut m = member.to_vec();
    let mut tot = vec![0.0; n];
    let mut size = vec![0usize; n];
    for (i, &c) in m.iter().enumerate() {
        tot[c] += k[i];
        size[c] += 1;
    }
    let mut locked = vec![false; n];
    let (mut cum, mut best_cum) = (0.0, 0.0);
    let mut best = None;
    for _ in 0..n {
        // (delta, node, target); delta is in units of 2m * dQ / 2
        let mut choice: Option<(f64, usize, usize)> = None;
        for u in (0..n).filter(|&u| !locked[u]) {
            let own = m[u];
            let mut links: BTreeMap<usize, f64> = BTreeMap::new();
            for (&w, &x) in &v.und[u] {
                *links.entry(m[w]).or_insert(0.0) += x;
            }
            let leave = links.get(&own).copied().unwrap_or(0.0) - (tot[own] - k[u]) * k[u] / two_m;
            let mut consider = |c: usize, l: f64| {
                let delta = l - tot[c] * k[u] / two_m - leave;
                if choice.is_none_or(|(d, _, _)| delta > d + 1e-12 * d.abs().max(1e-12)) {
                    choice = Some((delta, u, c));
                }
            };
            for (&c, &l) in links.iter().filter(|(&c, _)| c != own) {
                consider(c, l);
            }
            if size[own] > 1 {
                let free = (0..n).find(|&c| size[c] == 0).expect("fewer communities than nodes");
                consider(free, 0.0);
            }
        }
        let Some((delta, u, c)) = choice else { break };
        let own = m[u];
        tot[own] -= k[u];
        size[own] -= 1;
        tot[c] += k[u];
        size[c] += 1;
        m[u] = c;
        locked[u] = true;
        cum += delta;
        if cum > best_cum + 1e-12 * k.iter().sum::<f64>() / two_m {
            best_cum = cum;
            best = Some(m.clone());
        }
    }
    match best {
        Some(b) => {
            member.copy_from_slice(&b);
            true
        }
        None => false,
    }
}

const REFINE_SWEEPS: usize = 100;

/// Share of edge weight inside communities minus the share expected from
/// community sizes alone: `sum_c w_c / W - sum_c (n_c / n)^2`.
pub fn filter_bubble(g: &InteractionGraph, partition: &[Vec<String>]) -> Result<f64> {
    let v = View::new(g);
    let member = membership(&v, partition)?;
    let total = g.total_weight();
    if total == 0 {
        return Err(Error::undefined("filter_bubble", "total edge weight is zero"));
    }
    let index: HashMap<&str, usize> = v.ids.iter().enumerate().map(|(i, s)| (s.as_str(), i)).collect();
    let internal: u64 = g
        .edges()
        .iter()
        .filter(|e| member[index[e.source.as_str()]] == member[index[e.target.as_str()]])
        .map(|e| e.weight())
        .sum();
    let n = v.n() as f64;
    let expected: f64 = partition.iter().map(|c| (c.len() as f64 / n).powi(2)).sum();
    Ok(internal as f64 / total as f64 - expected)
}

pub const FB_DEFINITION: &str = "internal-minus-expected";

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricsConfig {
    pub seed: u64,
    pub top_k: usize,
}

impl Default for MetricsConfig {
    fn default() -> Self {
        MetricsConfig { seed: 0, top_k: 10 }
    }
}

/// All metrics for one graph. Undefined values are `None` with a reason.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsReport {
    pub nodes: usize,
    pub edges: usize,
    pub density: Option<f64>,
    pub clustering: Option<f64>,
    pub reciprocity: Option<f64>,
    pub avg_path_length: Option<f64>,
    pub triangles: usize,
    pub in_degree_top: Vec<RankedNode>,
    pub out_degree_top: Vec<RankedNode>,
    pub assortativity: Option<f64>,
    pub modularity: Option<f64>,
    pub communities: Vec<Vec<String>>,
    pub largest_community: usize,
    pub filter_bubble: Option<f64>,
    pub reasons: BTreeMap<String, String>,
    /// Every knob that shaped the graph and the report.
    pub config: BTreeMap<String, Value>,
}

fn keep<T>(slot: &str, r: Result<T>, reasons: &mut BTreeMap<String, String>) -> Option<T> {
    match r {
        Ok(v) => Some(v),
        Err(Error::UndefinedMetric { reason, .. }) => {
            reasons.insert(slot.to_string(), reason);
            None
        }
        Err(other) => {
            reasons.insert(slot.to_string(), other.to_string());
            None
        }
    }
}

pub fn full_report(g: &InteractionGraph, config: &MetricsConfig) -> MetricsReport {
    let mut reasons = BTreeMap::new();
    let comms = keep("modularity", communities(g, config.seed), &mut reasons);
    let filter = comms.as_ref().map(|c| filter_bubble(g, &c.partition));
    let filter_bubble = match filter {
        Some(r) => keep("filter_bubble", r, &mut reasons),
        None => {
            reasons.insert("filter_bubble".into(), "no community partition".into());
            None
        }
    };
    let mut knobs = BTreeMap::new();
    knobs.insert("seed".to_string(), json!(config.seed));
    knobs.insert("top_k".to_string(), json!(config.top_k));
    knobs.insert("edge_class".to_string(), json!(g.class().as_str()));
    MetricsReport {
        nodes: g.node_count(),
        edges: g.edge_count(),
        density: keep("density", density(g), &mut reasons),
        clustering: keep("clustering", clustering(g), &mut reasons),
        reciprocity: keep("reciprocity", reciprocity(g), &mut reasons),
        avg_path_length: keep("avg_path_length", avg_path_length(g), &mut reasons),
        triangles: triangle_count(g),
        in_degree_top: degree_ranking(g, Direction::In, config.top_k.max(1)).unwrap_or_default(),
        out_degree_top: degree_ranking(g, Direction::Out, config.top_k.max(1)).unwrap_or_default(),
        assortativity: keep("assortativity", assortativity(g), &mut reasons),
        modularity: comms.as_ref().map(|c| c.modularity),
        largest_community: comms.as_ref().map_or(0, Communities::largest),
        communities: comms.map(|c| c.partition).unwrap_or_default(),
        filter_bubble,
        reasons,
        config: knobs,
    }
}

impl MetricsReport {
    /// Adds knobs (coverage, thresholds, ...) to the echoed configuration.
    pub fn with_config(mut self, extra: impl IntoIterator<Item = (String, Value)>) -> Self {
        self.config.extend(extra);
        self
    }

    pub fn to_json(&self) -> Value {
        let mut m = Map::new();
        m.insert("nodes".into(), json!(self.nodes));
        m.insert("edges".into(), json!(self.edges));
        let optional = [
            ("density", self.density),
            ("clustering", self.clustering),
            ("reciprocity", self.reciprocity),
            ("avg_path_length", self.avg_path_length),
            ("assortativity", self.assortativity),
            ("modularity", self.modularity),
            ("filter_bubble", self.filter_bubble),
        ];
        for (name, value) in optional {
            m.insert(name.into(), json!(value));
            if value.is_none() {
                let reason = self.reasons.get(name).cloned().unwrap_or_else(|| "undefined".into());
                m.insert(format!("{name}_reason"), json!(reason));
            }
        }
        m.insert("triangles".into(), json!(self.triangles));
        m.insert("in_degree_top".into(), json!(self.in_degree_top));
        m.insert("out_degree_top".into(), json!(self.out_degree_top));
        m.insert("communities".into(), json!(self.communities));
        m.insert("num_communities".into(), json!(self.communities.len()));
        m.insert("largest_community".into(), json!(self.largest_community));
        m.insert("fb_definition".into(), json!(FB_DEFINITION));
        m.insert(
            "conventions".into(),
            json!({
                "density": "directed: edges / (nodes * (nodes - 1))",
                "reciprocity": "directed: share of edges whose reverse exists",
                "clustering": "undirected projection: mean local coefficient, degree < 2 counts as 0",
                "avg_path_length": "undirected projection: mean over ordered reachable pairs",
                "assortativity": "undirected projection: Pearson over endpoint degrees",
                "modularity": "weighted undirected projection, greedy CNM",
            }),
        );
        m.insert("config".into(), json!(self.config));
        Value::Object(m)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let mut text = serde_json::to_string_pretty(&self.to_json()).map_err(|e| Error::parse(path, e))?;
        text.push('\n');
        fs::write(path, text).map_err(|e| Error::io(path, e))
    }
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::graph::EdgeClass;
    use crate::inference::{FollowEdge, FollowStatus};

    pub(crate) fn graph(nodes: &[&str], edges: &[(&str, &str)]) -> InteractionGraph {
        weighted(nodes, &edges.iter().map(|&(s, t)| (s, t, 1)).collect::<Vec<_>>())
    }

    pub(crate) fn weighted(nodes: &[&str], edges: &[(&str, &str, u64)]) -> InteractionGraph {
        let edges = edges
            .iter()
            .map(|&(s, t, w)| FollowEdge {
                source: s.into(),
                target: t.into(),
                windows_hit: 3,
                total_comments: w,
                status: FollowStatus::ForSure,
                first_seen: 1,
                last_seen: 2,
                status_time: 2,
                maybe_time: Some(1),
            })
            .collect();
        InteractionGraph::from_parts(nodes.iter().map(|s| s.to_string()).collect(), edges, 0, EdgeClass::All).unwrap()
    }

    fn undirected(nodes: &[&str], pairs: &[(&str, &str)]) -> InteractionGraph {
        graph(nodes, pairs)
    }

    #[test]
    fn density_counts() {
        assert!((density_from_counts(14, 35).unwrap() - 0.19230769).abs() < 1e-6);
        assert!(density_from_counts(1, 0).is_err());
        assert_eq!(density(&graph(&["a", "b", "c"], &[])).unwrap(), 0.0);
    }

    #[test]
    fn reciprocity_cases() {
        let g = graph(&["A", "B", "C"], &[("A", "B"), ("B", "A"), ("A", "C")]);
        assert!((reciprocity(&g).unwrap() - 2.0 / 3.0).abs() < 1e-15);
        let dag = graph(&["A", "B", "C"], &[("A", "B"), ("B", "C"), ("A", "C")]);
        assert_eq!(reciprocity(&dag).unwrap(), 0.0);
        assert!(reciprocity(&graph(&["A"], &[])).is_err());
    }

    #[test]
    fn clustering_cases() {
        let tri = undirected(&["a", "b", "c"], &[("a", "b"), ("b", "c"), ("c", "a")]);
        assert_eq!(clustering(&tri).unwrap(), 1.0);
        let path = undirected(&["a", "b", "c"], &[("a", "b"), ("b", "c")]);
        assert_eq!(clustering(&path).unwrap(), 0.0);
        let k4_minus = undirected(
            &["a", "b", "c", "d"],
            &[("a", "b"), ("a", "c"), ("a", "d"), ("b", "c"), ("b", "d")],
        );
        assert!((clustering(&k4_minus).unwrap() - 5.0 / 6.0).abs() < 1e-15);
    }

    #[test]
    fn path_length_cases() {
        assert_eq!(avg_path_length(&graph(&["a", "b"], &[("a", "b")])).unwrap(), 1.0);
        let path = graph(&["a", "b", "c"], &[("a", "b"), ("c", "b")]);
        assert!((avg_path_length(&path).unwrap() - 4.0 / 3.0).abs() < 1e-15);
        let star = graph(&["h", "1", "2", "3", "4"], &[("1", "h"), ("2", "h"), ("3", "h"), ("4", "h")]);
        assert!((avg_path_length(&star).unwrap() - 1.6).abs() < 1e-15);
        assert!(avg_path_length(&graph(&["a", "b"], &[])).is_err());
    }

    #[test]
    fn degree_rankings_on_star() {
        let star = graph(&["h", "s1", "s2", "s3"], &[("s1", "h"), ("s2", "h"), ("s3", "h")]);
        let top_in = degree_ranking(&star, Direction::In, 1).unwrap();
        assert_eq!(top_in, vec![RankedNode { id: "h".into(), count: 3 }]);
        let out = degree_ranking(&star, Direction::Out, 10).unwrap();
        let ids: Vec<_> = out.iter().map(|r| (r.id.as_str(), r.count)).collect();
        assert_eq!(ids, [("s1", 1), ("s2", 1), ("s3", 1), ("h", 0)]);
        assert!(degree_ranking(&star, Direction::In, 0).is_err());
    }

    #[test]
    fn two_hub_ranking() {
        let g = graph(
            &["a", "b", "x", "y", "z"],
            &[("x", "a"), ("y", "a"), ("z", "a"), ("x", "b"), ("y", "b"), ("a", "b")],
        );
        let r = degree_ranking(&g, Direction::In, 3).unwrap();
        let got: Vec<_> = r.iter().map(|r| (r.id.as_str(), r.count)).collect();
        assert_eq!(got, [("a", 3), ("b", 3), ("x", 0)]);
    }

    #[test]
    fn assortativity_cases() {
        let cycle = undirected(&["a", "b", "c", "d"], &[("a", "b"), ("b", "c"), ("c", "d"), ("d", "a")]);
        assert!(assortativity(&cycle).is_err());
        let star = undirected(&["h", "1", "2", "3"], &[("h", "1"), ("h", "2"), ("h", "3")]);
        assert!((assortativity(&star).unwrap() + 1.0).abs() < 1e-15);
        let disjoint = undirected(&["a", "b", "c", "d"], &[("a", "b"), ("c", "d")]);
        assert!(assortativity(&disjoint).is_err());
    }

    #[test]
    fn one_community_has_zero_modularity() {
        let g = graph(&["a", "b", "c"], &[("a", "b"), ("b", "c")]);
        let all = vec![vec!["a".to_string(), "b".into(), "c".into()]];
        assert!(modularity(&g, &all).unwrap().abs() < 1e-15);
    }

    #[test]
    fn edgeless_graph_is_all_singletons() {
        let g = graph(&["a", "b", "c"], &[]);
        let c = communities(&g, 0).unwrap();
        assert_eq!(c.partition.len(), 3);
        assert_eq!(c.modularity, 0.0);
    }

    #[test]
    fn two_cliques_split_in_two() {
        let names = ["a", "b", "c", "d", "w", "x", "y", "z"];
        let mut edges = Vec::new();
        for block in [&names[..4], &names[4..]] {
            for i in 0..4 {
                for j in i + 1..4 {
                    edges.push((block[i], block[j]));
                }
            }
        }
        edges.push(("d", "w"));
        let g = graph(&names, &edges);
        let c = communities(&g, 0).unwrap();
        assert_eq!(c.partition, vec![
            vec!["a".to_string(), "b".into(), "c".into(), "d".into()],
            vec!["w".to_string(), "x".into(), "y".into(), "z".into()],
        ]);
        assert_eq!(c.largest(), 4);
    }

    #[test]
    fn filter_bubble_cases() {
        let g = graph(&["a", "b", "c", "d"], &[("a", "b"), ("b", "a"), ("c", "d"), ("d", "c")]);
        let one = vec![vec!["a".to_string(), "b".into(), "c".into(), "d".into()]];
        assert_eq!(filter_bubble(&g, &one).unwrap(), 0.0);
        let two = vec![vec!["a".to_string(), "b".into()], vec!["c".to_string(), "d".into()]];
        assert_eq!(filter_bubble(&g, &two).unwrap(), 0.5);
        let cross = graph(&["a", "b", "c", "d"], &[("a", "c"), ("b", "d"), ("c", "b")]);
        assert_eq!(filter_bubble(&cross, &two).unwrap(), -0.5);
        assert!(filter_bubble(&graph(&["a", "b"], &[]), &[vec!["a".into(), "b".into()]]).is_err());
        assert!(filter_bubble(&g, &[vec!["a".to_string()]]).is_err());
    }

    #[test]
    fn empty_graph_report() {
        let g = graph(&[], &[]);
        let r = full_report(&g, &MetricsConfig::default());
        assert_eq!((r.nodes, r.edges), (0, 0));
        assert!(r.density.is_none() && r.modularity.is_none() && r.filter_bubble.is_none());
        let j = r.to_json();
        assert!(j["density"].is_null());
        assert!(j["density_reason"].is_string());
        assert!(j["filter_bubble_reason"].is_string());
    }

    #[test]
    fn report_json_shape() {
        let g = graph(&["a", "b", "c"], &[("a", "b"), ("b", "a"), ("b", "c")]);
        let r = full_report(&g, &MetricsConfig::default()).with_config([("coverage".to_string(), json!(0.0001))]);
        let j = r.to_json();
        assert_eq!(j["nodes"], 3);
        assert_eq!(j["edges"], 3);
        assert_eq!(j["density"], 0.5);
        assert_eq!(j["fb_definition"], FB_DEFINITION);
        assert_eq!(j["config"]["coverage"], 0.0001);
        assert!(j.get("density_reason").is_none());
    }
}
