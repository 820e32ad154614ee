//! Directed, weighted interaction graph over agents and its file formats.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use quick_xml::events::Event;
use quick_xml::Reader;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::inference::{csv_err, csv_writer, edge_fields, read_edges_csv, FollowEdge, FollowStatus, EDGES_HEADER};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EdgeClass {
    /// Every inferred follow (`Maybe` or `ForSure`).
    All,
    ForSure,
    Maybe,
}

impl EdgeClass {
    pub fn admits(self, status: FollowStatus) -> bool {
        match self {
            EdgeClass::All => status != FollowStatus::None,
            EdgeClass::ForSure => status == FollowStatus::ForSure,
            EdgeClass::Maybe => status == FollowStatus::Maybe,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            EdgeClass::All => "all",
            EdgeClass::ForSure => "forsure",
            EdgeClass::Maybe => "maybe",
        }
    }
}

impl FromStr for EdgeClass {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "all" => Ok(EdgeClass::All),
            "forsure" => Ok(EdgeClass::ForSure),
            "maybe" => Ok(EdgeClass::Maybe),
            other => Err(Error::Usage(format!("unknown edge class {other:?} (all|forsure|maybe)"))),
        }
    }
}

/// Immutable graph snapshot. Edges are sorted by `(source, target)`; the
/// weight of an edge is its `total_comments`.
#[derive(Debug, Clone)]
pub struct InteractionGraph {
    nodes: BTreeSet<String>,
    edges: Vec<FollowEdge>,
    built_at: i64,
    class: EdgeClass,
    keep_isolated: bool,
}

impl PartialEq for InteractionGraph {
    fn eq(&self, other: &Self) -> bool {
        self.nodes == other.nodes
            && self.edges == other.edges
            && self.built_at == other.built_at
            && self.class == other.class
    }
}

impl InteractionGraph {
    /// Keeps edges whose status is admitted by `class`, dropping self-loops and
    /// zero-weight edges. With `keep_isolated`, every id in `known_nodes` is a node
    /// even without edges. `built_at` is the latest `last_seen` among kept edges.
    pub fn build<'a>(
        edges: &[FollowEdge],
        class: EdgeClass,
        known_nodes: impl IntoIterator<Item = &'a str>,
        keep_isolated: bool,
    ) -> Self {
        let mut kept: Vec<FollowEdge> = edges
            .iter()
            .filter(|e| class.admits(e.status) && e.source != e.target && e.weight() >= 1)
            .cloned()
            .collect();
        kept.sort_by(|a, b| a.key().cmp(&b.key()));
        kept.dedup_by(|a, b| a.key() == b.key());
        let mut nodes: BTreeSet<String> = kept
            .iter()
            .flat_map(|e| [e.source.clone(), e.target.clone()])
            .collect();
        if keep_isolated {
            nodes.extend(known_nodes.into_iter().map(str::to_string));
        }
        InteractionGraph {
            nodes,
            built_at: kept.iter().map(|e| e.last_seen).max().unwrap_or(0),
            edges: kept,
            class,
            keep_isolated,
        }
    }

    /// Assembles a graph from parts, checking the endpoint invariant.
    pub fn from_parts(
        nodes: BTreeSet<String>,
        mut edges: Vec<FollowEdge>,
        built_at: i64,
        class: EdgeClass,
    ) -> Result<Self> {
        edges.sort_by(|a, b| a.key().cmp(&b.key()));
        for e in &edges {
            if e.source == e.target {
                return Err(Error::Invariant(format!("self-loop on {}", e.source)));
            }
            if !nodes.contains(&e.source) || !nodes.contains(&e.target) {
                return Err(Error::Invariant(format!("edge {} -> {} has unknown endpoint", e.source, e.target)));
            }
            if e.weight() == 0 {
                return Err(Error::Invariant(format!("edge {} -> {} has zero weight", e.source, e.target)));
            }
        }
        if edges.windows(2).any(|w| w[0].key() == w[1].key()) {
            return Err(Error::Invariant("duplicate edge".into()));
        }
        Ok(InteractionGraph {
            nodes,
            edges,
            built_at,
            class,
            keep_isolated: true,
        })
    }

    pub fn nodes(&self) -> &BTreeSet<String> {
        &self.nodes
    }

    pub fn edges(&self) -> &[FollowEdge] {
        &self.edges
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn built_at(&self) -> i64 {
        self.built_at
    }

    pub fn class(&self) -> EdgeClass {
        self.class
    }

    pub fn total_weight(&self) -> u64 {
        self.edges.iter().map(FollowEdge::weight).sum()
    }

    /// Keeps edges with `weight >= fraction * total weight`. Nodes are kept
    /// when the graph retains isolated nodes, otherwise recomputed from edges.
    pub fn apply_coverage(&self, fraction: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&fraction) {
            return Err(Error::Config(format!("coverage {fraction} outside [0, 1]")));
        }
        let threshold = fraction * self.total_weight() as f64;
        let edges: Vec<FollowEdge> = self
            .edges
            .iter()
            .filter(|e| e.weight() as f64 >= threshold)
            .cloned()
            .collect();
        let nodes = if self.keep_isolated {
            self.nodes.clone()
        } else {
            edges.iter().flat_map(|e| [e.source.clone(), e.target.clone()]).collect()
        };
        Ok(InteractionGraph {
            nodes,
            edges,
            built_at: self.built_at,
            class: self.class,
            keep_isolated: self.keep_isolated,
        })
    }

    /// Restricts to `ForSure` edges, keeping the node set.
    pub fn forsure_only(&self) -> Self {
        InteractionGraph {
            edges: self.edges.iter().filter(|e| e.status == FollowStatus::ForSure).cloned().collect(),
            nodes: self.nodes.clone(),
            built_at: self.built_at,
            class: EdgeClass::ForSure,
            keep_isolated: self.keep_isolated,
        }
    }
}

/// Settings that turn classified pairs into an analysis graph.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GraphSpec {
    pub class: EdgeClass,
    pub coverage: f64,
    pub keep_isolated: bool,
}

impl Default for GraphSpec {
    fn default() -> Self {
        GraphSpec {
            class: EdgeClass::All,
            coverage: 0.0,
            keep_isolated: false,
        }
    }
}

impl GraphSpec {
    pub fn build<'a>(&self, edges: &[FollowEdge], known_nodes: impl IntoIterator<Item = &'a str>) -> Result<InteractionGraph> {
        InteractionGraph::build(edges, self.class, known_nodes, self.keep_isolated).apply_coverage(self.coverage)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExportFormat {
    EdgesCsv,
    GraphMl,
    Dot,
}

impl ExportFormat {
    /// Picks the format from a file extension.
    pub fn from_path(path: &Path) -> Result<Self> {
        match path.extension().and_then(|e| e.to_str()) {
            Some("csv") => Ok(ExportFormat::EdgesCsv),
            Some("graphml") | Some("xml") => Ok(ExportFormat::GraphMl),
            Some("dot") | Some("gv") => Ok(ExportFormat::Dot),
            _ => Err(Error::Usage(format!(
                "cannot infer graph format from {}; use .csv, .graphml or .dot",
                path.display()
            ))),
        }
    }
}

impl FromStr for ExportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" | "edges" => Ok(ExportFormat::EdgesCsv),
            "graphml" => Ok(ExportFormat::GraphMl),
            "dot" => Ok(ExportFormat::Dot),
            other => Err(Error::Usage(format!("unknown export format {other:?} (csv|graphml|dot)"))),
        }
    }
}

fn xml_escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&apos;"),
            c => out.push(c),
        }
    }
    out
}

fn dot_quote(s: &str) -> String {
    format!("\"{}\"", s.replace('\\', "\\\\").replace('"', "\\\""))
}

const GRAPHML_KEYS: [(&str, &str, &str); 8] = [
    ("status", "edge", "string"),
    ("weight", "edge", "long"),
    ("windows_hit", "edge", "long"),
    ("first_seen", "edge", "long"),
    ("last_seen", "edge", "long"),
    ("status_time", "edge", "long"),
    ("maybe_time", "edge", "long"),
    ("edge_class", "graph", "string"),
];

pub fn to_graphml(graph: &InteractionGraph) -> String {
    let mut s = String::new();
    s.push_str("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n");
    s.push_str("<graphml xmlns=\"http://graphml.graphdrawing.org/xmlns\">\n");
    for (name, domain, ty) in GRAPHML_KEYS {
        let _ = writeln!(s, "  <key id=\"{name}\" for=\"{domain}\" attr.name=\"{name}\" attr.type=\"{ty}\"/>");
    }
    s.push_str("  <key id=\"built_at\" for=\"graph\" attr.name=\"built_at\" attr.type=\"long\"/>\n");
    s.push_str("  <graph id=\"interactions\" edgedefault=\"directed\">\n");
    let _ = writeln!(s, "    <data key=\"edge_class\">{}</data>", graph.class.as_str());
    let _ = writeln!(s, "    <data key=\"built_at\">{}</data>", graph.built_at);
    for n in &graph.nodes {
        let _ = writeln!(s, "    <node id=\"{}\"/>", xml_escape(n));
    }
    for e in &graph.edges {
        let _ = writeln!(s, "    <edge source=\"{}\" target=\"{}\">", xml_escape(&e.source), xml_escape(&e.target));
        let _ = writeln!(s, "      <data key=\"status\">{}</data>", e.status);
        let _ = writeln!(s, "      <data key=\"weight\">{}</data>", e.weight());
        let _ = writeln!(s, "      <data key=\"windows_hit\">{}</data>", e.windows_hit);
        let _ = writeln!(s, "      <data key=\"first_seen\">{}</data>", e.first_seen);
        let _ = writeln!(s, "      <data key=\"last_seen\">{}</data>", e.last_seen);
        let _ = writeln!(s, "      <data key=\"status_time\">{}</data>", e.status_time);
        if let Some(t) = e.maybe_time {
            let _ = writeln!(s, "      <data key=\"maybe_time\">{t}</data>");
        }
        s.push_str("    </edge>\n");
    }
    s.push_str("  </graph>\n</graphml>\n");
    s
}

pub fn to_dot(graph: &InteractionGraph) -> String {
    let mut s = String::from("digraph interactions {\n");
    for n in &graph.nodes {
        let _ = writeln!(s, "  {};", dot_quote(n));
    }
    for e in &graph.edges {
        let _ = writeln!(
            s,
            "  {} -> {} [weight={}, status=\"{}\"];",
            dot_quote(&e.source),
            dot_quote(&e.target),
            e.weight(),
            e.status
        );
    }
    s.push_str("}\n");
    s
}

pub fn write_graph_csv(path: &Path, graph: &InteractionGraph) -> Result<()> {
    let mut w = csv_writer(path)?;
    let mut header: Vec<&str> = EDGES_HEADER.to_vec();
    header.push("weight");
    w.write_record(&header).map_err(csv_err(path))?;
    for e in &graph.edges {
        let mut row = edge_fields(e).to_vec();
        row.push(e.weight().to_string());
        w.write_record(&row).map_err(csv_err(path))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn export(graph: &InteractionGraph, format: ExportFormat, path: &Path) -> Result<()> {
    match format {
        ExportFormat::EdgesCsv => write_graph_csv(path, graph),
        ExportFormat::GraphMl => fs::write(path, to_graphml(graph)).map_err(|e| Error::io(path, e)),
        ExportFormat::Dot => fs::write(path, to_dot(graph)).map_err(|e| Error::io(path, e)),
    }
}

/// Parses GraphML written by [`to_graphml`].
pub fn from_graphml(text: &str) -> Result<InteractionGraph> {
    let err = |m: String| Error::parse("<graphml>", m);
    let mut reader = Reader::from_str(text);
    reader.config_mut().trim_text(true);

    let mut nodes = BTreeSet::new();
    let mut edges = Vec::new();
    let mut class = EdgeClass::All;
    let mut built_at = 0;
    let mut current: Option<FollowEdge> = None;
    let mut data_key: Option<String> = None;

    let attr = |e: &quick_xml::events::BytesStart, name: &[u8]| -> Result<Option<String>> {
        for a in e.attributes() {
            let a = a.map_err(|x| err(x.to_string()))?;
            if a.key.as_ref() == name {
                let v = a.unescape_value().map_err(|x| err(x.to_string()))?;
                return Ok(Some(v.into_owned()));
            }
        }
        Ok(None)
    };

    loop {
        match reader.read_event().map_err(|e| err(e.to_string()))? {
            Event::Eof => break,
            Event::Start(e) | Event::Empty(e) if e.name().as_ref() == b"node" => {
                nodes.insert(attr(&e, b"id")?.ok_or_else(|| err("node without id".into()))?);
            }
            Event::Start(e) if e.name().as_ref() == b"edge" => {
                current = Some(FollowEdge {
                    source: attr(&e, b"source")?.ok_or_else(|| err("edge without source".into()))?,
                    target: attr(&e, b"target")?.ok_or_else(|| err("edge without target".into()))?,
                    windows_hit: 0,
                    total_comments: 0,
                    status: FollowStatus::None,
                    first_seen: 0,
                    last_seen: 0,
                    status_time: 0,
                    maybe_time: None,
                });
            }
            Event::End(e) if e.name().as_ref() == b"edge" => {
                edges.push(current.take().ok_or_else(|| err("unbalanced edge".into()))?);
            }
            Event::Start(e) if e.name().as_ref() == b"data" => {
                data_key = attr(&e, b"key")?;
            }
            Event::End(e) if e.name().as_ref() == b"data" => data_key = None,
            Event::Text(t) => {
                let Some(key) = data_key.as_deref() else { continue };
                let value = t.unescape().map_err(|x| err(x.to_string()))?;
                let value = value.trim();
                let num = || value.parse::<i64>().map_err(|_| err(format!("bad {key} value {value:?}")));
                match (key, current.as_mut()) {
                    ("edge_class", None) => class = value.parse()?,
                    ("built_at", None) => built_at = num()?,
                    ("status", Some(edge)) => edge.status = value.parse()?,
                    ("weight", Some(edge)) => edge.total_comments = num()? as u64,
                    ("windows_hit", Some(edge)) => edge.windows_hit = num()? as u64,
                    ("first_seen", Some(edge)) => edge.first_seen = num()?,
                    ("last_seen", Some(edge)) => edge.last_seen = num()?,
                    ("status_time", Some(edge)) => edge.status_time = num()?,
                    ("maybe_time", Some(edge)) => edge.maybe_time = Some(num()?),
                    _ => {}
                }
            }
            _ => {}
        }
    }
    InteractionGraph::from_parts(nodes, edges, built_at, class)
}

/// Loads a graph from `.graphml` or an edges `.csv` (nodes = endpoints).
pub fn import(path: &Path) -> Result<InteractionGraph> {
    match ExportFormat::from_path(path)? {
        ExportFormat::GraphMl => {
            let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
            from_graphml(&text).map_err(|e| match e {
                Error::Parse { message, .. } => Error::parse(path, message),
                other => other,
            })
        }
        ExportFormat::EdgesCsv => {
            let edges = read_edges_csv(path)?;
            let nodes = edges.iter().flat_map(|e| [e.source.clone(), e.target.clone()]).collect();
            let built_at = edges.iter().map(|e| e.last_seen).max().unwrap_or(0);
            InteractionGraph::from_parts(nodes, edges, built_at, EdgeClass::All)
        }
        ExportFormat::Dot => Err(Error::Usage("DOT files are export-only".into())),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn edge(s: &str, t: &str, status: FollowStatus, weight: u64) -> FollowEdge {
        FollowEdge {
            source: s.into(),
            target: t.into(),
            windows_hit: match status {
                FollowStatus::None => 1,
                FollowStatus::Maybe => 2,
                FollowStatus::ForSure => 3,
            },
            total_comments: weight,
            status,
            first_seen: 10,
            last_seen: 20 + weight as i64,
            status_time: 15,
            maybe_time: match status {
                FollowStatus::None => None,
                FollowStatus::Maybe => Some(15),
                FollowStatus::ForSure => Some(12),
            },
        }
    }

    #[test]
    fn class_filter() {
        let edges = [edge("A", "B", FollowStatus::ForSure, 3), edge("C", "D", FollowStatus::Maybe, 2)];
        let g = InteractionGraph::build(&edges, EdgeClass::ForSure, [], false);
        assert_eq!(g.edge_count(), 1);
        assert!(g.nodes().contains("A") && g.nodes().contains("B"));
        let all = InteractionGraph::build(&edges, EdgeClass::All, [], false);
        assert_eq!(all.edge_count(), 2);
        let none = [edge("X", "Y", FollowStatus::None, 1)];
        assert_eq!(InteractionGraph::build(&none, EdgeClass::All, [], false).edge_count(), 0);
    }

    #[test]
    fn empty_and_isolated() {
        let g = InteractionGraph::build(&[], EdgeClass::All, [], true);
        assert_eq!((g.node_count(), g.edge_count()), (0, 0));
        let g = InteractionGraph::build(&[], EdgeClass::All, ["A0", "A1"], true);
        assert_eq!(g.node_count(), 2);
        let g = InteractionGraph::build(&[], EdgeClass::All, ["A0", "A1"], false);
        assert_eq!(g.node_count(), 0);
    }

    #[test]
    fn coverage_threshold_arithmetic() {
        let edges = [
            edge("a", "b", FollowStatus::Maybe, 50),
            edge("b", "c", FollowStatus::Maybe, 30),
            edge("c", "d", FollowStatus::Maybe, 15),
            edge("d", "e", FollowStatus::Maybe, 5),
        ];
        let g = InteractionGraph::build(&edges, EdgeClass::All, [], false);
        let cut = g.apply_coverage(0.1).unwrap();
        assert_eq!(cut.edge_count(), 3);
        assert!(!cut.nodes().contains("e"));
        assert_eq!(g.apply_coverage(0.0).unwrap(), g);
        assert_eq!(g.apply_coverage(1.0).unwrap().edge_count(), 0);
        assert!(g.apply_coverage(1.5).is_err());
        let isolated = InteractionGraph::build(&edges, EdgeClass::All, [], true);
        assert_eq!(isolated.apply_coverage(0.1).unwrap().node_count(), 5);
    }

    fn three_node() -> InteractionGraph {
        let edges = [
            edge("A", "B", FollowStatus::ForSure, 4),
            edge("B", "A", FollowStatus::Maybe, 2),
            edge("B", "C", FollowStatus::Maybe, 1),
        ];
        InteractionGraph::build(&edges, EdgeClass::All, ["A", "B", "C"], true)
    }

    #[test]
    fn dot_matches_golden() {
        let golden = include_str!("../tests/fixtures/three_node.dot");
        assert_eq!(to_dot(&three_node()), golden);
    }

    #[test]
    fn graphml_round_trip() {
        let g = three_node();
        let text = to_graphml(&g);
        assert!(text.contains("<data key=\"status\">forsure</data>"));
        assert!(text.contains("<data key=\"weight\">4</data>"));
        assert_eq!(from_graphml(&text).unwrap(), g);
    }

    #[test]
    fn graphml_escapes_ids() {
        let edges = [edge("a&b", "<c>", FollowStatus::Maybe, 1)];
        let g = InteractionGraph::build(&edges, EdgeClass::All, ["\"q\""], true);
        assert_eq!(from_graphml(&to_graphml(&g)).unwrap(), g);
    }

    #[test]
    fn csv_export_one_row_and_reimport() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("g.csv");
        let edges = [edge("A", "B", FollowStatus::Maybe, 3)];
        let g = InteractionGraph::build(&edges, EdgeClass::All, [], false);
        export(&g, ExportFormat::EdgesCsv, &path).unwrap();
        let text = fs::read_to_string(&path).unwrap();
        assert_eq!(text.lines().count(), 2);
        assert!(text.starts_with("source,target,status,windows_hit,total_comments,first_seen,last_seen,status_time,weight\n"));
        assert_eq!(import(&path).unwrap(), g);
    }

    #[test]
    fn format_selection() {
        assert_eq!(ExportFormat::from_path(Path::new("x.graphml")).unwrap(), ExportFormat::GraphMl);
        assert!(ExportFormat::from_path(Path::new("x.png")).is_err());
        assert!("svg".parse::<ExportFormat>().is_err());
    }

    #[test]
    fn from_parts_rejects_dangling_edges() {
        let edges = vec![edge("A", "B", FollowStatus::Maybe, 1)];
        let nodes = BTreeSet::from(["A".to_string()]);
        assert!(InteractionGraph::from_parts(nodes, edges, 0, EdgeClass::All).is_err());
    }
}
