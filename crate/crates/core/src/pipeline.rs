//! End-to-end orchestration and the per-step helpers the CLI shares with it.

use std::collections::BTreeMap;
use std::fs;
use std::io::Read;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde_json::{json, Map, Value};
use sha2::{Digest, Sha256};

use crate::chains::{
    build_threads, chain_census, extract_chains, rank_and_select, write_census_csv, write_chains_jsonl, CensusRow,
    ChainsManifest, InteractionChain,
};
use crate::config::{Level, RunConfig};
use crate::error::{Error, Result};
use crate::graph::{to_graphml, GraphSpec, InteractionGraph};
use crate::inference::{
    event_timeline, extract_events, infer_all, write_edges_csv, write_events, write_timeline_csv, ExtractionStats,
    FollowEdge, InteractionEvent, Thresholds, UserLevel, WindowGrid, DAY_SECS,
};
use crate::ingest::{parse_dump, stage0, write_stages, ParseStats, Preprocessor, RawRecord, RecordKind, StageSnapshot};
use crate::metrics::{full_report, MetricsConfig, MetricsReport};
use crate::profiles::{
    build_profiles, load_embeddings, write_agents, AgentIndex, AgentProfile, HashingVectorizer, Lexicon,
    RESIDUAL_AGENT,
};
use crate::temporal::triad_series;
use crate::temporal::ClosureTime;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Parses both dumps into a stage-0 snapshot.
pub fn ingest(posts: &Path, comments: &Path) -> Result<(StageSnapshot, ParseStats, ParseStats)> {
    let p = parse_dump(posts, RecordKind::Post)?;
    let c = parse_dump(comments, RecordKind::Comment)?;
    Ok((stage0(p.records, c.records), p.stats, c.stats))
}

pub fn preprocess(stage0: StageSnapshot, config: &RunConfig) -> Result<Vec<StageSnapshot>> {
    Preprocessor::new(config.preprocess()).run(stage0)
}

pub fn vectorizer(config: &RunConfig) -> Result<HashingVectorizer> {
    HashingVectorizer::new(config.vector_dim)
}

pub fn build_agents(records: &[RawRecord], config: &RunConfig) -> Result<Vec<AgentProfile>> {
    let lexicon = match &config.paths.lexicon {
        Some(p) => Lexicon::load(p)?,
        None => Lexicon::default(),
    };
    let embeddings = config.paths.embeddings.as_deref().map(load_embeddings).transpose()?;
    build_profiles(records, config.k_agents, config.seed, &vectorizer(config)?, &lexicon, embeddings)
}

/// Interaction events at user level, or at agent level when `agents` is given.
pub fn events(records: &[RawRecord], agents: Option<&[AgentProfile]>) -> Result<(Vec<InteractionEvent>, ExtractionStats)> {
    match agents {
        None => Ok(extract_events(records, &UserLevel)),
        Some(profiles) => {
            let index = AgentIndex::new(profiles)?;
            let map = |author: &str| index.get(author).map(str::to_string);
            Ok(extract_events(records, &map))
        }
    }
}

pub fn thresholds(config: &RunConfig) -> Result<Thresholds> {
    Thresholds::new(config.maybe_min, config.forsure_min)
}

pub fn infer(events: &[InteractionEvent], config: &RunConfig) -> Result<(WindowGrid, Vec<FollowEdge>)> {
    let grid = WindowGrid::covering(events, config.window_days.saturating_mul(DAY_SECS))?;
    let edges = infer_all(events, &grid, thresholds(config)?);
    Ok((grid, edges))
}

pub fn graph_spec(config: &RunConfig) -> GraphSpec {
    GraphSpec {
        class: config.edge_class,
        coverage: config.coverage,
        keep_isolated: config.level == Level::Agent,
    }
}

pub fn metrics_config(config: &RunConfig) -> MetricsConfig {
    MetricsConfig {
        seed: config.seed,
        top_k: config.top_k,
    }
}

/// The report plus every knob that shaped the graph.
pub fn report(graph: &InteractionGraph, config: &RunConfig) -> MetricsReport {
    full_report(graph, &metrics_config(config)).with_config([
        ("coverage".to_string(), json!(config.coverage)),
        ("window_days".to_string(), json!(config.window_days)),
        ("maybe_min".to_string(), json!(config.maybe_min)),
        ("forsure_min".to_string(), json!(config.forsure_min)),
        ("level".to_string(), json!(config.level)),
        ("k_agents".to_string(), json!(config.k_agents)),
    ])
}

/// `metrics.json` content: the report with the producing config digest.
pub fn metrics_json(report: &MetricsReport, digest: &str) -> Value {
    let mut v = report.to_json();
    v["config_digest"] = json!(digest);
    v
}

pub struct ChainOutputs {
    pub top: Vec<InteractionChain>,
    pub manifest: ChainsManifest,
    pub census: Vec<CensusRow>,
}

pub fn chains(records: &[RawRecord], agents: Option<&[AgentProfile]>, config: &RunConfig) -> Result<ChainOutputs> {
    let vz = vectorizer(config)?;
    let index = agents.map(AgentIndex::new).transpose()?;
    let agent_of = |r: &RawRecord| match &index {
        Some(ix) => ix.get(&r.author).unwrap_or(RESIDUAL_AGENT).to_string(),
        None => r.author.clone(),
    };
    let threads = build_threads(records, &|r| vz.vectorize(&[&r.text]), &agent_of);
    let (all, manifest) = extract_chains(&threads, config.sim_threshold, config.caps());
    Ok(ChainOutputs {
        top: rank_and_select(all, config.top_chains),
        manifest,
        census: chain_census(&threads, &config.census_thresholds)?,
    })
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let mut f = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut h = Sha256::new();
    let mut buf = vec![0u8; 1 << 16];
    loop {
        let n = f.read(&mut buf).map_err(|e| Error::io(path, e))?;
        if n == 0 {
            break;
        }
        h.update(&buf[..n]);
    }
    Ok(hex::encode(h.finalize()))
}

pub fn write_json(path: &Path, value: &Value) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| Error::parse(path, e))?;
    text.push('\n');
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn required<'a>(p: &'a Option<PathBuf>, name: &str) -> Result<&'a Path> {
    p.as_deref().ok_or_else(|| Error::Config(format!("paths.{name} is required")))
}

/// Published reference values per domain, for `--replicate`.
pub fn reference_values(domain: &str) -> Option<Vec<(&'static str, f64)>> {
    let v = match domain {
        "climate" => vec![
            ("nodes", 14.0),
            ("edges", 35.0),
            ("density", 0.192),
            ("clustering", 0.765),
            ("reciprocity", 0.286),
            ("avg_path_length", 1.67),
            ("modularity", 0.083),
            ("num_communities", 3.0),
            ("largest_community", 7.0),
        ],
        "covid" => vec![
            ("nodes", 7.0),
            ("edges", 7.0),
            ("density", 0.167),
            ("clustering", 0.295),
            ("reciprocity", 0.0),
            ("avg_path_length", 1.67),
            ("modularity", 0.122),
            ("num_communities", 2.0),
            ("largest_community", 5.0),
        ],
        "technology" => vec![
            ("nodes", 33.0),
            ("edges", 40.0),
            ("density", 0.038),
            ("clustering", 0.349),
            ("reciprocity", 0.0),
            ("avg_path_length", 1.92),
            ("modularity", 0.258),
            ("num_communities", 6.0),
            ("largest_community", 19.0),
        ],
        _ => return None,
    };
    Some(v)
}

/// Side-by-side comparison of a metrics document with the published values.
pub fn replication_report(domain: &str, metrics: &Value) -> Result<Value> {
    let refs = reference_values(domain)
        .ok_or_else(|| Error::Config(format!("no published reference values for domain {domain:?}")))?;
    let rows: Vec<Value> = refs
        .into_iter()
        .map(|(name, reference)| {
            let observed = metrics.get(name).and_then(Value::as_f64);
            json!({
                "metric": name,
                "reference": reference,
                "observed": observed,
                "abs_diff": observed.map(|o| (o - reference).abs()),
            })
        })
        .collect();
    Ok(json!({ "domain": domain, "rows": rows }))
}

#[derive(Debug)]
pub struct RunSummary {
    pub out_dir: PathBuf,
    pub report: MetricsReport,
    pub manifest: Value,
}

struct Timer {
    timings: BTreeMap<String, u128>,
    last: Instant,
}

impl Timer {
    fn lap(&mut self, stage: &str) {
        let now = Instant::now();
        self.timings.insert(stage.to_string(), now.duration_since(self.last).as_millis());
        self.last = now;
    }
}

/// ingest -> preprocess -> agents -> infer -> graph -> metrics -> triads -> chains,
/// writing every artifact plus `run_manifest.json` into `paths.out`.
pub fn run_all(config: &RunConfig, replicate: bool) -> Result<RunSummary> {
    config.check()?;
    let posts = required(&config.paths.posts, "posts")?;
    let comments = required(&config.paths.comments, "comments")?;
    let out = required(&config.paths.out, "out")?.to_path_buf();
    fs::create_dir_all(&out).map_err(|e| Error::io(&out, e))?;
    let digest = config.digest();
    let mut timer = Timer {
        timings: BTreeMap::new(),
        last: Instant::now(),
    };

    let (s0, post_stats, comment_stats) = ingest(posts, comments)?;
    timer.lap("ingest");
    let stages = preprocess(s0, config)?;
    write_stages(&out.join("stages"), &stages)?;
    timer.lap("preprocess");
    let records = stages.last().expect("seven stages").records.clone();

    let agents = match config.level {
        Level::Agent => {
            let a = build_agents(&records, config)?;
            write_agents(&out.join("agents.json"), &a)?;
            Some(a)
        }
        Level::User => None,
    };
    timer.lap("agents");

    let (events, extraction) = events(&records, agents.as_deref())?;
    write_events(&out.join("events.jsonl"), &events)?;
    let (grid, edges) = infer(&events, config)?;
    write_edges_csv(&out.join("edges.csv"), &edges)?;
    write_timeline_csv(&out.join("timeline.csv"), &event_timeline(&edges))?;
    timer.lap("infer");

    let known: Vec<&str> = agents
        .iter()
        .flatten()
        .map(|a| a.agent_id.as_str())
        .collect();
    let graph = graph_spec(config).build(&edges, known)?;
    let graphml = out.join("graph.graphml");
    fs::write(&graphml, to_graphml(&graph)).map_err(|e| Error::io(&graphml, e))?;
    timer.lap("graph");

    let report = report(&graph, config);
    let metrics = metrics_json(&report, &digest);
    write_json(&out.join("metrics.json"), &metrics)?;
    timer.lap("metrics");

    let triads = triad_series(graph.edges(), config.interval_days.saturating_mul(DAY_SECS), ClosureTime::FirstSeen)?;
    triads.write_csv(&out.join("triads.csv"))?;
    timer.lap("triads");

    let ch = chains(&records, agents.as_deref(), config)?;
    write_chains_jsonl(&out.join("chains.jsonl"), &ch.top)?;
    write_census_csv(&out.join("census.csv"), &ch.census)?;
    timer.lap("chains");

    if replicate {
        write_json(&out.join("replication.json"), &replication_report(&config.domain, &metrics)?)?;
    }

    let mut outputs = Map::new();
    for name in output_files(&out)? {
        outputs.insert(name.clone(), json!(sha256_file(&out.join(&name))?));
    }
    let stage_counts: Vec<Value> = stages
        .iter()
        .map(|s| serde_json::to_value(s.manifest()).expect("manifest serializes"))
        .collect();
    let manifest = json!({
        "version": VERSION,
        "config_digest": digest,
        "config": config.echo(),
        "inputs": {
            "posts": { "path": posts, "sha256": sha256_file(posts)?, "lines": post_stats.lines, "malformed": post_stats.malformed },
            "comments": { "path": comments, "sha256": sha256_file(comments)?, "lines": comment_stats.lines, "malformed": comment_stats.malformed },
        },
        "stages": stage_counts,
        "extraction": extraction,
        "grid": grid,
        "chains": ch.manifest,
        "outputs": outputs,
        "timings_ms": timer.timings,
    });
    write_json(&out.join("run_manifest.json"), &manifest)?;
    Ok(RunSummary {
        out_dir: out,
        report,
        manifest,
    })
}

/// Relative paths of every regular file under `dir`, sorted, manifest excluded.
pub fn output_files(dir: &Path) -> Result<Vec<String>> {
    let mut found = Vec::new();
    let mut pending = vec![dir.to_path_buf()];
    while let Some(d) = pending.pop() {
        for entry in fs::read_dir(&d).map_err(|e| Error::io(&d, e))? {
            let path = entry.map_err(|e| Error::io(&d, e))?.path();
            if path.is_dir() {
                pending.push(path);
            } else {
                let rel = path.strip_prefix(dir).expect("under dir").to_string_lossy().replace('\\', "/");
                if rel != "run_manifest.json" {
                    found.push(rel);
                }
            }
        }
    }
    found.sort();
    Ok(found)
}
