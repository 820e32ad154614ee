//! Command-line front end: one subcommand per pipeline step plus `run-all`.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use latent_graph_core::chains::{write_census_csv, write_chains_jsonl};
use latent_graph_core::config::{Level, RunConfig};
use latent_graph_core::graph::{export, import, EdgeClass, ExportFormat, GraphSpec};
use latent_graph_core::inference::{
    event_timeline, read_edges_csv, read_events, write_edges_csv, write_events, write_timeline_csv, DAY_SECS,
};
use latent_graph_core::ingest::{read_stage, write_stages};
use latent_graph_core::pipeline::{self, VERSION};
use latent_graph_core::profiles::{read_agents, write_agents};
use latent_graph_core::synthetic::{generate, SyntheticSpec};
use latent_graph_core::temporal::{sweep, triad_series, write_sweep_csv, AnalysisSpec, ClosureTime, SweepParams};
use latent_graph_core::{Error, Result};

/// Infer latent follow graphs from post/comment dumps and analyse them.
#[derive(Parser)]
#[command(name = "latent-graph", disable_version_flag = true)]
struct Cli {
    /// JSON run configuration; flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Worker threads for parallel stages.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Print version and build information.
    #[arg(long)]
    version: bool,
    #[command(subcommand)]
    command: Option<Command>,
}

#[derive(Subcommand)]
enum Command {
    /// Parse post and comment dumps into a stage-0 snapshot.
    Ingest {
        #[arg(long)]
        posts: Option<PathBuf>,
        #[arg(long)]
        comments: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the filtering stages over a stage-0 snapshot.
    Preprocess {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        max_comments: Option<usize>,
        #[arg(long)]
        min_interactions: Option<usize>,
    },
    /// Cluster users into agents.
    Agents {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        k: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        embeddings: Option<PathBuf>,
        #[arg(long)]
        lexicon: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Classify follow relations from interaction events.
    Infer(InferArgs),
    /// Graph construction and export.
    Graph {
        #[command(subcommand)]
        command: GraphCommand,
    },
    /// Structural metrics of a graph.
    Metrics {
        #[arg(long)]
        graph: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        top_k: Option<usize>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Triadic-closure series from classified edges.
    Triads {
        #[arg(long)]
        edges: PathBuf,
        #[arg(long)]
        interval_days: Option<i64>,
        /// Use each edge's status time instead of its first appearance.
        #[arg(long)]
        status_time: bool,
        #[arg(long)]
        out: PathBuf,
    },
    /// Interaction chains and the per-threshold census.
    Chains {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        agents: Option<PathBuf>,
        #[arg(long)]
        threshold: Option<f64>,
        #[arg(long)]
        top: Option<usize>,
        #[arg(long, value_delimiter = ',')]
        census_thresholds: Option<Vec<f64>>,
        #[arg(long)]
        census: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Inference and metrics over a parameter grid.
    Sweep {
        #[arg(long)]
        events: PathBuf,
        #[arg(long, value_delimiter = ',')]
        windows: Option<Vec<i64>>,
        #[arg(long = "maybe", value_delimiter = ',')]
        maybe: Option<Vec<u64>>,
        #[arg(long = "forsure", value_delimiter = ',')]
        forsure: Option<Vec<u64>>,
        #[arg(long, value_delimiter = ',')]
        coverage: Option<Vec<f64>>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Every step end to end.
    RunAll {
        #[arg(long)]
        posts: Option<PathBuf>,
        #[arg(long)]
        comments: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        domain: Option<String>,
        #[arg(long)]
        seed: Option<u64>,
        /// Also compare the metrics with the published reference values.
        #[arg(long)]
        replicate: bool,
    },
    /// Write a synthetic dump with planted removals.
    Synth {
        #[arg(long, default_value_t = 300)]
        posts: usize,
        #[arg(long, default_value_t = 1800)]
        comments: usize,
        #[arg(long, default_value_t = 7)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Print every violated configuration invariant.
    Validate,
}

#[derive(Args)]
struct InferArgs {
    /// Pre-extracted events (JSONL).
    #[arg(long, conflicts_with = "input")]
    events: Option<PathBuf>,
    /// Stage directory to extract events from.
    #[arg(long = "in")]
    input: Option<PathBuf>,
    #[arg(long)]
    agents: Option<PathBuf>,
    #[arg(long)]
    level: Option<Level>,
    #[arg(long)]
    window_days: Option<i64>,
    #[arg(long)]
    maybe_min: Option<u64>,
    #[arg(long)]
    forsure_min: Option<u64>,
    #[arg(long)]
    timeline: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Subcommand)]
enum GraphCommand {
    /// Build a graph from classified edges and export it.
    Build {
        #[arg(long)]
        edges: PathBuf,
        #[arg(long)]
        class: Option<EdgeClass>,
        #[arg(long)]
        coverage: Option<f64>,
        /// Keep every agent of this file as a node, with or without edges.
        #[arg(long)]
        agents: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
}

fn set<T>(slot: &mut T, value: Option<T>) {
    if let Some(v) = value {
        *slot = v;
    }
}

fn final_stage(dir: &Path) -> Result<Vec<latent_graph_core::ingest::RawRecord>> {
    Ok(read_stage(dir, 6)?.records.to_vec())
}

fn run(cli: Cli) -> Result<()> {
    if cli.version {
        println!(
            "latent-graph {VERSION} ({} {}, {} build)",
            std::env::consts::ARCH,
            std::env::consts::OS,
            if cfg!(debug_assertions) { "debug" } else { "release" }
        );
        return Ok(());
    }
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(Error::Usage("--threads must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::Usage(e.to_string()))?;
    }
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    let Some(command) = cli.command else {
        return Err(Error::Usage("no subcommand given (see --help)".into()));
    };
    match command {
        Command::Ingest { posts, comments, out } => {
            set(&mut cfg.paths.posts, posts.map(Some));
            set(&mut cfg.paths.comments, comments.map(Some));
            let posts = cfg.paths.posts.as_deref().ok_or_else(|| Error::Usage("--posts is required".into()))?;
            let comments = cfg.paths.comments.as_deref().ok_or_else(|| Error::Usage("--comments is required".into()))?;
            let (s0, ps, cs) = pipeline::ingest(posts, comments)?;
            write_stages(&out, std::slice::from_ref(&s0))?;
            println!(
                "stage 0: {} posts, {} comments ({} + {} malformed lines skipped)",
                s0.post_count, s0.comment_count, ps.malformed, cs.malformed
            );
        }
        Command::Preprocess {
            input,
            out,
            max_comments,
            min_interactions,
        } => {
            set(&mut cfg.max_comments_per_post, max_comments);
            set(&mut cfg.min_interactions, min_interactions);
            cfg.check()?;
            let stages = pipeline::preprocess(read_stage(&input, 0)?, &cfg)?;
            write_stages(&out, &stages)?;
            for s in &stages {
                println!("stage {}: {} posts, {} comments", s.stage_id, s.post_count, s.comment_count);
            }
        }
        Command::Agents {
            input,
            k,
            seed,
            embeddings,
            lexicon,
            out,
        } => {
            set(&mut cfg.k_agents, k);
            set(&mut cfg.seed, seed);
            set(&mut cfg.paths.embeddings, embeddings.map(Some));
            set(&mut cfg.paths.lexicon, lexicon.map(Some));
            cfg.check()?;
            let agents = pipeline::build_agents(&final_stage(&input)?, &cfg)?;
            write_agents(&out, &agents)?;
            println!("{} agents written to {}", agents.len(), out.display());
        }
        Command::Infer(a) => {
            set(&mut cfg.window_days, a.window_days);
            set(&mut cfg.maybe_min, a.maybe_min);
            set(&mut cfg.forsure_min, a.forsure_min);
            set(&mut cfg.level, a.level);
            cfg.check()?;
            let events = match (&a.events, &a.input) {
                (Some(p), _) => read_events(p)?,
                (None, Some(dir)) => {
                    let records = final_stage(dir)?;
                    let agents = match (cfg.level, &a.agents) {
                        (Level::Agent, Some(p)) => Some(read_agents(p)?),
                        (Level::Agent, None) => {
                            return Err(Error::Usage("--level agent needs --agents FILE".into()));
                        }
                        (Level::User, _) => None,
                    };
                    let (events, stats) = pipeline::events(&records, agents.as_deref())?;
                    let path = a.out.with_file_name("events.jsonl");
                    write_events(&path, &events)?;
                    println!(
                        "{} events ({} orphans, {} self-replies) written to {}",
                        stats.events,
                        stats.orphans,
                        stats.self_replies,
                        path.display()
                    );
                    events
                }
                (None, None) => return Err(Error::Usage("give --events FILE or --in DIR".into())),
            };
            let (_, edges) = pipeline::infer(&events, &cfg)?;
            write_edges_csv(&a.out, &edges)?;
            let timeline = a.timeline.unwrap_or_else(|| a.out.with_file_name("timeline.csv"));
            write_timeline_csv(&timeline, &event_timeline(&edges))?;
            println!("{} classified pairs written to {}", edges.len(), a.out.display());
        }
        Command::Graph {
            command:
                GraphCommand::Build {
                    edges,
                    class,
                    coverage,
                    agents,
                    out,
                },
        } => {
            set(&mut cfg.edge_class, class);
            set(&mut cfg.coverage, coverage);
            cfg.check()?;
            let format = ExportFormat::from_path(&out)?;
            let edges = read_edges_csv(&edges)?;
            let known: Vec<String> = match &agents {
                Some(p) => read_agents(p)?.into_iter().map(|a| a.agent_id).collect(),
                None => Vec::new(),
            };
            let spec = GraphSpec {
                keep_isolated: agents.is_some(),
                ..pipeline::graph_spec(&cfg)
            };
            let graph = spec.build(&edges, known.iter().map(String::as_str))?;
            export(&graph, format, &out)?;
            println!("{} nodes, {} edges written to {}", graph.node_count(), graph.edge_count(), out.display());
        }
        Command::Metrics { graph, seed, top_k, out } => {
            set(&mut cfg.seed, seed);
            set(&mut cfg.top_k, top_k);
            cfg.check()?;
            let g = import(&graph)?;
            let report = pipeline::report(&g, &cfg);
            pipeline::write_json(&out, &pipeline::metrics_json(&report, &cfg.digest()))?;
            println!("metrics for {} nodes, {} edges written to {}", report.nodes, report.edges, out.display());
        }
        Command::Triads {
            edges,
            interval_days,
            status_time,
            out,
        } => {
            set(&mut cfg.interval_days, interval_days);
            cfg.check()?;
            let closure = if status_time { ClosureTime::StatusTime } else { ClosureTime::FirstSeen };
            let series = triad_series(&read_edges_csv(&edges)?, cfg.interval_days.saturating_mul(DAY_SECS), closure)?;
            series.write_csv(&out)?;
            println!(
                "{} intervals, {} closed triads written to {}",
                series.intervals.len(),
                series.cumulative_all.last().copied().unwrap_or(0),
                out.display()
            );
        }
        Command::Chains {
            input,
            agents,
            threshold,
            top,
            census_thresholds,
            census,
            out,
        } => {
            set(&mut cfg.sim_threshold, threshold);
            set(&mut cfg.top_chains, top);
            set(&mut cfg.census_thresholds, census_thresholds);
            cfg.check()?;
            let profiles = agents.as_deref().map(read_agents).transpose()?;
            let result = pipeline::chains(&final_stage(&input)?, profiles.as_deref(), &cfg)?;
            write_chains_jsonl(&out, &result.top)?;
            let census = census.unwrap_or_else(|| out.with_file_name("census.csv"));
            write_census_csv(&census, &result.census)?;
            println!(
                "{} chains over {} threads ({} truncated), top {} written to {}",
                result.manifest.chains,
                result.manifest.threads,
                result.manifest.truncated_posts.len(),
                result.top.len(),
                out.display()
            );
        }
        Command::Sweep {
            events,
            windows,
            maybe,
            forsure,
            coverage,
            out,
        } => {
            cfg.check()?;
            let params = SweepParams {
                window_days: windows.unwrap_or(vec![cfg.window_days]),
                maybe_min: maybe.unwrap_or(vec![cfg.maybe_min]),
                forsure_min: forsure.unwrap_or(vec![cfg.forsure_min]),
                coverage: coverage.unwrap_or(vec![cfg.coverage]),
            };
            let base = AnalysisSpec {
                thresholds: pipeline::thresholds(&cfg)?,
                graph: pipeline::graph_spec(&cfg),
                metrics: pipeline::metrics_config(&cfg),
                known_nodes: Vec::new(),
            };
            let rows = sweep(&read_events(&events)?, &params, &base)?;
            write_sweep_csv(&out, &rows)?;
            println!("{} sweep cells written to {}", rows.len(), out.display());
        }
        Command::RunAll {
            posts,
            comments,
            out,
            domain,
            seed,
            replicate,
        } => {
            if let Some(d) = domain {
                if cli.config.is_none() {
                    cfg = RunConfig::for_domain(&d);
                }
                cfg.domain = d;
            }
            set(&mut cfg.paths.posts, posts.map(Some));
            set(&mut cfg.paths.comments, comments.map(Some));
            set(&mut cfg.paths.out, out.map(Some));
            set(&mut cfg.seed, seed);
            let summary = pipeline::run_all(&cfg, replicate)?;
            println!(
                "run complete: {} nodes, {} edges; artifacts in {}",
                summary.report.nodes,
                summary.report.edges,
                summary.out_dir.display()
            );
        }
        Command::Synth {
            posts,
            comments,
            seed,
            out,
        } => {
            let spec = if posts == SyntheticSpec::default().posts && comments == SyntheticSpec::default().comments {
                SyntheticSpec { seed, ..SyntheticSpec::default() }
            } else {
                SyntheticSpec::scaled(posts, comments, seed)
            };
            let dump = generate(&spec)?;
            let (p, c) = dump.write(&out)?;
            fs::write(out.join("planted.txt"), planted_summary(&dump.planted)).map_err(|e| Error::io(&out, e))?;
            println!("{} posts -> {}, {} comments -> {}", dump.posts.len(), p.display(), dump.comments.len(), c.display());
        }
        Command::Validate => {
            let diagnostics = cfg.validate();
            for d in &diagnostics {
                println!("{d}");
            }
            if !diagnostics.is_empty() {
                return Err(Error::Config(format!("{} problem(s) found", diagnostics.len())));
            }
            println!("config is valid");
        }
    }
    Ok(())
}

fn planted_summary(p: &latent_graph_core::synthetic::PlantedCounts) -> String {
    let mut s = String::from("stage,posts,comments,removed\n");
    for i in 0..7 {
        let removed: Vec<String> = p.removed[i].iter().map(|(k, v)| format!("{k}={v}")).collect();
        s.push_str(&format!("{i},{},{},{}\n", p.posts[i], p.comments[i], removed.join(";")));
    }
    s
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
