//! Run configuration: one JSON document drives every pipeline stage.

use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::chains::Caps;
use crate::error::{Error, Result};
use crate::graph::EdgeClass;
use crate::ingest::{BotRule, NoiseRule, PreprocessConfig};
use crate::profiles::{default_agent_count, MIN_DIM};

/// Node granularity of the inferred graph.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Level {
    #[default]
    Agent,
    User,
}

impl FromStr for Level {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "agent" => Ok(Level::Agent),
            "user" => Ok(Level::User),
            other => Err(Error::Usage(format!("unknown level {other:?} (agent|user)"))),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Paths {
    pub posts: Option<PathBuf>,
    pub comments: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub lexicon: Option<PathBuf>,
    pub embeddings: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub domain: String,
    pub window_days: i64,
    pub maybe_min: u64,
    pub forsure_min: u64,
    pub coverage: f64,
    pub sim_threshold: f64,
    pub k_agents: usize,
    pub seed: u64,
    pub max_comments_per_post: usize,
    pub min_interactions: usize,
    pub level: Level,
    pub edge_class: EdgeClass,
    pub vector_dim: usize,
    pub interval_days: i64,
    pub top_chains: usize,
    pub max_chains_per_post: usize,
    pub max_chain_depth: usize,
    pub census_thresholds: Vec<f64>,
    pub top_k: usize,
    pub bots: BotRule,
    pub noise: NoiseRule,
    pub paths: Paths,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            domain: "technology".into(),
            window_days: 30,
            maybe_min: 2,
            forsure_min: 3,
            coverage: 0.0001,
            sim_threshold: 0.1,
            k_agents: 33,
            seed: 42,
            max_comments_per_post: 10,
            min_interactions: 2,
            level: Level::Agent,
            edge_class: EdgeClass::All,
            vector_dim: 4096,
            interval_days: 182,
            top_chains: 35,
            max_chains_per_post: 200,
            max_chain_depth: 64,
            census_thresholds: vec![0.1, 0.2, 0.3, 0.4, 0.5],
            top_k: 10,
            bots: BotRule::default(),
            noise: NoiseRule::default(),
            paths: Paths::default(),
        }
    }
}

impl RunConfig {
    /// Defaults for a named domain; unknown domains keep the default agent count.
    pub fn for_domain(domain: &str) -> Self {
        RunConfig {
            domain: domain.to_string(),
            k_agents: default_agent_count(domain).unwrap_or(RunConfig::default().k_agents),
            ..RunConfig::default()
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    pub fn to_json_pretty(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("config serializes");
        s.push('\n');
        s
    }

    /// Every violated invariant, in field order. Empty means valid.
    pub fn validate(&self) -> Vec<String> {
        let mut d = Vec::new();
        let mut positive = |name: &str, v: i128| {
            if v < 1 {
                d.push(format!("{name} must be at least 1 (got {v})"));
            }
        };
        positive("window_days", self.window_days as i128);
        positive("maybe_min", self.maybe_min as i128);
        positive("forsure_min", self.forsure_min as i128);
        positive("k_agents", self.k_agents as i128);
        positive("max_comments_per_post", self.max_comments_per_post as i128);
        positive("min_interactions", self.min_interactions as i128);
        positive("interval_days", self.interval_days as i128);
        positive("top_chains", self.top_chains as i128);
        positive("max_chains_per_post", self.max_chains_per_post as i128);
        positive("max_chain_depth", self.max_chain_depth as i128);
        positive("top_k", self.top_k as i128);
        if self.maybe_min > self.forsure_min {
            d.push(format!(
                "maybe_min ({}) must not exceed forsure_min ({})",
                self.maybe_min, self.forsure_min
            ));
        }
        if !(0.0..=1.0).contains(&self.coverage) {
            d.push(format!("coverage must lie in [0, 1] (got {})", self.coverage));
        }
        if !(self.sim_threshold > 0.0 && self.sim_threshold < 1.0) {
            d.push(format!("sim_threshold must lie in (0, 1) (got {})", self.sim_threshold));
        }
        if let Some(t) = self.census_thresholds.iter().find(|t| !(**t > 0.0 && **t < 1.0)) {
            d.push(format!("census_thresholds must lie in (0, 1) (got {t})"));
        }
        if self.vector_dim < MIN_DIM {
            d.push(format!("vector_dim must be at least {MIN_DIM} (got {})", self.vector_dim));
        }
        d
    }

    /// Fails with a config error listing every diagnostic.
    pub fn check(&self) -> Result<()> {
        let d = self.validate();
        if d.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(d.join("; ")))
        }
    }

    /// The configuration without its output directory, as echoed into outputs.
    pub fn echo(&self) -> RunConfig {
        let mut c = self.clone();
        c.paths.out = None;
        c
    }

    /// SHA-256 of the echoed configuration's compact JSON.
    pub fn digest(&self) -> String {
        let bytes = serde_json::to_vec(&self.echo()).expect("config serializes");
        hex::encode(Sha256::digest(bytes))
    }

    pub fn preprocess(&self) -> PreprocessConfig {
        PreprocessConfig {
            max_comments_per_post: self.max_comments_per_post,
            min_interactions: self.min_interactions,
            bots: self.bots.clone(),
            noise: self.noise.clone(),
        }
    }

    pub fn caps(&self) -> Caps {
        Caps {
            max_chains: self.max_chains_per_post,
            max_depth: self.max_chain_depth,
        }
    }
}
