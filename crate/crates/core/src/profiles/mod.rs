//! User to agent aggregation: text vectors, clustering, and profile enrichment.

mod enrich;
mod kmeans;
mod vectorize;

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fs;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use enrich::{enrich, style_features, Lexicon};
pub use kmeans::{spherical_kmeans, DEFAULT_MAX_ITER};
pub use vectorize::{
    fnv1a64, tokenize, vectorize_user, HashingVectorizer, SparseVec, UserVector, DEFAULT_DIM,
    MIN_DIM,
};

use crate::error::{Error, Result};
use crate::ingest::RawRecord;

/// Id of the catch-all agent for users without usable text.
pub const RESIDUAL_AGENT: &str = "residual";
pub const RESIDUAL_LABEL: &str = "GeneralChat";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentProfile {
    pub agent_id: String,
    pub label: String,
    pub members: BTreeSet<String>,
    pub centroid: Vec<f64>,
    #[serde(default)]
    pub keywords: Vec<String>,
    #[serde(default)]
    pub emotion: BTreeMap<String, f64>,
    #[serde(default)]
    pub style: BTreeMap<String, f64>,
}

/// Default agent counts per domain.
pub fn default_agent_count(domain: &str) -> Option<usize> {
    match domain {
        "technology" | "tech" => Some(33),
        "climate" => Some(14),
        "covid" => Some(7),
        _ => None,
    }
}

/// Groups record texts by author, in `(created_utc, id)` order per author.
pub fn texts_by_author(records: &[RawRecord]) -> BTreeMap<String, Vec<String>> {
    let mut sorted: Vec<&RawRecord> = records.iter().collect();
    sorted.sort_by(|a, b| a.order_key().cmp(&b.order_key()));
    let mut out: BTreeMap<String, Vec<String>> = BTreeMap::new();
    for r in sorted {
        out.entry(r.author.clone()).or_default().push(r.text.clone());
    }
    out
}

/// Vectorizes every user, in user-id order.
pub fn vectorize_users(
    texts: &BTreeMap<String, Vec<String>>,
    vectorizer: &HashingVectorizer,
) -> Vec<UserVector> {
    let users: Vec<(&String, &Vec<String>)> = texts.iter().collect();
    users
        .par_iter()
        .map(|(u, t)| vectorize_user(u, t, vectorizer))
        .collect()
}

/// Partitions users into `k` agents by spherical k-means, plus a residual
/// agent for users whose vector is zero.
pub fn cluster_users(vectors: &[UserVector], k: usize, seed: u64) -> Result<Vec<AgentProfile>> {
    let mut sorted: Vec<&UserVector> = vectors.iter().collect();
    sorted.sort_by(|a, b| a.user.cmp(&b.user));
    if sorted.windows(2).any(|w| w[0].user == w[1].user) {
        return Err(Error::Config("duplicate user in vector set".into()));
    }
    let (usable, empty): (Vec<&UserVector>, Vec<&UserVector>) =
        sorted.into_iter().partition(|u| !u.vector.is_zero());
    if k == 0 || k > usable.len() {
        return Err(Error::Config(format!(
            "cannot form {k} agents from {} users with usable text",
            usable.len()
        )));
    }
    let points: Vec<&SparseVec> = usable.iter().map(|u| &u.vector).collect();
    let assign = spherical_kmeans(&points, k, seed, DEFAULT_MAX_ITER)?;
    let dim = points[0].dim();

    let mut groups: Vec<Vec<&UserVector>> = vec![Vec::new(); k];
    for (u, &a) in usable.iter().zip(&assign) {
        groups[a].push(u);
    }
    // usable is sorted, so groups[i][0] is the smallest member id
    groups.sort_by(|a, b| a[0].user.cmp(&b[0].user));

    let mut agents: Vec<AgentProfile> = groups
        .iter()
        .enumerate()
        .map(|(i, members)| {
            let mut centroid = vec![0.0; dim];
            for m in members {
                m.vector.add_to(&mut centroid);
            }
            let id = format!("A{i}");
            AgentProfile {
                label: id.clone(),
                agent_id: id,
                members: members.iter().map(|m| m.user.clone()).collect(),
                centroid: SparseVec::from_dense(&centroid).normalized().to_dense(),
                keywords: Vec::new(),
                emotion: BTreeMap::new(),
                style: BTreeMap::new(),
            }
        })
        .collect();
    if !empty.is_empty() {
        agents.push(AgentProfile {
            agent_id: RESIDUAL_AGENT.to_string(),
            label: RESIDUAL_LABEL.to_string(),
            members: empty.iter().map(|u| u.user.clone()).collect(),
            centroid: vec![0.0; dim],
            keywords: Vec::new(),
            emotion: BTreeMap::new(),
            style: BTreeMap::new(),
        });
    }
    Ok(agents)
}

/// Reads precomputed per-user embeddings: JSON lines of `{"user": .., "vector": [..]}`.
/// Vectors are normalized on load.
pub fn load_embeddings(path: &Path) -> Result<Vec<UserVector>> {
    #[derive(Deserialize)]
    struct Line {
        user: String,
        vector: Vec<f64>,
    }
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut out: Vec<UserVector> = Vec::new();
    for (i, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
        let l: Line = serde_json::from_str(line)
            .map_err(|e| Error::parse(path, format!("line {}: {e}", i + 1)))?;
        if let Some(first) = out.first() {
            if first.vector.dim() != l.vector.len() {
                return Err(Error::parse(path, format!("line {}: dimension mismatch", i + 1)));
            }
        }
        out.push(UserVector {
            user: l.user,
            vector: SparseVec::from_dense(&l.vector).normalized(),
            record_count: 1,
        });
    }
    Ok(out)
}

pub fn write_agents(path: &Path, agents: &[AgentProfile]) -> Result<()> {
    let mut text = serde_json::to_string_pretty(agents).map_err(|e| Error::parse(path, e))?;
    text.push('\n');
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn read_agents(path: &Path) -> Result<Vec<AgentProfile>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::parse(path, e))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AssignMode {
    /// Unknown authors are an error.
    Strict,
    /// Unknown authors map to the residual agent.
    Residual,
}

/// Author to agent lookup built from a profile set.
#[derive(Debug, Clone, Default)]
pub struct AgentIndex {
    by_user: HashMap<String, String>,
    agents: Vec<String>,
}

impl AgentIndex {
    pub fn new(profiles: &[AgentProfile]) -> Result<Self> {
        let mut by_user = HashMap::new();
        for p in profiles {
            for m in &p.members {
                if let Some(prev) = by_user.insert(m.clone(), p.agent_id.clone()) {
                    return Err(Error::Invariant(format!(
                        "user {m:?} belongs to both {prev} and {}",
                        p.agent_id
                    )));
                }
            }
        }
        let mut agents: Vec<String> = profiles.iter().map(|p| p.agent_id.clone()).collect();
        agents.sort();
        Ok(AgentIndex { by_user, agents })
    }

    /// Agent ids, sorted.
    pub fn agents(&self) -> &[String] {
        &self.agents
    }

    pub fn get(&self, author: &str) -> Option<&str> {
        self.by_user.get(author).map(String::as_str)
    }

    pub fn assign<'a>(&'a self, author: &str, mode: AssignMode) -> Result<&'a str> {
        match (self.get(author), mode) {
            (Some(a), _) => Ok(a),
            (None, AssignMode::Residual) => Ok(RESIDUAL_AGENT),
            (None, AssignMode::Strict) => Err(Error::UnmappedAuthor(author.to_string())),
        }
    }
}

/// The agent holding the record's author.
pub fn assign_agent<'a>(record: &RawRecord, index: &'a AgentIndex, mode: AssignMode) -> Result<&'a str> {
    index.assign(&record.author, mode)
}

/// Vectorizes, clusters and enriches every author of `records`.
pub fn build_profiles(
    records: &[RawRecord],
    k: usize,
    seed: u64,
    vectorizer: &HashingVectorizer,
    lexicon: &Lexicon,
    embeddings: Option<Vec<UserVector>>,
) -> Result<Vec<AgentProfile>> {
    let texts = texts_by_author(records);
    let vectors = match embeddings {
        None => vectorize_users(&texts, vectorizer),
        Some(mut given) => {
            // users without an embedding get a zero vector and land in the residual agent
            let dim = given.first().map_or(vectorizer.dim(), |u| u.vector.dim());
            let known: BTreeSet<String> = given.iter().map(|u| u.user.clone()).collect();
            given.retain(|u| texts.contains_key(&u.user));
            for (user, t) in &texts {
                if !known.contains(user) {
                    given.push(UserVector {
                        user: user.clone(),
                        vector: SparseVec::zeros(dim),
                        record_count: t.len(),
                    });
                }
            }
            given
        }
    };
    let agents = cluster_users(&vectors, k, seed)?;
    Ok(agents
        .into_par_iter()
        .map(|agent| {
            let member_texts: Vec<&[String]> = agent
                .members
                .iter()
                .map(|m| texts[m].as_slice())
                .collect();
            enrich(agent, &member_texts, vectorizer, lexicon)
        })
        .collect())
}
