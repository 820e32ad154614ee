//! Individual record filters. Each takes ownership of a record set and reports
//! how many records it dropped.

use std::collections::{BTreeMap, HashMap, HashSet};

use serde::{Deserialize, Serialize};

use super::{RawRecord, StageSnapshot};

/// Output of one filter.
#[derive(Debug, Clone, PartialEq)]
pub struct Filtered {
    pub kept: Vec<RawRecord>,
    pub removed: usize,
}

impl Filtered {
    fn from_retain(mut records: Vec<RawRecord>, keep: impl FnMut(&RawRecord) -> bool) -> Self {
        let before = records.len();
        records.retain(keep);
        Filtered {
            removed: before - records.len(),
            kept: records,
        }
    }

    /// Wraps the kept records as a snapshot whose manifest names this filter.
    pub fn into_snapshot(self, stage_id: u8, name: &str) -> StageSnapshot {
        let mut removed = BTreeMap::new();
        removed.insert(name.to_string(), self.removed);
        StageSnapshot::new(stage_id, self.kept, removed)
    }
}

/// Author-level bot heuristic.
///
/// An author is a bot when it is on the deny-list, when its name ends in
/// `suffix` (case-insensitive), or when it has more than `burst_limit` records
/// inside any `burst_window_secs` span.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BotRule {
    pub denylist: Vec<String>,
    pub suffix: Option<String>,
    pub burst_limit: usize,
    pub burst_window_secs: i64,
}

impl Default for BotRule {
    fn default() -> Self {
        BotRule {
            denylist: vec!["AutoModerator".to_string()],
            suffix: Some("bot".to_string()),
            burst_limit: 500,
            burst_window_secs: 86_400,
        }
    }
}

impl BotRule {
    pub fn matches_name(&self, author: &str) -> bool {
        if self.denylist.iter().any(|d| d == author) {
            return true;
        }
        match &self.suffix {
            Some(suffix) if !suffix.is_empty() => author
                .to_lowercase()
                .ends_with(suffix.to_lowercase().as_str()),
            _ => false,
        }
    }

    /// Authors exceeding the burst limit within one window.
    pub fn bursting_authors<'a>(&self, records: &'a [RawRecord]) -> HashSet<&'a str> {
        let mut times: HashMap<&str, Vec<i64>> = HashMap::new();
        for r in records {
            times.entry(r.author.as_str()).or_default().push(r.created_utc);
        }
        times
            .into_iter()
            .filter(|(_, ts)| ts.len() > self.burst_limit)
            .filter_map(|(author, mut ts)| {
                ts.sort_unstable();
                let mut lo = 0;
                for hi in 0..ts.len() {
                    while ts[hi] - ts[lo] >= self.burst_window_secs {
                        lo += 1;
                    }
                    if hi - lo + 1 > self.burst_limit {
                        return Some(author);
                    }
                }
                None
            })
            .collect()
    }
}

pub fn filter_bots(records: Vec<RawRecord>, rule: &BotRule) -> Filtered {
    let bursting: HashSet<String> = rule
        .bursting_authors(&records)
        .into_iter()
        .map(str::to_string)
        .collect();
    Filtered::from_retain(records, |r| {
        !(rule.matches_name(&r.author) || bursting.contains(&r.author))
    })
}

/// Minimal low-quality content rule: very short text, or text made only of URLs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NoiseRule {
    pub min_chars: usize,
    pub drop_url_only: bool,
}

impl Default for NoiseRule {
    fn default() -> Self {
        NoiseRule {
            min_chars: 3,
            drop_url_only: true,
        }
    }
}

fn is_url(token: &str) -> bool {
    let t = token.to_ascii_lowercase();
    t.starts_with("http://") || t.starts_with("https://") || t.starts_with("www.")
}

impl NoiseRule {
    pub fn is_noise(&self, text: &str) -> bool {
        let trimmed = text.trim();
        if trimmed.chars().count() < self.min_chars {
            return true;
        }
        self.drop_url_only && trimmed.split_whitespace().all(is_url)
    }
}

pub fn filter_noise(records: Vec<RawRecord>, rule: &NoiseRule) -> Filtered {
    Filtered::from_retain(records, |r| !rule.is_noise(&r.text))
}

/// Keeps the `max_per_post` earliest comments of each post, ordered by
/// `(created_utc, id)`. Posts pass through untouched.
pub fn truncate_comments(records: Vec<RawRecord>, max_per_post: usize) -> Filtered {
    let mut by_post: HashMap<&str, Vec<(i64, &str)>> = HashMap::new();
    for r in records.iter().filter(|r| !r.is_post()) {
        let link = r.link_id.as_deref().unwrap_or_default();
        by_post.entry(link).or_default().push(r.order_key());
    }
    let mut dropped: HashSet<String> = HashSet::new();
    for comments in by_post.values_mut() {
        if comments.len() > max_per_post {
            comments.sort_unstable();
            dropped.extend(comments[max_per_post..].iter().map(|(_, id)| id.to_string()));
        }
    }
    Filtered::from_retain(records, |r| r.is_post() || !dropped.contains(&r.id))
}

/// Drops every record of authors with fewer than `min_interactions` records.
pub fn threshold_activity(records: Vec<RawRecord>, min_interactions: usize) -> Filtered {
    let mut counts: HashMap<String, usize> = HashMap::new();
    for r in &records {
        *counts.entry(r.author.clone()).or_default() += 1;
    }
    Filtered::from_retain(records, |r| counts[&r.author] >= min_interactions)
}

pub fn is_deleted(record: &RawRecord) -> bool {
    let text = record.text.trim();
    record.author == "[deleted]" || text == "[removed]" || text == "[deleted]"
}

pub fn drop_deleted(records: Vec<RawRecord>) -> Filtered {
    Filtered::from_retain(records, |r| !is_deleted(r))
}
