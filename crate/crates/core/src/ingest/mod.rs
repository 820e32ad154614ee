//! Dump ingestion and the staged preprocessing pipeline.
//!
//! Stage numbering follows the seven-step preprocessing ledger:
//!
//! | stage | step                                              |
//! |-------|---------------------------------------------------|
//! | 0     | raw data                                          |
//! | 1     | bot removal, noise filtering, comment truncation  |
//! | 2     | user activity thresholding                        |
//! | 3     | removal of deleted/removed posts and comments     |
//! | 4     | feature extraction (identity on records)          |
//! | 5     | enrichment (identity on records)                  |
//! | 6     | inference handoff (identity on records)           |

mod filters;
mod parse;
mod store;

use std::collections::BTreeMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

pub use filters::{
    drop_deleted, filter_bots, filter_noise, is_deleted, threshold_activity, truncate_comments,
    BotRule, Filtered, NoiseRule,
};
pub use parse::{parse_dump, parse_reader, DumpReader, ParseStats, ParsedDump};
pub use store::{read_manifest, read_records, read_stage, write_records, write_stages};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RecordKind {
    Post,
    Comment,
}

/// One post or comment.
///
/// Posts carry `title + " " + selftext` as their text; comments carry the body.
/// `link_id` and `parent_id` are stored without the `t1_`/`t3_` type prefix.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RawRecord {
    pub id: String,
    pub kind: RecordKind,
    pub author: String,
    pub created_utc: i64,
    pub text: String,
    pub subreddit: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub link_id: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub parent_id: Option<String>,
}

impl RawRecord {
    pub fn post(id: &str, author: &str, created_utc: i64, text: &str) -> Self {
        RawRecord {
            id: id.to_string(),
            kind: RecordKind::Post,
            author: author.to_string(),
            created_utc,
            text: text.to_string(),
            subreddit: String::new(),
            link_id: None,
            parent_id: None,
        }
    }

    pub fn comment(
        id: &str,
        author: &str,
        created_utc: i64,
        text: &str,
        link_id: &str,
        parent_id: &str,
    ) -> Self {
        RawRecord {
            id: id.to_string(),
            kind: RecordKind::Comment,
            author: author.to_string(),
            created_utc,
            text: text.to_string(),
            subreddit: String::new(),
            link_id: Some(link_id.to_string()),
            parent_id: Some(parent_id.to_string()),
        }
    }

    pub fn is_post(&self) -> bool {
        self.kind == RecordKind::Post
    }

    /// Checks the kind/linkage and timestamp invariants.
    pub fn validate(&self) -> std::result::Result<(), String> {
        if self.id.is_empty() {
            return Err("empty id".into());
        }
        if self.created_utc <= 0 {
            return Err(format!("created_utc {} is not positive", self.created_utc));
        }
        let linked = |v: &Option<String>| v.as_deref().is_some_and(|s| !s.is_empty());
        match self.kind {
            RecordKind::Comment if !(linked(&self.link_id) && linked(&self.parent_id)) => {
                Err("comment without link_id/parent_id".into())
            }
            RecordKind::Post if self.link_id.is_some() || self.parent_id.is_some() => {
                Err("post with link_id/parent_id".into())
            }
            _ => Ok(()),
        }
    }

    /// Total order used for every deterministic merge: `(created_utc, id)`.
    pub fn order_key(&self) -> (i64, &str) {
        (self.created_utc, &self.id)
    }
}

/// Sorts records by `(created_utc, id)`.
pub fn sort_records(records: &mut [RawRecord]) {
    records.sort_by(|a, b| a.order_key().cmp(&b.order_key()));
}

/// Immutable record set plus manifest after one preprocessing stage.
#[derive(Debug, Clone, PartialEq)]
pub struct StageSnapshot {
    pub stage_id: u8,
    pub post_count: usize,
    pub comment_count: usize,
    pub records: Arc<Vec<RawRecord>>,
    pub removed: BTreeMap<String, usize>,
}

/// The JSON manifest persisted as `stageK.manifest.json`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageManifest {
    pub stage_id: u8,
    pub post_count: usize,
    pub comment_count: usize,
    pub removed: BTreeMap<String, usize>,
}

impl StageSnapshot {
    pub fn new(stage_id: u8, mut records: Vec<RawRecord>, removed: BTreeMap<String, usize>) -> Self {
        sort_records(&mut records);
        let post_count = records.iter().filter(|r| r.is_post()).count();
        StageSnapshot {
            stage_id,
            post_count,
            comment_count: records.len() - post_count,
            records: Arc::new(records),
            removed,
        }
    }

    /// Same records under a new stage id, with no removals.
    pub fn carry(&self, stage_id: u8) -> Self {
        StageSnapshot {
            stage_id,
            post_count: self.post_count,
            comment_count: self.comment_count,
            records: Arc::clone(&self.records),
            removed: BTreeMap::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn manifest(&self) -> StageManifest {
        StageManifest {
            stage_id: self.stage_id,
            post_count: self.post_count,
            comment_count: self.comment_count,
            removed: self.removed.clone(),
        }
    }

    pub fn total_removed(&self) -> usize {
        self.removed.values().sum()
    }
}

/// Language predicate; records for which it returns `false` are dropped in stage 1.
pub type LanguagePredicate = Arc<dyn Fn(&RawRecord) -> bool + Send + Sync>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PreprocessConfig {
    pub max_comments_per_post: usize,
    pub min_interactions: usize,
    pub bots: BotRule,
    pub noise: NoiseRule,
}

impl Default for PreprocessConfig {
    fn default() -> Self {
        PreprocessConfig {
            max_comments_per_post: 10,
            min_interactions: 2,
            bots: BotRule::default(),
            noise: NoiseRule::default(),
        }
    }
}

pub const BOT_REMOVAL: &str = "bot_removal";
pub const NOISE_REMOVAL: &str = "noise_removal";
pub const LANGUAGE_FILTER: &str = "language_filter";
pub const TRUNCATION: &str = "truncation";
pub const ACTIVITY_THRESHOLD: &str = "activity_threshold";
pub const DELETED_REMOVAL: &str = "deleted_removal";

/// Runs stages 1 through 6 over a stage-0 snapshot.
#[derive(Clone, Default)]
pub struct Preprocessor {
    config: PreprocessConfig,
    language: Option<LanguagePredicate>,
}

impl Preprocessor {
    pub fn new(config: PreprocessConfig) -> Self {
        Preprocessor {
            config,
            language: None,
        }
    }

    pub fn with_language_filter(mut self, predicate: LanguagePredicate) -> Self {
        self.language = Some(predicate);
        self
    }

    pub fn config(&self) -> &PreprocessConfig {
        &self.config
    }

    pub fn stage1(&self, input: &StageSnapshot) -> StageSnapshot {
        let mut removed = BTreeMap::new();
        let step = filter_bots(input.records.to_vec(), &self.config.bots);
        removed.insert(BOT_REMOVAL.to_string(), step.removed);
        let step = filter_noise(step.kept, &self.config.noise);
        removed.insert(NOISE_REMOVAL.to_string(), step.removed);
        let mut kept = step.kept;
        if let Some(lang) = &self.language {
            let before = kept.len();
            kept.retain(|r| lang(r));
            removed.insert(LANGUAGE_FILTER.to_string(), before - kept.len());
        }
        let step = truncate_comments(kept, self.config.max_comments_per_post);
        removed.insert(TRUNCATION.to_string(), step.removed);
        StageSnapshot::new(1, step.kept, removed)
    }

    pub fn stage2(&self, input: &StageSnapshot) -> StageSnapshot {
        threshold_activity(input.records.to_vec(), self.config.min_interactions)
            .into_snapshot(2, ACTIVITY_THRESHOLD)
    }

    pub fn stage3(&self, input: &StageSnapshot) -> StageSnapshot {
        drop_deleted(input.records.to_vec()).into_snapshot(3, DELETED_REMOVAL)
    }

    /// Produces all seven snapshots, stage 0 included.
    pub fn run(&self, stage0: StageSnapshot) -> Result<Vec<StageSnapshot>> {
        if stage0.stage_id != 0 {
            return Err(Error::Usage(format!(
                "pipeline input must be a stage-0 snapshot, got stage {}",
                stage0.stage_id
            )));
        }
        let s1 = self.stage1(&stage0);
        let s2 = self.stage2(&s1);
        let s3 = self.stage3(&s2);
        let s4 = s3.carry(4);
        let s5 = s3.carry(5);
        let s6 = s3.carry(6);
        let stages = vec![stage0, s1, s2, s3, s4, s5, s6];
        check_ledger(&stages)?;
        Ok(stages)
    }
}

/// Verifies monotone counts and removal conservation between consecutive stages.
pub fn check_ledger(stages: &[StageSnapshot]) -> Result<()> {
    for pair in stages.windows(2) {
        let (prev, next) = (&pair[0], &pair[1]);
        if next.stage_id <= prev.stage_id {
            return Err(Error::Invariant(format!(
                "stage ids not increasing: {} then {}",
                prev.stage_id, next.stage_id
            )));
        }
        if next.post_count > prev.post_count || next.comment_count > prev.comment_count {
            return Err(Error::Invariant(format!(
                "counts increased from stage {} to {}",
                prev.stage_id, next.stage_id
            )));
        }
        if prev.len() != next.len() + next.total_removed() {
            return Err(Error::Invariant(format!(
                "stage {}: {} in, {} out, {} removed",
                next.stage_id,
                prev.len(),
                next.len(),
                next.total_removed()
            )));
        }
    }
    Ok(())
}

/// Builds the stage-0 snapshot from parsed posts and comments.
pub fn stage0(posts: Vec<RawRecord>, comments: Vec<RawRecord>) -> StageSnapshot {
    let mut records = posts;
    records.extend(comments);
    StageSnapshot::new(0, records, BTreeMap::new())
}
