//! Seeded synthetic post/comment dumps with planted removals.
//!
//! Every record that preprocessing should drop is planted deliberately, so
//! the expected per-stage counts are known by construction:
//!
//! * name bots and one burst bot only ever comment; they go at stage 1,
//! * noise comments come from active users and go at stage 1,
//! * overlong threads hold `10 + x` regular comments, losing `x` at stage 1,
//! * one-off authors comment once and go at stage 2,
//! * `[deleted]` authors and `[removed]` bodies survive stage 2 and go at stage 3.

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::json;

use crate::error::{Error, Result};
use crate::ingest::{
    RawRecord, ACTIVITY_THRESHOLD, BOT_REMOVAL, DELETED_REMOVAL, NOISE_REMOVAL, TRUNCATION,
};

const TOPICS: [&[&str]; 8] = [
    &["solar", "wind", "turbine", "grid", "battery", "panel", "hydro", "storage", "inverter", "megawatt"],
    &["vaccine", "mask", "symptom", "fever", "clinic", "booster", "variant", "lockdown", "testing", "immunity"],
    &["compiler", "rust", "kernel", "thread", "memory", "borrow", "crate", "linker", "syntax", "runtime"],
    &["glacier", "carbon", "emission", "warming", "ocean", "drought", "sealevel", "methane", "forest", "heatwave"],
    &["gpu", "laptop", "monitor", "keyboard", "benchmark", "cooling", "chipset", "firmware", "driver", "overclock"],
    &["election", "senate", "ballot", "policy", "campaign", "debate", "voter", "congress", "governor", "poll"],
    &["recipe", "oven", "flour", "garlic", "simmer", "noodle", "spice", "butter", "skillet", "bake"],
    &["telescope", "galaxy", "orbit", "rocket", "nebula", "comet", "launch", "lunar", "planet", "satellite"],
];

const FILLER: [&str; 12] = [
    "think", "really", "maybe", "people", "agree", "point", "lately", "interesting", "source", "question", "good",
    "idea",
];

const NOISE_TEXTS: [&str; 4] = ["ok", "k", "https://example.com/x", "http://a.io https://b.io"];

const MAX_KEPT: usize = 10;
/// One more than the default burst limit.
const BURST_RECORDS: usize = 501;
const START: i64 = 1_577_836_800;
const DAY: i64 = 86_400;

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSpec {
    pub seed: u64,
    pub posts: usize,
    /// Approximate number of comments, planted ones included.
    pub comments: usize,
    pub topics: usize,
    pub span_days: i64,
    pub name_bots: usize,
    pub bot_comments: usize,
    pub burst_bot: bool,
    pub noise: usize,
    pub overlong_threads: usize,
    pub singletons: usize,
    pub deleted_author_records: usize,
    pub removed_bodies: usize,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        SyntheticSpec {
            seed: 7,
            posts: 300,
            comments: 1_800,
            topics: 6,
            span_days: 365,
            name_bots: 3,
            bot_comments: 12,
            burst_bot: true,
            noise: 25,
            overlong_threads: 8,
            singletons: 15,
            deleted_author_records: 20,
            removed_bodies: 10,
        }
    }
}

impl SyntheticSpec {
    /// Default planting at a different size.
    pub fn scaled(posts: usize, comments: usize, seed: u64) -> Self {
        let f = (posts as f64 / 300.0).max(1.0);
        let base = SyntheticSpec::default();
        SyntheticSpec {
            seed,
            posts,
            comments,
            topics: 8,
            noise: (base.noise as f64 * f) as usize,
            overlong_threads: (base.overlong_threads as f64 * f) as usize,
            singletons: (base.singletons as f64 * f) as usize,
            deleted_author_records: (base.deleted_author_records as f64 * f) as usize,
            removed_bodies: (base.removed_bodies as f64 * f) as usize,
            ..base
        }
    }
}

/// Expected counts after each of the seven stages.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PlantedCounts {
    pub posts: [usize; 7],
    pub comments: [usize; 7],
    pub removed: [BTreeMap<String, usize>; 7],
}

#[derive(Debug, Clone)]
pub struct SyntheticDump {
    pub posts: Vec<RawRecord>,
    pub comments: Vec<RawRecord>,
    pub planted: PlantedCounts,
}

struct Builder {
    rng: ChaCha8Rng,
    topics: usize,
    comments: Vec<RawRecord>,
}

impl Builder {
    fn text(&mut self, topic: usize) -> String {
        let words = TOPICS[topic % self.topics.min(TOPICS.len())];
        let n = self.rng.gen_range(5..12);
        (0..n)
            .map(|_| {
                if self.rng.gen_bool(0.8) {
                    words[self.rng.gen_range(0..words.len())]
                } else {
                    FILLER[self.rng.gen_range(0..FILLER.len())]
                }
            })
            .collect::<Vec<_>>()
            .join(" ")
    }

    fn comment(&mut self, author: &str, time: i64, text: &str, post: &str, parent: &str) -> String {
        let id = format!("c{:07}", self.comments.len());
        self.comments.push(RawRecord::comment(&id, author, time, text, post, parent));
        id
    }
}

/// Thread bookkeeping while generating.
struct ThreadSlot {
    post: String,
    time: i64,
    /// Regular comment ids, usable as reply parents.
    regular: Vec<String>,
    /// Comments that survive stage-1 filtering except truncation.
    counted: usize,
    last: i64,
}

pub fn generate(spec: &SyntheticSpec) -> Result<SyntheticDump> {
    if spec.posts == 0 || spec.topics == 0 || spec.span_days < 1 {
        return Err(Error::Usage("synthetic dump needs posts, topics and a positive span".into()));
    }
    if spec.deleted_author_records == 1 {
        return Err(Error::Usage("a single [deleted] record would fall to the activity threshold".into()));
    }
    if spec.overlong_threads > spec.posts {
        return Err(Error::Usage("more overlong threads than posts".into()));
    }
    let mut b = Builder {
        rng: ChaCha8Rng::seed_from_u64(spec.seed),
        topics: spec.topics,
        comments: Vec::new(),
    };
    let planted_extra = spec.noise + spec.singletons + spec.deleted_author_records + spec.removed_bodies;
    let burst = if spec.burst_bot { BURST_RECORDS } else { 0 };
    let regular_target = spec.comments.saturating_sub(planted_extra + spec.name_bots * spec.bot_comments + burst);
    let users = (regular_target / 12).max(10);
    let user_topic: Vec<usize> = (0..users).map(|i| i % spec.topics).collect();
    let user_name = |i: usize| format!("user{i:05}");

    // posts
    let mut posts = Vec::with_capacity(spec.posts);
    let mut threads = Vec::with_capacity(spec.posts);
    for p in 0..spec.posts {
        let author = b.rng.gen_range(0..users);
        let time = START + b.rng.gen_range(0..spec.span_days * DAY);
        let id = format!("p{p:06}");
        let text = b.text(user_topic[author]);
        posts.push(RawRecord::post(&id, &user_name(author), time, &text));
        threads.push(ThreadSlot {
            post: id,
            time,
            regular: Vec::new(),
            counted: 0,
            last: time,
        });
    }
    let mut order: Vec<usize> = (0..spec.posts).collect();
    order.shuffle(&mut b.rng);
    let (overlong, short) = order.split_at(spec.overlong_threads);
    let mut short = short.to_vec();
    short.sort_unstable();

    // regular comments on short threads: the first pass gives every user two records
    let mut next_user = 0usize;
    let per_short = |rng: &mut ChaCha8Rng| rng.gen_range(3..=MAX_KEPT - 2);
    let mut budget: Vec<usize> = short.iter().map(|_| per_short(&mut b.rng)).collect();
    // overlong threads average 13 comments; bring short threads to the rest
    let short_target = regular_target.saturating_sub(spec.overlong_threads * (MAX_KEPT + 3));
    let total: usize = budget.iter().sum();
    if short_target > 0 {
        let scale = short_target as f64 / total as f64;
        budget
            .iter_mut()
            .for_each(|n| *n = ((*n as f64 * scale).round() as usize).clamp(1, MAX_KEPT - 2));
        // rounding and clamping drift; settle the remainder one comment at a time
        let mut sum: usize = budget.iter().sum();
        let mut i = 0;
        let mut stalled = 0;
        let len = budget.len();
        while sum != short_target && stalled < len {
            let n = &mut budget[i % len];
            if sum < short_target && *n < MAX_KEPT - 2 {
                *n += 1;
                sum += 1;
                stalled = 0;
            } else if sum > short_target && *n > 1 {
                *n -= 1;
                sum -= 1;
                stalled = 0;
            } else {
                stalled += 1;
            }
            i += 1;
        }
    }
    if budget.iter().sum::<usize>() < 2 * users {
        return Err(Error::Usage("too few comments to give every user two records".into()));
    }
    for (slot, &n) in short.iter().zip(&budget) {
        let post_topic = topic_of(&posts[*slot], &user_topic);
        for _ in 0..n {
            let author = if next_user < 2 * users {
                next_user += 1;
                (next_user - 1) % users
            } else {
                same_topic_user(&mut b.rng, &user_topic, post_topic)
            };
            add_regular(&mut b, &mut threads[*slot], &user_name(author), user_topic[author]);
        }
    }

    // overlong threads: 10 + x regular comments
    let mut truncated = 0;
    for &slot in overlong {
        let x = b.rng.gen_range(1..=5);
        truncated += x;
        let post_topic = topic_of(&posts[slot], &user_topic);
        for _ in 0..MAX_KEPT + x {
            let author = same_topic_user(&mut b.rng, &user_topic, post_topic);
            add_regular(&mut b, &mut threads[slot], &user_name(author), user_topic[author]);
        }
    }

    // planted records that count toward truncation go where there is room
    let mut room: Vec<usize> = short.clone();
    let mut place = |b: &mut Builder, threads: &mut [ThreadSlot], author: &str, text: &str| -> Result<()> {
        loop {
            if room.is_empty() {
                return Err(Error::Usage("no thread has room for planted records".into()));
            }
            let k = b.rng.gen_range(0..room.len());
            let t = &mut threads[room[k]];
            if t.counted >= MAX_KEPT {
                room.swap_remove(k);
                continue;
            }
            t.counted += 1;
            let time = t.time + b.rng.gen_range(60..3 * DAY);
            let post = t.post.clone();
            b.comment(author, time, text, &post, &post);
            return Ok(());
        }
    };
    for i in 0..spec.singletons {
        let text = b.text(i);
        place(&mut b, &mut threads, &format!("solo{i:04}"), &text)?;
    }
    for i in 0..spec.deleted_author_records {
        let text = b.text(i);
        place(&mut b, &mut threads, "[deleted]", &text)?;
    }
    for _ in 0..spec.removed_bodies {
        let u = b.rng.gen_range(0..users);
        place(&mut b, &mut threads, &user_name(u), "[removed]")?;
    }

    // records removed before truncation can go anywhere short
    let mut bots = 0;
    for i in 0..spec.name_bots {
        let name = if i == 0 { "AutoModerator".to_string() } else { format!("news_{i}_bot") };
        for _ in 0..spec.bot_comments {
            let t = &threads[short[b.rng.gen_range(0..short.len())]];
            let (post, time) = (t.post.clone(), t.time + b.rng.gen_range(1..DAY));
            b.comment(&name, time, "Your submission was automatically reviewed.", &post, &post);
            bots += 1;
        }
    }
    if spec.burst_bot {
        let t0 = START + b.rng.gen_range(0..spec.span_days * DAY);
        for j in 0..BURST_RECORDS as i64 {
            let t = &threads[short[b.rng.gen_range(0..short.len())]];
            let post = t.post.clone();
            b.comment("trend_watcher", t0 + j * 60, "Trending now in this community", &post, &post);
            bots += 1;
        }
    }
    for _ in 0..spec.noise {
        let u = b.rng.gen_range(0..users);
        let t = &threads[short[b.rng.gen_range(0..short.len())]];
        let (post, time) = (t.post.clone(), t.time + b.rng.gen_range(60..DAY));
        let text = NOISE_TEXTS[b.rng.gen_range(0..NOISE_TEXTS.len())];
        b.comment(&user_name(u), time, text, &post, &post);
    }

    let total_comments = b.comments.len();
    let deleted = spec.deleted_author_records + spec.removed_bodies;
    let s1 = total_comments - bots - spec.noise - truncated;
    let s2 = s1 - spec.singletons;
    let s3 = s2 - deleted;
    let removed = |pairs: &[(&str, usize)]| pairs.iter().map(|&(k, v)| (k.to_string(), v)).collect();
    let planted = PlantedCounts {
        posts: [spec.posts; 7],
        comments: [total_comments, s1, s2, s3, s3, s3, s3],
        removed: [
            BTreeMap::new(),
            removed(&[(BOT_REMOVAL, bots), (NOISE_REMOVAL, spec.noise), (TRUNCATION, truncated)]),
            removed(&[(ACTIVITY_THRESHOLD, spec.singletons)]),
            removed(&[(DELETED_REMOVAL, deleted)]),
            BTreeMap::new(),
            BTreeMap::new(),
            BTreeMap::new(),
        ],
    };
    Ok(SyntheticDump {
        posts,
        comments: b.comments,
        planted,
    })
}

fn topic_of(post: &RawRecord, user_topic: &[usize]) -> usize {
    let idx: usize = post.author[4..].parse().expect("generated user name");
    user_topic[idx]
}

fn same_topic_user(rng: &mut ChaCha8Rng, user_topic: &[usize], topic: usize) -> usize {
    // mostly on-topic, sometimes anyone
    loop {
        let u = rng.gen_range(0..user_topic.len());
        if user_topic[u] == topic || rng.gen_bool(0.03) {
            return u;
        }
    }
}

fn add_regular(b: &mut Builder, t: &mut ThreadSlot, author: &str, topic: usize) {
    let parent = if t.regular.is_empty() || b.rng.gen_bool(0.4) {
        t.post.clone()
    } else {
        t.regular[b.rng.gen_range(0..t.regular.len())].clone()
    };
    // strictly increasing times, so parents always precede replies
    let time = t.last + b.rng.gen_range(60..6 * 3_600);
    t.last = time;
    let text = b.text(topic);
    let post = t.post.clone();
    let id = b.comment(author, time, &text, &post, &parent);
    t.regular.push(id);
    t.counted += 1;
}

impl SyntheticDump {
    /// Writes `posts.jsonl` and `comments.jsonl` in the dump schema.
    pub fn write(&self, dir: &Path) -> Result<(PathBuf, PathBuf)> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let posts = dir.join("posts.jsonl");
        let comments = dir.join("comments.jsonl");
        write_lines(&posts, self.posts.iter().map(|p| {
            json!({
                "id": p.id,
                "author": p.author,
                "created_utc": p.created_utc,
                "title": p.text,
                "selftext": "",
                "subreddit": "synthetic",
            })
        }))?;
        write_lines(&comments, self.comments.iter().map(|c| {
            let parent = c.parent_id.as_deref().unwrap_or_default();
            let prefix = if parent.starts_with('p') { "t3_" } else { "t1_" };
            json!({
                "id": c.id,
                "author": c.author,
                "created_utc": c.created_utc,
                "body": c.text,
                "subreddit": "synthetic",
                "link_id": format!("t3_{}", c.link_id.as_deref().unwrap_or_default()),
                "parent_id": format!("{prefix}{parent}"),
            })
        }))?;
        Ok((posts, comments))
    }
}

fn write_lines(path: &Path, lines: impl Iterator<Item = serde_json::Value>) -> Result<()> {
    let mut w = BufWriter::new(File::create(path).map_err(|e| Error::io(path, e))?);
    for line in lines {
        writeln!(w, "{line}").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}
