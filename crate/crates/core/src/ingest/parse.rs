//! Streaming JSONL reader for post and comment dumps (plain or gzip).

use std::fs::File;
use std::io::{BufRead, BufReader, Read};
use std::path::{Path, PathBuf};

use flate2::read::MultiGzDecoder;
use serde::Deserialize;
use serde_json::Value;

use super::{RawRecord, RecordKind};
use crate::error::{Error, Result};

#[derive(Debug, Default, Clone, Copy, PartialEq, Eq)]
pub struct ParseStats {
    /// Non-blank lines seen.
    pub lines: usize,
    pub malformed: usize,
}

impl ParseStats {
    pub fn parsed(&self) -> usize {
        self.lines - self.malformed
    }
}

#[derive(Debug)]
pub struct ParsedDump {
    pub records: Vec<RawRecord>,
    pub stats: ParseStats,
}

#[derive(Deserialize)]
struct PostLine {
    id: String,
    author: String,
    created_utc: Value,
    #[serde(default)]
    title: Option<String>,
    #[serde(default)]
    selftext: Option<String>,
    #[serde(default)]
    subreddit: Option<String>,
}

#[derive(Deserialize)]
struct CommentLine {
    id: String,
    author: String,
    created_utc: Value,
    #[serde(default)]
    body: Option<String>,
    #[serde(default)]
    subreddit: Option<String>,
    link_id: String,
    parent_id: String,
}

/// Pushshift dumps store `created_utc` as an integer, a float, or a numeric string.
fn epoch_seconds(v: &Value) -> Option<i64> {
    match v {
        Value::Number(n) => n.as_i64().or_else(|| n.as_f64().map(|f| f as i64)),
        Value::String(s) => s
            .trim()
            .parse::<i64>()
            .ok()
            .or_else(|| s.trim().parse::<f64>().ok().map(|f| f as i64)),
        _ => None,
    }
}

/// Drops the reddit "thing" type prefix (`t1_`, `t3_`, ...).
pub(crate) fn strip_fullname(id: &str) -> &str {
    match id.as_bytes() {
        [b't', d, b'_', ..] if d.is_ascii_digit() => &id[3..],
        _ => id,
    }
}

fn join_text(title: Option<String>, selftext: Option<String>) -> String {
    [title, selftext]
        .into_iter()
        .flatten()
        .map(|s| s.trim().to_string())
        .filter(|s| !s.is_empty())
        .collect::<Vec<_>>()
        .join(" ")
}

fn parse_line(line: &str, kind: RecordKind) -> Option<RawRecord> {
    let record = match kind {
        RecordKind::Post => {
            let p: PostLine = serde_json::from_str(line).ok()?;
            RawRecord {
                id: strip_fullname(&p.id).to_string(),
                kind,
                author: p.author,
                created_utc: epoch_seconds(&p.created_utc)?,
                text: join_text(p.title, p.selftext),
                subreddit: p.subreddit.unwrap_or_default(),
                link_id: None,
                parent_id: None,
            }
        }
        RecordKind::Comment => {
            let c: CommentLine = serde_json::from_str(line).ok()?;
            RawRecord {
                id: strip_fullname(&c.id).to_string(),
                kind,
                author: c.author,
                created_utc: epoch_seconds(&c.created_utc)?,
                text: c.body.unwrap_or_default(),
                subreddit: c.subreddit.unwrap_or_default(),
                link_id: Some(strip_fullname(&c.link_id).to_string()),
                parent_id: Some(strip_fullname(&c.parent_id).to_string()),
            }
        }
    };
    record.validate().ok()?;
    Some(record)
}

/// Iterator over the records of one dump. Malformed lines are skipped and counted;
/// only I/O failures surface as `Err` items.
pub struct DumpReader<R> {
    inner: R,
    kind: RecordKind,
    path: PathBuf,
    stats: ParseStats,
    buf: String,
}

impl DumpReader<Box<dyn BufRead + Send>> {
    /// Opens `path`, transparently decompressing gzip input.
    pub fn open(path: &Path, kind: RecordKind) -> Result<Self> {
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let mut reader = BufReader::new(file);
        let magic = reader.fill_buf().map_err(|e| Error::io(path, e))?;
        let inner: Box<dyn BufRead + Send> = if magic.starts_with(&[0x1f, 0x8b]) {
            Box::new(BufReader::new(MultiGzDecoder::new(reader)))
        } else {
            Box::new(reader)
        };
        Ok(DumpReader::new(inner, kind, path))
    }
}

impl<R: BufRead> DumpReader<R> {
    pub fn new(inner: R, kind: RecordKind, path: impl Into<PathBuf>) -> Self {
        DumpReader {
            inner,
            kind,
            path: path.into(),
            stats: ParseStats::default(),
            buf: String::new(),
        }
    }

    pub fn stats(&self) -> ParseStats {
        self.stats
    }

    /// Fails when more than half of the non-blank lines were malformed.
    pub fn finish(self) -> Result<ParseStats> {
        let s = self.stats;
        if s.malformed * 2 > s.lines {
            return Err(Error::Schema {
                path: self.path,
                malformed: s.malformed,
                lines: s.lines,
            });
        }
        Ok(s)
    }
}

impl<R: BufRead> Iterator for DumpReader<R> {
    type Item = Result<RawRecord>;

    fn next(&mut self) -> Option<Self::Item> {
        loop {
            self.buf.clear();
            match self.inner.read_line(&mut self.buf) {
                Ok(0) => return None,
                Ok(_) => {}
                Err(e) => return Some(Err(Error::io(&self.path, e))),
            }
            let line = self.buf.trim();
            if line.is_empty() {
                continue;
            }
            self.stats.lines += 1;
            match parse_line(line, self.kind) {
                Some(r) => return Some(Ok(r)),
                None => self.stats.malformed += 1,
            }
        }
    }
}

/// Reads a whole dump into memory, in file order.
pub fn parse_dump(path: &Path, kind: RecordKind) -> Result<ParsedDump> {
    let mut reader = DumpReader::open(path, kind)?;
    let records = reader.by_ref().collect::<Result<Vec<_>>>()?;
    let stats = reader.finish()?;
    Ok(ParsedDump { records, stats })
}

/// Parses from any reader; used by tests and bindings.
pub fn parse_reader(input: impl Read, kind: RecordKind) -> Result<ParsedDump> {
    let mut reader = DumpReader::new(BufReader::new(input), kind, "<memory>");
    let records = reader.by_ref().collect::<Result<Vec<_>>>()?;
    let stats = reader.finish()?;
    Ok(ParsedDump { records, stats })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    #[test]
    fn post_line_maps_fields() {
        let line = r#"{"id":"p1","author":"u1","created_utc":100,"title":"t","selftext":"s","subreddit":"climate"}"#;
        let out = parse_reader(line.as_bytes(), RecordKind::Post).unwrap();
        assert_eq!(out.records.len(), 1);
        let r = &out.records[0];
        assert_eq!(r.text, "t s");
        assert_eq!(r.kind, RecordKind::Post);
        assert_eq!(r.subreddit, "climate");
        assert_eq!(r.created_utc, 100);
        assert!(r.link_id.is_none());
    }

    #[test]
    fn comment_ids_lose_type_prefix() {
        let line = r#"{"id":"c1","author":"u2","created_utc":"150","body":"hi there","subreddit":"x","link_id":"t3_p1","parent_id":"t1_c0"}"#;
        let r = &parse_reader(line.as_bytes(), RecordKind::Comment).unwrap().records[0];
        assert_eq!(r.link_id.as_deref(), Some("p1"));
        assert_eq!(r.parent_id.as_deref(), Some("c0"));
        assert_eq!(r.created_utc, 150);
    }

    #[test]
    fn empty_input_is_empty_stream() {
        let out = parse_reader(&b""[..], RecordKind::Post).unwrap();
        assert!(out.records.is_empty());
        assert_eq!(out.stats, ParseStats::default());
    }

    #[test]
    fn three_valid_one_malformed() {
        let text = [
            r#"{"id":"p1","author":"a","created_utc":1,"title":"x"}"#,
            r#"{"id":"p2","author":"b","created_utc":2,"title":"y"}"#,
            r#"{not json"#,
            r#"{"id":"p3","author":"c","created_utc":3,"title":"z"}"#,
        ]
        .join("\n");
        let out = parse_reader(text.as_bytes(), RecordKind::Post).unwrap();
        assert_eq!(out.records.len(), 3);
        assert_eq!(out.stats.malformed, 1);
        let ids: Vec<_> = out.records.iter().map(|r| r.id.as_str()).collect();
        assert_eq!(ids, ["p1", "p2", "p3"]);
    }

    #[test]
    fn mostly_malformed_is_fatal() {
        let text = "garbage\n{\"id\":\"p1\",\"author\":\"a\",\"created_utc\":1}\nmore garbage\n";
        let err = parse_reader(text.as_bytes(), RecordKind::Post).unwrap_err();
        assert!(matches!(err, Error::Schema { malformed: 2, lines: 3, .. }));
    }

    #[test]
    fn invariant_violations_count_as_malformed() {
        let text = [
            r#"{"id":"c1","author":"a","created_utc":0,"body":"x","link_id":"p","parent_id":"p"}"#,
            r#"{"id":"c2","author":"a","created_utc":5,"body":"x","link_id":"","parent_id":"p"}"#,
            r#"{"id":"c3","author":"a","created_utc":5,"body":"x","link_id":"p","parent_id":"p"}"#,
            r#"{"id":"c4","author":"a","created_utc":5,"body":"x","link_id":"p","parent_id":"p"}"#,
        ]
        .join("\n");
        let out = parse_reader(text.as_bytes(), RecordKind::Comment).unwrap();
        assert_eq!(out.records.len(), 2);
        assert_eq!(out.stats.malformed, 2);
    }

    #[test]
    fn reads_gzip_and_reports_missing_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("posts.jsonl.gz");
        let mut gz = flate2::write::GzEncoder::new(File::create(&path).unwrap(), Default::default());
        writeln!(gz, r#"{{"id":"p1","author":"a","created_utc":7,"title":"hello"}}"#).unwrap();
        gz.finish().unwrap();
        let out = parse_dump(&path, RecordKind::Post).unwrap();
        assert_eq!(out.records[0].text, "hello");

        let missing = dir.path().join("nope.jsonl");
        match parse_dump(&missing, RecordKind::Post) {
            Err(Error::Io { path, .. }) => assert_eq!(path, missing),
            other => panic!("expected io error, got {other:?}"),
        }
    }
}
