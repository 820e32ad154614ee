//! Snapshot persistence: `stageK.records.jsonl` and `stageK.manifest.json`.

use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use super::{RawRecord, StageManifest, StageSnapshot};
use crate::error::{Error, Result};

pub fn records_path(dir: &Path, stage: u8) -> PathBuf {
    dir.join(format!("stage{stage}.records.jsonl"))
}

pub fn manifest_path(dir: &Path, stage: u8) -> PathBuf {
    dir.join(format!("stage{stage}.manifest.json"))
}

pub fn write_records(path: &Path, records: &[RawRecord]) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    for r in records {
        serde_json::to_writer(&mut out, r).map_err(|e| Error::parse(path, e))?;
        out.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    }
    out.flush().map_err(|e| Error::io(path, e))
}

pub fn read_records(path: &Path) -> Result<Vec<RawRecord>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut records = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let r: RawRecord = serde_json::from_str(&line)
            .map_err(|e| Error::parse(path, format!("line {}: {e}", i + 1)))?;
        records.push(r);
    }
    Ok(records)
}

pub fn read_manifest(path: &Path) -> Result<StageManifest> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::parse(path, e))
}

/// Loads a persisted snapshot and checks it against its manifest.
pub fn read_stage(dir: &Path, stage: u8) -> Result<StageSnapshot> {
    let manifest = read_manifest(&manifest_path(dir, stage))?;
    let records = read_records(&records_path(dir, stage))?;
    let snap = StageSnapshot::new(stage, records, manifest.removed.clone());
    if snap.manifest() != manifest {
        return Err(Error::parse(
            manifest_path(dir, stage),
            "manifest counts do not match records",
        ));
    }
    Ok(snap)
}

fn write_manifest(path: &Path, snap: &StageSnapshot) -> Result<()> {
    let mut text =
        serde_json::to_string_pretty(&snap.manifest()).map_err(|e| Error::parse(path, e))?;
    text.push('\n');
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Writes every snapshot into `dir`. Files are staged in a scratch directory
/// and moved into place only after all of them were written, so a failure
/// leaves no partial stage files behind.
pub fn write_stages(dir: &Path, stages: &[StageSnapshot]) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let scratch = tempfile::Builder::new()
        .prefix(".stages-")
        .tempdir_in(dir)
        .map_err(|e| Error::io(dir, e))?;
    let mut staged = Vec::new();
    for snap in stages {
        let records = records_path(scratch.path(), snap.stage_id);
        write_records(&records, &snap.records)?;
        let manifest = manifest_path(scratch.path(), snap.stage_id);
        write_manifest(&manifest, snap)?;
        staged.push((records, records_path(dir, snap.stage_id)));
        staged.push((manifest, manifest_path(dir, snap.stage_id)));
    }
    let mut moved = Vec::new();
    for (from, to) in &staged {
        if let Err(e) = fs::rename(from, to) {
            for path in &moved {
                let _ = fs::remove_file(path);
            }
            return Err(Error::io(to, e));
        }
        moved.push(to.clone());
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeMap;

    #[test]
    fn stage_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let mut removed = BTreeMap::new();
        removed.insert("bot_removal".to_string(), 2);
        let snap = StageSnapshot::new(
            1,
            vec![
                RawRecord::comment("c1", "b", 20, "reply text", "p1", "p1"),
                RawRecord::post("p1", "a", 10, "a post"),
            ],
            removed,
        );
        write_stages(dir.path(), std::slice::from_ref(&snap)).unwrap();
        let back = read_stage(dir.path(), 1).unwrap();
        assert_eq!(back, snap);
        let manifest = fs::read_to_string(manifest_path(dir.path(), 1)).unwrap();
        let v: serde_json::Value = serde_json::from_str(&manifest).unwrap();
        assert_eq!(v["stage_id"], 1);
        assert_eq!(v["post_count"], 1);
        assert_eq!(v["comment_count"], 1);
        assert_eq!(v["removed"]["bot_removal"], 2);
        // no scratch directory left behind
        let leftovers: Vec<_> = fs::read_dir(dir.path())
            .unwrap()
            .filter_map(|e| e.ok())
            .filter(|e| e.file_name().to_string_lossy().starts_with(".stages-"))
            .collect();
        assert!(leftovers.is_empty());
    }

    #[test]
    fn tampered_manifest_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let snap = StageSnapshot::new(0, vec![RawRecord::post("p", "a", 1, "text")], BTreeMap::new());
        write_stages(dir.path(), &[snap]).unwrap();
        fs::write(
            manifest_path(dir.path(), 0),
            r#"{"stage_id":0,"post_count":2,"comment_count":0,"removed":{}}"#,
        )
        .unwrap();
        assert!(read_stage(dir.path(), 0).is_err());
    }
}
