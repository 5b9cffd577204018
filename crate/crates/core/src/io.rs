//! JSON-lines readers and writers for scenes and anchor overrides.

use std::collections::BTreeMap;
use std::io::{BufRead, Write};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pipeline::Anchor;
use crate::synth::ScenePair;

/// Parses one record per non-blank line; errors carry the 1-based line.
pub fn read_jsonl<T: DeserializeOwned>(reader: impl BufRead) -> Result<Vec<T>> {
    let mut out = Vec::new();
    for (k, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec = serde_json::from_str(&line).map_err(|e| Error::Parse { line: k + 1, message: e.to_string() })?;
        out.push(rec);
    }
    Ok(out)
}

pub fn write_jsonl<T: Serialize>(mut writer: impl Write, records: &[T]) -> Result<()> {
    for r in records {
        serde_json::to_writer(&mut writer, r)?;
        writer.write_all(b"\n")?;
    }
    writer.flush()?;
    Ok(())
}

/// Reads scenes and checks that every record is internally consistent.
pub fn read_scenes(reader: impl BufRead) -> Result<Vec<ScenePair>> {
    let scenes: Vec<ScenePair> = read_jsonl(reader)?;
    for (k, s) in scenes.iter().enumerate() {
        check_scene(s).map_err(|e| Error::Parse { line: k + 1, message: e.to_string() })?;
    }
    Ok(scenes)
}

pub fn check_scene(s: &ScenePair) -> Result<()> {
    if s.desc_a.len() != s.kps_a.len() || s.desc_b.len() != s.kps_b.len() {
        return Err(Error::ShapeMismatch("keypoint and descriptor counts differ".into()));
    }
    if !s.pattern_id.is_empty() && s.pattern_id.len() != s.kps_a.len() {
        return Err(Error::ShapeMismatch("pattern_id length differs from kpsA".into()));
    }
    if let Some(&(i, j)) = s.gt_matches.iter().find(|&&(i, j)| i >= s.kps_a.len() || j >= s.kps_b.len()) {
        return Err(Error::ShapeMismatch(format!("gt match ({i}, {j}) out of range")));
    }
    if s.kps_a.iter().chain(&s.kps_b).any(|p| !p.is_finite()) {
        return Err(Error::ConfigInvalid("non-finite keypoint".into()));
    }
    Ok(())
}

/// One line of an anchor-override file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnchorRecord {
    pub seed: u64,
    pub anchors: Vec<Anchor>,
}

/// Anchor overrides keyed by scene seed.
pub fn read_anchor_overrides(reader: impl BufRead) -> Result<BTreeMap<u64, Vec<Anchor>>> {
    let recs: Vec<AnchorRecord> = read_jsonl(reader)?;
    let mut out = BTreeMap::new();
    for r in recs {
        if out.insert(r.seed, r.anchors).is_some() {
            return Err(Error::ConfigInvalid(format!("duplicate anchor record for seed {}", r.seed)));
        }
    }
    Ok(out)
}
