//! Input loading shared by the subcommands. Every failure here is a
//! validation failure.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use stylecap::corpus::{read_captions_strict, tokenize, Caption, TokenKind};
use stylecap::features::{filter_detections, read_detections, read_features, FilterConfig, RegionFeatureSet};

use crate::error::{invalid, CliError};

/// The flag value if given, else the config path; it must exist.
pub fn require(flag: &Option<PathBuf>, configured: &Option<PathBuf>, name: &str) -> Result<PathBuf, CliError> {
    let path = flag
        .clone()
        .or_else(|| configured.clone())
        .ok_or_else(|| invalid(format!("missing input: pass --{name} or set paths.{}", name.replace('-', "_"))))?;
    if !path.exists() {
        return Err(invalid(format!("{}: no such file", path.display())));
    }
    Ok(path)
}

pub fn optional(flag: &Option<PathBuf>, configured: &Option<PathBuf>) -> Result<Option<PathBuf>, CliError> {
    match flag.clone().or_else(|| configured.clone()) {
        Some(p) if !p.exists() => Err(invalid(format!("{}: no such file", p.display()))),
        p => Ok(p),
    }
}

pub fn captions(paths: &[PathBuf]) -> Result<Vec<Caption>, CliError> {
    let mut out = Vec::new();
    for p in paths {
        out.extend(read_captions_strict(p).map_err(invalid)?);
    }
    Ok(out)
}

/// Word tokens of a caption string, punctuation dropped.
pub fn words(text: &str) -> Vec<String> {
    tokenize(text).into_iter().filter(|t| t.kind == TokenKind::Word).map(|t| t.text).collect()
}

/// Filtered detections without feature rows, keyed by image id.
pub fn annotations(detections: &Path, filter: &FilterConfig) -> Result<BTreeMap<String, Vec<(u32, Vec<u32>)>>, CliError> {
    let mut out = BTreeMap::new();
    for (id, rec) in read_detections(detections).map_err(invalid)? {
        let set = rec.with_features(&vec![Vec::new(); rec.regions.len()]).map_err(invalid)?;
        let kept = filter_detections(&set, filter).map_err(invalid)?;
        out.insert(id, kept.annotations());
    }
    Ok(out)
}

/// Detections joined with their feature rows, filtered, in image-id order.
pub fn scenes(detections: &Path, features: &Path, manifest: &Path, filter: &FilterConfig) -> Result<Vec<RegionFeatureSet>, CliError> {
    let dets = read_detections(detections).map_err(invalid)?;
    let feats = read_features(features, manifest).map_err(invalid)?;
    let missing: Vec<&str> = dets.keys().filter(|id| !feats.contains_key(*id)).map(String::as_str).collect();
    if !missing.is_empty() {
        return Err(invalid(format!("detections without features: {}", missing.join(", "))));
    }
    let mut out = Vec::with_capacity(dets.len());
    let mut dim = None;
    for (id, rec) in &dets {
        let set = rec.with_features(&feats[id]).map_err(|e| invalid(format!("{id}: {e}")))?;
        let set = filter_detections(&set, filter).map_err(invalid)?;
        let d = set.feature_dim();
        if *dim.get_or_insert(d) != d {
            return Err(invalid(format!("{id}: feature dimension {d} differs from {}", dim.unwrap_or(0))));
        }
        out.push(set);
    }
    if out.is_empty() {
        return Err(invalid(format!("{}: no images", detections.display())));
    }
    Ok(out)
}

pub fn write_json<T: Serialize>(value: &T, path: &Path) -> anyhow::Result<()> {
    fs::write(path, serde_json::to_string_pretty(value)? + "\n")?;
    Ok(())
}
