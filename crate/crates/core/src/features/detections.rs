use std::collections::BTreeMap;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Region, RegionFeatureSet};
use crate::{Error, Result};

/// Detection thresholds and region count limits.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FilterConfig {
    pub object_threshold: f64,
    pub attribute_threshold: f64,
    /// Below this many surviving regions a warning is logged; nothing is backfilled.
    pub min_regions: usize,
    pub max_regions: usize,
}

impl Default for FilterConfig {
    fn default() -> Self {
        FilterConfig {
            object_threshold: 0.5,
            attribute_threshold: 0.3,
            min_regions: 10,
            max_regions: 100,
        }
    }
}

/// Drop weak regions and weak attributes; keep at most `max_regions`, by
/// descending confidence. Idempotent.
pub fn filter_detections(raw: &RegionFeatureSet, cfg: &FilterConfig) -> Result<RegionFeatureSet> {
    let mut kept: Vec<Region> = raw
        .regions
        .iter()
        .filter(|r| r.confidence >= cfg.object_threshold)
        .map(|r| Region {
            attributes: r
                .attributes
                .iter()
                .copied()
                .filter(|&(_, s)| s >= cfg.attribute_threshold)
                .collect(),
            ..r.clone()
        })
        .collect();
    if kept.is_empty() {
        return Err(Error::EmptyScene(raw.image_id.clone()));
    }
    if kept.len() > cfg.max_regions {
        // stable: equal confidences keep their input order
        kept.sort_by(|a, b| b.confidence.total_cmp(&a.confidence));
        kept.truncate(cfg.max_regions);
    }
    if kept.len() < cfg.min_regions {
        log::debug!("{}: only {} regions above threshold", raw.image_id, kept.len());
    }
    Ok(RegionFeatureSet {
        image_id: raw.image_id.clone(),
        regions: kept,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttributeRecord {
    pub id: u32,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionRecord {
    #[serde(rename = "box")]
    pub bbox: [f32; 4],
    pub category: u32,
    pub confidence: f64,
    #[serde(default)]
    pub attributes: Vec<AttributeRecord>,
}

/// Detections of one image, one JSON object per line on disk.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionRecord {
    pub image_id: String,
    pub regions: Vec<RegionRecord>,
}

impl DetectionRecord {
    pub fn from_set(set: &RegionFeatureSet) -> Self {
        DetectionRecord {
            image_id: set.image_id.clone(),
            regions: set
                .regions
                .iter()
                .map(|r| RegionRecord {
                    bbox: r.bbox,
                    category: r.category_id,
                    confidence: r.confidence,
                    attributes: r.attributes.iter().map(|&(id, score)| AttributeRecord { id, score }).collect(),
                })
                .collect(),
        }
    }

    /// Attach per-region feature rows (same order as `regions`).
    pub fn with_features(&self, features: &[Vec<f32>]) -> Result<RegionFeatureSet> {
        if features.len() != self.regions.len() {
            return Err(Error::LengthMismatch {
                expected: self.regions.len(),
                actual: features.len(),
            });
        }
        Ok(RegionFeatureSet {
            image_id: self.image_id.clone(),
            regions: self
                .regions
                .iter()
                .zip(features)
                .map(|(r, f)| Region {
                    feature: f.clone(),
                    bbox: r.bbox,
                    category_id: r.category,
                    confidence: r.confidence,
                    attributes: r.attributes.iter().map(|a| (a.id, a.score)).collect(),
                })
                .collect(),
        })
    }
}

pub fn read_detections(path: &Path) -> Result<BTreeMap<String, DetectionRecord>> {
    let text = fs::read_to_string(path)?;
    let mut out = BTreeMap::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let rec: DetectionRecord = serde_json::from_str(line).map_err(|e| Error::parse(path, i + 1, e.to_string()))?;
        out.insert(rec.image_id.clone(), rec);
    }
    Ok(out)
}

pub fn write_detections<'a, I>(records: I, path: &Path) -> Result<()>
where
    I: IntoIterator<Item = &'a DetectionRecord>,
{
    let mut w = BufWriter::new(fs::File::create(path)?);
    for r in records {
        serde_json::to_writer(&mut w, r)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}
