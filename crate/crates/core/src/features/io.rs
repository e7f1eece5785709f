//! Binary region-feature container.
//!
//! Per image: `K` and `D` as little-endian `u32`, then `K * D` little-endian
//! `f32` values, row-major. A JSON manifest maps image ids to the byte
//! offset of their block.

use std::collections::BTreeMap;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::RegionFeatureSet;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureEntry {
    pub offset: u64,
    #[serde(rename = "K")]
    pub k: u32,
    #[serde(rename = "D")]
    pub d: u32,
}

pub fn write_features<'a, I>(sets: I, bin_path: &Path, manifest_path: &Path) -> Result<BTreeMap<String, FeatureEntry>>
where
    I: IntoIterator<Item = &'a RegionFeatureSet>,
{
    let mut w = BufWriter::new(fs::File::create(bin_path)?);
    let mut manifest = BTreeMap::new();
    let mut offset = 0u64;
    for set in sets {
        let k = set.len();
        let d = set.feature_dim();
        if let Some(r) = set.regions.iter().find(|r| r.feature.len() != d) {
            return Err(Error::DimensionMismatch {
                what: "region feature",
                expected: d,
                actual: r.feature.len(),
            });
        }
        w.write_all(&(k as u32).to_le_bytes())?;
        w.write_all(&(d as u32).to_le_bytes())?;
        for r in &set.regions {
            for v in &r.feature {
                w.write_all(&v.to_le_bytes())?;
            }
        }
        manifest.insert(
            set.image_id.clone(),
            FeatureEntry {
                offset,
                k: k as u32,
                d: d as u32,
            },
        );
        offset += 8 + 4 * (k * d) as u64;
    }
    w.flush()?;
    fs::write(manifest_path, serde_json::to_string_pretty(&manifest)? + "\n")?;
    Ok(manifest)
}

/// Feature rows per image id.
pub fn read_features(bin_path: &Path, manifest_path: &Path) -> Result<BTreeMap<String, Vec<Vec<f32>>>> {
    let manifest: BTreeMap<String, FeatureEntry> = serde_json::from_str(&fs::read_to_string(manifest_path)?)?;
    let bytes = fs::read(bin_path)?;
    let mut out = BTreeMap::new();
    for (id, e) in manifest {
        let start = e.offset as usize;
        let header = bytes
            .get(start..start + 8)
            .ok_or_else(|| Error::Format(format!("{id}: offset {start} past end of file")))?;
        let k = u32::from_le_bytes(header[0..4].try_into().unwrap());
        let d = u32::from_le_bytes(header[4..8].try_into().unwrap());
        if k != e.k || d != e.d {
            return Err(Error::Format(format!("{id}: header ({k}, {d}) disagrees with manifest ({}, {})", e.k, e.d)));
        }
        let (k, d) = (k as usize, d as usize);
        let body = bytes
            .get(start + 8..start + 8 + 4 * k * d)
            .ok_or_else(|| Error::Format(format!("{id}: truncated feature block")))?;
        let rows = body
            .chunks_exact(4 * d.max(1))
            .take(k)
            .map(|row| row.chunks_exact(4).map(|b| f32::from_le_bytes(b.try_into().unwrap())).collect())
            .collect();
        out.insert(id, rows);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::Region;

    #[test]
    fn container_layout_and_round_trip() {
        let mk = |id: &str, rows: Vec<Vec<f32>>| RegionFeatureSet {
            image_id: id.into(),
            regions: rows
                .into_iter()
                .map(|f| Region {
                    feature: f,
                    bbox: [0.0; 4],
                    category_id: 0,
                    confidence: 1.0,
                    attributes: vec![],
                })
                .collect(),
        };
        let a = mk("a", vec![vec![1.0, -2.5, 3.25]]);
        let b = mk("b", vec![vec![0.0, 1.0, 2.0], vec![4.0, 5.0, 6.0]]);
        let dir = tempfile::tempdir().unwrap();
        let (bin, man) = (dir.path().join("f.bin"), dir.path().join("f.json"));
        let m = write_features([&a, &b], &bin, &man).unwrap();
        assert_eq!(m["a"], FeatureEntry { offset: 0, k: 1, d: 3 });
        assert_eq!(m["b"], FeatureEntry { offset: 20, k: 2, d: 3 });
        let raw = fs::read(&bin).unwrap();
        assert_eq!(raw.len(), 20 + 8 + 24);
        assert_eq!(&raw[0..8], &[1, 0, 0, 0, 3, 0, 0, 0]);
        assert_eq!(&raw[8..12], &1.0f32.to_le_bytes());
        let back = read_features(&bin, &man).unwrap();
        assert_eq!(back["a"], vec![vec![1.0, -2.5, 3.25]]);
        assert_eq!(back["b"][1], vec![4.0, 5.0, 6.0]);
        let text = fs::read_to_string(&man).unwrap();
        assert!(text.contains("\"K\": 2"));
    }

    #[test]
    fn truncated_file_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let (bin, man) = (dir.path().join("f.bin"), dir.path().join("f.json"));
        fs::write(&bin, [2u8, 0, 0, 0, 3, 0, 0, 0, 0, 0]).unwrap();
        fs::write(&man, r#"{"x": {"offset": 0, "K": 2, "D": 3}}"#).unwrap();
        assert!(matches!(read_features(&bin, &man), Err(Error::Format(_))));
    }
}
