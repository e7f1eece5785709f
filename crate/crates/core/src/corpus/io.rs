use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{tokenize, Caption, Provenance, Sentiment};
use crate::{Error, Result};

/// One line of a caption JSONL file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaptionRecord {
    pub image_id: String,
    pub caption: String,
    #[serde(default = "unlabeled")]
    pub sentiment: String,
    #[serde(default = "original")]
    pub provenance: String,
    /// Token positions added by augmentation.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub inserted: Vec<usize>,
}

fn unlabeled() -> String {
    "unlabeled".into()
}

fn original() -> String {
    "original".into()
}

impl From<&Caption> for CaptionRecord {
    fn from(c: &Caption) -> Self {
        CaptionRecord {
            image_id: c.image_id.clone(),
            caption: c.text(),
            sentiment: c.sentiment.as_str().into(),
            provenance: c.provenance.as_str().into(),
            inserted: c.inserted.clone(),
        }
    }
}

impl TryFrom<CaptionRecord> for Caption {
    type Error = String;

    fn try_from(r: CaptionRecord) -> std::result::Result<Self, String> {
        let sentiment = Sentiment::parse(&r.sentiment).ok_or_else(|| format!("bad sentiment {:?}", r.sentiment))?;
        let provenance = Provenance::parse(&r.provenance).ok_or_else(|| format!("bad provenance {:?}", r.provenance))?;
        let tokens = tokenize(&r.caption);
        let mut inserted = r.inserted;
        inserted.sort_unstable();
        inserted.dedup();
        if inserted.last().is_some_and(|&p| p >= tokens.len()) {
            return Err("inserted position past end of caption".into());
        }
        Ok(Caption {
            image_id: r.image_id,
            tokens,
            sentiment,
            provenance,
            inserted,
        })
    }
}

/// Parse a caption JSONL file. Malformed lines are returned separately as
/// `(line_number, message)` instead of aborting the read.
pub fn read_captions(path: &Path) -> Result<(Vec<Caption>, Vec<(usize, String)>)> {
    let text = fs::read_to_string(path)?;
    let mut caps = Vec::new();
    let mut bad = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let parsed = serde_json::from_str::<CaptionRecord>(line)
            .map_err(|e| e.to_string())
            .and_then(Caption::try_from);
        match parsed {
            Ok(c) => caps.push(c),
            Err(msg) => bad.push((i + 1, msg)),
        }
    }
    Ok((caps, bad))
}

/// Strict variant: any malformed line is an error.
pub fn read_captions_strict(path: &Path) -> Result<Vec<Caption>> {
    let (caps, bad) = read_captions(path)?;
    if let Some((line, msg)) = bad.into_iter().next() {
        return Err(Error::parse(path, line, msg));
    }
    Ok(caps)
}

pub fn write_captions(caps: &[Caption], path: &Path) -> Result<()> {
    let mut w = BufWriter::new(fs::File::create(path)?);
    for c in caps {
        serde_json::to_writer(&mut w, &CaptionRecord::from(c))?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn jsonl_round_trip_and_bad_lines() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.jsonl");
        let mut c = Caption::new("7", "a happy dog .");
        c.inserted = vec![1];
        c.provenance = Provenance::AttributeAugmented;
        c.sentiment = Sentiment::Positive;
        write_captions(&[c.clone(), Caption::new("8", "x")], &p).unwrap();
        let text = fs::read_to_string(&p).unwrap();
        assert!(text.starts_with(r#"{"image_id":"7","caption":"a happy dog .","sentiment":"pos","provenance":"attribute_augmented","inserted":[1]}"#));
        fs::write(&p, format!("{text}not json\n{{\"image_id\":\"9\",\"caption\":\"y\",\"sentiment\":\"meh\"}}\n")).unwrap();
        let (caps, bad) = read_captions(&p).unwrap();
        assert_eq!(caps[0], c);
        assert_eq!(caps.len(), 2);
        assert_eq!(bad.iter().map(|b| b.0).collect::<Vec<_>>(), [3, 4]);
        assert!(read_captions_strict(&p).is_err());
    }
}
