use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::io::Write;
use std::path::Path;

use super::Sentiment;
use crate::{Error, Result};

/// Scores strictly below this are negative.
pub const NEGATIVE_CUTOFF: f64 = 0.4;
/// Scores strictly above this are positive.
pub const POSITIVE_CUTOFF: f64 = 0.6;

/// Map a raw sentiment score in [-1, 1] to [0, 1].
pub fn rescale_sentiment(raw: f64) -> Result<f64> {
    if !(-1.0..=1.0).contains(&raw) || raw.is_nan() {
        return Err(Error::OutOfRange {
            value: raw,
            lo: -1.0,
            hi: 1.0,
        });
    }
    Ok((raw + 1.0) / 2.0)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SynonymSet {
    pub attribute_id: u32,
    pub canonical: String,
    pub synonyms: BTreeSet<String>,
}

impl SynonymSet {
    pub fn new<I, S>(attribute_id: u32, canonical: &str, synonyms: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let canonical = canonical.trim().to_lowercase();
        let mut set: BTreeSet<String> = synonyms
            .into_iter()
            .map(|s| s.as_ref().trim().to_lowercase())
            .filter(|s| !s.is_empty())
            .collect();
        set.insert(canonical.clone());
        SynonymSet {
            attribute_id,
            canonical,
            synonyms: set,
        }
    }

    pub fn read_tsv(path: &Path) -> Result<Vec<SynonymSet>> {
        let text = fs::read_to_string(path)?;
        let mut out = Vec::new();
        for (lineno, fields) in tsv_lines(&text) {
            if fields.len() < 2 {
                return Err(Error::parse(path, lineno, "expected attribute_id<TAB>canonical[<TAB>synonyms]"));
            }
            let id = fields[0]
                .trim()
                .parse::<u32>()
                .map_err(|e| Error::parse(path, lineno, format!("bad attribute id: {e}")))?;
            let canonical = fields[1].trim();
            if canonical.is_empty() {
                return Err(Error::parse(path, lineno, "empty canonical word"));
            }
            let syns = fields.get(2).map(|s| split_list(s)).unwrap_or_default();
            out.push(SynonymSet::new(id, canonical, syns));
        }
        Ok(out)
    }

    pub fn write_tsv(sets: &[SynonymSet], path: &Path) -> Result<()> {
        let mut f = fs::File::create(path)?;
        for s in sets {
            let syns: Vec<&str> = s.synonyms.iter().map(String::as_str).collect();
            writeln!(f, "{}\t{}\t{}", s.attribute_id, s.canonical, syns.join(","))?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ObjectNounSet {
    pub category_id: u32,
    pub nouns: BTreeSet<String>,
}

impl ObjectNounSet {
    pub fn new<I, S>(category_id: u32, nouns: I) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let nouns: BTreeSet<String> = nouns
            .into_iter()
            .map(|s| s.as_ref().trim().to_lowercase())
            .filter(|s| !s.is_empty())
            .collect();
        if nouns.is_empty() {
            return Err(Error::Empty("object noun set"));
        }
        Ok(ObjectNounSet { category_id, nouns })
    }

    /// First noun in lexical order, used as the display name of the category.
    pub fn name(&self) -> &str {
        self.nouns.iter().next().map(String::as_str).unwrap_or("")
    }

    pub fn read_tsv(path: &Path) -> Result<Vec<ObjectNounSet>> {
        let text = fs::read_to_string(path)?;
        let mut out = Vec::new();
        for (lineno, fields) in tsv_lines(&text) {
            if fields.len() < 2 {
                return Err(Error::parse(path, lineno, "expected category_id<TAB>nouns"));
            }
            let id = fields[0]
                .trim()
                .parse::<u32>()
                .map_err(|e| Error::parse(path, lineno, format!("bad category id: {e}")))?;
            let set = ObjectNounSet::new(id, split_list(fields[1]))
                .map_err(|e| Error::parse(path, lineno, e.to_string()))?;
            out.push(set);
        }
        Ok(out)
    }

    pub fn write_tsv(sets: &[ObjectNounSet], path: &Path) -> Result<()> {
        let mut f = fs::File::create(path)?;
        for s in sets {
            let nouns: Vec<&str> = s.nouns.iter().map(String::as_str).collect();
            writeln!(f, "{}\t{}", s.category_id, nouns.join(","))?;
        }
        Ok(())
    }
}

/// Adjective-noun pairs grouped by noun and sentiment.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct AnpTable {
    pub entries: BTreeMap<String, BTreeMap<Sentiment, BTreeSet<String>>>,
}

impl AnpTable {
    pub fn insert(&mut self, noun: &str, sentiment: Sentiment, adjective: &str) {
        self.entries
            .entry(noun.trim().to_lowercase())
            .or_default()
            .entry(sentiment)
            .or_default()
            .insert(adjective.trim().to_lowercase());
    }

    pub fn adjectives(&self, noun: &str, sentiment: Sentiment) -> Option<&BTreeSet<String>> {
        self.entries
            .get(noun)
            .and_then(|m| m.get(&sentiment))
            .filter(|s| !s.is_empty())
    }

    pub fn contains_pair(&self, adjective: &str, noun: &str, sentiment: Sentiment) -> bool {
        self.adjectives(noun, sentiment)
            .is_some_and(|s| s.contains(adjective))
    }

    /// Every adjective of any noun, for one sentiment or all.
    pub fn adjective_universe(&self, sentiment: Option<Sentiment>) -> BTreeSet<String> {
        self.entries
            .values()
            .flat_map(|m| m.iter())
            .filter(|(s, _)| sentiment.is_none_or(|want| **s == want))
            .flat_map(|(_, adjs)| adjs.iter().cloned())
            .collect()
    }

    pub fn len(&self) -> usize {
        self.entries.values().flat_map(|m| m.values()).map(|s| s.len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn read_tsv(path: &Path) -> Result<AnpTable> {
        let text = fs::read_to_string(path)?;
        let mut table = AnpTable::default();
        for (lineno, fields) in tsv_lines(&text) {
            if fields.len() != 3 {
                return Err(Error::parse(path, lineno, "expected noun<TAB>sentiment<TAB>adjectives"));
            }
            let sentiment = match Sentiment::parse(fields[1]) {
                Some(s @ (Sentiment::Positive | Sentiment::Negative | Sentiment::Neutral)) => s,
                _ => return Err(Error::parse(path, lineno, format!("bad sentiment {:?}", fields[1]))),
            };
            let adjs = split_list(fields[2]);
            if adjs.is_empty() {
                return Err(Error::parse(path, lineno, "empty adjective list"));
            }
            for adj in adjs {
                table.insert(fields[0], sentiment, &adj);
            }
        }
        Ok(table)
    }

    pub fn write_tsv(&self, path: &Path) -> Result<()> {
        let mut f = fs::File::create(path)?;
        for (noun, by_sent) in &self.entries {
            for (sent, adjs) in by_sent {
                let adjs: Vec<&str> = adjs.iter().map(String::as_str).collect();
                writeln!(f, "{}\t{}\t{}", noun, sent.as_str(), adjs.join(","))?;
            }
        }
        Ok(())
    }
}

/// Word sentiment scores in [0, 1] with a neutral band between the cutoffs.
#[derive(Debug, Clone, PartialEq)]
pub struct SentimentLexicon {
    pub scores: BTreeMap<String, f64>,
    pub negative_cutoff: f64,
    pub positive_cutoff: f64,
}

impl Default for SentimentLexicon {
    fn default() -> Self {
        SentimentLexicon {
            scores: BTreeMap::new(),
            negative_cutoff: NEGATIVE_CUTOFF,
            positive_cutoff: POSITIVE_CUTOFF,
        }
    }
}

impl SentimentLexicon {
    pub fn insert(&mut self, word: &str, score: f64) -> Result<()> {
        if !(0.0..=1.0).contains(&score) {
            return Err(Error::OutOfRange {
                value: score,
                lo: 0.0,
                hi: 1.0,
            });
        }
        self.scores.insert(word.trim().to_lowercase(), score);
        Ok(())
    }

    /// Build from raw scores in [-1, 1].
    pub fn from_raw<'a, I>(raw: I) -> Result<Self>
    where
        I: IntoIterator<Item = (&'a str, f64)>,
    {
        let mut lex = SentimentLexicon::default();
        for (w, s) in raw {
            lex.insert(w, rescale_sentiment(s)?)?;
        }
        Ok(lex)
    }

    pub fn score(&self, word: &str) -> Option<f64> {
        self.scores.get(word).copied()
    }

    pub fn polarity(&self, word: &str) -> Option<Sentiment> {
        self.score(word).map(|s| {
            if s < self.negative_cutoff {
                Sentiment::Negative
            } else if s > self.positive_cutoff {
                Sentiment::Positive
            } else {
                Sentiment::Neutral
            }
        })
    }

    pub fn read_tsv(path: &Path) -> Result<SentimentLexicon> {
        let text = fs::read_to_string(path)?;
        let mut lex = SentimentLexicon::default();
        for (lineno, fields) in tsv_lines(&text) {
            if fields.len() != 2 {
                return Err(Error::parse(path, lineno, "expected word<TAB>score"));
            }
            let score = fields[1]
                .trim()
                .parse::<f64>()
                .map_err(|e| Error::parse(path, lineno, format!("bad score: {e}")))?;
            lex.insert(fields[0], score)
                .map_err(|e| Error::parse(path, lineno, e.to_string()))?;
        }
        Ok(lex)
    }

    pub fn write_tsv(&self, path: &Path) -> Result<()> {
        let mut f = fs::File::create(path)?;
        for (w, s) in &self.scores {
            writeln!(f, "{w}\t{s}")?;
        }
        Ok(())
    }
}

/// Positive/negative word lists for majority-vote caption classification.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PolarityLexicon {
    pub positive: BTreeSet<String>,
    pub negative: BTreeSet<String>,
}

impl PolarityLexicon {
    pub fn from_scores(lex: &SentimentLexicon) -> Self {
        let mut out = PolarityLexicon::default();
        for word in lex.scores.keys() {
            match lex.polarity(word) {
                Some(Sentiment::Positive) => {
                    out.positive.insert(word.clone());
                }
                Some(Sentiment::Negative) => {
                    out.negative.insert(word.clone());
                }
                _ => {}
            }
        }
        out
    }

    /// `word<TAB>pos|neg` lines.
    pub fn read_tsv(path: &Path) -> Result<PolarityLexicon> {
        let text = fs::read_to_string(path)?;
        let mut out = PolarityLexicon::default();
        for (lineno, fields) in tsv_lines(&text) {
            if fields.len() != 2 {
                return Err(Error::parse(path, lineno, "expected word<TAB>pos|neg"));
            }
            let word = fields[0].trim().to_lowercase();
            match Sentiment::parse(fields[1]) {
                Some(Sentiment::Positive) => out.positive.insert(word),
                Some(Sentiment::Negative) => out.negative.insert(word),
                _ => return Err(Error::parse(path, lineno, "polarity must be pos or neg")),
            };
        }
        Ok(out)
    }

    pub fn write_tsv(&self, path: &Path) -> Result<()> {
        let mut f = fs::File::create(path)?;
        for w in &self.positive {
            writeln!(f, "{w}\tpos")?;
        }
        for w in &self.negative {
            writeln!(f, "{w}\tneg")?;
        }
        Ok(())
    }
}

/// Non-empty, non-comment lines split on tabs, with 1-based line numbers.
pub(crate) fn tsv_lines(text: &str) -> impl Iterator<Item = (usize, Vec<&str>)> {
    text.lines().enumerate().filter_map(|(i, line)| {
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() || line.starts_with('#') {
            None
        } else {
            Some((i + 1, line.split('\t').collect()))
        }
    })
}

fn split_list(s: &str) -> Vec<String> {
    s.split(',')
        .map(|w| w.trim().to_lowercase())
        .filter(|w| !w.is_empty())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rescale_examples() {
        assert_eq!(rescale_sentiment(-1.0).unwrap(), 0.0);
        assert_eq!(rescale_sentiment(1.0).unwrap(), 1.0);
        assert_eq!(rescale_sentiment(0.0).unwrap(), 0.5);
        assert!(rescale_sentiment(1.5).is_err());
        assert!(rescale_sentiment(f64::NAN).is_err());
    }

    #[test]
    fn synonym_set_contains_canonical() {
        let s = SynonymSet::new(3, "Furry", ["fluffy", "hairy"]);
        assert!(s.synonyms.contains("furry"));
        assert_eq!(s.synonyms.len(), 3);
    }

    #[test]
    fn polarity_bands() {
        let lex = SentimentLexicon::from_raw([("bad", -0.6), ("fine", 0.0), ("great", 0.8)]).unwrap();
        assert_eq!(lex.polarity("bad"), Some(Sentiment::Negative));
        assert_eq!(lex.polarity("fine"), Some(Sentiment::Neutral));
        assert_eq!(lex.polarity("great"), Some(Sentiment::Positive));
        assert_eq!(lex.polarity("nope"), None);
        assert!(SentimentLexicon::default().insert("x", 1.2).is_err());
    }

    #[test]
    fn tsv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let mut anps = AnpTable::default();
        anps.insert("truck", Sentiment::Positive, "nice");
        anps.insert("truck", Sentiment::Negative, "old");
        anps.insert("dog", Sentiment::Positive, "cute");
        let p = dir.path().join("anps.tsv");
        anps.write_tsv(&p).unwrap();
        assert_eq!(AnpTable::read_tsv(&p).unwrap(), anps);

        let syns = vec![SynonymSet::new(1, "happy", ["glad", "joyful"])];
        let p = dir.path().join("syn.tsv");
        SynonymSet::write_tsv(&syns, &p).unwrap();
        assert_eq!(SynonymSet::read_tsv(&p).unwrap(), syns);

        let nouns = vec![ObjectNounSet::new(1, ["people", "person"]).unwrap()];
        let p = dir.path().join("nouns.tsv");
        ObjectNounSet::write_tsv(&nouns, &p).unwrap();
        assert_eq!(ObjectNounSet::read_tsv(&p).unwrap(), nouns);
    }

    #[test]
    fn malformed_tsv_reports_line() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("lex.tsv");
        fs::write(&p, "good\t0.9\n# comment\nbad\tx\n").unwrap();
        match SentimentLexicon::read_tsv(&p) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
    }
}
