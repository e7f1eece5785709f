use std::collections::{BTreeMap, HashMap};

use sha2::{Digest, Sha256};

use super::Caption;
use crate::{Error, Result};

pub const PAD: usize = 0;
pub const BOS: usize = 1;
pub const EOS: usize = 2;
pub const UNK: usize = 3;

const RESERVED: [&str; 4] = ["<pad>", "<bos>", "<eos>", "<unk>"];

/// Word/index bijection with four fixed reserved slots.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    words: Vec<String>,
    index: HashMap<String, usize>,
}

impl Vocabulary {
    /// Words with count >= `min_count`, most frequent first, ties lexicographic.
    pub fn build(corpus: &[Caption], min_count: usize) -> Result<Self> {
        if min_count == 0 {
            return Err(Error::InvalidArgument("min_count must be >= 1".into()));
        }
        let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
        for cap in corpus {
            for tok in &cap.tokens {
                *counts.entry(tok.text.as_str()).or_default() += 1;
            }
        }
        let mut ranked: Vec<(&str, usize)> = counts
            .into_iter()
            .filter(|(w, c)| *c >= min_count && !RESERVED.contains(w))
            .collect();
        ranked.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
        Ok(Self::from_words(ranked.into_iter().map(|(w, _)| w.to_string())))
    }

    /// Vocabulary from an ordered list of non-reserved words.
    pub fn from_words<I: IntoIterator<Item = String>>(words: I) -> Self {
        let mut all: Vec<String> = RESERVED.iter().map(|s| s.to_string()).collect();
        for w in words {
            if !all.contains(&w) {
                all.push(w);
            }
        }
        let index = all.iter().enumerate().map(|(i, w)| (w.clone(), i)).collect();
        Vocabulary { words: all, index }
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.len() == RESERVED.len()
    }

    pub fn id(&self, word: &str) -> usize {
        self.index.get(word).copied().unwrap_or(UNK)
    }

    pub fn get(&self, word: &str) -> Option<usize> {
        self.index.get(word).copied()
    }

    pub fn word(&self, id: usize) -> &str {
        self.words.get(id).map(String::as_str).unwrap_or(RESERVED[UNK])
    }

    /// Non-reserved words in index order.
    pub fn words(&self) -> &[String] {
        &self.words[RESERVED.len()..]
    }

    /// Token ids without framing, truncated to `max_len`.
    pub fn encode(&self, caption: &Caption, max_len: usize) -> Vec<usize> {
        caption
            .tokens
            .iter()
            .take(max_len)
            .map(|t| self.id(&t.text))
            .collect()
    }

    /// Words for ids, stopping at eos and skipping the other reserved ids.
    pub fn decode(&self, ids: &[usize]) -> Vec<String> {
        ids.iter()
            .take_while(|&&i| i != EOS)
            .filter(|&&i| i != BOS && i != PAD)
            .map(|&i| self.word(i).to_string())
            .collect()
    }

    /// Hex digest identifying the exact word list.
    pub fn hash(&self) -> String {
        let mut h = Sha256::new();
        for w in &self.words {
            h.update(w.as_bytes());
            h.update(b"\n");
        }
        h.finalize().iter().take(16).map(|b| format!("{b:02x}")).collect()
    }
}
