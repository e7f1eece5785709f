//! Captions, lexicons and adjective-insertion augmentation.

mod augment;
mod io;
mod lexicon;
mod tokenize;
mod vocab;

pub use augment::{augment_with_anps, augment_with_attributes, match_noun_sites, AugmentConfig, SynonymPooling};
pub use io::{read_captions, read_captions_strict, write_captions, CaptionRecord};
pub use lexicon::{
    rescale_sentiment, AnpTable, ObjectNounSet, PolarityLexicon, SentimentLexicon, SynonymSet,
    NEGATIVE_CUTOFF, POSITIVE_CUTOFF,
};
pub use tokenize::{detokenize, tokenize};
pub use vocab::{Vocabulary, BOS, EOS, PAD, UNK};

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TokenKind {
    Word,
    Punctuation,
    Bos,
    Eos,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Token {
    pub text: String,
    pub kind: TokenKind,
}

impl Token {
    pub fn word(text: impl Into<String>) -> Self {
        Token {
            text: text.into().to_lowercase(),
            kind: TokenKind::Word,
        }
    }

    pub fn punct(text: impl Into<String>) -> Self {
        Token {
            text: text.into(),
            kind: TokenKind::Punctuation,
        }
    }
}

/// Caption-level sentiment label.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Sentiment {
    #[serde(rename = "pos")]
    Positive,
    #[serde(rename = "neg")]
    Negative,
    #[serde(rename = "neu")]
    Neutral,
    #[serde(rename = "unlabeled")]
    Unlabeled,
}

impl Sentiment {
    pub fn as_str(self) -> &'static str {
        match self {
            Sentiment::Positive => "pos",
            Sentiment::Negative => "neg",
            Sentiment::Neutral => "neu",
            Sentiment::Unlabeled => "unlabeled",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "pos" | "positive" => Some(Sentiment::Positive),
            "neg" | "negative" => Some(Sentiment::Negative),
            "neu" | "neutral" => Some(Sentiment::Neutral),
            "unlabeled" | "" => Some(Sentiment::Unlabeled),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Original,
    AttributeAugmented,
    AnpAugmented,
}

impl Provenance {
    pub fn as_str(self) -> &'static str {
        match self {
            Provenance::Original => "original",
            Provenance::AttributeAugmented => "attribute_augmented",
            Provenance::AnpAugmented => "anp_augmented",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.trim() {
            "original" | "" => Some(Provenance::Original),
            "attribute_augmented" => Some(Provenance::AttributeAugmented),
            "anp_augmented" => Some(Provenance::AnpAugmented),
            _ => None,
        }
    }
}

/// A tokenized caption of one image.
///
/// `inserted` holds the (sorted) positions of tokens added by augmentation,
/// so the original caption can always be recovered.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Caption {
    pub image_id: String,
    pub tokens: Vec<Token>,
    pub sentiment: Sentiment,
    pub provenance: Provenance,
    pub inserted: Vec<usize>,
}

impl Caption {
    pub fn new(image_id: impl Into<String>, text: &str) -> Self {
        Caption {
            image_id: image_id.into(),
            tokens: tokenize(text),
            sentiment: Sentiment::Unlabeled,
            provenance: Provenance::Original,
            inserted: Vec::new(),
        }
    }

    pub fn with_sentiment(mut self, sentiment: Sentiment) -> Self {
        self.sentiment = sentiment;
        self
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn words(&self) -> Vec<&str> {
        self.tokens.iter().map(|t| t.text.as_str()).collect()
    }

    pub fn text(&self) -> String {
        detokenize(&self.tokens)
    }

    /// Token sequence with every augmentation insertion removed.
    pub fn original_tokens(&self) -> Vec<Token> {
        self.tokens
            .iter()
            .enumerate()
            .filter(|(i, _)| self.inserted.binary_search(i).is_err())
            .map(|(_, t)| t.clone())
            .collect()
    }
}
