use std::collections::{BTreeMap, BTreeSet};

use rand::seq::IndexedRandom;
use rand::Rng;

use super::{AnpTable, Caption, ObjectNounSet, Provenance, Sentiment, SentimentLexicon, SynonymSet, Token, TokenKind};

/// How the adjective pool for a noun with several annotated attributes is formed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SynonymPooling {
    /// Uniform over the union of all synonym sets.
    #[default]
    Union,
    /// Sample one attribute first, then one of its synonyms.
    SampleAttribute,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AugmentConfig {
    pub pooling: SynonymPooling,
    /// Insertions stop once the caption reaches this many tokens.
    pub max_len: usize,
}

impl Default for AugmentConfig {
    fn default() -> Self {
        AugmentConfig {
            pooling: SynonymPooling::Union,
            max_len: 20,
        }
    }
}

/// `(position, category_id)` for every word token that names an object
/// category. A token in several noun sets yields one site per category.
pub fn match_noun_sites(tokens: &[Token], noun_sets: &[ObjectNounSet]) -> Vec<(usize, u32)> {
    let mut sites = Vec::new();
    for (pos, tok) in tokens.iter().enumerate() {
        if tok.kind != TokenKind::Word {
            continue;
        }
        let mut cats: Vec<u32> = noun_sets
            .iter()
            .filter(|s| s.nouns.contains(&tok.text))
            .map(|s| s.category_id)
            .collect();
        cats.sort_unstable();
        cats.dedup();
        sites.extend(cats.into_iter().map(|c| (pos, c)));
    }
    sites
}

/// Insert a synonym of an annotated attribute in front of each matching noun.
///
/// `region_annotations` lists `(category_id, attribute_ids)` per annotated
/// region; regions of the same category pool their attributes.
pub fn augment_with_attributes<R: Rng + ?Sized>(
    caption: &Caption,
    region_annotations: &[(u32, Vec<u32>)],
    synonym_sets: &[SynonymSet],
    noun_sets: &[ObjectNounSet],
    lexicon: &SentimentLexicon,
    cfg: &AugmentConfig,
    rng: &mut R,
) -> Caption {
    let by_id: BTreeMap<u32, &SynonymSet> = synonym_sets.iter().map(|s| (s.attribute_id, s)).collect();
    let mut attrs_by_cat: BTreeMap<u32, BTreeSet<u32>> = BTreeMap::new();
    for (cat, attrs) in region_annotations {
        for a in attrs {
            if by_id.contains_key(a) {
                attrs_by_cat.entry(*cat).or_default().insert(*a);
            } else {
                log::warn!("attribute {a} has no synonym set; ignored");
            }
        }
    }
    let all_adjectives: BTreeSet<&str> = synonym_sets
        .iter()
        .flat_map(|s| s.synonyms.iter().map(String::as_str))
        .collect();

    let mut eligible: BTreeMap<usize, BTreeSet<u32>> = BTreeMap::new();
    for (pos, cat) in match_noun_sites(&caption.tokens, noun_sets) {
        if let Some(attrs) = attrs_by_cat.get(&cat) {
            eligible.entry(pos).or_default().extend(attrs.iter().copied());
        }
    }

    insert_before(caption, cfg.max_len, rng, |pos, tokens, rng| {
        let attrs = eligible.get(&pos)?;
        if pos > 0 && all_adjectives.contains(tokens[pos - 1].text.as_str()) {
            return None;
        }
        let pick = match cfg.pooling {
            SynonymPooling::Union => {
                let pool: BTreeSet<&str> = attrs
                    .iter()
                    .flat_map(|a| by_id[a].synonyms.iter().map(String::as_str))
                    .collect();
                let pool: Vec<&str> = pool.into_iter().collect();
                pool.choose(rng).copied()
            }
            SynonymPooling::SampleAttribute => {
                let ids: Vec<u32> = attrs.iter().copied().collect();
                let id = ids.choose(rng)?;
                let pool: Vec<&str> = by_id[id].synonyms.iter().map(String::as_str).collect();
                pool.choose(rng).copied()
            }
        }?;
        Some(pick.to_string())
    })
    .map(|(mut out, adjectives)| {
        out.provenance = Provenance::AttributeAugmented;
        out.sentiment = majority_polarity(lexicon, &adjectives);
        out
    })
    .unwrap_or_else(|| caption.clone())
}

/// Insert a `sentiment` ANP adjective in front of every noun the table knows.
pub fn augment_with_anps<R: Rng + ?Sized>(
    caption: &Caption,
    anps: &AnpTable,
    sentiment: Sentiment,
    cfg: &AugmentConfig,
    rng: &mut R,
) -> Caption {
    insert_before(caption, cfg.max_len, rng, |pos, tokens, rng| {
        let tok = &tokens[pos];
        if tok.kind != TokenKind::Word {
            return None;
        }
        let adjs = anps.adjectives(&tok.text, sentiment)?;
        if pos > 0 {
            let prev = tokens[pos - 1].text.as_str();
            let already = anps
                .entries
                .get(&tok.text)
                .is_some_and(|m| m.values().any(|s| s.contains(prev)));
            if already {
                return None;
            }
        }
        let pool: Vec<&String> = adjs.iter().collect();
        pool.choose(rng).map(|s| s.to_string())
    })
    .map(|(mut out, _)| {
        out.provenance = Provenance::AnpAugmented;
        out.sentiment = sentiment;
        out
    })
    .unwrap_or_else(|| caption.clone())
}

/// Walk the caption left to right; `choose(pos, tokens, rng)` may return a
/// word to insert in front of original position `pos`. Returns `None` when
/// nothing was inserted.
fn insert_before<R, F>(caption: &Caption, max_len: usize, rng: &mut R, mut choose: F) -> Option<(Caption, Vec<String>)>
where
    R: Rng + ?Sized,
    F: FnMut(usize, &[Token], &mut R) -> Option<String>,
{
    let mut tokens = Vec::with_capacity(caption.tokens.len() + 4);
    let mut inserted = Vec::new();
    let mut words = Vec::new();
    let mut old_inserted = caption.inserted.iter().peekable();
    let mut room = max_len.saturating_sub(caption.tokens.len());
    for (pos, tok) in caption.tokens.iter().enumerate() {
        if room > 0 {
            if let Some(word) = choose(pos, &caption.tokens, rng) {
                inserted.push(tokens.len());
                tokens.push(Token::word(word.clone()));
                words.push(word);
                room -= 1;
            }
        }
        if old_inserted.peek() == Some(&&pos) {
            old_inserted.next();
            inserted.push(tokens.len());
        }
        tokens.push(tok.clone());
    }
    if words.is_empty() {
        return None;
    }
    inserted.sort_unstable();
    let out = Caption {
        image_id: caption.image_id.clone(),
        tokens,
        sentiment: caption.sentiment,
        provenance: caption.provenance,
        inserted,
    };
    Some((out, words))
}

/// Majority polarity of `words`; ties and unknown words give neutral.
fn majority_polarity(lexicon: &SentimentLexicon, words: &[String]) -> Sentiment {
    let (mut pos, mut neg) = (0usize, 0usize);
    for w in words {
        match lexicon.polarity(w) {
            Some(Sentiment::Positive) => pos += 1,
            Some(Sentiment::Negative) => neg += 1,
            _ => {}
        }
    }
    match pos.cmp(&neg) {
        std::cmp::Ordering::Greater => Sentiment::Positive,
        std::cmp::Ordering::Less => Sentiment::Negative,
        std::cmp::Ordering::Equal => Sentiment::Neutral,
    }
}
