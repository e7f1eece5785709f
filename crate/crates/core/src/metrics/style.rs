use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::overlap::ngrams;
use crate::corpus::{AnpTable, PolarityLexicon, Sentiment};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DivMode {
    /// Distinct n-grams of the set over all words of the set.
    #[default]
    Set,
    /// Mean over captions of distinct n-grams over caption length.
    PerCaption,
}

/// Diversity of a caption set. Empty sets and sets without words score 0.
pub fn div_n<S: AsRef<str>>(captions: &[Vec<S>], n: usize, mode: DivMode) -> f64 {
    match mode {
        DivMode::Set => {
            let words: usize = captions.iter().map(Vec::len).sum();
            if words == 0 {
                return 0.0;
            }
            let distinct: BTreeSet<Vec<String>> = captions.iter().flat_map(|c| ngrams(c, n).into_keys()).collect();
            distinct.len() as f64 / words as f64
        }
        DivMode::PerCaption => {
            let scored: Vec<f64> = captions
                .iter()
                .filter(|c| !c.is_empty())
                .map(|c| ngrams(c, n).len() as f64 / c.len() as f64)
                .collect();
            if scored.is_empty() {
                0.0
            } else {
                scored.iter().sum::<f64>() / scored.len() as f64
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SenMatch {
    /// The adjective directly precedes the noun.
    #[default]
    Adjacent,
    /// Adjective and noun both occur anywhere in the caption.
    CoOccurrence,
}

pub fn has_anp<S: AsRef<str>>(caption: &[S], anps: &AnpTable, sentiment: Sentiment, matching: SenMatch) -> bool {
    match matching {
        SenMatch::Adjacent => caption.windows(2).any(|w| anps.contains_pair(w[0].as_ref(), w[1].as_ref(), sentiment)),
        SenMatch::CoOccurrence => caption
            .iter()
            .any(|a| caption.iter().any(|n| anps.contains_pair(a.as_ref(), n.as_ref(), sentiment))),
    }
}

/// Percentage of captions containing an adjective-noun pair of the requested sentiment.
pub fn sen_percent<S: AsRef<str>>(candidates: &[Vec<S>], anps: &AnpTable, sentiment: Sentiment, matching: SenMatch) -> f64 {
    if candidates.is_empty() {
        return 0.0;
    }
    let hits = candidates.iter().filter(|c| has_anp(c, anps, sentiment, matching)).count();
    100.0 * hits as f64 / candidates.len() as f64
}

/// Sentiment-adjective precision and recall, macro-averaged over images.
/// All candidates of an image are pooled into one adjective set.
pub fn sentiment_pr<S: AsRef<str>>(candidates: &[Vec<Vec<S>>], references: &[Vec<Vec<S>>], adjectives: &BTreeSet<String>) -> (f64, f64) {
    let n = candidates.len().min(references.len());
    if n == 0 {
        return (0.0, 0.0);
    }
    let collect = |caps: &[Vec<S>]| -> BTreeSet<String> {
        caps.iter()
            .flatten()
            .map(|w| w.as_ref())
            .filter(|w| adjectives.contains(*w))
            .map(String::from)
            .collect()
    };
    let (mut sp, mut sr) = (0.0, 0.0);
    for (c, r) in candidates.iter().zip(references) {
        let cs = collect(c);
        let rs = collect(r);
        let both = cs.intersection(&rs).count() as f64;
        if !cs.is_empty() {
            sp += both / cs.len() as f64;
        }
        if !rs.is_empty() {
            sr += both / rs.len() as f64;
        }
    }
    (sp / n as f64, sr / n as f64)
}

/// Majority polarity of the caption's words; ties and no hits are neutral.
pub fn lexicon_classify<S: AsRef<str>>(caption: &[S], lexicon: &PolarityLexicon) -> Sentiment {
    let pos = caption.iter().filter(|w| lexicon.positive.contains(w.as_ref())).count();
    let neg = caption.iter().filter(|w| lexicon.negative.contains(w.as_ref())).count();
    match pos.cmp(&neg) {
        std::cmp::Ordering::Greater => Sentiment::Positive,
        std::cmp::Ordering::Less => Sentiment::Negative,
        std::cmp::Ordering::Equal => Sentiment::Neutral,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(s: &str) -> Vec<String> {
        s.split_whitespace().map(String::from).collect()
    }

    #[test]
    fn div_cases() {
        assert_eq!(div_n(&[t("a b c")], 1, DivMode::Set), 1.0);
        let one = div_n(&[t("a dog on a mat")], 1, DivMode::Set);
        let two = div_n(&[t("a dog on a mat"), t("a dog on a mat")], 1, DivMode::Set);
        assert_eq!(two, one / 2.0);
        // 5 captions, 20 words; distinct unigrams {a, dog, cat, on, mat, the, sofa, big, red} = 9
        let set = [t("a dog on mat"), t("a cat on mat"), t("the dog on sofa"), t("a big dog on"), t("a red cat on")];
        assert_eq!(div_n(&set, 1, DivMode::Set), 9.0 / 20.0);
        // distinct bigrams: a dog, dog on, on mat, a cat, cat on, the dog, on sofa, a big, big dog, a red, red cat = 11
        assert_eq!(div_n(&set, 2, DivMode::Set), 11.0 / 20.0);
        assert_eq!(div_n(&[t("a a"), t("b")], 1, DivMode::PerCaption), (0.5 + 1.0) / 2.0);
        assert_eq!(div_n::<String>(&[], 1, DivMode::Set), 0.0);
    }

    fn anps() -> AnpTable {
        let mut a = AnpTable::default();
        a.insert("truck", Sentiment::Positive, "nice");
        a.insert("truck", Sentiment::Negative, "rusty");
        a
    }

    #[test]
    fn sen_cases() {
        assert_eq!(sen_percent(&[t("a nice truck")], &anps(), Sentiment::Positive, SenMatch::Adjacent), 100.0);
        assert_eq!(sen_percent(&[t("a nice red truck")], &anps(), Sentiment::Positive, SenMatch::Adjacent), 0.0);
        assert_eq!(sen_percent(&[t("a nice red truck")], &anps(), Sentiment::Positive, SenMatch::CoOccurrence), 100.0);
        assert_eq!(sen_percent(&[t("a nice truck"), t("a rusty truck")], &anps(), Sentiment::Positive, SenMatch::Adjacent), 50.0);
    }

    #[test]
    fn sp_sr_cases() {
        let adj: BTreeSet<String> = ["nice", "ugly", "happy", "sad"].iter().map(|s| s.to_string()).collect();
        let refs = vec![vec![t("a nice dog"), t("a happy dog")]];
        assert_eq!(sentiment_pr(&[vec![t("nice happy dog")]], &refs, &adj), (1.0, 1.0));
        assert_eq!(sentiment_pr(&[vec![t("a dog")]], &refs, &adj), (0.0, 0.0));
        // image 1: C {nice, sad}, R {nice, happy} -> 1/2, 1/2
        // image 2: C {ugly}, R {ugly} -> 1, 1
        // image 3: C {}, R {sad} -> 0, 0
        let cands = vec![vec![t("nice dog"), t("sad dog")], vec![t("ugly cat")], vec![t("a bird")]];
        let refs = vec![vec![t("nice dog"), t("happy dog")], vec![t("ugly cat")], vec![t("sad bird")]];
        let (sp, sr) = sentiment_pr(&cands, &refs, &adj);
        assert!((sp - 1.5 / 3.0).abs() < 1e-15 && (sr - 1.5 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn classify_cases() {
        let lex = PolarityLexicon {
            positive: ["great", "wonderful", "nice"].iter().map(|s| s.to_string()).collect(),
            negative: ["bad", "ugly", "sad"].iter().map(|s| s.to_string()).collect(),
        };
        assert_eq!(lexicon_classify(&t("a great wonderful day"), &lex), Sentiment::Positive);
        assert_eq!(lexicon_classify(&t("a day"), &lex), Sentiment::Neutral);
        assert_eq!(lexicon_classify(&t("nice great bad ugly sad dog"), &lex), Sentiment::Negative);
        assert_eq!(lexicon_classify(&t("nice bad"), &lex), Sentiment::Neutral);
    }
}
