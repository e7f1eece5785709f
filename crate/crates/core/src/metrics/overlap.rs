use std::collections::{BTreeMap, BTreeSet};

use crate::{Error, Result};

/// Counts of all n-grams of one order.
pub type NGramCounts = BTreeMap<Vec<String>, usize>;

pub fn ngrams<S: AsRef<str>>(tokens: &[S], n: usize) -> NGramCounts {
    let mut out = NGramCounts::new();
    if n == 0 || tokens.len() < n {
        return out;
    }
    for w in tokens.windows(n) {
        *out.entry(w.iter().map(|t| t.as_ref().to_string()).collect()).or_default() += 1;
    }
    out
}

/// Precision substituted for an order with no matches.
pub const BLEU_EPSILON: f64 = 1e-9;

/// Corpus BLEU for orders 1..=max_n. `candidates[i]` is scored against
/// `references[i]`; counts are clipped per sentence and pooled over the
/// corpus, the brevity penalty uses the closest reference length (shorter
/// on ties). Zero precisions become [`BLEU_EPSILON`]; without any unigram
/// match every score is 0.
pub fn bleu(candidates: &[Vec<String>], references: &[Vec<Vec<String>>], max_n: usize) -> Result<Vec<f64>> {
    if candidates.len() != references.len() {
        return Err(Error::LengthMismatch {
            expected: references.len(),
            actual: candidates.len(),
        });
    }
    let mut matched = vec![0usize; max_n];
    let mut total = vec![0usize; max_n];
    let (mut cand_len, mut ref_len) = (0usize, 0usize);
    for (cand, refs) in candidates.iter().zip(references) {
        if refs.is_empty() {
            return Err(Error::Empty("reference set"));
        }
        cand_len += cand.len();
        ref_len += refs
            .iter()
            .map(|r| r.len())
            .min_by_key(|&l| (l.abs_diff(cand.len()), l))
            .expect("non-empty");
        for n in 1..=max_n {
            let c = ngrams(cand, n);
            let mut max_ref: NGramCounts = NGramCounts::new();
            for r in refs {
                for (g, k) in ngrams(r, n) {
                    let e = max_ref.entry(g).or_default();
                    *e = (*e).max(k);
                }
            }
            total[n - 1] += c.values().sum::<usize>();
            matched[n - 1] += c.iter().map(|(g, &k)| k.min(max_ref.get(g).copied().unwrap_or(0))).sum::<usize>();
        }
    }
    if cand_len == 0 || max_n == 0 || matched[0] == 0 {
        return Ok(vec![0.0; max_n]);
    }
    let bp = if cand_len > ref_len { 1.0 } else { (1.0 - ref_len as f64 / cand_len as f64).exp() };
    let mut out = Vec::with_capacity(max_n);
    let mut log_sum = 0.0;
    for n in 0..max_n {
        let p = if total[n] == 0 || matched[n] == 0 {
            BLEU_EPSILON
        } else {
            matched[n] as f64 / total[n] as f64
        };
        log_sum += p.ln();
        out.push(bp * (log_sum / (n + 1) as f64).exp());
    }
    Ok(out)
}

pub fn lcs_len<S: PartialEq>(a: &[S], b: &[S]) -> usize {
    let mut prev = vec![0usize; b.len() + 1];
    let mut cur = vec![0usize; b.len() + 1];
    for x in a {
        for (j, y) in b.iter().enumerate() {
            cur[j + 1] = if x == y { prev[j] + 1 } else { prev[j + 1].max(cur[j]) };
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

pub const ROUGE_BETA: f64 = 1.2;

/// ROUGE-L F-measure, best over references.
pub fn rouge_l(candidate: &[String], references: &[Vec<String>]) -> f64 {
    if candidate.is_empty() {
        return 0.0;
    }
    references
        .iter()
        .filter(|r| !r.is_empty())
        .map(|r| {
            let l = lcs_len(candidate, r) as f64;
            if l == 0.0 {
                return 0.0;
            }
            let p = l / candidate.len() as f64;
            let rec = l / r.len() as f64;
            let b2 = ROUGE_BETA * ROUGE_BETA;
            (1.0 + b2) * p * rec / (rec + b2 * p)
        })
        .fold(0.0, f64::max)
}

const CIDER_N: usize = 4;

/// CIDEr scorer bound to one evaluation corpus: document frequencies come
/// from the references of the evaluated images. No length penalty or
/// clipping (not CIDEr-D).
#[derive(Debug, Clone)]
pub struct CiderScorer {
    df: Vec<BTreeMap<Vec<String>, usize>>,
    log_n: f64,
    /// Per image, per reference, per order: TF-IDF vector and its norm.
    refs: Vec<Vec<Vec<(BTreeMap<Vec<String>, f64>, f64)>>>,
}

impl CiderScorer {
    pub fn new(references: &[Vec<Vec<String>>]) -> Result<Self> {
        if references.is_empty() {
            return Err(Error::Empty("evaluation corpus"));
        }
        if references.iter().any(Vec::is_empty) {
            return Err(Error::Empty("reference set"));
        }
        let mut df: Vec<BTreeMap<Vec<String>, usize>> = vec![BTreeMap::new(); CIDER_N];
        for refs in references {
            for n in 1..=CIDER_N {
                let grams: BTreeSet<Vec<String>> = refs.iter().flat_map(|r| ngrams(r, n).into_keys()).collect();
                for g in grams {
                    *df[n - 1].entry(g).or_default() += 1;
                }
            }
        }
        let mut scorer = CiderScorer {
            df,
            log_n: (references.len() as f64).ln(),
            refs: Vec::new(),
        };
        scorer.refs = references
            .iter()
            .map(|refs| refs.iter().map(|r| (1..=CIDER_N).map(|n| scorer.vector(r, n)).collect()).collect())
            .collect();
        Ok(scorer)
    }

    fn vector(&self, tokens: &[String], n: usize) -> (BTreeMap<Vec<String>, f64>, f64) {
        let v: BTreeMap<Vec<String>, f64> = ngrams(tokens, n)
            .into_iter()
            .map(|(g, tf)| {
                let d = self.df[n - 1].get(&g).copied().unwrap_or(0).max(1) as f64;
                (g, tf as f64 * (self.log_n - d.ln()))
            })
            .collect();
        let norm = v.values().map(|x| x * x).sum::<f64>().sqrt();
        (v, norm)
    }

    pub fn num_images(&self) -> usize {
        self.refs.len()
    }

    /// Score of `candidate` against the references of image `image`.
    pub fn score(&self, candidate: &[String], image: usize) -> f64 {
        let refs = &self.refs[image];
        let mut total = 0.0;
        for n in 1..=CIDER_N {
            let (vc, nc) = self.vector(candidate, n);
            if nc == 0.0 {
                continue;
            }
            for r in refs {
                let (vr, nr) = &r[n - 1];
                if *nr == 0.0 {
                    continue;
                }
                let dot: f64 = vc.iter().filter_map(|(g, a)| vr.get(g).map(|b| a * b)).sum();
                total += dot / (nc * nr);
            }
        }
        10.0 * total / (CIDER_N as f64 * refs.len() as f64)
    }
}

/// Corpus CIDEr: mean of per-image scores, returned alongside them.
pub fn cider(candidates: &[Vec<String>], references: &[Vec<Vec<String>>]) -> Result<(f64, Vec<f64>)> {
    if candidates.len() != references.len() {
        return Err(Error::LengthMismatch {
            expected: references.len(),
            actual: candidates.len(),
        });
    }
    let scorer = CiderScorer::new(references)?;
    let scores: Vec<f64> = candidates.iter().enumerate().map(|(i, c)| scorer.score(c, i)).collect();
    let mean = scores.iter().sum::<f64>() / scores.len() as f64;
    Ok((mean, scores))
}
