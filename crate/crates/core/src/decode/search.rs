use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};

use super::constraints::ConstraintAutomaton;
use crate::{Error, Result};

/// Incremental next-token scorer. `start` and `advance` return the state
/// after consuming the input so far, together with the log-probabilities
/// of the next token.
pub trait StepScorer {
    type State: Clone;
    fn start(&self) -> Result<(Self::State, Vec<f64>)>;
    fn advance(&self, state: &Self::State, token: usize) -> Result<(Self::State, Vec<f64>)>;
}

/// Adapts a function of the whole prefix into a [`StepScorer`].
pub struct PrefixScorer<F>(pub F);

impl<F: Fn(&[usize]) -> Vec<f64>> StepScorer for PrefixScorer<F> {
    type State = Vec<usize>;

    fn start(&self) -> Result<(Vec<usize>, Vec<f64>)> {
        Ok((Vec::new(), (self.0)(&[])))
    }

    fn advance(&self, state: &Vec<usize>, token: usize) -> Result<(Vec<usize>, Vec<f64>)> {
        let mut prefix = state.clone();
        prefix.push(token);
        let lp = (self.0)(&prefix);
        Ok((prefix, lp))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SearchConfig {
    /// Hypotheses kept per automaton state.
    pub beam_size: usize,
    /// Maximum number of tokens, eos included.
    pub max_len: usize,
    pub eos: usize,
    /// Tokens never expanded.
    pub banned: BTreeSet<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Hypothesis {
    /// Emitted tokens; ends with eos when finished.
    pub tokens: Vec<usize>,
    pub logprob: f64,
    pub state: u64,
    pub finished: bool,
}

impl Hypothesis {
    /// Tokens without the final eos.
    pub fn words(&self) -> &[usize] {
        match self.tokens.split_last() {
            Some((_, rest)) if self.finished => rest,
            _ => &self.tokens,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SearchResult {
    pub best: Hypothesis,
    /// Every surviving hypothesis at the end, grouped by automaton state.
    pub beam: Vec<Hypothesis>,
}

/// Higher log-probability first; ties go to the lexicographically smaller
/// token sequence.
fn rank(a: (f64, &[usize]), b: (f64, &[usize])) -> Ordering {
    b.0.total_cmp(&a.0).then_with(|| a.1.cmp(b.1))
}

struct Live<S> {
    hyp: Hypothesis,
    scorer_state: Option<S>,
    next: Vec<f64>,
}

/// Beam search with one beam of `beam_size` per automaton state. Finished
/// hypotheses stay in their beam and compete with open ones; the result is
/// the best finished hypothesis in an accepting state.
pub fn constrained_beam_search<S: StepScorer>(scorer: &S, fsa: &ConstraintAutomaton, cfg: &SearchConfig) -> Result<SearchResult> {
    if cfg.beam_size == 0 || cfg.max_len == 0 {
        return Err(Error::InvalidArgument("beam_size and max_len must be >= 1".into()));
    }
    if !fsa.is_satisfiable() {
        return Err(Error::ConstraintUnsatisfiable { max_len: cfg.max_len });
    }
    let (s0, lp0) = scorer.start()?;
    let mut beams: BTreeMap<u64, Vec<Live<S::State>>> = BTreeMap::new();
    beams.insert(
        0,
        vec![Live {
            hyp: Hypothesis {
                tokens: Vec::new(),
                logprob: 0.0,
                state: 0,
                finished: false,
            },
            scorer_state: Some(s0),
            next: lp0,
        }],
    );

    for step in 0..cfg.max_len {
        // only eos can still finish a hypothesis on the last step
        let last = step + 1 == cfg.max_len;
        if beams.values().flatten().all(|l| l.hyp.finished) {
            break;
        }
        // (source bucket, index, token or None to carry a finished hypothesis)
        let mut buckets: BTreeMap<u64, Vec<(f64, Vec<usize>, u64, usize, Option<usize>)>> = BTreeMap::new();
        for (&mask, lives) in &beams {
            for (i, live) in lives.iter().enumerate() {
                if live.hyp.finished {
                    buckets.entry(mask).or_default().push((live.hyp.logprob, live.hyp.tokens.clone(), mask, i, None));
                    continue;
                }
                for (tok, &lp) in live.next.iter().enumerate() {
                    if cfg.banned.contains(&tok) || lp == f64::NEG_INFINITY || (last && tok != cfg.eos) {
                        continue;
                    }
                    let next_mask = fsa.advance(mask, tok);
                    let mut tokens = live.hyp.tokens.clone();
                    tokens.push(tok);
                    buckets.entry(next_mask).or_default().push((live.hyp.logprob + lp, tokens, mask, i, Some(tok)));
                }
            }
        }
        let mut next_beams: BTreeMap<u64, Vec<Live<S::State>>> = BTreeMap::new();
        for (mask, mut cands) in buckets {
            cands.sort_by(|a, b| rank((a.0, &a.1), (b.0, &b.1)));
            cands.truncate(cfg.beam_size);
            let mut kept = Vec::with_capacity(cands.len());
            for (logprob, tokens, src, i, tok) in cands {
                let parent = &beams[&src][i];
                let live = match tok {
                    None => Live {
                        hyp: parent.hyp.clone(),
                        scorer_state: None,
                        next: Vec::new(),
                    },
                    Some(t) if t == cfg.eos => Live {
                        hyp: Hypothesis {
                            tokens,
                            logprob,
                            state: mask,
                            finished: true,
                        },
                        scorer_state: None,
                        next: Vec::new(),
                    },
                    Some(t) => {
                        let state = parent.scorer_state.as_ref().expect("open hypothesis has scorer state");
                        let (s, next) = scorer.advance(state, t)?;
                        Live {
                            hyp: Hypothesis {
                                tokens,
                                logprob,
                                state: mask,
                                finished: false,
                            },
                            scorer_state: Some(s),
                            next,
                        }
                    }
                };
                kept.push(live);
            }
            next_beams.insert(mask, kept);
        }
        beams = next_beams;
    }

    let beam: Vec<Hypothesis> = beams.into_values().flatten().map(|l| l.hyp).collect();
    let best = beam
        .iter()
        .filter(|h| h.finished && fsa.is_accepting(h.state))
        .min_by(|a, b| rank((a.logprob, &a.tokens), (b.logprob, &b.tokens)))
        .cloned()
        .ok_or(Error::ConstraintUnsatisfiable { max_len: cfg.max_len })?;
    Ok(SearchResult { best, beam })
}

/// Arg-max decoding (lowest id on ties) until eos or `max_len` tokens.
pub fn greedy_decode<S: StepScorer>(scorer: &S, cfg: &SearchConfig) -> Result<Hypothesis> {
    let (mut state, mut next) = scorer.start()?;
    let mut hyp = Hypothesis {
        tokens: Vec::new(),
        logprob: 0.0,
        state: 0,
        finished: false,
    };
    for _ in 0..cfg.max_len {
        let mut best: Option<usize> = None;
        for (t, &lp) in next.iter().enumerate() {
            if cfg.banned.contains(&t) {
                continue;
            }
            if best.is_none_or(|b| lp > next[b]) {
                best = Some(t);
            }
        }
        let Some(t) = best else { break };
        hyp.logprob += next[t];
        hyp.tokens.push(t);
        if t == cfg.eos {
            hyp.finished = true;
            break;
        }
        (state, next) = scorer.advance(&state, t)?;
    }
    Ok(hyp)
}
