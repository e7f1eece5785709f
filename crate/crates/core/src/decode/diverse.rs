use std::fs;
use std::io::Write;
use std::path::Path;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::constraints::{ConstraintAutomaton, ConstraintSpec};
use super::search::{constrained_beam_search, Hypothesis, SearchConfig, StepScorer};
use crate::corpus::{Vocabulary, BOS};
use crate::latent::SentimentCluster;
use crate::model::{generation_step, DecoderState, ImageContext, ModelParameters, Prior};
use crate::{Error, Result};

/// Scores prefixes with the trained decoder. The latent noise of every
/// step is drawn once up front, so all hypotheses of one search share the
/// same `z` sequence.
pub struct ModelScorer<'a> {
    pub params: &'a ModelParameters,
    pub prior: &'a Prior,
    pub image: &'a ImageContext,
    pub cluster: Option<SentimentCluster>,
    pub std: f64,
    noise: Vec<Vec<f64>>,
}

impl<'a> ModelScorer<'a> {
    pub fn new<R: Rng + ?Sized>(
        params: &'a ModelParameters,
        prior: &'a Prior,
        image: &'a ImageContext,
        cluster: Option<SentimentCluster>,
        std: f64,
        max_len: usize,
        rng: &mut R,
    ) -> Self {
        let zd = params.config.z_dim;
        let noise = (0..max_len).map(|_| (0..zd).map(|_| rng.sample(StandardNormal)).collect()).collect();
        ModelScorer {
            params,
            prior,
            image,
            cluster,
            std,
            noise,
        }
    }

    fn step(&self, state: &DecoderState, t: usize, input: usize) -> Result<((DecoderState, usize), Vec<f64>)> {
        let zero;
        let noise = match self.noise.get(t) {
            Some(n) => n.as_slice(),
            None => {
                zero = vec![0.0; self.params.config.z_dim];
                &zero
            }
        };
        let s = generation_step(self.params, self.prior, self.image, self.cluster, state, input, noise, self.std)?;
        Ok(((s.state, t + 1), s.log_probs.to_vec()))
    }
}

impl StepScorer for ModelScorer<'_> {
    type State = (DecoderState, usize);

    fn start(&self) -> Result<(Self::State, Vec<f64>)> {
        self.step(&DecoderState::zeros(self.params.config.hidden_size), 0, BOS)
    }

    fn advance(&self, state: &Self::State, token: usize) -> Result<(Self::State, Vec<f64>)> {
        self.step(&state.0, state.1, token)
    }
}

/// One of the `n` decodes of an image.
#[derive(Debug, Clone, PartialEq)]
pub struct DecodeOutcome {
    pub spec: ConstraintSpec,
    pub hypothesis: Option<Hypothesis>,
    /// Set when no hypothesis met the constraint within the length budget.
    pub error: Option<String>,
}

impl DecodeOutcome {
    /// Satisfaction is re-checked on the decoded words, independently of the automaton.
    pub fn to_record(&self, image_id: &str, vocab: &Vocabulary) -> DecodeRecord {
        let words: Vec<String> = self.hypothesis.as_ref().map(|h| vocab.decode(h.words())).unwrap_or_default();
        let refs: Vec<&str> = words.iter().map(String::as_str).collect();
        DecodeRecord {
            image_id: image_id.to_string(),
            caption: words.join(" "),
            logprob: self.hypothesis.as_ref().map(|h| h.logprob),
            constraints: self.spec.labels(),
            satisfied: self.hypothesis.is_some() && self.spec.is_satisfied_by(&refs),
            mode: self.spec.mode.as_str().to_string(),
            error: self.error.clone(),
            warning: self.spec.warning.clone(),
        }
    }
}

/// `n` decodes, each with a freshly sampled constraint and a freshly
/// sampled latent sequence. Unsatisfiable items are recorded, not raised.
pub fn diverse_decode<R, S, FS, FC>(n: usize, mut make_spec: FS, mut make_scorer: FC, vocab: &Vocabulary, cfg: &SearchConfig, rng: &mut R) -> Result<Vec<DecodeOutcome>>
where
    R: Rng + ?Sized,
    S: StepScorer,
    FS: FnMut(&mut R) -> ConstraintSpec,
    FC: FnMut(&mut R) -> Result<S>,
{
    if n == 0 {
        return Err(Error::InvalidArgument("n must be >= 1".into()));
    }
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        let spec = make_spec(rng);
        let scorer = make_scorer(rng)?;
        let fsa = ConstraintAutomaton::new(&spec, vocab)?;
        match constrained_beam_search(&scorer, &fsa, cfg) {
            Ok(r) => out.push(DecodeOutcome {
                spec,
                hypothesis: Some(r.best),
                error: None,
            }),
            Err(e @ Error::ConstraintUnsatisfiable { .. }) => out.push(DecodeOutcome {
                spec,
                hypothesis: None,
                error: Some(e.to_string()),
            }),
            Err(e) => return Err(e),
        }
    }
    Ok(out)
}

/// One line of decode output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecodeRecord {
    pub image_id: String,
    pub caption: String,
    pub logprob: Option<f64>,
    pub constraints: Vec<String>,
    pub satisfied: bool,
    pub mode: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub warning: Option<String>,
}

pub fn write_decodes(records: &[DecodeRecord], path: &Path) -> Result<()> {
    let mut f = std::io::BufWriter::new(fs::File::create(path)?);
    for r in records {
        serde_json::to_writer(&mut f, r)?;
        f.write_all(b"\n")?;
    }
    f.flush()?;
    Ok(())
}

pub fn read_decodes(path: &Path) -> Result<Vec<DecodeRecord>> {
    let text = fs::read_to_string(path)?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| serde_json::from_str(l).map_err(|e| Error::parse(path, i + 1, e.to_string())))
        .collect()
}
