use rand::distr::{weighted::WeightedIndex, Distribution};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::network::{generation_step, DecoderState, ImageContext, Prior};
use super::params::ModelParameters;
use crate::corpus::{Caption, Vocabulary, BOS, EOS, PAD, UNK};
use crate::latent::SentimentCluster;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GenerationMode {
    /// Arg-max word at every step.
    #[default]
    Greedy,
    /// Ancestral sampling from the next-word distribution.
    Sample,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GenerationConfig {
    /// Standard deviation of `z_t` around the prior mean; 0 uses the mean itself.
    pub std: f64,
    pub max_len: usize,
    pub mode: GenerationMode,
}

impl Default for GenerationConfig {
    fn default() -> Self {
        GenerationConfig {
            std: 1.0,
            max_len: 20,
            mode: GenerationMode::Greedy,
        }
    }
}

/// Ids the decoder may never emit.
pub fn is_banned(id: usize) -> bool {
    id == PAD || id == BOS || id == UNK
}

/// A generated word sequence (without eos) and its log-probability.
#[derive(Debug, Clone, PartialEq)]
pub struct Generated {
    pub ids: Vec<usize>,
    pub logprob: f64,
    pub alphas: Vec<Vec<f64>>,
}

/// Decodes one caption with the encoder dropped: each `z_t` is drawn from
/// the prior around the attention-weighted (or cluster) mean.
pub fn generate_ids<R: Rng + ?Sized>(
    params: &ModelParameters,
    prior: &Prior,
    image: &ImageContext,
    cluster: Option<SentimentCluster>,
    cfg: &GenerationConfig,
    rng: &mut R,
) -> Result<Generated> {
    if !(cfg.std >= 0.0) {
        return Err(Error::InvalidArgument(format!("std must be >= 0, got {}", cfg.std)));
    }
    let zd = params.config.z_dim;
    let mut state = DecoderState::zeros(params.config.hidden_size);
    let mut input = BOS;
    let mut out = Generated {
        ids: Vec::new(),
        logprob: 0.0,
        alphas: Vec::new(),
    };
    for _ in 0..cfg.max_len {
        let noise: Vec<f64> = (0..zd).map(|_| rng.sample(StandardNormal)).collect();
        let step = generation_step(params, prior, image, cluster, &state, input, &noise, cfg.std)?;
        let lp = &step.log_probs;
        let next = match cfg.mode {
            GenerationMode::Greedy => {
                let mut best = EOS;
                for (i, &v) in lp.iter().enumerate() {
                    if !is_banned(i) && v > lp[best] {
                        best = i;
                    }
                }
                best
            }
            GenerationMode::Sample => {
                let weights: Vec<f64> = lp.iter().enumerate().map(|(i, v)| if is_banned(i) { 0.0 } else { v.exp() }).collect();
                let dist = WeightedIndex::new(&weights).map_err(|e| Error::NumericalDivergence(e.to_string()))?;
                dist.sample(rng)
            }
        };
        out.logprob += lp[next];
        out.alphas.push(step.alpha.to_vec());
        state = step.state;
        if next == EOS {
            break;
        }
        out.ids.push(next);
        input = next;
    }
    Ok(out)
}

pub fn generate<R: Rng + ?Sized>(
    params: &ModelParameters,
    prior: &Prior,
    image: &ImageContext,
    cluster: Option<SentimentCluster>,
    vocab: &Vocabulary,
    cfg: &GenerationConfig,
    rng: &mut R,
) -> Result<Caption> {
    let g = generate_ids(params, prior, image, cluster, cfg, rng)?;
    Ok(Caption::new(image.image_id.clone(), &vocab.decode(&g.ids).join(" ")))
}
