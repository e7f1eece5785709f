use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;
use std::path::Path;

use rand::Rng;

use super::config::{PriorKind, TrainConfig};
use crate::corpus::{Caption, Sentiment, Vocabulary};
use crate::features::RegionFeatureSet;
use super::network::{backward, forward_cached, Example, ImageContext, Prior, StepTrace};
use super::params::ModelParameters;
use crate::latent::SentimentCluster;
use crate::rng::{child, Stream};
use crate::{Error, Result};

/// Negative ELBO of one caption: `sum NLL + kl_weight * sum KL`.
pub fn elbo_loss(trace: &StepTrace, kl_weight: f64) -> Result<f64> {
    if !(kl_weight >= 0.0) {
        return Err(Error::InvalidArgument(format!("kl_weight must be >= 0, got {kl_weight}")));
    }
    Ok(trace.nll.iter().sum::<f64>() + kl_weight * trace.kl.iter().sum::<f64>())
}

/// Batch means of the two loss terms.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct BatchLoss {
    pub recon: f64,
    pub kl: f64,
    pub total: f64,
}

/// Exact gradient of the batch-mean negative ELBO. The posterior noise is
/// drawn from `rng`, so equal rng states give equal losses.
pub fn gradients<R: Rng + ?Sized>(
    params: &ModelParameters,
    prior: &Prior,
    batch: &[Example],
    kl_weight: f64,
    rng: &mut R,
) -> Result<(ModelParameters, BatchLoss)> {
    if batch.is_empty() {
        return Err(Error::Empty("batch"));
    }
    let mut grads = ModelParameters::zeros(&params.config)?;
    let scale = 1.0 / batch.len() as f64;
    let mut loss = BatchLoss::default();
    for ex in batch {
        let (trace, caches) = forward_cached(params, prior, *ex, rng)?;
        let recon: f64 = trace.nll.iter().sum();
        let kl: f64 = trace.kl.iter().sum();
        loss.recon += scale * recon;
        loss.kl += scale * kl;
        backward(params, prior, ex.image, &caches, kl_weight, scale, &mut grads);
    }
    loss.total = loss.recon + kl_weight * loss.kl;
    if !loss.total.is_finite() {
        return Err(Error::NumericalDivergence(format!("loss is {}", loss.total)));
    }
    if !grads.is_finite() {
        return Err(Error::NumericalDivergence("non-finite gradient".into()));
    }
    Ok((grads, loss))
}

/// Clips `grads` to global norm `cfg.clip`, then `v = m v + g; p -= lr v`.
/// Returns the gradient norm before clipping.
pub fn sgd_momentum_step(params: &mut ModelParameters, grads: &mut ModelParameters, velocity: &mut ModelParameters, cfg: &TrainConfig) -> Result<f64> {
    let norm = grads.global_norm();
    if norm > cfg.clip {
        grads.scale(cfg.clip / norm);
    }
    velocity.scale(cfg.momentum);
    velocity.add_scaled(1.0, grads)?;
    params.add_scaled(-cfg.learning_rate, velocity)?;
    Ok(norm)
}

/// One caption of a training set.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainItem {
    pub image: usize,
    pub tokens: Vec<usize>,
    pub cluster: Option<SentimentCluster>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrainingSet {
    pub images: Vec<ImageContext>,
    pub items: Vec<TrainItem>,
}

impl TrainingSet {
    /// Pairs every caption with its image. Captions are truncated to
    /// `max_len` words; with the sentiment prior the caption label selects
    /// the cluster (unlabeled counts as neutral).
    pub fn from_corpus(scenes: &[RegionFeatureSet], captions: &[Caption], vocab: &Vocabulary, prior: &Prior, max_len: usize) -> Result<Self> {
        let mut index = BTreeMap::new();
        let mut images = Vec::with_capacity(scenes.len());
        for s in scenes {
            index.insert(s.image_id.as_str(), images.len());
            images.push(ImageContext::new(s, prior)?);
        }
        let missing: BTreeSet<&str> = captions.iter().map(|c| c.image_id.as_str()).filter(|id| !index.contains_key(id)).collect();
        if !missing.is_empty() {
            let list: Vec<&str> = missing.into_iter().collect();
            return Err(Error::InvalidArgument(format!("captions without features: {}", list.join(", "))));
        }
        let items = captions
            .iter()
            .map(|c| TrainItem {
                image: index[c.image_id.as_str()],
                tokens: vocab.encode(c, max_len),
                cluster: match prior.kind() {
                    PriorKind::Attribute => None,
                    PriorKind::Sentiment => Some(cluster_of(c.sentiment)),
                },
            })
            .collect();
        Ok(TrainingSet { images, items })
    }

    pub fn example(&self, i: usize) -> Example<'_> {
        let it = &self.items[i];
        Example {
            image: &self.images[it.image],
            tokens: &it.tokens,
            cluster: it.cluster,
        }
    }

    pub fn examples(&self) -> Vec<Example<'_>> {
        (0..self.items.len()).map(|i| self.example(i)).collect()
    }
}

pub fn cluster_of(s: Sentiment) -> SentimentCluster {
    match s {
        Sentiment::Positive => SentimentCluster::Positive,
        Sentiment::Negative => SentimentCluster::Negative,
        Sentiment::Neutral | Sentiment::Unlabeled => SentimentCluster::Neutral,
    }
}

/// Parameters plus optimizer state; `iteration` counts completed updates.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainState {
    pub params: ModelParameters,
    pub velocity: ModelParameters,
    pub iteration: usize,
}

impl TrainState {
    pub fn new(params: ModelParameters) -> Result<Self> {
        let velocity = ModelParameters::zeros(&params.config)?;
        Ok(TrainState {
            params,
            velocity,
            iteration: 0,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossRecord {
    pub iteration: usize,
    pub recon: f64,
    pub kl: f64,
    pub total: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutput {
    pub state: TrainState,
    pub trace: Vec<LossRecord>,
    /// Set when training stopped on a non-finite loss or gradient; `state`
    /// then holds the last good parameters.
    pub divergence: Option<String>,
}

/// Runs updates until `cfg.iterations` have been completed in total.
/// Batch composition and posterior noise of iteration `i` depend only on
/// `(cfg.seed, i)`, so a resumed run follows the same schedule.
pub fn train(mut state: TrainState, data: &TrainingSet, prior: &Prior, cfg: &TrainConfig) -> Result<TrainOutput> {
    cfg.validate()?;
    if data.items.is_empty() {
        return Err(Error::Empty("training set"));
    }
    let mut trace = Vec::new();
    while state.iteration < cfg.iterations {
        let it = state.iteration;
        let mut rng = child(cfg.seed, Stream::Train, it as u64);
        let batch: Vec<Example> = (0..cfg.batch_size).map(|_| data.example(rng.random_range(0..data.items.len()))).collect();
        let w = cfg.kl_weight(it);
        let (mut grads, loss) = match gradients(&state.params, prior, &batch, w, &mut rng) {
            Ok(r) => r,
            Err(Error::NumericalDivergence(msg)) => {
                log::error!("iteration {it}: {msg}");
                return Ok(TrainOutput {
                    state,
                    trace,
                    divergence: Some(msg),
                });
            }
            Err(e) => return Err(e),
        };
        let mut next = state.clone();
        sgd_momentum_step(&mut next.params, &mut grads, &mut next.velocity, cfg)?;
        if !next.params.is_finite() {
            let msg = format!("iteration {it}: parameters became non-finite");
            return Ok(TrainOutput {
                state,
                trace,
                divergence: Some(msg),
            });
        }
        next.iteration += 1;
        state = next;
        if it % cfg.log_every == 0 || state.iteration == cfg.iterations {
            log::info!("iter {it}: recon {:.4} kl {:.4} total {:.4}", loss.recon, loss.kl, loss.total);
            trace.push(LossRecord {
                iteration: it,
                recon: loss.recon,
                kl: loss.kl,
                total: loss.total,
            });
        }
    }
    Ok(TrainOutput {
        state,
        trace,
        divergence: None,
    })
}

/// Corpus-level teacher-forced statistics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Evaluation {
    /// Mean per-caption negative ELBO at the given KL weight.
    pub loss: f64,
    pub recon: f64,
    pub kl: f64,
    /// Fraction of steps whose arg-max next word is the target.
    pub accuracy: f64,
}

pub fn evaluate<R: Rng + ?Sized>(params: &ModelParameters, prior: &Prior, data: &TrainingSet, kl_weight: f64, rng: &mut R) -> Result<Evaluation> {
    if data.items.is_empty() {
        return Err(Error::Empty("evaluation set"));
    }
    let (mut recon, mut kl, mut correct, mut steps) = (0.0, 0.0, 0, 0);
    for ex in data.examples() {
        let (trace, _) = forward_cached(params, prior, ex, rng)?;
        recon += trace.nll.iter().sum::<f64>();
        kl += trace.kl.iter().sum::<f64>();
        correct += trace.correct();
        steps += trace.len();
    }
    let n = data.items.len() as f64;
    Ok(Evaluation {
        loss: (recon + kl_weight * kl) / n,
        recon: recon / n,
        kl: kl / n,
        accuracy: correct as f64 / steps as f64,
    })
}

pub fn write_loss_trace(trace: &[LossRecord], path: &Path) -> Result<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(f, "iteration,recon,kl,total")?;
    for r in trace {
        writeln!(f, "{},{},{},{}", r.iteration, r.recon, r.kl, r.total)?;
    }
    f.flush()?;
    Ok(())
}
