use std::fs;
use std::path::{Path, PathBuf};

use anyhow::Context;
use clap::Args;
use serde::Serialize;
use stylecap::corpus::{SentimentLexicon, SynonymSet, Vocabulary};
use stylecap::latent::{init_sentiglove, init_sentiwordnet, read_glove, AttributePrior};
use stylecap::model::{evaluate, train, write_loss_trace, Checkpoint, Evaluation, ModelParameters, Prior, PriorKind, TrainState, TrainingSet};
use stylecap::rng::{stream, Stream};

use crate::config::{PriorInit, RunConfig};
use crate::data::{captions, optional, require, scenes, write_json};
use crate::error::{invalid, CliError};

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Caption files; repeat to train on several.
    #[arg(long)]
    pub captions: Vec<PathBuf>,
    #[arg(long)]
    pub detections: Option<PathBuf>,
    #[arg(long)]
    pub features: Option<PathBuf>,
    #[arg(long)]
    pub features_manifest: Option<PathBuf>,
    #[arg(long)]
    pub synonyms: Option<PathBuf>,
    #[arg(long)]
    pub sentiment_lexicon: Option<PathBuf>,
    #[arg(long)]
    pub glove: Option<PathBuf>,
    #[arg(long)]
    pub prior: Option<PathBuf>,
    /// Continue from this checkpoint; `train.iterations` is the total.
    #[arg(long)]
    pub resume: Option<PathBuf>,
    #[arg(long)]
    pub iterations: Option<usize>,
}

#[derive(Debug, Serialize)]
struct EvalSummary {
    loss: f64,
    recon: f64,
    kl: f64,
    accuracy: f64,
}

impl From<Evaluation> for EvalSummary {
    fn from(e: Evaluation) -> Self {
        EvalSummary {
            loss: e.loss,
            recon: e.recon,
            kl: e.kl,
            accuracy: e.accuracy,
        }
    }
}

#[derive(Debug, Serialize)]
struct Summary {
    images: usize,
    captions: usize,
    vocab_size: usize,
    parameters: usize,
    start_iteration: usize,
    iterations: usize,
    /// Teacher-forced statistics over the whole training set at KL weight 1.
    initial: EvalSummary,
    #[serde(rename = "final")]
    final_: EvalSummary,
    #[serde(skip_serializing_if = "Option::is_none")]
    divergence: Option<String>,
}

fn attribute_prior(cfg: &RunConfig, args: &TrainArgs) -> Result<AttributePrior, CliError> {
    let p = &cfg.paths;
    let z = cfg.model.z_dim;
    let prior = match cfg.model.prior_init {
        PriorInit::File => AttributePrior::read_json(&require(&args.prior, &p.prior, "prior")?).map_err(invalid)?,
        init => {
            let synonyms = SynonymSet::read_tsv(&require(&args.synonyms, &p.synonyms, "synonyms")?).map_err(invalid)?;
            let lexicon = SentimentLexicon::read_tsv(&require(&args.sentiment_lexicon, &p.sentiment_lexicon, "sentiment-lexicon")?).map_err(invalid)?;
            let attrs: Vec<(u32, String)> = synonyms.iter().map(|s| (s.attribute_id, s.canonical.clone())).collect();
            if init == PriorInit::Sentiglove {
                let glove = read_glove(&require(&args.glove, &p.glove, "glove")?).map_err(invalid)?;
                init_sentiglove(&glove, &attrs, &lexicon, cfg.model.sentiglove_dims, z).map_err(invalid)?
            } else {
                init_sentiwordnet(&lexicon, &attrs, z).map_err(invalid)?
            }
        }
    };
    if prior.z != z {
        return Err(invalid(format!("prior has {} latent dimensions, model.z_dim is {z}", prior.z)));
    }
    Ok(prior)
}

/// Writes `checkpoint.bin`, `loss.csv` and `train_summary.json`.
pub fn run(cfg: &RunConfig, out: &Path, args: &TrainArgs) -> Result<(), CliError> {
    let seed = cfg.seed()?;
    let p = &cfg.paths;
    let caption_paths = if args.captions.is_empty() {
        vec![require(&None, &p.captions, "captions")?]
    } else {
        args.captions.iter().map(|c| require(&Some(c.clone()), &None, "captions")).collect::<Result<_, _>>()?
    };
    let caps = captions(&caption_paths)?;
    if caps.is_empty() {
        return Err(invalid("no captions to train on"));
    }
    let scenes = scenes(
        &require(&args.detections, &p.detections, "detections")?,
        &require(&args.features, &p.features, "features")?,
        &require(&args.features_manifest, &p.features_manifest, "features-manifest")?,
        &cfg.filter.to_filter(),
    )?;
    let vocab = Vocabulary::build(&caps, cfg.vocab.min_count).map_err(invalid)?;
    let feature_dim = scenes[0].feature_dim();

    let mut tcfg = cfg.train_config(seed);
    if let Some(n) = args.iterations {
        tcfg.iterations = n;
    }
    tcfg.validate().map_err(invalid)?;

    let (state, prior) = match optional(&args.resume, &None)? {
        Some(path) => {
            let ck = Checkpoint::load(&path).map_err(invalid)?;
            if ck.vocab.hash() != vocab.hash() {
                return Err(invalid(format!("{}: checkpoint vocabulary does not match the captions", path.display())));
            }
            if ck.params.config.feature_dim != feature_dim {
                return Err(invalid(format!(
                    "{}: checkpoint expects {}-dimensional features, got {feature_dim}",
                    path.display(),
                    ck.params.config.feature_dim
                )));
            }
            let velocity = match ck.velocity {
                Some(v) => v,
                None => ModelParameters::zeros(&ck.params.config)?,
            };
            let state = TrainState {
                params: ck.params,
                velocity,
                iteration: ck.iteration,
            };
            (state, ck.prior)
        }
        None => {
            let mcfg = cfg.model_config(feature_dim, vocab.len());
            mcfg.validate().map_err(invalid)?;
            let prior = match mcfg.prior {
                PriorKind::Attribute => Prior::Attribute {
                    prior: attribute_prior(cfg, args)?,
                    policy: cfg.model.empty_region_policy,
                },
                PriorKind::Sentiment => {
                    if !(cfg.model.sentiment_sigma2 > 0.0) {
                        return Err(invalid("model.sentiment_sigma2 must be > 0"));
                    }
                    Prior::Sentiment {
                        sigma2: cfg.model.sentiment_sigma2,
                        z: mcfg.z_dim,
                    }
                }
            };
            let params = ModelParameters::init(&mcfg, &mut stream(seed, Stream::Init)).map_err(invalid)?;
            (TrainState::new(params)?, prior)
        }
    };
    let max_len = state.params.config.max_len;
    let data = TrainingSet::from_corpus(&scenes, &caps, &vocab, &prior, max_len).map_err(invalid)?;

    let start = state.iteration;
    let initial = evaluate(&state.params, &prior, &data, 1.0, &mut stream(seed, Stream::Eval))?;
    log::info!("start at iteration {start}: loss {:.4}, accuracy {:.3}", initial.loss, initial.accuracy);
    let result = train(state, &data, &prior, &tcfg)?;
    let fin = evaluate(&result.state.params, &prior, &data, 1.0, &mut stream(seed, Stream::Eval))?;
    log::info!("done at iteration {}: loss {:.4}, accuracy {:.3}", result.state.iteration, fin.loss, fin.accuracy);

    let summary = Summary {
        images: data.images.len(),
        captions: data.items.len(),
        vocab_size: vocab.len(),
        parameters: result.state.params.num_parameters(),
        start_iteration: start,
        iterations: result.state.iteration,
        initial: initial.into(),
        final_: fin.into(),
        divergence: result.divergence.clone(),
    };
    let checkpoint = Checkpoint {
        params: result.state.params,
        velocity: Some(result.state.velocity),
        iteration: result.state.iteration,
        vocab,
        prior,
        train: Some(tcfg),
    };
    let write = || -> anyhow::Result<()> {
        fs::create_dir_all(out)?;
        checkpoint.save(&out.join("checkpoint.bin"))?;
        write_loss_trace(&result.trace, &out.join("loss.csv"))?;
        write_json(&summary, &out.join("train_summary.json"))
    };
    write().with_context(|| format!("writing {}", out.display()))?;
    if let Some(msg) = result.divergence {
        return Err(anyhow::anyhow!("training diverged: {msg}").into());
    }
    Ok(())
}
