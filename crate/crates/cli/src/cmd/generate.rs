use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::Context;
use clap::Args;
use rayon::prelude::*;
use serde::Serialize;
use stylecap::corpus::{SynonymSet, Vocabulary, EOS};
use stylecap::decode::{diverse_decode, pick_constraints, write_decodes, ConstraintMode, ConstraintSpec, DecodeRecord, ModelScorer, SearchConfig};
use stylecap::latent::SentimentCluster;
use stylecap::model::{generate_ids, is_banned, Checkpoint, GenerationConfig, GenerationMode, ImageContext, PriorKind};
use stylecap::rng::{child, Stream};

use crate::config::RunConfig;
use crate::data::{captions, optional, require, scenes, write_json};
use crate::error::{invalid, CliError};

#[derive(Debug, Args)]
pub struct GenerateArgs {
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    #[arg(long)]
    pub detections: Option<PathBuf>,
    #[arg(long)]
    pub features: Option<PathBuf>,
    #[arg(long)]
    pub features_manifest: Option<PathBuf>,
    /// Needed by every constraint mode except none.
    #[arg(long)]
    pub synonyms: Option<PathBuf>,
    /// Training captions; when given, the checkpoint vocabulary must match them.
    #[arg(long)]
    pub captions: Option<PathBuf>,
    /// Captions per image.
    #[arg(long)]
    pub n: Option<usize>,
    /// Standard deviation of the latent samples around the prior mean.
    #[arg(long)]
    pub std: Option<f64>,
    /// none, weak, individual or multi-object
    #[arg(long, value_parser = parse_mode)]
    pub mode: Option<ConstraintMode>,
    #[arg(long)]
    pub beam: Option<usize>,
    /// Sample words instead of beam search (mode none only).
    #[arg(long)]
    pub sample: bool,
    /// Sentiment cluster for models trained with the sentiment prior.
    #[arg(long, value_parser = parse_cluster)]
    pub cluster: Option<SentimentCluster>,
}

fn parse_mode(s: &str) -> Result<ConstraintMode, String> {
    ConstraintMode::parse(s).ok_or_else(|| format!("unknown constraint mode {s:?}"))
}

fn parse_cluster(s: &str) -> Result<SentimentCluster, String> {
    match s {
        "pos" | "positive" => Ok(SentimentCluster::Positive),
        "neg" | "negative" => Ok(SentimentCluster::Negative),
        "neu" | "neutral" => Ok(SentimentCluster::Neutral),
        _ => Err(format!("unknown cluster {s:?}")),
    }
}

#[derive(Debug, Serialize)]
struct Summary {
    images: usize,
    captions: usize,
    satisfied: usize,
    unsatisfiable: usize,
    mode: String,
    n: usize,
    std: f64,
    beam: usize,
    sample: bool,
}

/// Writes `decodes.jsonl` (images in id order, `n` lines each) and
/// `generate_summary.json`.
pub fn run(cfg: &RunConfig, out: &Path, args: &GenerateArgs) -> Result<(), CliError> {
    let seed = cfg.seed()?;
    let p = &cfg.paths;
    let g = &cfg.generate;
    let n = args.n.unwrap_or(g.n);
    let std = args.std.unwrap_or(g.std);
    let mode = args.mode.unwrap_or(g.mode);
    let beam = args.beam.unwrap_or(g.beam);
    let sample = args.sample || g.sample;
    let cluster = args.cluster.or(g.cluster);
    if n == 0 || beam == 0 || g.max_len == 0 {
        return Err(invalid("n, beam and generate.max_len must be >= 1"));
    }
    if !(std >= 0.0) {
        return Err(invalid("std must be >= 0"));
    }
    if sample && mode != ConstraintMode::None {
        return Err(invalid("--sample cannot be combined with a constraint mode"));
    }

    let ck = Checkpoint::load(&require(&args.checkpoint, &p.checkpoint, "checkpoint")?).map_err(invalid)?;
    if let Some(path) = optional(&args.captions, &p.captions)? {
        let vocab = Vocabulary::build(&captions(&[path.clone()])?, cfg.vocab.min_count).map_err(invalid)?;
        if vocab.hash() != ck.vocab.hash() {
            return Err(invalid(format!(
                "vocabulary of {} ({}) does not match the checkpoint ({})",
                path.display(),
                vocab.hash(),
                ck.vocab.hash()
            )));
        }
    }
    let cluster = match (ck.params.config.prior, cluster) {
        (PriorKind::Sentiment, None) => return Err(invalid("a sentiment-prior model needs --cluster")),
        (PriorKind::Sentiment, c) => c,
        (PriorKind::Attribute, Some(_)) => return Err(invalid("--cluster only applies to sentiment-prior models")),
        (PriorKind::Attribute, None) => None,
    };
    let synonyms = if mode == ConstraintMode::None {
        Vec::new()
    } else {
        SynonymSet::read_tsv(&require(&args.synonyms, &p.synonyms, "synonyms")?).map_err(invalid)?
    };
    let scenes = scenes(
        &require(&args.detections, &p.detections, "detections")?,
        &require(&args.features, &p.features, "features")?,
        &require(&args.features_manifest, &p.features_manifest, "features-manifest")?,
        &cfg.filter.to_filter(),
    )?;
    let images = scenes
        .iter()
        .map(|s| ImageContext::new(s, &ck.prior).map_err(invalid))
        .collect::<Result<Vec<_>, _>>()?;
    if images[0].features.ncols() != ck.params.config.feature_dim {
        return Err(invalid(format!(
            "features are {}-dimensional, the checkpoint expects {}",
            images[0].features.ncols(),
            ck.params.config.feature_dim
        )));
    }

    let search = SearchConfig {
        beam_size: beam,
        max_len: g.max_len,
        eos: EOS,
        banned: (0..ck.vocab.len()).filter(|&i| is_banned(i)).collect::<BTreeSet<_>>(),
    };
    let per_image: Vec<Vec<DecodeRecord>> = scenes
        .par_iter()
        .zip(&images)
        .enumerate()
        .map(|(idx, (scene, image))| -> stylecap::Result<Vec<DecodeRecord>> {
            let mut rng = child(seed, Stream::Generate, idx as u64);
            if sample {
                let gcfg = GenerationConfig {
                    std,
                    max_len: g.max_len,
                    mode: GenerationMode::Sample,
                };
                return (0..n)
                    .map(|_| {
                        let gen = generate_ids(&ck.params, &ck.prior, image, cluster, &gcfg, &mut rng)?;
                        Ok(DecodeRecord {
                            image_id: scene.image_id.clone(),
                            caption: ck.vocab.decode(&gen.ids).join(" "),
                            logprob: Some(gen.logprob),
                            constraints: Vec::new(),
                            satisfied: true,
                            mode: ConstraintMode::None.as_str().to_string(),
                            error: None,
                            warning: None,
                        })
                    })
                    .collect();
            }
            let outcomes = diverse_decode(
                n,
                |rng| match mode {
                    ConstraintMode::None => ConstraintSpec::none(),
                    m => pick_constraints(scene, m, &synonyms, rng),
                },
                |rng| Ok(ModelScorer::new(&ck.params, &ck.prior, image, cluster, std, g.max_len, rng)),
                &ck.vocab,
                &search,
                &mut rng,
            )?;
            Ok(outcomes.iter().map(|o| o.to_record(&scene.image_id, &ck.vocab)).collect())
        })
        .collect::<stylecap::Result<_>>()?;
    let records: Vec<DecodeRecord> = per_image.into_iter().flatten().collect();

    let unsatisfiable = records.iter().filter(|r| r.error.is_some()).count();
    let summary = Summary {
        images: scenes.len(),
        captions: records.len(),
        satisfied: records.iter().filter(|r| r.satisfied).count(),
        unsatisfiable,
        mode: mode.as_str().to_string(),
        n,
        std,
        beam,
        sample,
    };
    let write = || -> anyhow::Result<()> {
        fs::create_dir_all(out)?;
        write_decodes(&records, &out.join("decodes.jsonl"))?;
        write_json(&summary, &out.join("generate_summary.json"))
    };
    write().with_context(|| format!("writing {}", out.display()))?;
    log::info!("{} captions for {} images", records.len(), scenes.len());
    if unsatisfiable > 0 {
        return Err(CliError::Unsatisfiable(unsatisfiable));
    }
    Ok(())
}
