use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::Context;
use clap::Args;
use serde::Serialize;
use stylecap::corpus::{
    augment_with_anps, augment_with_attributes, read_captions, write_captions, AnpTable, AugmentConfig, Caption, ObjectNounSet, Sentiment,
    SentimentLexicon, SynonymPooling, SynonymSet,
};
use stylecap::rng::{stream, Stream};

use crate::config::{Pooling, RunConfig};
use crate::data::{annotations, require, write_json};
use crate::error::{invalid, CliError};

#[derive(Debug, Args)]
pub struct AugmentArgs {
    #[arg(long)]
    pub captions: Option<PathBuf>,
    #[arg(long)]
    pub detections: Option<PathBuf>,
    #[arg(long)]
    pub synonyms: Option<PathBuf>,
    #[arg(long)]
    pub nouns: Option<PathBuf>,
    #[arg(long)]
    pub sentiment_lexicon: Option<PathBuf>,
    #[arg(long)]
    pub anps: Option<PathBuf>,
}

#[derive(Debug, Default, Serialize)]
struct Counts {
    captions_out: usize,
    /// Captions that received at least one adjective.
    augmented: usize,
    insertions: BTreeMap<String, usize>,
}

impl Counts {
    fn record(&mut self, cap: &Caption) {
        self.captions_out += 1;
        if !cap.inserted.is_empty() {
            self.augmented += 1;
        }
        for &i in &cap.inserted {
            *self.insertions.entry(cap.tokens[i].text.clone()).or_default() += 1;
        }
    }
}

#[derive(Debug, Serialize)]
struct Malformed {
    line: usize,
    message: String,
}

#[derive(Debug, Serialize)]
struct Summary {
    captions_in: usize,
    malformed: Vec<Malformed>,
    #[serde(skip_serializing_if = "Option::is_none")]
    attribute: Option<Counts>,
    anp: BTreeMap<String, Counts>,
}

/// Writes `attribute_augmented.jsonl` (one line per input caption),
/// `anp_augmented.jsonl` (one line per input caption and sentiment),
/// `corpus.jsonl` (the inputs followed by every caption that gained an
/// adjective) and `augment_summary.json`.
pub fn run(cfg: &RunConfig, out: &Path, args: &AugmentArgs) -> Result<(), CliError> {
    let seed = cfg.seed()?;
    let p = &cfg.paths;
    let captions_path = require(&args.captions, &p.captions, "captions")?;
    let sentiments = cfg
        .augment
        .anp
        .iter()
        .map(|s| match Sentiment::parse(s) {
            Some(s @ (Sentiment::Positive | Sentiment::Negative)) => Ok(s),
            _ => Err(invalid(format!("augment.anp: expected pos or neg, got {s:?}"))),
        })
        .collect::<Result<Vec<_>, _>>()?;

    let attribute_inputs = if cfg.augment.attributes {
        let det = require(&args.detections, &p.detections, "detections")?;
        let syn = require(&args.synonyms, &p.synonyms, "synonyms")?;
        let nouns = require(&args.nouns, &p.nouns, "nouns")?;
        let lex = require(&args.sentiment_lexicon, &p.sentiment_lexicon, "sentiment-lexicon")?;
        Some((
            annotations(&det, &cfg.filter.to_filter())?,
            SynonymSet::read_tsv(&syn).map_err(invalid)?,
            ObjectNounSet::read_tsv(&nouns).map_err(invalid)?,
            SentimentLexicon::read_tsv(&lex).map_err(invalid)?,
        ))
    } else {
        None
    };
    let anps = if sentiments.is_empty() {
        AnpTable::default()
    } else {
        AnpTable::read_tsv(&require(&args.anps, &p.anps, "anps")?).map_err(invalid)?
    };

    let (captions, bad) = read_captions(&captions_path).map_err(invalid)?;
    for (line, msg) in &bad {
        log::warn!("{}:{line}: {msg}", captions_path.display());
    }
    let aug_cfg = AugmentConfig {
        pooling: match cfg.augment.pooling {
            Pooling::Union => SynonymPooling::Union,
            Pooling::SampleAttribute => SynonymPooling::SampleAttribute,
        },
        max_len: cfg.augment.max_len,
    };
    if aug_cfg.max_len == 0 {
        return Err(invalid("augment.max_len must be >= 1"));
    }

    let mut rng = stream(seed, Stream::Augment);
    let mut attribute_out = Vec::new();
    let mut attribute_counts = Counts::default();
    if let Some((ann, synonyms, nouns, lexicon)) = &attribute_inputs {
        for cap in &captions {
            let regions = ann.get(&cap.image_id).map(Vec::as_slice).unwrap_or_default();
            let a = augment_with_attributes(cap, regions, synonyms, nouns, lexicon, &aug_cfg, &mut rng);
            attribute_counts.record(&a);
            attribute_out.push(a);
        }
    }
    let mut anp_out = Vec::new();
    let mut anp_counts = BTreeMap::new();
    for &s in &sentiments {
        let counts: &mut Counts = anp_counts.entry(s.as_str().to_string()).or_default();
        for cap in &captions {
            let a = augment_with_anps(cap, &anps, s, &aug_cfg, &mut rng);
            counts.record(&a);
            anp_out.push(a);
        }
    }
    let mut corpus = captions.clone();
    corpus.extend(attribute_out.iter().chain(&anp_out).filter(|c| !c.inserted.is_empty()).cloned());

    let summary = Summary {
        captions_in: captions.len(),
        malformed: bad.into_iter().map(|(line, message)| Malformed { line, message }).collect(),
        attribute: attribute_inputs.as_ref().map(|_| attribute_counts),
        anp: anp_counts,
    };
    let write = || -> anyhow::Result<()> {
        fs::create_dir_all(out)?;
        if attribute_inputs.is_some() {
            write_captions(&attribute_out, &out.join("attribute_augmented.jsonl"))?;
        }
        if !sentiments.is_empty() {
            write_captions(&anp_out, &out.join("anp_augmented.jsonl"))?;
        }
        write_captions(&corpus, &out.join("corpus.jsonl"))?;
        write_json(&summary, &out.join("augment_summary.json"))
    };
    write().with_context(|| format!("writing {}", out.display()))?;
    log::info!("{} captions in, {} in the augmented corpus", summary.captions_in, corpus.len());
    Ok(())
}
