use std::fs;
use std::path::Path;

use anyhow::Context;
use clap::{Args, ValueEnum};
use stylecap::corpus::{write_captions, ObjectNounSet, SynonymSet};
use stylecap::features::{write_detections, write_features, DetectionRecord};
use stylecap::rng::{stream, Stream};
use stylecap::toy::{attribute_toy, sentiment_toy};

use crate::config::RunConfig;
use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ToyKind {
    /// 64 single-object scenes, one attribute each
    Attribute,
    /// 32 scenes with a positive and a negative caption each
    Sentiment,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long, value_enum, default_value = "attribute")]
    pub kind: ToyKind,
}

const RUN_TOML: &str = r#"[paths]
captions = "captions.jsonl"
references = "references.jsonl"
detections = "detections.jsonl"
features = "features.bin"
features_manifest = "features.json"
synonyms = "synonyms.tsv"
nouns = "nouns.tsv"
sentiment_lexicon = "sentiment.tsv"
polarity_lexicon = "polarity.tsv"
anps = "anps.tsv"
"#;

/// Writes a synthetic corpus: detections, region features, captions and
/// the lexicons, plus a `run.toml` pointing at them.
///
/// For the attribute kind `captions.jsonl` holds the attribute-free
/// captions and `references.jsonl` the attribute-bearing ones; for the
/// sentiment kind both hold the labelled captions.
pub fn run(cfg: &RunConfig, out: &Path, args: &SynthArgs) -> Result<(), CliError> {
    let seed = cfg.seed()?;
    let mut rng = stream(seed, Stream::Features);
    let toy = match args.kind {
        ToyKind::Attribute => attribute_toy(&mut rng)?,
        ToyKind::Sentiment => sentiment_toy(&mut rng)?,
    };
    let inputs = if toy.factual.is_empty() { &toy.captions } else { &toy.factual };

    let write = || -> anyhow::Result<()> {
        fs::create_dir_all(out)?;
        write_captions(inputs, &out.join("captions.jsonl"))?;
        write_captions(&toy.captions, &out.join("references.jsonl"))?;
        let records: Vec<DetectionRecord> = toy.scenes.iter().map(DetectionRecord::from_set).collect();
        write_detections(&records, &out.join("detections.jsonl"))?;
        write_features(&toy.scenes, &out.join("features.bin"), &out.join("features.json"))?;
        SynonymSet::write_tsv(&toy.synonyms, &out.join("synonyms.tsv"))?;
        ObjectNounSet::write_tsv(&toy.nouns, &out.join("nouns.tsv"))?;
        toy.sentiment.write_tsv(&out.join("sentiment.tsv"))?;
        toy.polarity.write_tsv(&out.join("polarity.tsv"))?;
        toy.anps.write_tsv(&out.join("anps.tsv"))?;
        fs::write(out.join("run.toml"), format!("seed = {seed}\n\n{RUN_TOML}"))?;
        Ok(())
    };
    write().with_context(|| format!("writing {}", out.display()))?;
    log::info!("{} images, {} captions written to {}", toy.scenes.len(), inputs.len(), out.display());
    Ok(())
}
