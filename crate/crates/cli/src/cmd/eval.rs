use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::Context;
use clap::Args;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use stylecap::corpus::{AnpTable, PolarityLexicon, Sentiment};
use stylecap::decode::read_decodes;
use stylecap::metrics::{first_sample_report, lexicon_classify, oracle_top1, render_table, EvalResources, MetricsReport};

use crate::config::RunConfig;
use crate::data::{captions, optional, require, words, write_json};
use crate::error::{invalid, CliError};

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Decode JSONL produced by `generate`.
    #[arg(long)]
    pub candidates: Option<PathBuf>,
    /// Reference caption files; repeat to pool several.
    #[arg(long)]
    pub references: Vec<PathBuf>,
    #[arg(long)]
    pub anps: Option<PathBuf>,
    #[arg(long)]
    pub polarity_lexicon: Option<PathBuf>,
    /// Target style for %SEN and SP/SR: pos or neg.
    #[arg(long)]
    pub sentiment: Option<String>,
}

/// Lexicon-classified candidate counts.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SentimentCounts {
    pub negative: usize,
    pub neutral: usize,
    pub positive: usize,
}

/// Contents of `metrics.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsFile {
    pub first: MetricsReport,
    pub oracle: MetricsReport,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sentiment_counts: Option<SentimentCounts>,
}

/// Writes `metrics.json` and `metrics.txt` with first-sample and oracle
/// top-1 rows.
pub fn run(cfg: &RunConfig, out: &Path, args: &EvalArgs) -> Result<(), CliError> {
    let p = &cfg.paths;
    let cand_path = require(&args.candidates, &p.candidates, "candidates")?;
    let ref_paths = if args.references.is_empty() {
        vec![require(&None, &p.references, "references")?]
    } else {
        args.references.iter().map(|r| require(&Some(r.clone()), &None, "references")).collect::<Result<_, _>>()?
    };
    let sentiment = match args.sentiment.as_ref().or(cfg.eval.sentiment.as_ref()) {
        None => None,
        Some(s) => match Sentiment::parse(s) {
            Some(s @ (Sentiment::Positive | Sentiment::Negative)) => Some(s),
            _ => return Err(invalid(format!("sentiment must be pos or neg, got {s:?}"))),
        },
    };
    let anps = match (sentiment, optional(&args.anps, &p.anps)?) {
        (Some(_), None) => return Err(invalid("--sentiment needs an ANP table (--anps)")),
        (Some(_), Some(path)) => Some(AnpTable::read_tsv(&path).map_err(invalid)?),
        (None, _) => None,
    };
    let polarity = match optional(&args.polarity_lexicon, &p.polarity_lexicon)? {
        Some(path) => Some(PolarityLexicon::read_tsv(&path).map_err(invalid)?),
        None => None,
    };

    let mut cands: BTreeMap<String, Vec<Vec<String>>> = BTreeMap::new();
    for r in read_decodes(&cand_path).map_err(invalid)? {
        cands.entry(r.image_id).or_default().push(words(&r.caption));
    }
    if cands.is_empty() {
        return Err(invalid(format!("{}: no candidates", cand_path.display())));
    }
    let mut refs: BTreeMap<String, Vec<Vec<String>>> = BTreeMap::new();
    for c in captions(&ref_paths)? {
        refs.entry(c.image_id.clone()).or_default().push(words(&c.text()));
    }
    let missing: Vec<&str> = cands.keys().filter(|id| !refs.contains_key(*id)).map(String::as_str).collect();
    if !missing.is_empty() {
        return Err(invalid(format!("images without references: {}", missing.join(", "))));
    }
    let ids: Vec<&String> = cands.keys().collect();
    let c: Vec<Vec<Vec<String>>> = ids.iter().map(|id| cands[*id].clone()).collect();
    let r: Vec<Vec<Vec<String>>> = ids.iter().map(|id| refs[*id].clone()).collect();

    let resources = EvalResources {
        adjectives: anps.as_ref().zip(sentiment).map(|(a, s)| a.adjective_universe(Some(s))).unwrap_or_default(),
        anps,
        sentiment,
        sen_match: cfg.eval.sen_match,
        div_mode: cfg.eval.div_mode,
    };
    let first = first_sample_report(&c, &r, &resources).map_err(invalid)?;
    let oracle = oracle_top1(&c, &r, cfg.eval.selector, &resources).map_err(invalid)?;
    let sentiment_counts = polarity.map(|lex| {
        let labels: Vec<Sentiment> = c.par_iter().flatten().map(|cap| lexicon_classify(cap, &lex)).collect();
        SentimentCounts {
            negative: labels.iter().filter(|&&s| s == Sentiment::Negative).count(),
            neutral: labels.iter().filter(|&&s| s == Sentiment::Neutral).count(),
            positive: labels.iter().filter(|&&s| s == Sentiment::Positive).count(),
        }
    });
    let label = out.file_name().map_or_else(|| "run".to_string(), |n| n.to_string_lossy().into_owned());
    let table = render_table(&[(label.clone(), first.clone()), (label, oracle.clone())]);
    let file = MetricsFile {
        first,
        oracle,
        sentiment_counts,
    };
    let write = || -> anyhow::Result<()> {
        fs::create_dir_all(out)?;
        write_json(&file, &out.join("metrics.json"))?;
        fs::write(out.join("metrics.txt"), &table)?;
        Ok(())
    };
    write().with_context(|| format!("writing {}", out.display()))?;
    print!("{table}");
    Ok(())
}
