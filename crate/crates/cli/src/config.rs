use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use stylecap::decode::ConstraintMode;
use stylecap::features::FilterConfig;
use stylecap::latent::{EmptyRegionPolicy, SentimentCluster};
use stylecap::metrics::{DivMode, SenMatch, Selector};
use stylecap::model::{ModelConfig, PriorKind, TrainConfig};

use crate::error::{invalid, CliError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Profile {
    /// 900 hidden units, 150 latent dimensions, batch 150
    Paper,
    /// 64 hidden units, 16 latent dimensions, batch 16
    #[default]
    Desk,
}

/// Input locations. Relative paths in a config file are resolved against
/// the file's directory.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Paths {
    pub captions: Option<PathBuf>,
    pub references: Option<PathBuf>,
    pub candidates: Option<PathBuf>,
    pub detections: Option<PathBuf>,
    pub features: Option<PathBuf>,
    pub features_manifest: Option<PathBuf>,
    pub synonyms: Option<PathBuf>,
    pub nouns: Option<PathBuf>,
    pub sentiment_lexicon: Option<PathBuf>,
    pub polarity_lexicon: Option<PathBuf>,
    pub anps: Option<PathBuf>,
    pub glove: Option<PathBuf>,
    pub prior: Option<PathBuf>,
    pub checkpoint: Option<PathBuf>,
}

impl Paths {
    fn resolve(&mut self, base: &Path) {
        for p in [
            &mut self.captions,
            &mut self.references,
            &mut self.candidates,
            &mut self.detections,
            &mut self.features,
            &mut self.features_manifest,
            &mut self.synonyms,
            &mut self.nouns,
            &mut self.sentiment_lexicon,
            &mut self.polarity_lexicon,
            &mut self.anps,
            &mut self.glove,
            &mut self.prior,
            &mut self.checkpoint,
        ]
        .into_iter()
        .flatten()
        {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PriorInit {
    /// Each attribute mean is its lexicon score.
    #[default]
    Sentiwordnet,
    /// Sentiment-heavy word-embedding coordinates.
    Sentiglove,
    /// Read from `paths.prior`.
    File,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Pooling {
    #[default]
    Union,
    SampleAttribute,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VocabSection {
    pub min_count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FilterSection {
    pub object_threshold: f64,
    pub attribute_threshold: f64,
    pub min_regions: usize,
    pub max_regions: usize,
}

impl FilterSection {
    pub fn to_filter(&self) -> FilterConfig {
        FilterConfig {
            object_threshold: self.object_threshold,
            attribute_threshold: self.attribute_threshold,
            min_regions: self.min_regions,
            max_regions: self.max_regions,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    pub hidden_size: usize,
    pub z_dim: usize,
    pub embed_dim: usize,
    pub max_len: usize,
    pub prior: PriorKind,
    pub prior_init: PriorInit,
    /// Embedding coordinates kept by the SentiGloVe initialisation.
    pub sentiglove_dims: usize,
    pub empty_region_policy: EmptyRegionPolicy,
    /// Variance of the sentiment-cluster prior.
    pub sentiment_sigma2: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainSection {
    pub learning_rate: f64,
    pub momentum: f64,
    pub clip: f64,
    pub batch_size: usize,
    pub iterations: usize,
    pub kl_annealing: bool,
    pub log_every: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AugmentSection {
    pub max_len: usize,
    pub pooling: Pooling,
    pub attributes: bool,
    /// Sentiments for which ANP-augmented copies are produced.
    pub anp: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GenerateSection {
    pub n: usize,
    pub std: f64,
    pub mode: ConstraintMode,
    pub beam: usize,
    pub max_len: usize,
    /// Sample words from the softmax instead of beam search (`mode` must be none).
    pub sample: bool,
    pub cluster: Option<SentimentCluster>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvalSection {
    pub selector: Selector,
    pub sen_match: SenMatch,
    pub div_mode: DivMode,
    /// Target style for %SEN and SP/SR (`pos` or `neg`); unset disables them.
    pub sentiment: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub profile: Profile,
    pub seed: Option<u64>,
    #[serde(default)]
    pub paths: Paths,
    pub vocab: VocabSection,
    pub filter: FilterSection,
    pub model: ModelSection,
    pub train: TrainSection,
    pub augment: AugmentSection,
    pub generate: GenerateSection,
    pub eval: EvalSection,
}

impl RunConfig {
    pub fn profile(profile: Profile) -> Self {
        let filter = FilterConfig::default();
        let (model, train) = match profile {
            Profile::Paper => (ModelConfig::paper(1, 1), TrainConfig::paper(0)),
            Profile::Desk => (ModelConfig::desk(1), TrainConfig::desk(0)),
        };
        RunConfig {
            profile,
            seed: None,
            paths: Paths::default(),
            vocab: VocabSection { min_count: 1 },
            filter: FilterSection {
                object_threshold: filter.object_threshold,
                attribute_threshold: filter.attribute_threshold,
                min_regions: filter.min_regions,
                max_regions: filter.max_regions,
            },
            model: ModelSection {
                hidden_size: model.hidden_size,
                z_dim: model.z_dim,
                embed_dim: model.embed_dim,
                max_len: model.max_len,
                prior: PriorKind::Attribute,
                prior_init: PriorInit::Sentiwordnet,
                sentiglove_dims: 2,
                empty_region_policy: EmptyRegionPolicy::Renormalize,
                sentiment_sigma2: 1.0,
            },
            train: TrainSection {
                learning_rate: train.learning_rate,
                momentum: train.momentum,
                clip: train.clip,
                batch_size: train.batch_size,
                iterations: train.iterations,
                kl_annealing: train.kl_annealing,
                log_every: train.log_every,
            },
            augment: AugmentSection {
                max_len: 20,
                pooling: Pooling::Union,
                attributes: true,
                anp: Vec::new(),
            },
            generate: GenerateSection {
                n: 1,
                std: 1.0,
                mode: ConstraintMode::None,
                beam: 1,
                max_len: 20,
                sample: false,
                cluster: None,
            },
            eval: EvalSection {
                selector: Selector::Cider,
                sen_match: SenMatch::Adjacent,
                div_mode: DivMode::Set,
                sentiment: None,
            },
        }
    }

    /// Profile defaults, then the config file, then `key=value` overrides.
    pub fn load(file: Option<&Path>, profile: Option<Profile>, overrides: &[String]) -> Result<Self, CliError> {
        let (mut user, base) = match file {
            Some(path) => {
                let text = fs::read_to_string(path).map_err(|e| invalid(format!("{}: {e}", path.display())))?;
                let value: toml::Table = text.parse().map_err(|e| invalid(format!("{}: {e}", path.display())))?;
                (value, path.parent().map(Path::to_path_buf))
            }
            None => (toml::Table::new(), None),
        };
        for o in overrides {
            apply_override(&mut user, o)?;
        }
        let profile = match profile {
            Some(p) => p,
            None => match user.get("profile") {
                Some(v) => v.clone().try_into().map_err(|e| invalid(format!("profile: {e}")))?,
                None => Profile::default(),
            },
        };
        let mut merged = toml::Table::try_from(RunConfig::profile(profile)).map_err(|e| invalid(e.to_string()))?;
        merge(&mut merged, user);
        merged.insert("profile".into(), toml::Value::try_from(profile).map_err(|e| invalid(e.to_string()))?);
        let mut cfg: RunConfig = toml::Value::Table(merged).try_into().map_err(|e| invalid(format!("config: {e}")))?;
        if let Some(base) = base {
            cfg.paths.resolve(&base);
        }
        Ok(cfg)
    }

    pub fn seed(&self) -> Result<u64, CliError> {
        self.seed.ok_or_else(|| invalid("a seed is required (--seed or `seed` in the config file)"))
    }

    pub fn train_config(&self, seed: u64) -> TrainConfig {
        TrainConfig {
            learning_rate: self.train.learning_rate,
            momentum: self.train.momentum,
            clip: self.train.clip,
            batch_size: self.train.batch_size,
            iterations: self.train.iterations,
            seed,
            kl_annealing: self.train.kl_annealing,
            log_every: self.train.log_every,
        }
    }

    pub fn model_config(&self, feature_dim: usize, vocab_size: usize) -> ModelConfig {
        ModelConfig {
            hidden_size: self.model.hidden_size,
            z_dim: self.model.z_dim,
            embed_dim: self.model.embed_dim,
            feature_dim,
            vocab_size,
            max_len: self.model.max_len,
            prior: self.model.prior,
        }
    }
}

fn merge(base: &mut toml::Table, over: toml::Table) {
    for (k, v) in over {
        match (base.get_mut(&k), v) {
            (Some(toml::Value::Table(b)), toml::Value::Table(o)) => merge(b, o),
            (_, v) => {
                base.insert(k, v);
            }
        }
    }
}

/// `section.key=value`; the value is parsed as TOML and falls back to a string.
fn apply_override(table: &mut toml::Table, spec: &str) -> Result<(), CliError> {
    let (key, raw) = spec.split_once('=').ok_or_else(|| invalid(format!("override {spec:?} is not key=value")))?;
    let value = format!("v = {raw}")
        .parse::<toml::Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()));
    let parts: Vec<&str> = key.trim().split('.').collect();
    let mut cur = table;
    for p in &parts[..parts.len() - 1] {
        let entry = cur.entry(p.to_string()).or_insert_with(|| toml::Value::Table(toml::Table::new()));
        cur = entry.as_table_mut().ok_or_else(|| invalid(format!("override {spec:?}: {p} is not a section")))?;
    }
    cur.insert(parts[parts.len() - 1].to_string(), value);
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn profiles_carry_their_constants() {
        let p = RunConfig::load(None, Some(Profile::Paper), &[]).unwrap();
        assert_eq!((p.model.hidden_size, p.model.z_dim), (900, 150));
        assert_eq!((p.train.learning_rate, p.train.clip, p.train.batch_size), (0.015, 12.5, 150));
        let d = RunConfig::load(None, None, &[]).unwrap();
        assert_eq!((d.model.hidden_size, d.model.z_dim), (64, 16));
        assert_eq!((d.train.learning_rate, d.train.clip, d.train.batch_size), (0.05, 5.0, 16));
    }

    #[test]
    fn layering_order() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.toml");
        fs::write(&path, "profile = \"paper\"\nseed = 4\n[train]\niterations = 7\n[paths]\ncaptions = \"c.jsonl\"\n").unwrap();
        let cfg = RunConfig::load(Some(&path), None, &["train.iterations=9".into(), "generate.mode=\"weak\"".into()]).unwrap();
        assert_eq!(cfg.profile, Profile::Paper);
        assert_eq!(cfg.model.hidden_size, 900);
        assert_eq!(cfg.train.iterations, 9);
        assert_eq!(cfg.generate.mode, ConstraintMode::Weak);
        assert_eq!(cfg.seed().unwrap(), 4);
        assert_eq!(cfg.paths.captions.unwrap(), dir.path().join("c.jsonl"));
        let cfg = RunConfig::load(Some(&path), Some(Profile::Desk), &[]).unwrap();
        assert_eq!(cfg.model.hidden_size, 64);
    }

    #[test]
    fn rejects_unknown_keys_and_missing_seed() {
        assert!(RunConfig::load(None, None, &["train.iteratons=3".into()]).is_err());
        assert!(RunConfig::load(None, None, &["nonsense".into()]).is_err());
        assert!(RunConfig::load(None, None, &[]).unwrap().seed().is_err());
    }
}
