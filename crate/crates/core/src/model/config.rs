use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Which structured prior conditions the latent variables.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PriorKind {
    /// Attention-weighted attribute means.
    #[default]
    Attribute,
    /// One constant mean per sentiment cluster.
    Sentiment,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub hidden_size: usize,
    pub z_dim: usize,
    pub embed_dim: usize,
    pub feature_dim: usize,
    pub vocab_size: usize,
    pub max_len: usize,
    pub prior: PriorKind,
}

impl ModelConfig {
    /// Full-size setting: 900 hidden units, 150 latent dimensions.
    pub fn paper(feature_dim: usize, vocab_size: usize) -> Self {
        ModelConfig {
            hidden_size: 900,
            z_dim: 150,
            embed_dim: 512,
            feature_dim,
            vocab_size,
            max_len: 20,
            prior: PriorKind::Attribute,
        }
    }

    /// Small enough to train on a laptop CPU in minutes.
    pub fn desk(vocab_size: usize) -> Self {
        ModelConfig {
            hidden_size: 64,
            z_dim: 16,
            embed_dim: 32,
            feature_dim: 24,
            vocab_size,
            max_len: 20,
            prior: PriorKind::Attribute,
        }
    }

    /// The profile used for finite-difference gradient checks.
    pub fn tiny() -> Self {
        ModelConfig {
            hidden_size: 16,
            z_dim: 4,
            embed_dim: 8,
            feature_dim: 6,
            vocab_size: 20,
            max_len: 8,
            prior: PriorKind::Attribute,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("hidden_size", self.hidden_size),
            ("z_dim", self.z_dim),
            ("embed_dim", self.embed_dim),
            ("feature_dim", self.feature_dim),
            ("vocab_size", self.vocab_size),
            ("max_len", self.max_len),
        ];
        for (name, v) in fields {
            if v == 0 {
                return Err(Error::InvalidArgument(format!("{name} must be >= 1")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub momentum: f64,
    pub clip: f64,
    pub batch_size: usize,
    pub iterations: usize,
    pub seed: u64,
    /// Ramp the KL weight linearly from 0 to 1 over the first 20% of iterations.
    pub kl_annealing: bool,
    /// Loss trace granularity.
    pub log_every: usize,
}

impl TrainConfig {
    pub fn paper(seed: u64) -> Self {
        TrainConfig {
            learning_rate: 0.015,
            momentum: 0.9,
            clip: 12.5,
            batch_size: 150,
            iterations: 70_000,
            seed,
            kl_annealing: false,
            log_every: 100,
        }
    }

    pub fn desk(seed: u64) -> Self {
        TrainConfig {
            learning_rate: 0.05,
            momentum: 0.9,
            clip: 5.0,
            batch_size: 16,
            iterations: 2000,
            seed,
            kl_annealing: true,
            log_every: 50,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0) {
            return Err(Error::InvalidArgument("learning_rate must be > 0".into()));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::OutOfRange {
                value: self.momentum,
                lo: 0.0,
                hi: 1.0,
            });
        }
        if !(self.clip > 0.0) {
            return Err(Error::InvalidArgument("clip must be > 0".into()));
        }
        if self.batch_size == 0 || self.log_every == 0 {
            return Err(Error::InvalidArgument("batch_size and log_every must be >= 1".into()));
        }
        Ok(())
    }

    /// KL weight in effect at `iteration` (0-based).
    pub fn kl_weight(&self, iteration: usize) -> f64 {
        if !self.kl_annealing {
            return 1.0;
        }
        let ramp = (self.iterations as f64 * 0.2).max(1.0);
        (iteration as f64 / ramp).min(1.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn profiles_validate() {
        ModelConfig::paper(2048, 10_000).validate().unwrap();
        assert_eq!(ModelConfig::paper(2048, 10).hidden_size, 900);
        assert_eq!(ModelConfig::paper(2048, 10).z_dim, 150);
        ModelConfig::desk(30).validate().unwrap();
        assert!(ModelConfig { z_dim: 0, ..ModelConfig::tiny() }.validate().is_err());
        TrainConfig::paper(0).validate().unwrap();
        assert!(TrainConfig { momentum: 1.0, ..TrainConfig::desk(0) }.validate().is_err());
        assert!(TrainConfig { learning_rate: 0.0, ..TrainConfig::desk(0) }.validate().is_err());
    }

    #[test]
    fn annealing_ramp() {
        let cfg = TrainConfig { iterations: 100, ..TrainConfig::desk(0) };
        assert_eq!(cfg.kl_weight(0), 0.0);
        assert_eq!(cfg.kl_weight(10), 0.5);
        assert_eq!(cfg.kl_weight(20), 1.0);
        assert_eq!(cfg.kl_weight(99), 1.0);
        let off = TrainConfig { kl_annealing: false, ..cfg };
        assert_eq!(off.kl_weight(0), 1.0);
    }
}
