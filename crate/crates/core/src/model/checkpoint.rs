use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::config::{ModelConfig, TrainConfig};
use super::network::Prior;
use super::params::ModelParameters;
use crate::corpus::Vocabulary;
use crate::{Error, Result};

const MAGIC: &[u8; 8] = b"STYCAP01";

/// Everything needed to resume training or to generate.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub params: ModelParameters,
    pub velocity: Option<ModelParameters>,
    pub iteration: usize,
    pub vocab: Vocabulary,
    pub prior: Prior,
    pub train: Option<TrainConfig>,
}

#[derive(Debug, Serialize, Deserialize)]
struct BlobEntry {
    name: String,
    shape: Vec<usize>,
    /// Byte offset from the start of the blob section.
    offset: usize,
}

#[derive(Debug, Serialize, Deserialize)]
struct Header {
    config: ModelConfig,
    iteration: usize,
    vocab_hash: String,
    vocab: Vec<String>,
    prior: Prior,
    train: Option<TrainConfig>,
    manifest: Vec<BlobEntry>,
}

impl Checkpoint {
    /// Layout: magic, u64 LE header length, JSON header, then little-endian
    /// f32 blobs in manifest order. Parameters are stored in single precision.
    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let mut manifest = Vec::new();
        let mut blob = Vec::new();
        let mut push = |prefix: &str, p: &ModelParameters| {
            for (name, shape, values) in p.blocks() {
                manifest.push(BlobEntry {
                    name: format!("{prefix}{name}"),
                    shape,
                    offset: blob.len(),
                });
                for v in values {
                    blob.extend_from_slice(&(*v as f32).to_le_bytes());
                }
            }
        };
        push("", &self.params);
        if let Some(v) = &self.velocity {
            push("velocity/", v);
        }
        let header = Header {
            config: self.params.config.clone(),
            iteration: self.iteration,
            vocab_hash: self.vocab.hash(),
            vocab: self.vocab.words().to_vec(),
            prior: self.prior.clone(),
            train: self.train.clone(),
            manifest,
        };
        let json = serde_json::to_vec(&header)?;
        let mut out = Vec::with_capacity(16 + json.len() + blob.len());
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&(json.len() as u64).to_le_bytes());
        out.extend_from_slice(&json);
        out.extend_from_slice(&blob);
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < 16 || &bytes[..8] != MAGIC {
            return Err(Error::Format("not a checkpoint file".into()));
        }
        let hlen = u64::from_le_bytes(bytes[8..16].try_into().expect("8 bytes")) as usize;
        let body = bytes.get(16..16 + hlen).ok_or_else(|| Error::Format("truncated header".into()))?;
        let header: Header = serde_json::from_slice(body)?;
        let blob = &bytes[16 + hlen..];
        let vocab = Vocabulary::from_words(header.vocab.iter().cloned());
        if vocab.hash() != header.vocab_hash {
            return Err(Error::Format("vocabulary hash does not match the stored word list".into()));
        }
        let read = |prefix: &str| -> Result<Option<ModelParameters>> {
            let mut p = ModelParameters::zeros(&header.config)?;
            let mut found = 0;
            for (name, values) in p.blocks_mut() {
                let full = format!("{prefix}{name}");
                let Some(entry) = header.manifest.iter().find(|e| e.name == full) else { continue };
                let n: usize = entry.shape.iter().product();
                if n != values.len() {
                    return Err(Error::DimensionMismatch {
                        what: name,
                        expected: values.len(),
                        actual: n,
                    });
                }
                let raw = blob
                    .get(entry.offset..entry.offset + 4 * n)
                    .ok_or_else(|| Error::Format(format!("blob {full} out of bounds")))?;
                for (v, chunk) in values.iter_mut().zip(raw.chunks_exact(4)) {
                    *v = f32::from_le_bytes(chunk.try_into().expect("4 bytes")) as f64;
                }
                found += 1;
            }
            match found {
                0 => Ok(None),
                n if n == p.blocks().len() => Ok(Some(p)),
                _ => Err(Error::Format(format!("checkpoint is missing some {prefix}blocks"))),
            }
        };
        let params = read("")?.ok_or_else(|| Error::Format("checkpoint has no parameters".into()))?;
        let velocity = read("velocity/")?;
        Ok(Checkpoint {
            params,
            velocity,
            iteration: header.iteration,
            vocab,
            prior: header.prior,
            train: header.train,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let bytes = self.to_bytes()?;
        let mut f = fs::File::create(path)?;
        f.write_all(&bytes)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_bytes(&fs::read(path)?)
    }
}

/// Rounds every parameter to single precision, matching a save/load cycle.
pub fn round_to_f32(p: &mut ModelParameters) {
    for (_, v) in p.blocks_mut() {
        v.iter_mut().for_each(|x| *x = *x as f32 as f64);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::latent::EmptyRegionPolicy;
    use crate::model::tests::tiny_prior;
    use crate::rng::seeded;

    fn sample(prior: Prior) -> Checkpoint {
        let config = ModelConfig::tiny();
        let mut params = ModelParameters::init(&config, &mut seeded(1)).unwrap();
        let mut velocity = ModelParameters::init(&config, &mut seeded(2)).unwrap();
        round_to_f32(&mut params);
        round_to_f32(&mut velocity);
        let words = (0..config.vocab_size - 4).map(|i| format!("w{i}"));
        Checkpoint {
            params,
            velocity: Some(velocity),
            iteration: 17,
            vocab: Vocabulary::from_words(words),
            prior,
            train: Some(TrainConfig::desk(3)),
        }
    }

    #[test]
    fn round_trip_both_priors() {
        for prior in [tiny_prior(4, EmptyRegionPolicy::ZeroContribution), Prior::Sentiment { sigma2: 0.5, z: 4 }] {
            let ck = sample(prior);
            let bytes = ck.to_bytes().unwrap();
            let back = Checkpoint::from_bytes(&bytes).unwrap();
            assert_eq!(back, ck);
            // re-encoding a loaded checkpoint is byte-stable
            assert_eq!(back.to_bytes().unwrap(), bytes);
        }
    }

    #[test]
    fn without_velocity() {
        let mut ck = sample(Prior::Sentiment { sigma2: 1.0, z: 4 });
        ck.velocity = None;
        ck.train = None;
        assert_eq!(Checkpoint::from_bytes(&ck.to_bytes().unwrap()).unwrap(), ck);
    }

    #[test]
    fn rejects_corruption() {
        let bytes = sample(Prior::Sentiment { sigma2: 1.0, z: 4 }).to_bytes().unwrap();
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(matches!(Checkpoint::from_bytes(&bad), Err(Error::Format(_))));
        assert!(Checkpoint::from_bytes(&bytes[..bytes.len() - 4]).is_err());
        // a renamed word no longer matches the stored hash
        let pos = bytes.windows(4).position(|w| w == b"\"w0\"").unwrap();
        let mut renamed = bytes.clone();
        renamed[pos + 1] = b'v';
        let r = Checkpoint::from_bytes(&renamed);
        assert!(matches!(r, Err(Error::Format(_))), "{r:?}");
    }
}
