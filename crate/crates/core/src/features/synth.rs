use std::collections::BTreeMap;

use rand::seq::IndexedRandom;
use rand::Rng;
use rand_distr::{Distribution, Normal, StandardNormal};

use super::{Region, RegionFeatureSet};
use crate::corpus::Caption;
use crate::{Error, Result};

/// Pools and dimensions of a synthetic scene family.
#[derive(Debug, Clone, PartialEq)]
pub struct SceneSpec {
    pub num_regions: usize,
    pub feature_dim: usize,
    /// `(category_id, noun)`
    pub categories: Vec<(u32, String)>,
    /// `(attribute_id, adjective)`
    pub attributes: Vec<(u32, String)>,
    pub noise_std: f32,
}

/// Stand-in for a detector: fixed random embeddings per category and
/// attribute, summed per region and perturbed with Gaussian noise.
#[derive(Debug, Clone)]
pub struct SceneGenerator {
    pub spec: SceneSpec,
    category_emb: BTreeMap<u32, Vec<f32>>,
    attribute_emb: BTreeMap<u32, Vec<f32>>,
}

impl SceneGenerator {
    pub fn new<R: Rng + ?Sized>(spec: SceneSpec, rng: &mut R) -> Result<Self> {
        if spec.num_regions == 0 || spec.feature_dim == 0 {
            return Err(Error::InvalidArgument("scene dimensions must be >= 1".into()));
        }
        if spec.categories.is_empty() || spec.attributes.is_empty() {
            return Err(Error::Empty("category or attribute pool"));
        }
        let draw = |rng: &mut R| -> Vec<f32> {
            (0..spec.feature_dim).map(|_| StandardNormal.sample(rng)).collect()
        };
        let category_emb = spec.categories.iter().map(|(id, _)| (*id, draw(rng))).collect();
        let attribute_emb = spec.attributes.iter().map(|(id, _)| (*id, draw(rng))).collect();
        Ok(SceneGenerator {
            spec,
            category_emb,
            attribute_emb,
        })
    }

    pub fn category_embedding(&self, id: u32) -> Option<&[f32]> {
        self.category_emb.get(&id).map(Vec::as_slice)
    }

    pub fn attribute_embedding(&self, id: u32) -> Option<&[f32]> {
        self.attribute_emb.get(&id).map(Vec::as_slice)
    }

    /// One region with the given category and optional attribute.
    pub fn region<R: Rng + ?Sized>(&self, category: u32, attribute: Option<u32>, rng: &mut R) -> Result<Region> {
        let cat = self
            .category_emb
            .get(&category)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown category {category}")))?;
        let mut feature = cat.clone();
        if let Some(a) = attribute {
            let emb = self
                .attribute_emb
                .get(&a)
                .ok_or_else(|| Error::UnknownAttribute(a.to_string()))?;
            for (f, e) in feature.iter_mut().zip(emb) {
                *f += e;
            }
        }
        if self.spec.noise_std > 0.0 {
            let noise = Normal::new(0.0f32, self.spec.noise_std).map_err(|e| Error::InvalidArgument(e.to_string()))?;
            for f in feature.iter_mut() {
                *f += noise.sample(rng);
            }
        }
        let x0: f32 = rng.random_range(0.0..0.5);
        let y0: f32 = rng.random_range(0.0..0.5);
        Ok(Region {
            feature,
            bbox: [x0, y0, x0 + rng.random_range(0.1..0.5), y0 + rng.random_range(0.1..0.5)],
            category_id: category,
            confidence: rng.random_range(0.5..1.0),
            attributes: attribute.map(|a| vec![(a, rng.random_range(0.3..1.0))]).unwrap_or_default(),
        })
    }

    /// Random scene plus its references: a stylized caption
    /// `a ADJ NOUN with a ADJ NOUN ...` and the same caption without adjectives.
    pub fn synthesize<R: Rng + ?Sized>(&self, image_id: &str, rng: &mut R) -> Result<(RegionFeatureSet, Vec<Caption>)> {
        let mut regions = Vec::with_capacity(self.spec.num_regions);
        let mut styled = Vec::new();
        let mut plain = Vec::new();
        for k in 0..self.spec.num_regions {
            let (cat, noun) = self.spec.categories.choose(rng).expect("non-empty pool");
            let (attr, adj) = self.spec.attributes.choose(rng).expect("non-empty pool");
            regions.push(self.region(*cat, Some(*attr), rng)?);
            let joiner = if k == 0 { "a" } else { "with a" };
            styled.push(format!("{joiner} {adj} {noun}"));
            plain.push(format!("{joiner} {noun}"));
        }
        let set = RegionFeatureSet {
            image_id: image_id.to_string(),
            regions,
        };
        let caps = vec![Caption::new(image_id, &styled.join(" ")), Caption::new(image_id, &plain.join(" "))];
        Ok((set, caps))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;

    fn spec(noise: f32, k: usize) -> SceneSpec {
        SceneSpec {
            num_regions: k,
            feature_dim: 4,
            categories: vec![(1, "dog".into()), (2, "cat".into())],
            attributes: vec![(10, "furry".into()), (11, "wet".into()), (12, "calm".into())],
            noise_std: noise,
        }
    }

    #[test]
    fn zero_noise_is_exact_sum() {
        let g = SceneGenerator::new(spec(0.0, 1), &mut seeded(0)).unwrap();
        let (set, caps) = g.synthesize("x", &mut seeded(5)).unwrap();
        let r = &set.regions[0];
        let a = r.attributes[0].0;
        let expect: Vec<f32> = g
            .category_embedding(r.category_id)
            .unwrap()
            .iter()
            .zip(g.attribute_embedding(a).unwrap())
            .map(|(c, e)| c + e)
            .collect();
        assert_eq!(r.feature, expect);
        assert_eq!(caps.len(), 2);
    }

    #[test]
    fn deterministic_per_seed() {
        let g = SceneGenerator::new(spec(0.1, 3), &mut seeded(0)).unwrap();
        let a = g.synthesize("x", &mut seeded(9)).unwrap();
        let b = g.synthesize("x", &mut seeded(9)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn three_region_captions_follow_sampled_attributes() {
        let g = SceneGenerator::new(spec(0.1, 3), &mut seeded(0)).unwrap();
        let (set, caps) = g.synthesize("img", &mut seeded(3)).unwrap();
        let adj = |id: u32| g.spec.attributes.iter().find(|a| a.0 == id).unwrap().1.clone();
        let noun = |id: u32| g.spec.categories.iter().find(|c| c.0 == id).unwrap().1.clone();
        let expected: Vec<String> = set
            .regions
            .iter()
            .enumerate()
            .map(|(k, r)| format!("{} {} {}", if k == 0 { "a" } else { "with a" }, adj(r.attributes[0].0), noun(r.category_id)))
            .collect();
        assert_eq!(caps[0].text(), expected.join(" "));
        assert_eq!(set.len(), 3);
        assert!(set.regions.iter().all(|r| r.confidence >= 0.5 && r.attributes[0].1 >= 0.3));
    }

    #[test]
    fn rejects_empty_dims() {
        assert!(SceneGenerator::new(spec(0.0, 0), &mut seeded(0)).is_err());
    }
}
