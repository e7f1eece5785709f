use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::pca::pca_principal_dims;
use crate::corpus::SentimentLexicon;
use crate::{Error, Result};

/// Number of most-polarized attributes the SentiGloVe dimensions are chosen from.
pub const SENTIGLOVE_ANCHORS: usize = 20;

/// Per-attribute Gaussian means sharing one variance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttributePrior {
    pub sigma2: f64,
    pub z: usize,
    #[serde(with = "string_keys")]
    pub means: BTreeMap<u32, Vec<f64>>,
}

/// Attribute ids as JSON object keys. Spelled out because serde cannot
/// parse integer keys once the prior is nested in an internally tagged enum.
mod string_keys {
    use std::collections::BTreeMap;

    use serde::de::Error as _;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(m: &BTreeMap<u32, Vec<f64>>, s: S) -> Result<S::Ok, S::Error> {
        let keyed: BTreeMap<String, &Vec<f64>> = m.iter().map(|(k, v)| (k.to_string(), v)).collect();
        keyed.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<BTreeMap<u32, Vec<f64>>, D::Error> {
        let keyed = BTreeMap::<String, Vec<f64>>::deserialize(d)?;
        keyed
            .into_iter()
            .map(|(k, v)| k.parse().map(|k| (k, v)).map_err(|_| D::Error::custom(format!("bad attribute id {k:?}"))))
            .collect()
    }
}

impl AttributePrior {
    pub fn new(z: usize, sigma2: f64, means: BTreeMap<u32, Vec<f64>>) -> Result<Self> {
        if !(sigma2 > 0.0) {
            return Err(Error::InvalidArgument(format!("sigma2 must be positive, got {sigma2}")));
        }
        if let Some(m) = means.values().find(|m| m.len() != z) {
            return Err(Error::DimensionMismatch {
                what: "prior mean",
                expected: z,
                actual: m.len(),
            });
        }
        Ok(AttributePrior { sigma2, z, means })
    }

    pub fn read_json(path: &Path) -> Result<Self> {
        let p: AttributePrior = serde_json::from_str(&fs::read_to_string(path)?)?;
        AttributePrior::new(p.z, p.sigma2, p.means)
    }

    pub fn write_json(&self, path: &Path) -> Result<()> {
        fs::write(path, serde_json::to_string(self)? + "\n")?;
        Ok(())
    }
}

/// Treatment of regions without attributes when composing the prior mean.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EmptyRegionPolicy {
    /// Drop them and renormalize the remaining attention weights.
    #[default]
    Renormalize,
    /// Let them contribute zero; weights are used as-is.
    ZeroContribution,
}

/// The three sentiment clusters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SentimentCluster {
    Negative,
    Neutral,
    Positive,
}

impl SentimentCluster {
    pub fn value(self) -> f64 {
        match self {
            SentimentCluster::Negative => -0.5,
            SentimentCluster::Neutral => 0.0,
            SentimentCluster::Positive => 0.5,
        }
    }
}

/// Constant prior mean of a sentiment cluster.
pub fn sentiment_prior_mean(cluster: SentimentCluster, z: usize) -> Vec<f64> {
    vec![cluster.value(); z]
}

/// Average attribute mean of each region, `None` for regions with no known
/// attribute. Attribute ids missing from the prior are ignored.
pub fn region_means(attribute_sets: &[Vec<u32>], prior: &AttributePrior) -> Vec<Option<Vec<f64>>> {
    attribute_sets
        .iter()
        .map(|attrs| {
            let known: Vec<&Vec<f64>> = attrs.iter().filter_map(|a| prior.means.get(a)).collect();
            if known.is_empty() {
                return None;
            }
            let mut m = vec![0.0; prior.z];
            for mu in &known {
                for (acc, x) in m.iter_mut().zip(mu.iter()) {
                    *acc += x;
                }
            }
            let j = known.len() as f64;
            m.iter_mut().for_each(|x| *x /= j);
            Some(m)
        })
        .collect()
}

/// Attention-weighted combination of per-region means.
pub fn combine_region_means(alpha: &[f64], means: &[Option<Vec<f64>>], z: usize, policy: EmptyRegionPolicy) -> Vec<f64> {
    let mut out = vec![0.0; z];
    let mut mass = 0.0;
    for (a, m) in alpha.iter().zip(means) {
        if let Some(m) = m {
            mass += a;
            for (o, x) in out.iter_mut().zip(m) {
                *o += a * x;
            }
        }
    }
    if policy == EmptyRegionPolicy::Renormalize && mass > 0.0 {
        out.iter_mut().for_each(|o| *o /= mass);
    }
    out
}

/// Prior mean at one time step: sum over regions of `alpha_k / J_k` times
/// the sum of that region's attribute means. An all-empty scene gives zero.
pub fn prior_mean(alpha: &[f64], attribute_sets: &[Vec<u32>], prior: &AttributePrior, policy: EmptyRegionPolicy) -> Result<Vec<f64>> {
    if alpha.len() != attribute_sets.len() {
        return Err(Error::LengthMismatch {
            expected: attribute_sets.len(),
            actual: alpha.len(),
        });
    }
    Ok(combine_region_means(alpha, &region_means(attribute_sets, prior), prior.z, policy))
}

/// Every attribute mean is its lexicon score broadcast to `z` dimensions.
pub fn init_sentiwordnet(lexicon: &SentimentLexicon, attributes: &[(u32, String)], z: usize) -> Result<AttributePrior> {
    let mut means = BTreeMap::new();
    for (id, name) in attributes {
        let score = lexicon.score(name).ok_or_else(|| Error::UnknownAttribute(name.clone()))?;
        means.insert(*id, vec![score; z]);
    }
    AttributePrior::new(z, 1.0, means)
}

/// Means built from the `n` embedding coordinates that carry the most
/// sentiment, tiled to `z` dimensions.
///
/// The coordinates are the largest loadings of the first principal
/// component of the embeddings of the (up to) 20 attributes whose scores
/// are furthest from neutral.
pub fn init_sentiglove(
    glove: &BTreeMap<String, Vec<f64>>,
    attributes: &[(u32, String)],
    lexicon: &SentimentLexicon,
    n: usize,
    z: usize,
) -> Result<AttributePrior> {
    if n == 0 || z == 0 {
        return Err(Error::InvalidArgument("n and z must be >= 1".into()));
    }
    let mut ranked = Vec::with_capacity(attributes.len());
    for (_, name) in attributes {
        if !glove.contains_key(name) {
            return Err(Error::UnknownAttribute(name.clone()));
        }
        let score = lexicon.score(name).ok_or_else(|| Error::UnknownAttribute(name.clone()))?;
        ranked.push(((score - 0.5).abs(), name.as_str()));
    }
    ranked.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(b.1)));
    let anchors: BTreeSet<&str> = ranked.iter().take(SENTIGLOVE_ANCHORS).map(|r| r.1).collect();
    if anchors.len() < SENTIGLOVE_ANCHORS {
        log::warn!("only {} attributes available for the sentiment PCA (wanted {SENTIGLOVE_ANCHORS})", anchors.len());
    }
    let rows: Vec<Vec<f64>> = ranked.iter().take(SENTIGLOVE_ANCHORS).map(|r| glove[r.1].clone()).collect();
    let dims = pca_principal_dims(&rows, n)?;

    let means = attributes
        .iter()
        .map(|(id, name)| {
            let v = &glove[name];
            let picked: Vec<f64> = dims.iter().map(|&d| v[d]).collect();
            (*id, picked.iter().cycle().take(z).copied().collect())
        })
        .collect();
    AttributePrior::new(z, 1.0, means)
}

/// Whitespace-separated `word f1 ... fd` lines.
pub fn read_glove(path: &Path) -> Result<BTreeMap<String, Vec<f64>>> {
    let text = fs::read_to_string(path)?;
    let mut out = BTreeMap::new();
    let mut dim = None;
    for (i, line) in text.lines().enumerate() {
        let mut parts = line.split_whitespace();
        let Some(word) = parts.next() else { continue };
        let v: Vec<f64> = parts
            .map(str::parse)
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::parse(path, i + 1, format!("bad float: {e}")))?;
        if *dim.get_or_insert(v.len()) != v.len() || v.is_empty() {
            return Err(Error::parse(path, i + 1, "inconsistent vector dimension"));
        }
        out.insert(word.to_lowercase(), v);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn prior3() -> AttributePrior {
        let mut means = BTreeMap::new();
        means.insert(1, vec![1.0, 0.0]);
        means.insert(2, vec![0.0, 2.0]);
        means.insert(3, vec![-1.0, 1.0]);
        AttributePrior::new(2, 1.0, means).unwrap()
    }

    #[test]
    fn single_and_convex_cases() {
        let p = prior3();
        assert_eq!(prior_mean(&[1.0], &[vec![1]], &p, Default::default()).unwrap(), [1.0, 0.0]);
        let m = prior_mean(&[0.5, 0.5], &[vec![1], vec![2]], &p, Default::default()).unwrap();
        assert_eq!(m, [0.5, 1.0]);
    }

    #[test]
    fn empty_regions() {
        let p = prior3();
        let sets = [vec![1, 2], vec![], vec![3]];
        let alpha = [0.2, 0.6, 0.2];
        // renormalized: (0.2 * (0.5, 1) + 0.2 * (-1, 1)) / 0.4
        let m = prior_mean(&alpha, &sets, &p, EmptyRegionPolicy::Renormalize).unwrap();
        assert!((m[0] + 0.25).abs() < 1e-15 && (m[1] - 1.0).abs() < 1e-15);
        let m = prior_mean(&alpha, &sets, &p, EmptyRegionPolicy::ZeroContribution).unwrap();
        assert!((m[0] + 0.1).abs() < 1e-15 && (m[1] - 0.4).abs() < 1e-15);
        assert_eq!(prior_mean(&[0.5, 0.5], &[vec![], vec![]], &p, Default::default()).unwrap(), [0.0, 0.0]);
        assert!(prior_mean(&[1.0], &[vec![], vec![]], &p, Default::default()).is_err());
    }

    #[test]
    fn cluster_means() {
        assert_eq!(sentiment_prior_mean(SentimentCluster::Positive, 3), [0.5; 3]);
        assert_eq!(sentiment_prior_mean(SentimentCluster::Neutral, 2), [0.0; 2]);
        assert_eq!(sentiment_prior_mean(SentimentCluster::Negative, 2), [-0.5; 2]);
    }

    fn lexicon(words: &[(&str, f64)]) -> SentimentLexicon {
        let mut l = SentimentLexicon::default();
        for (w, s) in words {
            l.insert(w, *s).unwrap();
        }
        l
    }

    #[test]
    fn sentiwordnet_broadcast() {
        let lex = lexicon(&[("calm", 0.5), ("dead", 0.0), ("bad", 0.1), ("happy", 0.9)]);
        let attrs = vec![(1, "calm".to_string()), (2, "dead".to_string())];
        let p = init_sentiwordnet(&lex, &attrs, 4).unwrap();
        assert_eq!(p.means[&1], [0.5; 4]);
        assert_eq!(p.means[&2], [0.0; 4]);
        let attrs = vec![(1, "bad".to_string()), (2, "calm".to_string()), (3, "happy".to_string())];
        let p = init_sentiwordnet(&lex, &attrs, 2).unwrap();
        assert_eq!(p.means.values().cloned().collect::<Vec<_>>(), [vec![0.1; 2], vec![0.5; 2], vec![0.9; 2]]);
        assert!(matches!(init_sentiwordnet(&lex, &[(9, "nope".into())], 2), Err(Error::UnknownAttribute(_))));
    }

    #[test]
    fn sentiglove_tiling() {
        // coordinate 2 carries the sentiment axis
        let lex = lexicon(&[("good", 0.9), ("bad", 0.1), ("ok", 0.5)]);
        let mut glove = BTreeMap::new();
        glove.insert("good".to_string(), vec![0.1, 0.2, 3.0]);
        glove.insert("bad".to_string(), vec![0.1, 0.2, -3.0]);
        glove.insert("ok".to_string(), vec![0.1, 0.2, 0.0]);
        let attrs = vec![(1, "good".to_string()), (2, "bad".to_string()), (3, "ok".to_string())];
        let p = init_sentiglove(&glove, &attrs, &lex, 1, 3).unwrap();
        assert_eq!(p.means[&1], [3.0, 3.0, 3.0]);
        assert_eq!(p.means[&2], [-3.0, -3.0, -3.0]);
        let p = init_sentiglove(&glove, &attrs, &lex, 3, 3).unwrap();
        assert_eq!(p.means[&1], [3.0, 0.1, 0.2]);
        let p = init_sentiglove(&glove, &attrs, &lex, 2, 5).unwrap();
        assert_eq!(p.means[&1].len(), 5);
    }

    #[test]
    fn prior_json_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("prior.json");
        let p = prior3();
        p.write_json(&path).unwrap();
        let text = fs::read_to_string(&path).unwrap();
        assert!(text.starts_with(r#"{"sigma2":1.0,"z":2,"means":{"1":[1.0,0.0]"#));
        assert_eq!(AttributePrior::read_json(&path).unwrap(), p);
    }

    #[test]
    fn glove_reader() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("g.txt");
        fs::write(&path, "Happy 0.1 0.2\nsad -0.1 0.5\n\n").unwrap();
        let g = read_glove(&path).unwrap();
        assert_eq!(g["happy"], [0.1, 0.2]);
        fs::write(&path, "a 1 2\nb 1\n").unwrap();
        assert!(read_glove(&path).is_err());
    }
}
