use std::collections::{BTreeMap, BTreeSet};

use rand::seq::{IndexedRandom, SliceRandom};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{SynonymSet, Vocabulary};
use crate::features::RegionFeatureSet;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConstraintMode {
    #[default]
    None,
    /// At least one word from the union of all detected attributes.
    Weak,
    /// One sampled detected attribute must appear.
    Individual,
    /// Attributes of at least two different regions must appear.
    #[serde(alias = "multi-object")]
    MultiObject,
}

impl ConstraintMode {
    pub fn as_str(self) -> &'static str {
        match self {
            ConstraintMode::None => "none",
            ConstraintMode::Weak => "weak",
            ConstraintMode::Individual => "individual",
            ConstraintMode::MultiObject => "multi_object",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "none" => Some(ConstraintMode::None),
            "weak" => Some(ConstraintMode::Weak),
            "individual" => Some(ConstraintMode::Individual),
            "multi_object" | "multi-object" => Some(ConstraintMode::MultiObject),
            _ => None,
        }
    }
}

/// Words that each satisfy one requirement.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConstraintGroup {
    /// Canonical attribute name(s) the group stands for.
    pub label: String,
    pub words: BTreeSet<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConstraintSpec {
    pub mode: ConstraintMode,
    pub groups: Vec<ConstraintGroup>,
    pub min_groups: usize,
    /// Why a constrained mode degraded, if it did.
    pub warning: Option<String>,
}

impl ConstraintSpec {
    pub fn none() -> Self {
        ConstraintSpec {
            mode: ConstraintMode::None,
            groups: Vec::new(),
            min_groups: 0,
            warning: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.mode != ConstraintMode::None && (self.groups.is_empty() || self.groups.iter().any(|g| g.words.is_empty())) {
            return Err(Error::InvalidArgument("constrained modes need non-empty groups".into()));
        }
        if self.min_groups > self.groups.len() {
            return Err(Error::InvalidArgument(format!(
                "min_groups {} exceeds {} groups",
                self.min_groups,
                self.groups.len()
            )));
        }
        if self.groups.len() > 63 {
            return Err(Error::InvalidArgument("at most 63 constraint groups".into()));
        }
        Ok(())
    }

    pub fn labels(&self) -> Vec<String> {
        self.groups.iter().map(|g| g.label.clone()).collect()
    }

    /// Number of groups with at least one word present in `words`.
    pub fn groups_hit(&self, words: &[&str]) -> usize {
        self.groups.iter().filter(|g| words.iter().any(|w| g.words.contains(*w))).count()
    }

    pub fn is_satisfied_by(&self, words: &[&str]) -> bool {
        self.groups_hit(words) >= self.min_groups
    }
}

/// Advances a group bitmask by one word: sets bit `g` for every group containing it.
pub fn fsa_advance(state: u64, token: &str, spec: &ConstraintSpec) -> u64 {
    spec.groups
        .iter()
        .enumerate()
        .filter(|(_, g)| g.words.contains(token))
        .fold(state, |s, (i, _)| s | (1 << i))
}

/// The constraint automaton over token ids. States are bitmasks of
/// satisfied groups; bits are only ever set.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConstraintAutomaton {
    groups: Vec<BTreeSet<usize>>,
    min_groups: usize,
}

impl ConstraintAutomaton {
    /// Groups are mapped through the vocabulary; out-of-vocabulary words
    /// are dropped. A group left empty makes the constraint unsatisfiable.
    pub fn new(spec: &ConstraintSpec, vocab: &Vocabulary) -> Result<Self> {
        spec.validate()?;
        let groups = spec
            .groups
            .iter()
            .map(|g| g.words.iter().filter_map(|w| vocab.get(w)).collect())
            .collect();
        Self::from_token_groups(groups, spec.min_groups)
    }

    pub fn from_token_groups(groups: Vec<BTreeSet<usize>>, min_groups: usize) -> Result<Self> {
        if min_groups > groups.len() || groups.len() > 63 {
            return Err(Error::InvalidArgument("bad constraint group count".into()));
        }
        Ok(ConstraintAutomaton { groups, min_groups })
    }

    pub fn unconstrained() -> Self {
        ConstraintAutomaton {
            groups: Vec::new(),
            min_groups: 0,
        }
    }

    pub fn advance(&self, state: u64, token: usize) -> u64 {
        self.groups
            .iter()
            .enumerate()
            .filter(|(_, g)| g.contains(&token))
            .fold(state, |s, (i, _)| s | (1 << i))
    }

    pub fn is_accepting(&self, state: u64) -> bool {
        state.count_ones() as usize >= self.min_groups
    }

    /// False when fewer than `min_groups` groups have any in-vocabulary word.
    pub fn is_satisfiable(&self) -> bool {
        self.groups.iter().filter(|g| !g.is_empty()).count() >= self.min_groups
    }

    pub fn num_groups(&self) -> usize {
        self.groups.len()
    }
}

fn group_of(attr: u32, synonyms: &BTreeMap<u32, &SynonymSet>) -> Option<ConstraintGroup> {
    synonyms.get(&attr).map(|s| ConstraintGroup {
        label: s.canonical.clone(),
        words: s.synonyms.clone(),
    })
}

/// Builds the constraint for one image from its detected attributes.
///
/// Attributes without a synonym set are ignored. With nothing usable the
/// result is mode `None` carrying a warning; `MultiObject` needs two regions
/// with attributes and otherwise degrades to `Individual` with a warning.
pub fn pick_constraints<R: Rng + ?Sized>(detections: &RegionFeatureSet, mode: ConstraintMode, synonyms: &[SynonymSet], rng: &mut R) -> ConstraintSpec {
    let by_id: BTreeMap<u32, &SynonymSet> = synonyms.iter().map(|s| (s.attribute_id, s)).collect();
    let per_region: Vec<Vec<u32>> = detections
        .regions
        .iter()
        .map(|r| {
            let ids: BTreeSet<u32> = r.attributes.iter().map(|a| a.0).filter(|a| by_id.contains_key(a)).collect();
            ids.into_iter().collect()
        })
        .filter(|ids: &Vec<u32>| !ids.is_empty())
        .collect();
    let all: BTreeSet<u32> = per_region.iter().flatten().copied().collect();
    if mode == ConstraintMode::None {
        return ConstraintSpec::none();
    }
    if all.is_empty() {
        log::warn!("{}: no detected attributes, decoding unconstrained", detections.image_id);
        return ConstraintSpec {
            warning: Some("no detected attributes".into()),
            ..ConstraintSpec::none()
        };
    }
    match mode {
        ConstraintMode::None => unreachable!(),
        ConstraintMode::Weak => {
            let groups: Vec<ConstraintGroup> = all.iter().filter_map(|&a| group_of(a, &by_id)).collect();
            let label = groups.iter().map(|g| g.label.as_str()).collect::<Vec<_>>().join("|");
            let words = groups.into_iter().flat_map(|g| g.words).collect();
            ConstraintSpec {
                mode,
                groups: vec![ConstraintGroup { label, words }],
                min_groups: 1,
                warning: None,
            }
        }
        ConstraintMode::Individual => individual(&all, &by_id, None, rng),
        ConstraintMode::MultiObject => {
            if per_region.len() < 2 {
                return individual(&all, &by_id, Some("fewer than two regions with attributes".into()), rng);
            }
            let mut regions: Vec<usize> = (0..per_region.len()).collect();
            regions.shuffle(rng);
            let groups = regions[..2]
                .iter()
                .map(|&r| {
                    let a = *per_region[r].choose(rng).expect("non-empty region");
                    group_of(a, &by_id).expect("filtered to known attributes")
                })
                .collect();
            ConstraintSpec {
                mode,
                groups,
                min_groups: 2,
                warning: None,
            }
        }
    }
}

fn individual<R: Rng + ?Sized>(all: &BTreeSet<u32>, by_id: &BTreeMap<u32, &SynonymSet>, warning: Option<String>, rng: &mut R) -> ConstraintSpec {
    let ids: Vec<u32> = all.iter().copied().collect();
    let a = *ids.choose(rng).expect("non-empty");
    ConstraintSpec {
        mode: ConstraintMode::Individual,
        groups: vec![group_of(a, by_id).expect("known attribute")],
        min_groups: 1,
        warning,
    }
}
