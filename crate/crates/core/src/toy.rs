//! Small synthetic corpora with known structure, used for smoke runs and
//! the convergence checks.

use rand::Rng;

use crate::corpus::{AnpTable, Caption, ObjectNounSet, PolarityLexicon, Sentiment, SentimentLexicon, SynonymSet};
use crate::features::{RegionFeatureSet, SceneGenerator, SceneSpec};
use crate::Result;

pub const TOY_FEATURE_DIM: usize = 24;

const NOUNS: [&str; 8] = ["dog", "cat", "horse", "bird", "truck", "boat", "car", "bench"];
const PLACES: [(&str, &str); 8] = [
    ("on", "grass"),
    ("on", "sofa"),
    ("in", "field"),
    ("on", "branch"),
    ("on", "road"),
    ("on", "lake"),
    ("in", "street"),
    ("in", "park"),
];
/// `(adjective, sentiment score in [0, 1])`
const ATTRIBUTES: [(&str, f64); 8] = [
    ("fluffy", 0.625),
    ("wet", 0.375),
    ("old", 0.25),
    ("shiny", 0.75),
    ("happy", 0.875),
    ("dirty", 0.125),
    ("calm", 0.5625),
    ("broken", 0.0625),
];
const POSITIVE: [&str; 4] = ["beautiful", "lovely", "nice", "great"];
const NEGATIVE: [&str; 4] = ["ugly", "sad", "bad", "awful"];

/// Scenes, captions and lexicons of a toy corpus.
#[derive(Debug, Clone)]
pub struct ToyCorpus {
    pub scenes: Vec<RegionFeatureSet>,
    pub captions: Vec<Caption>,
    /// The captions with their attribute adjectives removed (attribute toy
    /// only; empty otherwise).
    pub factual: Vec<Caption>,
    /// `(attribute_id, adjective)`
    pub attributes: Vec<(u32, String)>,
    /// `(category_id, noun)`
    pub categories: Vec<(u32, String)>,
    pub sentiment: SentimentLexicon,
    pub polarity: PolarityLexicon,
    pub synonyms: Vec<SynonymSet>,
    pub nouns: Vec<ObjectNounSet>,
    pub anps: AnpTable,
}

fn categories() -> Vec<(u32, String)> {
    let objects = NOUNS.iter().enumerate().map(|(i, n)| (i as u32 + 1, n.to_string()));
    let places = PLACES.iter().enumerate().map(|(i, p)| (i as u32 + 101, p.1.to_string()));
    objects.chain(places).collect()
}

fn attributes() -> Vec<(u32, String)> {
    ATTRIBUTES.iter().enumerate().map(|(i, a)| (i as u32 + 201, a.0.to_string())).collect()
}

fn lexicons(extra: &[(&str, f64)]) -> Result<(SentimentLexicon, PolarityLexicon)> {
    let mut lex = SentimentLexicon::default();
    for (w, s) in ATTRIBUTES.iter().chain(extra) {
        lex.insert(w, *s)?;
    }
    for w in POSITIVE {
        lex.insert(w, 0.9)?;
    }
    for w in NEGATIVE {
        lex.insert(w, 0.1)?;
    }
    let polarity = PolarityLexicon::from_scores(&lex);
    Ok((lex, polarity))
}

fn generator<R: Rng + ?Sized>(rng: &mut R) -> Result<SceneGenerator> {
    SceneGenerator::new(
        SceneSpec {
            num_regions: 2,
            feature_dim: TOY_FEATURE_DIM,
            categories: categories(),
            attributes: attributes(),
            noise_std: 0.05,
        },
        rng,
    )
}

fn shared_tables() -> Result<(Vec<SynonymSet>, Vec<ObjectNounSet>, AnpTable)> {
    let synonyms = attributes().into_iter().map(|(id, a)| SynonymSet::new(id, &a, Vec::<&str>::new())).collect();
    let nouns = NOUNS
        .iter()
        .enumerate()
        .map(|(i, n)| ObjectNounSet::new(i as u32 + 1, [*n]))
        .collect::<Result<Vec<_>>>()?;
    let mut anps = AnpTable::default();
    for n in NOUNS {
        for a in POSITIVE {
            anps.insert(n, Sentiment::Positive, a);
        }
        for a in NEGATIVE {
            anps.insert(n, Sentiment::Negative, a);
        }
    }
    Ok((synonyms, nouns, anps))
}

/// 64 images, one per (template, attribute) pair. Each image has an object
/// region carrying the attribute and an attribute-free context region; its
/// single caption is `a ATTRIBUTE NOUN PREP the PLACE`.
pub fn attribute_toy<R: Rng + ?Sized>(rng: &mut R) -> Result<ToyCorpus> {
    let gen = generator(rng)?;
    let mut scenes = Vec::new();
    let mut captions = Vec::new();
    let mut factual = Vec::new();
    for (t, noun) in NOUNS.iter().enumerate() {
        for (a, (adj, _)) in ATTRIBUTES.iter().enumerate() {
            let id = format!("toy-{t}-{a}");
            let object = gen.region(t as u32 + 1, Some(a as u32 + 201), rng)?;
            let context = gen.region(t as u32 + 101, None, rng)?;
            scenes.push(RegionFeatureSet {
                image_id: id.clone(),
                regions: vec![object, context],
            });
            let (prep, place) = PLACES[t];
            factual.push(Caption::new(id.clone(), &format!("a {noun} {prep} the {place}")));
            captions.push(Caption::new(id, &format!("a {adj} {noun} {prep} the {place}")));
        }
    }
    let (sentiment, polarity) = lexicons(&[])?;
    let (synonyms, nouns, anps) = shared_tables()?;
    Ok(ToyCorpus {
        scenes,
        captions,
        factual,
        attributes: attributes(),
        categories: categories(),
        sentiment,
        polarity,
        synonyms,
        nouns,
        anps,
    })
}

/// 32 images (8 objects x 4 places), each with a positive and a negative
/// caption. The adjective pair is fixed by the place, so the image decides
/// the word and the sentiment label decides its polarity.
pub fn sentiment_toy<R: Rng + ?Sized>(rng: &mut R) -> Result<ToyCorpus> {
    let gen = generator(rng)?;
    let mut scenes = Vec::new();
    let mut captions = Vec::new();
    for (t, noun) in NOUNS.iter().enumerate() {
        for p in 0..4 {
            let id = format!("senti-{t}-{p}");
            let object = gen.region(t as u32 + 1, None, rng)?;
            let context = gen.region(p as u32 + 101, None, rng)?;
            scenes.push(RegionFeatureSet {
                image_id: id.clone(),
                regions: vec![object, context],
            });
            let (prep, place) = PLACES[p];
            for (adj, s) in [(POSITIVE[p], Sentiment::Positive), (NEGATIVE[p], Sentiment::Negative)] {
                captions.push(Caption::new(id.clone(), &format!("a {adj} {noun} {prep} the {place}")).with_sentiment(s));
            }
        }
    }
    let (sentiment, polarity) = lexicons(&[])?;
    let (synonyms, nouns, anps) = shared_tables()?;
    Ok(ToyCorpus {
        scenes,
        captions,
        factual: Vec::new(),
        attributes: attributes(),
        categories: categories(),
        sentiment,
        polarity,
        synonyms,
        nouns,
        anps,
    })
}
