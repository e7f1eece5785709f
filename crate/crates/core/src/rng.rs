//! Seeded random streams.
//!
//! Every stage draws from its own ChaCha stream derived from a single root
//! seed, so re-running one stage never perturbs the randomness of another.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

/// Named sub-streams of the root seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stream {
    Augment,
    Init,
    Train,
    Generate,
    Features,
    Eval,
}

impl Stream {
    fn id(self) -> u64 {
        match self {
            Stream::Augment => 1,
            Stream::Init => 2,
            Stream::Train => 3,
            Stream::Generate => 4,
            Stream::Features => 5,
            Stream::Eval => 6,
        }
    }
}

/// Rng for `stream` under `seed`.
pub fn stream(seed: u64, stream: Stream) -> Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream.id());
    rng
}

/// Plain seeded rng, stream 0.
pub fn seeded(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Derive an independent child rng, e.g. one per image or per sample.
pub fn child(seed: u64, stream_kind: Stream, index: u64) -> Rng {
    // splitmix64 of (seed, index) keeps children decorrelated
    let mut x = seed ^ index.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^= x >> 31;
    stream(x, stream_kind)
}
