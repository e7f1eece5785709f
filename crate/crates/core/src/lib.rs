//! Stylized, attribute-grounded image captioning at desk scale.
//!
//! The crate is split along the pipeline:
//!
//! * [`corpus`]: tokenization, lexicons and the two adjective-insertion
//!   augmentations that turn factual captions into stylized ones.
//! * [`features`]: region/attribute detections, the attribute-extended
//!   detection loss and a synthetic scene generator.
//! * [`latent`]: structured Gaussian priors (attribute and sentiment
//!   clusters), attention-weighted prior means and the Gaussian KL.
//! * [`model`]: the three-LSTM attention CVAE with hand-written
//!   reverse-mode gradients, SGD training and prior-driven generation.
//! * [`decode`]: constrained beam search over a constraint automaton.
//! * [`metrics`]: BLEU, ROUGE-L, CIDEr, Div-n, SEN%, SP/SR and oracle
//!   selection.

pub mod corpus;
pub mod decode;
mod error;
pub mod features;
pub mod latent;
pub mod metrics;
pub mod model;
pub mod rng;
pub mod toy;

pub use error::{Error, Result};
