//! The attention CVAE: an attention LSTM feeding an encoder LSTM (posterior
//! over `z_t`) and a decoder LSTM (next word), all in `f64` with hand-written
//! backward passes.

mod checkpoint;
mod config;
mod generate;
mod lstm;
mod network;
mod params;
mod train;

pub use checkpoint::{round_to_f32, Checkpoint};
pub use config::{ModelConfig, PriorKind, TrainConfig};
pub use generate::{generate, generate_ids, is_banned, GenerationConfig, GenerationMode, Generated};
pub use network::{attend, forward_teacher_forced, generation_step, DecoderState, Example, GenerationStep, ImageContext, Prior, StepTrace};
pub use params::ModelParameters;
pub use train::{cluster_of, elbo_loss, evaluate, gradients, sgd_momentum_step, train, write_loss_trace, BatchLoss, Evaluation, LossRecord, TrainItem, TrainOutput, TrainState, TrainingSet};

#[cfg(test)]
mod tests;
