//! Saliency-weighted inversion of a generator.
//!
//! A saliency map is read off an attention map, projected onto the grid of
//! an embedding, and used to weight the squared distance between the
//! embedding of a generated sample and that of a target. The latent is
//! found by Lookahead gradient descent from a truncated normal start.

mod driver;
mod embedding;
mod lookahead;
mod loss;
mod saliency;
mod sampling;

pub use driver::{invert, InversionConfig, InversionProblem, InversionResult, LossSpace};
pub use embedding::{EmbeddingFunction, FiniteDifference, Identity, Linear};
pub use lookahead::Lookahead;
pub use loss::{
    multihead_weighted_loss, weighted_embedding_loss, Embedding, TensorShape, WeightedLoss,
};
pub use saliency::{project_saliency, saliency_from_map, SaliencyMap, SUM_TOLERANCE};
pub use sampling::{seeded_rng, truncated_normal, truncated_normal_with};
