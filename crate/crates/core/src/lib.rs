//! Two-dimensional local sparse attention.
//!
//! * [`patterns`]: two-step sparse mask factorizations (Fixed, LTR, RTL,
//!   Strided, StridedFull), non-square expansion and head assignment.
//! * [`grid`]: row-major and Manhattan grid enumerations and re-indexing of
//!   one-dimensional masks onto an image grid.
//! * [`ifg`]: information flow graphs, full-information checks and
//!   unit-capacity pair flows.
//! * [`attention`]: reference masked multi-head attention with gradients.
//! * [`inversion`]: saliency maps, weighted embedding losses and a Lookahead
//!   inversion driver.
//!
//! Numerical code is generic over [`Scalar`] (`f32` and `f64`); the `*64`
//! and `*32` aliases below name the concrete instantiations.

pub mod attention;
pub mod error;
pub mod grid;
pub mod ifg;
pub mod inversion;
pub mod mask;
pub mod matrix;
pub mod patterns;
pub mod scalar;

pub use error::{Error, Result};
pub use mask::AttentionMask;
pub use matrix::Matrix;
pub use patterns::{PatternFactorization, PatternKind};
pub use scalar::Scalar;

/// Token representation, `N × E`.
pub type TokenMatrix<T> = Matrix<T>;

pub type Matrix64 = Matrix<f64>;
pub type Matrix32 = Matrix<f32>;
pub type AttentionWeights64 = attention::AttentionWeights<f64>;
pub type AttentionWeights32 = attention::AttentionWeights<f32>;
pub type AttentionOutput64 = attention::AttentionOutput<f64>;
pub type AttentionOutput32 = attention::AttentionOutput<f32>;
pub type SaliencyMap64 = inversion::SaliencyMap<f64>;
pub type SaliencyMap32 = inversion::SaliencyMap<f32>;
pub type Embedding64 = inversion::Embedding<f64>;
pub type Embedding32 = inversion::Embedding<f32>;
