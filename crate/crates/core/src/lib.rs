//! Numerical core for studying Lipschitz behavior of multimodal autoencoder
//! fusion.
//!
//! The crate provides:
//!
//! - [`linalg`]: dense vectors/matrices, spectral norms, symmetric
//!   eigendecomposition;
//! - [`fusion`]: interchangeable fusion strategies (sum, concatenation,
//!   pairwise bilinear attention) behind a common trait with a name-based
//!   registry, plus analytic attention Jacobians;
//! - [`bounds`]: closed-form Lipschitz bound calculators for encoders,
//!   decoders, aggregation maps, and the attention map;
//! - [`estimator`]: sampling-based function- and gradient-Lipschitz
//!   estimation;
//! - [`autoencoder`]: small multimodal MLP autoencoders with hand-derived
//!   reverse-mode gradients, Adam, and a training loop that tracks
//!   per-submodel Lipschitz estimates;
//! - [`synthdata`]: deterministic synthetic multimodal datasets with fault
//!   injection;
//! - [`anomaly`]: kernel-PCA projection with Mahalanobis scoring for fault
//!   detection on latent codes.

pub mod anomaly;
pub mod autoencoder;
pub mod bounds;
pub mod error;
pub mod estimator;
pub mod fusion;
pub mod linalg;
pub mod rng;
pub mod synthdata;

pub use error::{Error, Result};
