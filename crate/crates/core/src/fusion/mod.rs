//! Fusion strategies for combining per-modality latent vectors.
//!
//! Three interchangeable strategies implement [`FusionStrategy`]:
//!
//! - [`SumFusion`]: elementwise sum of equal-dimension latents;
//! - [`ConcatFusion`]: concatenation;
//! - [`AttentionParams`]: pairwise-averaged bilinear attention, where each
//!   latent is scaled by the average of its bilinear scores against every
//!   other modality before concatenation.
//!
//! Strategies are registered by name in [`FusionRegistry`] and selected at
//! runtime from configuration. [`fuse`] and [`fusion_jacobian`] are the
//! strategy-dispatching entry points.

mod attention;
mod linear;

pub use attention::{
    attention_jacobian, attention_reg_gradient, attention_reg_term, AttentionParams,
    AttentionSettings,
};
pub use linear::{ConcatFusion, SumFusion};

use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::linalg::{Matrix, Vector};

/// Result of fusing per-modality latents.
#[derive(Debug, Clone)]
pub struct FusedOutput {
    /// Fused latent code.
    pub u: Vector,
    /// Attention coefficients `alpha_i`; empty for sum/concat.
    pub coefficients: Vec<f64>,
    /// Pairwise score matrix (zero diagonal); attention only.
    pub scores: Option<Matrix>,
}

/// Gradients of a scalar loss through a fusion map.
#[derive(Debug, Clone)]
pub struct FusionBackward {
    /// Gradient with respect to each input latent.
    pub latent_grads: Vec<Vector>,
    /// Gradient with respect to each parameter matrix, in the order of
    /// [`AttentionParams::weights_flat`]; empty for parameter-free
    /// strategies.
    pub weight_grads: Vec<Matrix>,
}

/// A fusion algorithm: forward map, analytic Jacobian, and reverse-mode
/// backward pass.
///
/// Modality indices are 0-based throughout. Jacobians are returned in
/// gradient layout: the block for output i is the transpose of the
/// numerator-layout Jacobian of that block (see [`attention_jacobian`]).
pub trait FusionStrategy {
    /// Registry name of the strategy.
    fn name(&self) -> &'static str;

    /// Dimension of the fused output for the given per-modality latent
    /// dimensions.
    fn fused_dim(&self, latent_dims: &[usize]) -> Result<usize>;

    /// Forward fusion.
    fn fuse(&self, latents: &[Vector]) -> Result<FusedOutput>;

    /// Derivative of the fused output with respect to latent `k`.
    fn jacobian(&self, latents: &[Vector], k: usize) -> Result<Matrix>;

    /// Propagates `upstream` (gradient w.r.t. the fused output) back to the
    /// latents and to any strategy parameters.
    fn backward(&self, latents: &[Vector], upstream: &Vector) -> Result<FusionBackward>;
}

/// Serializable fusion selector holding the chosen strategy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FusionKind {
    Sum(SumFusion),
    Concat(ConcatFusion),
    Attention(AttentionParams),
}

impl FusionKind {
    pub fn strategy(&self) -> &dyn FusionStrategy {
        match self {
            FusionKind::Sum(s) => s,
            FusionKind::Concat(s) => s,
            FusionKind::Attention(s) => s,
        }
    }

    pub fn name(&self) -> &'static str {
        self.strategy().name()
    }

    pub fn attention(&self) -> Option<&AttentionParams> {
        match self {
            FusionKind::Attention(p) => Some(p),
            _ => None,
        }
    }

    pub fn attention_mut(&mut self) -> Option<&mut AttentionParams> {
        match self {
            FusionKind::Attention(p) => Some(p),
            _ => None,
        }
    }
}

/// Fuses latents under the selected strategy.
pub fn fuse(kind: &FusionKind, latents: &[Vector]) -> Result<FusedOutput> {
    kind.strategy().fuse(latents)
}

/// Derivative of the fused output with respect to latent `k` under the
/// selected strategy.
pub fn fusion_jacobian(kind: &FusionKind, latents: &[Vector], k: usize) -> Result<Matrix> {
    kind.strategy().jacobian(latents, k)
}

pub(crate) fn validate_latents(latents: &[Vector]) -> Result<()> {
    if latents.is_empty() {
        return Err(Error::invalid("fusion requires at least one latent"));
    }
    for (i, v) in latents.iter().enumerate() {
        if v.is_empty() {
            return Err(Error::invalid(format!("latent {i} is empty")));
        }
        if !v.is_finite() {
            return Err(Error::invalid(format!("latent {i} has non-finite entries")));
        }
    }
    Ok(())
}

/// Inputs needed to build a fusion strategy from its registry name.
#[derive(Debug, Clone)]
pub struct FusionBuildSpec {
    pub n_modalities: usize,
    pub latent_dim: usize,
    /// Attention-specific settings; ignored by parameter-free strategies.
    pub attention: AttentionSettings,
    /// Seed for attention weight initialization.
    pub seed: u64,
}

type FusionBuilder = fn(&FusionBuildSpec) -> Result<FusionKind>;

/// Name-to-builder registry for fusion strategies.
pub struct FusionRegistry {
    builders: BTreeMap<&'static str, FusionBuilder>,
}

impl FusionRegistry {
    /// Registry with the built-in strategies: `sum`, `concat`, `attention`.
    pub fn builtin() -> Self {
        let mut reg = FusionRegistry { builders: BTreeMap::new() };
        reg.register("sum", |_spec| Ok(FusionKind::Sum(SumFusion)));
        reg.register("concat", |_spec| Ok(FusionKind::Concat(ConcatFusion)));
        reg.register("attention", |spec| {
            Ok(FusionKind::Attention(AttentionParams::initialized(
                spec.n_modalities,
                spec.latent_dim,
                &spec.attention,
                spec.seed,
            )?))
        });
        reg
    }

    pub fn register(&mut self, name: &'static str, builder: FusionBuilder) {
        self.builders.insert(name, builder);
    }

    /// Builds the named strategy, or lists the known names in the error.
    pub fn build(&self, name: &str, spec: &FusionBuildSpec) -> Result<FusionKind> {
        match self.builders.get(name) {
            Some(b) => b(spec),
            None => Err(Error::invalid(format!(
                "unknown fusion strategy {name:?}; known: {}",
                self.names().join(", ")
            ))),
        }
    }

    pub fn names(&self) -> Vec<&'static str> {
        self.builders.keys().copied().collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn build_spec(n: usize, d: usize) -> FusionBuildSpec {
        FusionBuildSpec {
            n_modalities: n,
            latent_dim: d,
            attention: AttentionSettings::default(),
            seed: 11,
        }
    }

    #[test]
    fn registry_lists_builtins_and_builds_by_name() {
        let reg = FusionRegistry::builtin();
        assert_eq!(reg.names(), vec!["attention", "concat", "sum"]);
        let spec = build_spec(2, 4);
        for name in reg.names() {
            let kind = reg.build(name, &spec).unwrap();
            assert_eq!(kind.name(), name);
        }
    }

    #[test]
    fn registry_rejects_unknown_names_listing_known_ones() {
        let reg = FusionRegistry::builtin();
        let err = reg.build("mean", &build_spec(2, 4)).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("mean") && msg.contains("sum"), "{msg}");
    }

    #[test]
    fn fusion_kind_round_trips_through_serde() {
        let reg = FusionRegistry::builtin();
        let kind = reg.build("attention", &build_spec(2, 3)).unwrap();
        let json = serde_json::to_string(&kind).unwrap();
        let back: FusionKind = serde_json::from_str(&json).unwrap();
        assert_eq!(back.name(), "attention");
        let a = kind.attention().unwrap();
        let b = back.attention().unwrap();
        assert_eq!(a.weights_flat().len(), b.weights_flat().len());
        for (x, y) in a.weights_flat().iter().zip(b.weights_flat()) {
            assert_eq!(x.as_slice(), y.as_slice());
        }
    }
}
