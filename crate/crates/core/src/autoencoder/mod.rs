//! Multimodal autoencoder: per-modality MLP encoders and decoders joined by
//! a fusion strategy, with reverse-mode gradients, Adam training, and
//! Lipschitz tracking hooks.

mod adam;
mod mlp;
mod snapshot;
mod train;

pub use adam::{adam_step, AdamState};
pub use mlp::{Activation, Mlp, MlpCache, MlpGrads, MlpSpec};
pub use snapshot::{
    load_snapshot, read_train_log, save_snapshot, write_train_log, TrainLogFile, SNAPSHOT_VERSION,
};
pub use train::{train, EpochRecord, LipschitzSnapshot, TrainConfig, TrainLog};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fusion::{
    attention_reg_gradient, attention_reg_term, AttentionSettings, FusedOutput, FusionBuildSpec,
    FusionKind, FusionRegistry,
};
use crate::linalg::{Matrix, Vector};
use crate::rng::derive_seed;

/// Architecture description: per-modality encoder specs plus attention
/// settings. Decoders mirror the encoders with the input width replaced by
/// the fused dimension, which depends on the fusion kind.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub encoders: Vec<MlpSpec>,
    pub attention: AttentionSettings,
}

impl ModelSpec {
    pub fn n_modalities(&self) -> usize {
        self.encoders.len()
    }

    /// The common encoder output width; all encoders must agree so every
    /// fusion kind can consume them interchangeably.
    pub fn latent_dim(&self) -> Result<usize> {
        let first = self
            .encoders
            .first()
            .ok_or_else(|| Error::invalid("model spec needs at least one encoder"))?
            .output_dim();
        if self.encoders.iter().any(|e| e.output_dim() != first) {
            return Err(Error::invalid("encoder output widths must all match"));
        }
        Ok(first)
    }

    /// Builds a freshly initialized model with the fusion strategy chosen
    /// by name from the registry.
    pub fn build(
        &self,
        fusion_name: &str,
        registry: &FusionRegistry,
        seed: u64,
    ) -> Result<MultimodalAutoencoder> {
        let latent_dim = self.latent_dim()?;
        for spec in &self.encoders {
            spec.validate()?;
        }
        let fusion = registry.build(
            fusion_name,
            &FusionBuildSpec {
                n_modalities: self.n_modalities(),
                latent_dim,
                attention: self.attention.clone(),
                seed: derive_seed(seed, "fusion", 0),
            },
        )?;
        let dims = vec![latent_dim; self.n_modalities()];
        let fused_dim = fusion.strategy().fused_dim(&dims)?;

        let encoders = self
            .encoders
            .iter()
            .enumerate()
            .map(|(i, spec)| Mlp::initialized(spec, derive_seed(seed, "encoder", i as u64)))
            .collect::<Result<Vec<_>>>()?;
        let decoders = self
            .encoders
            .iter()
            .enumerate()
            .map(|(i, spec)| {
                let mut widths: Vec<usize> = spec.layer_widths.iter().rev().copied().collect();
                widths[0] = fused_dim;
                let dec_spec = MlpSpec::relu_stack(widths)?;
                Mlp::initialized(&dec_spec, derive_seed(seed, "decoder", i as u64))
            })
            .collect::<Result<Vec<_>>>()?;
        MultimodalAutoencoder::new(encoders, fusion, decoders)
    }
}

/// The full model: n encoders, one fusion strategy, n decoders that each
/// reconstruct their modality from the fused latent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultimodalAutoencoder {
    encoders: Vec<Mlp>,
    fusion: FusionKind,
    decoders: Vec<Mlp>,
}

/// Gradients of [`MultimodalAutoencoder::loss`] for every parameter, in the
/// same order as [`MultimodalAutoencoder::params_flat`].
#[derive(Debug, Clone)]
pub struct ModelGradients {
    pub loss: f64,
    pub encoders: Vec<MlpGrads>,
    pub fusion_weights: Vec<Matrix>,
    pub decoders: Vec<MlpGrads>,
}

impl ModelGradients {
    pub fn flat(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for g in &self.encoders {
            g.append_to(&mut out);
        }
        for w in &self.fusion_weights {
            out.extend_from_slice(w.as_slice());
        }
        for g in &self.decoders {
            g.append_to(&mut out);
        }
        out
    }
}

impl MultimodalAutoencoder {
    pub fn new(encoders: Vec<Mlp>, fusion: FusionKind, decoders: Vec<Mlp>) -> Result<Self> {
        let model = Self { encoders, fusion, decoders };
        model.validate()?;
        Ok(model)
    }

    /// Re-checks the wiring invariants of `new`; needed after
    /// deserialization, which bypasses the constructors.
    pub fn validate(&self) -> Result<()> {
        if self.encoders.is_empty() {
            return Err(Error::invalid("model needs at least one modality"));
        }
        if self.decoders.len() != self.encoders.len() {
            return Err(Error::shape(format!(
                "{} encoders but {} decoders",
                self.encoders.len(),
                self.decoders.len()
            )));
        }
        for mlp in self.encoders.iter().chain(&self.decoders) {
            mlp.validate()?;
        }
        let dims: Vec<usize> = self.encoders.iter().map(Mlp::output_dim).collect();
        let fused_dim = self.fusion.strategy().fused_dim(&dims)?;
        for (i, dec) in self.decoders.iter().enumerate() {
            if dec.input_dim() != fused_dim {
                return Err(Error::shape(format!(
                    "decoder {i} input width {} vs fused dim {fused_dim}",
                    dec.input_dim()
                )));
            }
            if dec.output_dim() != self.encoders[i].input_dim() {
                return Err(Error::shape(format!(
                    "decoder {i} output width {} vs modality dim {}",
                    dec.output_dim(),
                    self.encoders[i].input_dim()
                )));
            }
        }
        Ok(())
    }

    pub fn n_modalities(&self) -> usize {
        self.encoders.len()
    }

    pub fn encoders(&self) -> &[Mlp] {
        &self.encoders
    }

    pub fn decoders(&self) -> &[Mlp] {
        &self.decoders
    }

    pub fn fusion(&self) -> &FusionKind {
        &self.fusion
    }

    pub fn fusion_mut(&mut self) -> &mut FusionKind {
        &mut self.fusion
    }

    pub fn modality_dims(&self) -> Vec<usize> {
        self.encoders.iter().map(Mlp::input_dim).collect()
    }

    fn check_inputs(&self, inputs: &[Vector]) -> Result<()> {
        if inputs.len() != self.n_modalities() {
            return Err(Error::shape(format!(
                "{} inputs for {} modalities",
                inputs.len(),
                self.n_modalities()
            )));
        }
        for (i, x) in inputs.iter().enumerate() {
            if x.len() != self.encoders[i].input_dim() {
                return Err(Error::shape(format!(
                    "modality {i} input dim {} vs expected {}",
                    x.len(),
                    self.encoders[i].input_dim()
                )));
            }
        }
        Ok(())
    }

    /// Encodes every modality, fuses, and decodes; returns the fused output
    /// and the per-modality reconstructions.
    pub fn forward(&self, inputs: &[Vector]) -> Result<(FusedOutput, Vec<Vector>)> {
        self.check_inputs(inputs)?;
        let latents = inputs
            .iter()
            .zip(&self.encoders)
            .map(|(x, enc)| enc.forward(x))
            .collect::<Result<Vec<_>>>()?;
        let fused = self.fusion.strategy().fuse(&latents)?;
        let recons = self
            .decoders
            .iter()
            .map(|dec| dec.forward(&fused.u))
            .collect::<Result<Vec<_>>>()?;
        Ok((fused, recons))
    }

    /// Encoder latents for a single sample, in modality order.
    pub fn encode(&self, inputs: &[Vector]) -> Result<Vec<Vector>> {
        self.check_inputs(inputs)?;
        inputs
            .iter()
            .zip(&self.encoders)
            .map(|(x, enc)| enc.forward(x))
            .collect()
    }

    /// The fused latent for a single sample.
    pub fn fused_latent(&self, inputs: &[Vector]) -> Result<Vector> {
        let latents = self.encode(inputs)?;
        Ok(self.fusion.strategy().fuse(&latents)?.u)
    }

    /// Sum of squared reconstruction errors over modalities, plus the
    /// attention regularization term when the fusion carries one.
    pub fn loss(&self, inputs: &[Vector]) -> Result<f64> {
        let (_, recons) = self.forward(inputs)?;
        let mut total = 0.0;
        for (x, y) in inputs.iter().zip(&recons) {
            let r = x.sub(y);
            total += r.dot(&r);
        }
        if let Some(params) = self.fusion.attention() {
            total += attention_reg_term(params);
        }
        if !total.is_finite() {
            return Err(Error::TrainingDiverged(format!("non-finite loss {total}")));
        }
        Ok(total)
    }

    /// Per-modality squared reconstruction errors (no regularization term).
    pub fn modality_losses(&self, inputs: &[Vector]) -> Result<Vec<f64>> {
        let (_, recons) = self.forward(inputs)?;
        Ok(inputs
            .iter()
            .zip(&recons)
            .map(|(x, y)| {
                let r = x.sub(y);
                r.dot(&r)
            })
            .collect())
    }

    /// Exact reverse-mode gradients of [`Self::loss`] for one sample.
    pub fn backward(&self, inputs: &[Vector]) -> Result<ModelGradients> {
        self.check_inputs(inputs)?;
        let enc_caches = inputs
            .iter()
            .zip(&self.encoders)
            .map(|(x, enc)| enc.forward_cached(x))
            .collect::<Result<Vec<_>>>()?;
        let latents: Vec<Vector> = enc_caches.iter().map(|c| c.output().clone()).collect();
        let fused = self.fusion.strategy().fuse(&latents)?;

        let mut loss = 0.0;
        let mut grad_u = Vector::zeros(fused.u.len());
        let mut decoder_grads = Vec::with_capacity(self.decoders.len());
        for (i, dec) in self.decoders.iter().enumerate() {
            let cache = dec.forward_cached(&fused.u)?;
            let residual = inputs[i].sub(cache.output());
            loss += residual.dot(&residual);
            let upstream = residual.scaled(-2.0);
            let (grads, gu) = dec.backward(&cache, &upstream);
            decoder_grads.push(grads);
            grad_u.add_scaled(1.0, &gu);
        }

        let fusion_back = self.fusion.strategy().backward(&latents, &grad_u)?;
        let mut fusion_weights = fusion_back.weight_grads;
        if let Some(params) = self.fusion.attention() {
            loss += attention_reg_term(params);
            for (idx, grad) in fusion_weights.iter_mut().enumerate() {
                let reg = attention_reg_gradient(params, idx)?;
                *grad = grad.add(&reg);
            }
        }

        let encoder_grads = enc_caches
            .iter()
            .zip(&self.encoders)
            .zip(&fusion_back.latent_grads)
            .map(|((cache, enc), upstream)| enc.backward(cache, upstream).0)
            .collect();

        if !loss.is_finite() {
            return Err(Error::TrainingDiverged(format!("non-finite loss {loss}")));
        }
        Ok(ModelGradients { loss, encoders: encoder_grads, fusion_weights, decoders: decoder_grads })
    }

    pub fn param_count(&self) -> usize {
        let fusion_params: usize = self
            .fusion
            .attention()
            .map(|p| p.weights_flat().iter().map(|w| w.rows() * w.cols()).sum())
            .unwrap_or(0);
        self.encoders.iter().map(Mlp::param_count).sum::<usize>()
            + fusion_params
            + self.decoders.iter().map(Mlp::param_count).sum::<usize>()
    }

    /// All parameters as one flat vector: encoders, then attention
    /// projections (when present), then decoders; each layer weight
    /// row-major followed by its bias.
    pub fn params_flat(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.param_count());
        for enc in &self.encoders {
            enc.append_params(&mut out);
        }
        if let Some(params) = self.fusion.attention() {
            for w in params.weights_flat() {
                out.extend_from_slice(w.as_slice());
            }
        }
        for dec in &self.decoders {
            dec.append_params(&mut out);
        }
        out
    }

    /// Writes a flat parameter vector back; must have exactly
    /// [`Self::param_count`] entries.
    pub fn set_params_flat(&mut self, flat: &[f64]) -> Result<()> {
        if flat.len() != self.param_count() {
            return Err(Error::shape(format!(
                "{} flat values for {} parameters",
                flat.len(),
                self.param_count()
            )));
        }
        let mut offset = 0;
        for enc in &mut self.encoders {
            offset += enc.read_params(&flat[offset..])?;
        }
        if let Some(params) = self.fusion.attention_mut() {
            for w in params.weights_flat_mut() {
                let count = w.rows() * w.cols();
                w.as_mut_slice().copy_from_slice(&flat[offset..offset + count]);
                offset += count;
            }
        }
        for dec in &mut self.decoders {
            offset += dec.read_params(&flat[offset..])?;
        }
        debug_assert_eq!(offset, flat.len());
        Ok(())
    }

    /// Frobenius norm of the full flat parameter vector.
    pub fn param_norm(&self) -> f64 {
        self.params_flat().iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Frobenius norm of the attention projections only; zero for
    /// parameter-free fusion kinds.
    pub fn attention_param_norm(&self) -> f64 {
        self.fusion
            .attention()
            .map(|p| {
                p.weights_flat()
                    .iter()
                    .map(|w| w.as_slice().iter().map(|v| v * v).sum::<f64>())
                    .sum::<f64>()
                    .sqrt()
            })
            .unwrap_or(0.0)
    }
}
