//! Seeded training loop with per-epoch loss logging and periodic
//! per-submodel Lipschitz estimation.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::adam::{adam_step, AdamState};
use super::{ModelSpec, MultimodalAutoencoder};
use crate::error::{Error, Result};
use crate::estimator::{estimate_model_lipschitz, LipschitzEstimate, DEFAULT_EPSILON};
use crate::fusion::FusionRegistry;
use crate::linalg::Vector;
use crate::rng::{derive_seed, seeded_rng};
use crate::synthdata::{MultimodalDataset, Split};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    /// Attention regularization weight applied to the model under
    /// training; ignored by parameter-free fusion kinds.
    pub lambda_reg: f64,
    pub seed: u64,
    /// Number of independent trials an experiment driver should run; the
    /// loop itself trains one trial per call.
    pub trials: usize,
    /// Epoch stride of the Lipschitz estimation hook.
    pub lipschitz_every: usize,
    /// Sample pairs per Lipschitz estimate.
    pub lipschitz_pairs: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 200,
            batch_size: 64,
            learning_rate: 1e-3,
            lambda_reg: 1e-5,
            seed: 1,
            trials: 5,
            lipschitz_every: 25,
            lipschitz_pairs: 200,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0
            || self.trials == 0
            || self.lipschitz_every == 0
            || self.lipschitz_pairs == 0
        {
            return Err(Error::invalid(
                "batch size, trials, lipschitz stride and pairs must be >= 1",
            ));
        }
        if !self.learning_rate.is_finite() || self.learning_rate <= 0.0 {
            return Err(Error::invalid(format!(
                "learning rate must be > 0, got {}",
                self.learning_rate
            )));
        }
        if !self.lambda_reg.is_finite() || self.lambda_reg < 0.0 {
            return Err(Error::invalid(format!(
                "lambda must be finite and >= 0, got {}",
                self.lambda_reg
            )));
        }
        Ok(())
    }
}

/// Per-submodel gradient-Lipschitz estimates at one epoch; `overall` is the
/// maximum across submodels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LipschitzSnapshot {
    pub encoders: Vec<LipschitzEstimate>,
    pub decoders: Vec<LipschitzEstimate>,
    pub overall: f64,
}

/// Losses (per-sample means) and optional Lipschitz estimates for one
/// epoch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: Vec<f64>,
    pub test_loss: Vec<f64>,
    pub combined_train_loss: f64,
    pub combined_test_loss: f64,
    pub lipschitz: Option<LipschitzSnapshot>,
}

/// Outcome of one training run: the per-epoch records, a divergence flag
/// (set when optimization hit non-finite values and stopped early), and the
/// model in its final state.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainLog {
    pub records: Vec<EpochRecord>,
    pub diverged: bool,
    pub model: MultimodalAutoencoder,
}

impl TrainLog {
    pub fn final_record(&self) -> Option<&EpochRecord> {
        self.records.last()
    }

    /// The most recent overall Lipschitz figure in the log.
    pub fn final_lipschitz(&self) -> Option<f64> {
        self.records.iter().rev().find_map(|r| r.lipschitz.as_ref()).map(|l| l.overall)
    }
}

fn mean_modality_losses(
    model: &MultimodalAutoencoder,
    samples: &[Vec<Vector>],
) -> Result<(Vec<f64>, f64)> {
    let n = samples.len() as f64;
    let mut per_modality = vec![0.0; model.n_modalities()];
    for sample in samples {
        for (acc, loss) in per_modality.iter_mut().zip(model.modality_losses(sample)?) {
            *acc += loss;
        }
    }
    for acc in per_modality.iter_mut() {
        *acc /= n;
    }
    let mut combined = per_modality.iter().sum::<f64>();
    if let Some(params) = model.fusion().attention() {
        combined += crate::fusion::attention_reg_term(params);
    }
    Ok((per_modality, combined))
}

/// One estimate over data pairs; a domain that collapses (all pairs within
/// epsilon) reports zero, since the map shows no variation on the data.
fn estimate_or_zero(
    map: impl Fn(&Vector) -> Vector + Sync,
    data: &[Vector],
    pairs: usize,
    seed: u64,
) -> Result<LipschitzEstimate> {
    match estimate_model_lipschitz(map, data, pairs, DEFAULT_EPSILON, seed) {
        Ok(est) => Ok(est),
        Err(Error::DegenerateDomain(_)) => {
            Ok(LipschitzEstimate { value: 0.0, pairs_evaluated: 0, pairs_skipped: pairs, seed })
        }
        Err(e) => Err(e),
    }
}

fn lipschitz_snapshot(
    model: &MultimodalAutoencoder,
    train_samples: &[Vec<Vector>],
    config: &TrainConfig,
    epoch: usize,
) -> Result<LipschitzSnapshot> {
    let pairs = config.lipschitz_pairs;
    let mut encoders = Vec::with_capacity(model.n_modalities());
    for (i, enc) in model.encoders().iter().enumerate() {
        let data: Vec<Vector> = train_samples.iter().map(|s| s[i].clone()).collect();
        let seed = derive_seed(config.seed, "lipschitz-encoder", (epoch as u64) << 8 | i as u64);
        let est = estimate_or_zero(|x| enc.input_jacobian_flat(x).unwrap(), &data, pairs, seed)?;
        encoders.push(est);
    }
    let fused: Vec<Vector> = train_samples
        .iter()
        .map(|s| model.fused_latent(s))
        .collect::<Result<Vec<_>>>()?;
    let mut decoders = Vec::with_capacity(model.n_modalities());
    for (i, dec) in model.decoders().iter().enumerate() {
        let seed = derive_seed(config.seed, "lipschitz-decoder", (epoch as u64) << 8 | i as u64);
        let est = estimate_or_zero(|x| dec.input_jacobian_flat(x).unwrap(), &fused, pairs, seed)?;
        decoders.push(est);
    }
    let overall = encoders
        .iter()
        .chain(&decoders)
        .map(|e| e.value)
        .fold(0.0, f64::max);
    Ok(LipschitzSnapshot { encoders, decoders, overall })
}

/// Trains one model on the dataset's training split. Deterministic given
/// the config seed; returns a partial log with the divergence flag instead
/// of an error when optimization produces non-finite values.
pub fn train(
    spec: &ModelSpec,
    fusion_name: &str,
    registry: &FusionRegistry,
    dataset: &MultimodalDataset,
    config: &TrainConfig,
) -> Result<TrainLog> {
    config.validate()?;
    let feature_dims = dataset.feature_dims();
    if spec.encoders.len() != feature_dims.len() {
        return Err(Error::shape(format!(
            "{} encoders for {} modalities",
            spec.encoders.len(),
            feature_dims.len()
        )));
    }
    for (i, enc) in spec.encoders.iter().enumerate() {
        if enc.input_dim() != feature_dims[i] {
            return Err(Error::shape(format!(
                "encoder {i} expects dim {} but modality {i} has dim {}",
                enc.input_dim(),
                feature_dims[i]
            )));
        }
    }

    let mut model = spec.build(fusion_name, registry, config.seed)?;
    if let Some(params) = model.fusion_mut().attention_mut() {
        params.set_lambda_reg(config.lambda_reg)?;
    }

    let train_samples = dataset.split_samples(Split::Train);
    let test_samples = dataset.split_samples(Split::Test);
    if train_samples.is_empty() {
        return Err(Error::invalid("dataset has no training samples"));
    }
    if test_samples.is_empty() {
        return Err(Error::invalid("dataset has no test samples"));
    }

    let mut params = model.params_flat();
    let mut adam = AdamState::new(params.len());
    let mut records: Vec<EpochRecord> = Vec::with_capacity(config.epochs);

    for epoch in 1..=config.epochs {
        let mut order: Vec<usize> = (0..train_samples.len()).collect();
        order.shuffle(&mut seeded_rng(derive_seed(config.seed, "shuffle", epoch as u64)));

        let mut diverged = false;
        'batches: for batch in order.chunks(config.batch_size) {
            let mut grads = vec![0.0; params.len()];
            let inv = 1.0 / batch.len() as f64;
            for &s in batch {
                match model.backward(&train_samples[s]) {
                    Ok(g) => {
                        for (acc, v) in grads.iter_mut().zip(g.flat()) {
                            *acc += inv * v;
                        }
                    }
                    Err(Error::TrainingDiverged(_)) => {
                        diverged = true;
                        break 'batches;
                    }
                    Err(e) => return Err(e),
                }
            }
            match adam_step(&mut params, &grads, &mut adam, config.learning_rate) {
                Ok(()) => {}
                Err(Error::TrainingDiverged(_)) => {
                    diverged = true;
                    break 'batches;
                }
                Err(e) => return Err(e),
            }
            model.set_params_flat(&params)?;
        }
        if diverged {
            return Ok(TrainLog { records, diverged: true, model });
        }

        let train_eval = mean_modality_losses(&model, &train_samples);
        let test_eval = mean_modality_losses(&model, &test_samples);
        let ((train_loss, combined_train), (test_loss, combined_test)) =
            match (train_eval, test_eval) {
                (Ok(a), Ok(b)) => (a, b),
                (Err(Error::TrainingDiverged(_)), _) | (_, Err(Error::TrainingDiverged(_))) => {
                    return Ok(TrainLog { records, diverged: true, model });
                }
                (Err(e), _) | (_, Err(e)) => return Err(e),
            };

        let lipschitz = if epoch % config.lipschitz_every == 0 || epoch == config.epochs {
            Some(lipschitz_snapshot(&model, &train_samples, config, epoch)?)
        } else {
            None
        };
        records.push(EpochRecord {
            epoch,
            train_loss,
            test_loss,
            combined_train_loss: combined_train,
            combined_test_loss: combined_test,
            lipschitz,
        });
    }

    Ok(TrainLog { records, diverged: false, model })
}
