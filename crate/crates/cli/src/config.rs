//! Experiment configuration: a TOML document with one section per pipeline
//! stage. Every field has a default, so an empty document is a complete
//! runnable configuration; unknown keys are rejected with the line that
//! contains them.

use std::path::Path;

use fuselab_core::anomaly::Kernel;
use fuselab_core::autoencoder::{MlpSpec, ModelSpec, TrainConfig};
use fuselab_core::fusion::AttentionSettings;
use fuselab_core::synthdata::{FaultKind, FaultSpec, MultimodalDataset, SyntheticSpec};
use serde::{Deserialize, Serialize};

/// Raised for unparseable or semantically invalid configuration; the CLI
/// maps it to exit code 2.
#[derive(Debug)]
pub struct ConfigError(pub String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "config error: {}", self.0)
    }
}

impl std::error::Error for ConfigError {}

type ConfigResult<T> = std::result::Result<T, ConfigError>;

fn invalid(msg: impl Into<String>) -> ConfigError {
    ConfigError(msg.into())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub dataset: DatasetSection,
    pub model: ModelSection,
    pub training: TrainingSection,
    pub estimation: EstimationSection,
    pub ablation: AblationSection,
    pub detection: DetectionSection,
}

/// Synthetic data generation; mirrors the generator's parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DatasetSection {
    /// Raw timesteps before windowing (default 100).
    pub n_samples: usize,
    /// Dimension of the shared latent driver (default 4).
    pub shared_latent_dim: usize,
    /// Per-modality observation dims; entry 0 is per-timestep (default [3, 64]).
    pub modality_dims: Vec<usize>,
    /// Observation noise std (default 0.05).
    pub noise_std: f64,
    /// Sliding window length (default 20).
    pub window_length: usize,
    /// Sliding window step (default 1).
    pub window_step: usize,
    /// Generator seed (default 7).
    pub seed: u64,
}

impl Default for DatasetSection {
    fn default() -> Self {
        let s = SyntheticSpec::default();
        DatasetSection {
            n_samples: s.n_samples,
            shared_latent_dim: s.shared_latent_dim,
            modality_dims: s.modality_dims,
            noise_std: s.noise_std,
            window_length: s.window_length,
            window_step: s.window_step,
            seed: s.seed,
        }
    }
}

/// Model architecture shared by all fusion kinds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelSection {
    /// Encoder output width, common to all modalities (default 3).
    pub latent_dim: usize,
    /// Hidden layer widths applied to every encoder (default [32]).
    pub hidden_widths: Vec<usize>,
    /// Fusion strategies trained by the train command
    /// (default ["sum", "concat", "attention"]).
    pub fusion_kinds: Vec<String>,
    pub attention: AttentionSection,
}

impl Default for ModelSection {
    fn default() -> Self {
        ModelSection {
            latent_dim: 3,
            hidden_widths: vec![32],
            fusion_kinds: vec!["sum".into(), "concat".into(), "attention".into()],
            attention: AttentionSection::default(),
        }
    }
}

/// Attention stabilization flags. The regularization weight lives in
/// `[training]` so one value governs both the loss term and its gradient.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AttentionSection {
    /// Chained square projections per modality, 1 or 2 (default 2).
    pub layers: usize,
    /// Normalize encoder outputs to unit norm before attention (default true).
    pub unit_norm_inputs: bool,
    /// Divide projections by their largest singular value (default true).
    pub spectral_normalize: bool,
    /// Scale attention coefficients by 1/sqrt(latent_dim) (default true).
    pub scale_by_sqrt_d: bool,
    /// Added to norms before dividing under unit normalization (default 1e-12).
    pub norm_epsilon: f64,
}

impl Default for AttentionSection {
    fn default() -> Self {
        let s = AttentionSettings::default();
        AttentionSection {
            layers: s.layers,
            unit_norm_inputs: s.unit_norm_inputs,
            spectral_normalize: s.spectral_normalize,
            scale_by_sqrt_d: s.scale_by_sqrt_d,
            norm_epsilon: s.norm_epsilon,
        }
    }
}

/// Optimization protocol; one trial is one seeded training run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainingSection {
    /// Training epochs (default 200).
    pub epochs: usize,
    /// Minibatch size (default 64).
    pub batch_size: usize,
    /// Adam learning rate (default 0.001).
    pub learning_rate: f64,
    /// Squared-Frobenius penalty weight on attention projections (default 1e-5).
    pub lambda_reg: f64,
    /// Base seed; trial seeds derive from it (default 1).
    pub seed: u64,
    /// Independent trials per fusion kind (default 5).
    pub trials: usize,
    /// Epoch interval between Lipschitz measurements (default 25).
    pub lipschitz_every: usize,
    /// Data pairs per Lipschitz measurement (default 200).
    pub lipschitz_pairs: usize,
}

impl Default for TrainingSection {
    fn default() -> Self {
        let c = TrainConfig::default();
        TrainingSection {
            epochs: c.epochs,
            batch_size: c.batch_size,
            learning_rate: c.learning_rate,
            lambda_reg: c.lambda_reg,
            seed: c.seed,
            trials: c.trials,
            lipschitz_every: c.lipschitz_every,
            lipschitz_pairs: c.lipschitz_pairs,
        }
    }
}

/// Sampling-based Lipschitz estimation over a box domain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EstimationSection {
    /// Sampled pairs per estimate (default 10000).
    pub n_samples: usize,
    /// Pairs closer than this are skipped (default 1e-9).
    pub epsilon: f64,
    /// Box lower bound, every coordinate (default -1.0).
    pub domain_low: f64,
    /// Box upper bound, every coordinate (default 1.0).
    pub domain_high: f64,
    /// Sampling seed (default 5).
    pub seed: u64,
}

impl Default for EstimationSection {
    fn default() -> Self {
        EstimationSection {
            n_samples: 10_000,
            epsilon: fuselab_core::estimator::DEFAULT_EPSILON,
            domain_low: -1.0,
            domain_high: 1.0,
            seed: 5,
        }
    }
}

/// Regularization sweep for the ablate command.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AblationSection {
    /// Attention regularization weights to sweep
    /// (default [1e-9, 1e-7, 1e-5, 1e-3, 1e-1]).
    pub lambda_grid: Vec<f64>,
}

impl Default for AblationSection {
    fn default() -> Self {
        AblationSection { lambda_grid: vec![1e-9, 1e-7, 1e-5, 1e-3, 1e-1] }
    }
}

/// Fault injection and latent-space detection.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DetectionSection {
    /// "linear", "rbf-median" (bandwidth from the median heuristic), or
    /// "rbf" (explicit gamma). Default "linear": large faults push latents
    /// far outside the calibration support, where RBF scores saturate to a
    /// constant and stop separating.
    pub kernel: String,
    /// Bandwidth for kernel = "rbf"; rejected otherwise (default unset).
    pub gamma: Option<f64>,
    /// Principal components retained (default 3, the default fused latent
    /// width; raise it together with model.latent_dim or for RBF kernels).
    pub k_components: usize,
    /// Fresh clean windows used to fit the detector (default 400).
    pub calibration_samples: usize,
    /// Fresh windows scored against the detector (default 400).
    pub evaluation_samples: usize,
    /// Keep every stride-th generated window so calibration and evaluation
    /// samples are decorrelated despite the slow latent walk; the 95th
    /// percentile threshold then transfers to held-out data (default 150).
    pub sample_stride: usize,
    /// Fraction of evaluation windows perturbed (default 0.5).
    pub fault_fraction: f64,
    /// "bias", "additive-noise", or "channel-dropout" (default "bias").
    pub fault_kind: String,
    /// Additive shift / noise std / drop probability (default 5.0).
    pub fault_magnitude: f64,
    /// Modalities the fault touches; empty means all (default []).
    pub affected_modalities: Vec<usize>,
    /// Seed for fresh data and fault placement (default 11).
    pub seed: u64,
}

impl Default for DetectionSection {
    fn default() -> Self {
        DetectionSection {
            kernel: "linear".into(),
            gamma: None,
            k_components: 3,
            calibration_samples: 400,
            evaluation_samples: 400,
            sample_stride: 150,
            fault_fraction: 0.5,
            fault_kind: "bias".into(),
            fault_magnitude: 5.0,
            affected_modalities: Vec::new(),
            seed: 11,
        }
    }
}

impl ExperimentConfig {
    /// Parses the file (or returns all defaults when `path` is None) and
    /// validates the result.
    pub fn load(path: Option<&Path>) -> ConfigResult<Self> {
        let config = match path {
            None => ExperimentConfig::default(),
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .map_err(|e| invalid(format!("cannot read {}: {e}", p.display())))?;
                toml::from_str(&text)
                    .map_err(|e| invalid(format!("{}: {e}", p.display())))?
            }
        };
        config.validate()?;
        Ok(config)
    }

    /// Replaces every section seed; used by --seed-override.
    pub fn override_seeds(&mut self, seed: u64) {
        self.dataset.seed = seed;
        self.training.seed = seed;
        self.estimation.seed = seed;
        self.detection.seed = seed;
    }

    pub fn validate(&self) -> ConfigResult<()> {
        self.synthetic_spec().validate().map_err(|e| invalid(format!("[dataset] {e}")))?;
        self.train_config().validate().map_err(|e| invalid(format!("[training] {e}")))?;

        let m = &self.model;
        if m.latent_dim == 0 {
            return Err(invalid("[model] latent_dim must be >= 1"));
        }
        if m.hidden_widths.iter().any(|&w| w == 0) {
            return Err(invalid("[model] hidden widths must be >= 1"));
        }
        if m.fusion_kinds.is_empty() {
            return Err(invalid("[model] fusion_kinds must name at least one strategy"));
        }
        let known = fuselab_core::fusion::FusionRegistry::builtin().names();
        for kind in &m.fusion_kinds {
            if !known.contains(&kind.as_str()) {
                return Err(invalid(format!(
                    "[model] unknown fusion kind {kind:?}; known: {}",
                    known.join(", ")
                )));
            }
        }
        if !(m.attention.layers == 1 || m.attention.layers == 2) {
            return Err(invalid("[model.attention] layers must be 1 or 2"));
        }

        let e = &self.estimation;
        if e.n_samples == 0 {
            return Err(invalid("[estimation] n_samples must be >= 1"));
        }
        if !(e.epsilon.is_finite() && e.epsilon > 0.0) {
            return Err(invalid("[estimation] epsilon must be finite and > 0"));
        }
        if !(e.domain_low.is_finite() && e.domain_high.is_finite() && e.domain_low < e.domain_high)
        {
            return Err(invalid("[estimation] domain bounds must be finite with low < high"));
        }

        let a = &self.ablation;
        if a.lambda_grid.is_empty() {
            return Err(invalid("[ablation] lambda_grid must be non-empty"));
        }
        if a.lambda_grid.iter().any(|l| !(l.is_finite() && *l >= 0.0)) {
            return Err(invalid("[ablation] lambda values must be finite and >= 0"));
        }

        let d = &self.detection;
        self.kernel_template()?;
        if d.k_components == 0 {
            return Err(invalid("[detection] k_components must be >= 1"));
        }
        if d.calibration_samples < d.k_components + 1 {
            return Err(invalid(format!(
                "[detection] calibration_samples must exceed k_components, got {} <= {}",
                d.calibration_samples, d.k_components
            )));
        }
        if d.evaluation_samples == 0 {
            return Err(invalid("[detection] evaluation_samples must be >= 1"));
        }
        if d.sample_stride == 0 {
            return Err(invalid("[detection] sample_stride must be >= 1"));
        }
        if !(0.0..=1.0).contains(&d.fault_fraction) {
            return Err(invalid("[detection] fault_fraction must lie in [0, 1]"));
        }
        self.fault_kind()?;
        if !d.fault_magnitude.is_finite() {
            return Err(invalid("[detection] fault_magnitude must be finite"));
        }
        let n_modalities = self.dataset.modality_dims.len();
        if let Some(&bad) = d.affected_modalities.iter().find(|&&i| i >= n_modalities) {
            return Err(invalid(format!(
                "[detection] affected modality {bad} out of range for {n_modalities} modalities"
            )));
        }
        Ok(())
    }

    pub fn synthetic_spec(&self) -> SyntheticSpec {
        let d = &self.dataset;
        SyntheticSpec {
            n_samples: d.n_samples,
            shared_latent_dim: d.shared_latent_dim,
            modality_dims: d.modality_dims.clone(),
            noise_std: d.noise_std,
            window_length: d.window_length,
            window_step: d.window_step,
            seed: d.seed,
        }
    }

    pub fn train_config(&self) -> TrainConfig {
        let t = &self.training;
        TrainConfig {
            epochs: t.epochs,
            batch_size: t.batch_size,
            learning_rate: t.learning_rate,
            lambda_reg: t.lambda_reg,
            seed: t.seed,
            trials: t.trials,
            lipschitz_every: t.lipschitz_every,
            lipschitz_pairs: t.lipschitz_pairs,
        }
    }

    pub fn attention_settings(&self) -> AttentionSettings {
        let a = &self.model.attention;
        AttentionSettings {
            layers: a.layers,
            unit_norm_inputs: a.unit_norm_inputs,
            spectral_normalize: a.spectral_normalize,
            scale_by_sqrt_d: a.scale_by_sqrt_d,
            lambda_reg: self.training.lambda_reg,
            norm_epsilon: a.norm_epsilon,
        }
    }

    /// Encoder stack per modality: [input, hidden..., latent] relu layers.
    pub fn model_spec(&self, dataset: &MultimodalDataset) -> anyhow::Result<ModelSpec> {
        let encoders = dataset
            .feature_dims()
            .iter()
            .map(|&d| {
                let mut widths = Vec::with_capacity(self.model.hidden_widths.len() + 2);
                widths.push(d);
                widths.extend_from_slice(&self.model.hidden_widths);
                widths.push(self.model.latent_dim);
                Ok(MlpSpec::relu_stack(widths)?)
            })
            .collect::<anyhow::Result<Vec<_>>>()?;
        Ok(ModelSpec { encoders, attention: self.attention_settings() })
    }

    fn kernel_template(&self) -> ConfigResult<()> {
        let d = &self.detection;
        match d.kernel.as_str() {
            "rbf" => match d.gamma {
                Some(g) if g.is_finite() && g > 0.0 => Ok(()),
                Some(g) => Err(invalid(format!(
                    "[detection] gamma must be finite and > 0, got {g}"
                ))),
                None => Err(invalid("[detection] kernel \"rbf\" requires gamma")),
            },
            "rbf-median" | "linear" => {
                if d.gamma.is_some() {
                    Err(invalid(format!(
                        "[detection] gamma only applies to kernel \"rbf\", not {:?}",
                        d.kernel
                    )))
                } else {
                    Ok(())
                }
            }
            other => Err(invalid(format!(
                "[detection] unknown kernel {other:?}; known: rbf-median, rbf, linear"
            ))),
        }
    }

    /// Resolves the configured kernel, running the median heuristic on
    /// `calibration_latents` when requested.
    pub fn kernel(
        &self,
        calibration_latents: &[fuselab_core::linalg::Vector],
    ) -> anyhow::Result<Kernel> {
        match self.detection.kernel.as_str() {
            "linear" => Ok(Kernel::Linear),
            "rbf" => Ok(Kernel::Rbf {
                gamma: self.detection.gamma.expect("validated: rbf requires gamma"),
            }),
            "rbf-median" => Ok(Kernel::rbf_median_heuristic(calibration_latents)?),
            other => anyhow::bail!("unknown kernel {other:?}"),
        }
    }

    pub fn fault_kind(&self) -> ConfigResult<FaultKind> {
        match self.detection.fault_kind.as_str() {
            "bias" => Ok(FaultKind::Bias),
            "additive-noise" => Ok(FaultKind::AdditiveNoise),
            "channel-dropout" => Ok(FaultKind::ChannelDropout),
            other => Err(invalid(format!(
                "[detection] unknown fault kind {other:?}; known: bias, additive-noise, channel-dropout"
            ))),
        }
    }

    /// Fault specification with empty `affected_modalities` expanded to all.
    pub fn fault_spec(&self, n_modalities: usize) -> anyhow::Result<FaultSpec> {
        let d = &self.detection;
        let affected = if d.affected_modalities.is_empty() {
            (0..n_modalities).collect()
        } else {
            d.affected_modalities.clone()
        };
        Ok(FaultSpec {
            fraction: d.fault_fraction,
            kind: self.fault_kind().map_err(|e| anyhow::anyhow!("{e}"))?,
            magnitude: d.fault_magnitude,
            affected_modalities: affected,
            seed: fuselab_core::rng::derive_seed(d.seed, "fault", 0),
        })
    }

    /// Serializes the fully resolved configuration; parsing it back yields
    /// an identical config.
    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_document_is_the_default_config() {
        let parsed: ExperimentConfig = toml::from_str("").unwrap();
        assert_eq!(parsed, ExperimentConfig::default());
        parsed.validate().unwrap();
    }

    #[test]
    fn effective_config_round_trips() {
        let config = ExperimentConfig::default();
        let text = config.to_toml();
        let reparsed: ExperimentConfig = toml::from_str(&text).unwrap();
        assert_eq!(reparsed, config);
    }

    #[test]
    fn unknown_keys_are_rejected_with_location() {
        let text = "[training]\nepochs = 5\nlerning_rate = 0.1\n";
        let err = toml::from_str::<ExperimentConfig>(text).unwrap_err().to_string();
        assert!(err.contains("lerning_rate"), "{err}");
        assert!(err.contains("line 3"), "{err}");
    }

    #[test]
    fn section_overrides_apply_on_top_of_defaults() {
        let text = "[dataset]\nseed = 99\n\n[ablation]\nlambda_grid = [0.5]\n";
        let parsed: ExperimentConfig = toml::from_str(text).unwrap();
        assert_eq!(parsed.dataset.seed, 99);
        assert_eq!(parsed.dataset.n_samples, 100);
        assert_eq!(parsed.ablation.lambda_grid, vec![0.5]);
        assert_eq!(parsed.training.epochs, 200);
        parsed.validate().unwrap();
    }

    #[test]
    fn semantic_validation_errors_name_the_section() {
        let mut config = ExperimentConfig::default();
        config.model.fusion_kinds = vec!["ring".into()];
        let err = config.validate().unwrap_err().to_string();
        assert!(err.contains("[model]") && err.contains("ring"), "{err}");

        let mut config = ExperimentConfig::default();
        config.detection.kernel = "rbf".into();
        let err = config.validate().unwrap_err().to_string();
        assert!(err.contains("requires gamma"), "{err}");

        let mut config = ExperimentConfig::default();
        config.detection.gamma = Some(0.3);
        let err = config.validate().unwrap_err().to_string();
        assert!(err.contains("only applies"), "{err}");

        let mut config = ExperimentConfig::default();
        config.ablation.lambda_grid.clear();
        assert!(config.validate().is_err());
    }

    #[test]
    fn lambda_from_training_reaches_attention_settings() {
        let text = "[training]\nlambda_reg = 0.25\n";
        let parsed: ExperimentConfig = toml::from_str(text).unwrap();
        assert_eq!(parsed.attention_settings().lambda_reg, 0.25);
    }

    #[test]
    fn seed_override_touches_every_section() {
        let mut config = ExperimentConfig::default();
        config.override_seeds(1234);
        assert_eq!(config.dataset.seed, 1234);
        assert_eq!(config.training.seed, 1234);
        assert_eq!(config.estimation.seed, 1234);
        assert_eq!(config.detection.seed, 1234);
    }

    #[test]
    fn model_spec_matches_dataset_dims() {
        let config = ExperimentConfig::default();
        let dataset =
            fuselab_core::synthdata::generate(&config.synthetic_spec()).unwrap();
        let spec = config.model_spec(&dataset).unwrap();
        assert_eq!(spec.encoders.len(), 2);
        assert_eq!(spec.encoders[0].input_dim(), 60);
        assert_eq!(spec.encoders[1].input_dim(), 64);
        assert_eq!(spec.latent_dim().unwrap(), 3);
    }
}
