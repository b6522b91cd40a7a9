//! Synthetic multimodal data with shared-latent structure.
//!
//! A smooth seeded latent walk drives every modality through a fixed random
//! linear map plus observation noise, so the modalities carry genuine
//! mutual information for fusion to exploit. Modality 0 is temporal: its
//! per-timestep observations are gathered into sliding windows and
//! flattened. The remaining modalities are read at each window's last
//! timestep. Features are z-scored with statistics from the clean training
//! split only, and fault injection produces perturbed copies, never
//! mutating the clean source.

use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{Matrix, Vector};
use crate::rng::{derive_seed, seeded_rng};

/// Autocorrelation of the latent walk; close to 1 so consecutive windows
/// change smoothly.
const LATENT_RHO: f64 = 0.98;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    /// Number of raw timesteps before windowing.
    pub n_samples: usize,
    pub shared_latent_dim: usize,
    /// Per-modality observation dims; entry 0 is the per-timestep dim of
    /// the temporal modality (its feature dim is `window_length` times it).
    pub modality_dims: Vec<usize>,
    pub noise_std: f64,
    pub window_length: usize,
    pub window_step: usize,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self {
            n_samples: 100,
            shared_latent_dim: 4,
            modality_dims: vec![3, 64],
            noise_std: 0.05,
            window_length: 20,
            window_step: 1,
            seed: 7,
        }
    }
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        if self.modality_dims.is_empty() || self.modality_dims.iter().any(|&d| d == 0) {
            return Err(Error::invalid("modality dims must be non-empty and >= 1"));
        }
        if self.shared_latent_dim == 0 {
            return Err(Error::invalid("shared latent dim must be >= 1"));
        }
        if self.window_length == 0 || self.window_step == 0 {
            return Err(Error::invalid("window length and step must be >= 1"));
        }
        if self.n_samples <= self.window_length {
            return Err(Error::invalid(format!(
                "need more timesteps ({}) than the window length ({})",
                self.n_samples, self.window_length
            )));
        }
        if !self.noise_std.is_finite() || self.noise_std < 0.0 {
            return Err(Error::invalid("noise std must be finite and >= 0"));
        }
        Ok(())
    }

    /// Number of windowed samples the raw timesteps yield.
    pub fn n_windows(&self) -> usize {
        (self.n_samples - self.window_length) / self.window_step
    }

    /// Feature dim of each modality after windowing.
    pub fn feature_dims(&self) -> Vec<usize> {
        self.modality_dims
            .iter()
            .enumerate()
            .map(|(i, &d)| if i == 0 { d * self.window_length } else { d })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Train,
    Test,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Label {
    Clean,
    Faulty,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModalityStats {
    pub mean: Vector,
    pub std: Vector,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FaultKind {
    AdditiveNoise,
    ChannelDropout,
    Bias,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FaultSpec {
    /// Fraction of samples to perturb.
    pub fraction: f64,
    pub kind: FaultKind,
    /// Noise std for AdditiveNoise, per-feature drop probability for
    /// ChannelDropout, additive shift for Bias.
    pub magnitude: f64,
    pub affected_modalities: Vec<usize>,
    pub seed: u64,
}

impl FaultSpec {
    fn validate(&self, n_modalities: usize) -> Result<()> {
        if !(0.0..=1.0).contains(&self.fraction) {
            return Err(Error::invalid(format!(
                "fault fraction must lie in [0, 1], got {}",
                self.fraction
            )));
        }
        if self.affected_modalities.is_empty() {
            return Err(Error::invalid("fault must affect at least one modality"));
        }
        if let Some(&bad) = self.affected_modalities.iter().find(|&&m| m >= n_modalities) {
            return Err(Error::invalid(format!(
                "affected modality {bad} out of range for {n_modalities} modalities"
            )));
        }
        if !self.magnitude.is_finite() {
            return Err(Error::invalid("fault magnitude must be finite"));
        }
        if self.kind == FaultKind::ChannelDropout && !(0.0..=1.0).contains(&self.magnitude) {
            return Err(Error::invalid(
                "channel dropout magnitude is a probability and must lie in [0, 1]",
            ));
        }
        Ok(())
    }
}

/// Windowed, normalized multimodal samples together with everything needed
/// to reproduce and extend them: the generating maps and the train-split
/// normalization statistics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultimodalDataset {
    spec: SyntheticSpec,
    maps: Vec<Matrix>,
    /// `samples[m][s]`: modality `m`, windowed sample `s`, normalized.
    samples: Vec<Vec<Vector>>,
    stats: Vec<ModalityStats>,
    labels: Vec<Label>,
    splits: Vec<Split>,
}

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    rng.sample(StandardNormal)
}

/// Simulates the latent walk and raw observations for `timesteps` steps.
fn simulate_raw(
    spec: &SyntheticSpec,
    maps: &[Matrix],
    timesteps: usize,
    seed: u64,
) -> Vec<Vec<Vector>> {
    let k = spec.shared_latent_dim;
    let mut walk_rng = seeded_rng(derive_seed(seed, "latent-walk", 0));
    let mut z = Vector::from_fn(k, |_| normal(&mut walk_rng));
    let scale = (1.0 - LATENT_RHO * LATENT_RHO).sqrt();
    let mut observations: Vec<Vec<Vector>> = vec![Vec::with_capacity(timesteps); maps.len()];
    let mut noise_rngs: Vec<ChaCha8Rng> = (0..maps.len())
        .map(|m| seeded_rng(derive_seed(seed, "obs-noise", m as u64)))
        .collect();
    for t in 0..timesteps {
        if t > 0 {
            z = Vector::from_fn(k, |i| LATENT_RHO * z[i] + scale * normal(&mut walk_rng));
        }
        for (m, map) in maps.iter().enumerate() {
            let mut obs = map.matvec(&z);
            if spec.noise_std > 0.0 {
                for v in obs.as_mut_slice() {
                    *v += spec.noise_std * normal(&mut noise_rngs[m]);
                }
            }
            observations[m].push(obs);
        }
    }
    observations
}

/// Cuts raw per-timestep observations into windowed samples: modality 0
/// flattened over the window, the others read at the window's last
/// timestep.
fn window_samples(spec: &SyntheticSpec, observations: &[Vec<Vector>]) -> Vec<Vec<Vector>> {
    let timesteps = observations[0].len();
    let n_windows = (timesteps - spec.window_length) / spec.window_step;
    let mut samples: Vec<Vec<Vector>> = vec![Vec::with_capacity(n_windows); observations.len()];
    for w in 0..n_windows {
        let start = w * spec.window_step;
        let end = start + spec.window_length;
        samples[0].push(Vector::concat(&observations[0][start..end]));
        for (m, obs) in observations.iter().enumerate().skip(1) {
            samples[m].push(obs[end - 1].clone());
        }
    }
    samples
}

/// Assigns train/test 80/20: every fifth position of the seeded shuffle
/// becomes a test sample.
fn assign_splits(n: usize, seed: u64) -> Vec<Split> {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut seeded_rng(derive_seed(seed, "split", 0)));
    let mut splits = vec![Split::Train; n];
    for (position, &sample) in order.iter().enumerate() {
        if position % 5 == 4 {
            splits[sample] = Split::Test;
        }
    }
    splits
}

fn train_stats(samples: &[Vector], splits: &[Split]) -> Result<ModalityStats> {
    let dim = samples[0].len();
    let train: Vec<&Vector> = samples
        .iter()
        .zip(splits)
        .filter(|(_, s)| **s == Split::Train)
        .map(|(v, _)| v)
        .collect();
    if train.is_empty() {
        return Err(Error::DegenerateInput("no training samples to compute stats from".to_string()));
    }
    let n = train.len() as f64;
    let mean = Vector::from_fn(dim, |i| train.iter().map(|v| v[i]).sum::<f64>() / n);
    let std = Vector::from_fn(dim, |i| {
        (train.iter().map(|v| (v[i] - mean[i]).powi(2)).sum::<f64>() / n).sqrt()
    });
    if let Some(i) = (0..dim).find(|&i| std[i] <= 1e-12 * mean[i].abs().max(1.0)) {
        return Err(Error::DegenerateInput(format!(
            "feature {i} has (near-)zero variance on the training split"
        )));
    }
    Ok(ModalityStats { mean, std })
}

fn apply_stats(samples: &mut [Vec<Vector>], stats: &[ModalityStats]) {
    for (modality, stat) in samples.iter_mut().zip(stats) {
        for v in modality.iter_mut() {
            *v = Vector::from_fn(v.len(), |i| (v[i] - stat.mean[i]) / stat.std[i]);
        }
    }
}

/// Generates the full dataset described by `spec`, deterministic in its
/// seed.
pub fn generate(spec: &SyntheticSpec) -> Result<MultimodalDataset> {
    spec.validate()?;
    let n_windows = spec.n_windows();
    if n_windows < 2 {
        return Err(Error::DegenerateInput(format!(
            "spec yields only {n_windows} windowed samples; need at least 2"
        )));
    }
    let k = spec.shared_latent_dim;
    let map_scale = 1.0 / (k as f64).sqrt();
    let maps: Vec<Matrix> = spec
        .modality_dims
        .iter()
        .enumerate()
        .map(|(m, &d)| {
            let mut rng = seeded_rng(derive_seed(spec.seed, "modality-map", m as u64));
            Matrix::from_fn(d, k, |_, _| map_scale * normal(&mut rng))
        })
        .collect();

    let observations = simulate_raw(spec, &maps, spec.n_samples, spec.seed);
    let mut samples = window_samples(spec, &observations);
    let splits = assign_splits(n_windows, spec.seed);
    let stats = samples
        .iter()
        .map(|modality| train_stats(modality, &splits))
        .collect::<Result<Vec<_>>>()?;
    apply_stats(&mut samples, &stats);
    Ok(MultimodalDataset {
        spec: spec.clone(),
        maps,
        samples,
        stats,
        labels: vec![Label::Clean; n_windows],
        splits,
    })
}

impl MultimodalDataset {
    pub fn spec(&self) -> &SyntheticSpec {
        &self.spec
    }

    pub fn n_modalities(&self) -> usize {
        self.samples.len()
    }

    pub fn n_samples(&self) -> usize {
        self.labels.len()
    }

    pub fn feature_dims(&self) -> Vec<usize> {
        self.samples.iter().map(|m| m[0].len()).collect()
    }

    pub fn labels(&self) -> &[Label] {
        &self.labels
    }

    pub fn splits(&self) -> &[Split] {
        &self.splits
    }

    pub fn stats(&self) -> &[ModalityStats] {
        &self.stats
    }

    /// One sample as the per-modality input list a model consumes.
    pub fn sample(&self, index: usize) -> Vec<Vector> {
        self.samples.iter().map(|m| m[index].clone()).collect()
    }

    /// Indices belonging to `split`.
    pub fn split_indices(&self, split: Split) -> Vec<usize> {
        (0..self.n_samples()).filter(|&s| self.splits[s] == split).collect()
    }

    /// All samples of one split, outer index = sample.
    pub fn split_samples(&self, split: Split) -> Vec<Vec<Vector>> {
        self.split_indices(split).into_iter().map(|s| self.sample(s)).collect()
    }

    /// All samples of one modality restricted to `split`.
    pub fn modality_split(&self, modality: usize, split: Split) -> Vec<Vector> {
        self.split_indices(split)
            .into_iter()
            .map(|s| self.samples[modality][s].clone())
            .collect()
    }

    /// Generates `n_windows` fresh windowed samples from the same latent
    /// process and observation maps, normalized with this dataset's stored
    /// training statistics. The result carries clean labels and is entirely
    /// a test split.
    pub fn generate_more(&self, n_windows: usize, seed: u64) -> Result<MultimodalDataset> {
        if n_windows == 0 {
            return Err(Error::invalid("need at least one fresh sample"));
        }
        let timesteps = n_windows * self.spec.window_step + self.spec.window_length;
        let observations = simulate_raw(&self.spec, &self.maps, timesteps, seed);
        let mut samples = window_samples(&self.spec, &observations);
        for modality in &mut samples {
            modality.truncate(n_windows);
        }
        apply_stats(&mut samples, &self.stats);
        let mut spec = self.spec.clone();
        spec.n_samples = timesteps;
        spec.seed = seed;
        Ok(MultimodalDataset {
            spec,
            maps: self.maps.clone(),
            samples,
            stats: self.stats.clone(),
            labels: vec![Label::Clean; n_windows],
            splits: vec![Split::Test; n_windows],
        })
    }

    /// Returns a perturbed copy with the selected fraction of samples
    /// relabeled faulty; the receiver is untouched.
    pub fn inject_faults(&self, fault: &FaultSpec) -> Result<MultimodalDataset> {
        fault.validate(self.n_modalities())?;
        let mut out = self.clone();
        let n = self.n_samples();
        let n_faulty = (fault.fraction * n as f64).round() as usize;
        if n_faulty == 0 {
            return Ok(out);
        }
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut seeded_rng(derive_seed(fault.seed, "fault-pick", 0)));
        let chosen = &order[..n_faulty];
        let mut rng = seeded_rng(derive_seed(fault.seed, "fault-perturb", 0));
        for &s in chosen {
            out.labels[s] = Label::Faulty;
            for &m in &fault.affected_modalities {
                let v = &mut out.samples[m][s];
                match fault.kind {
                    FaultKind::AdditiveNoise => {
                        for x in v.as_mut_slice() {
                            *x += fault.magnitude * normal(&mut rng);
                        }
                    }
                    FaultKind::ChannelDropout => {
                        for x in v.as_mut_slice() {
                            if rng.gen::<f64>() < fault.magnitude {
                                *x = 0.0;
                            }
                        }
                    }
                    FaultKind::Bias => {
                        for x in v.as_mut_slice() {
                            *x += fault.magnitude;
                        }
                    }
                }
            }
        }
        Ok(out)
    }

    /// Writes one CSV per modality plus a JSON manifest into `dir`.
    pub fn export_dir(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        for (m, modality) in self.samples.iter().enumerate() {
            let path = dir.join(format!("modality_{m}.csv"));
            let mut writer = csv::Writer::from_path(&path)?;
            let dim = modality[0].len();
            writer.write_record((0..dim).map(|i| format!("f{i}")))?;
            for v in modality {
                writer.write_record(v.iter().map(|x| x.to_string()))?;
            }
            writer.flush()?;
        }
        let manifest = Manifest {
            spec: self.spec.clone(),
            maps: self.maps.clone(),
            stats: self.stats.clone(),
            labels: self.labels.clone(),
            splits: self.splits.clone(),
        };
        let json = serde_json::to_string_pretty(&manifest)
            .map_err(|e| Error::Serialization(e.to_string()))?;
        std::fs::write(dir.join("manifest.json"), json + "\n")?;
        Ok(())
    }

    /// Reads a dataset previously written by [`Self::export_dir`].
    pub fn import_dir(dir: &Path) -> Result<MultimodalDataset> {
        let manifest: Manifest =
            serde_json::from_str(&std::fs::read_to_string(dir.join("manifest.json"))?)
                .map_err(|e| Error::Serialization(format!("manifest: {e}")))?;
        let mut samples = Vec::new();
        for m in 0..manifest.spec.modality_dims.len() {
            let path = dir.join(format!("modality_{m}.csv"));
            let mut reader = csv::Reader::from_path(&path)?;
            let mut modality = Vec::new();
            for record in reader.records() {
                let record = record?;
                let values = record
                    .iter()
                    .map(|field| {
                        field.parse::<f64>().map_err(|e| {
                            Error::Serialization(format!("bad float {field:?}: {e}"))
                        })
                    })
                    .collect::<Result<Vec<f64>>>()?;
                modality.push(Vector::from_raw(values));
            }
            samples.push(modality);
        }
        let n = manifest.labels.len();
        if samples.iter().any(|m| m.len() != n) || manifest.splits.len() != n {
            return Err(Error::shape("sample counts disagree between CSVs and manifest"));
        }
        Ok(MultimodalDataset {
            spec: manifest.spec,
            maps: manifest.maps,
            samples,
            stats: manifest.stats,
            labels: manifest.labels,
            splits: manifest.splits,
        })
    }
}

#[derive(Serialize, Deserialize)]
struct Manifest {
    spec: SyntheticSpec,
    maps: Vec<Matrix>,
    stats: Vec<ModalityStats>,
    labels: Vec<Label>,
    splits: Vec<Split>,
}
