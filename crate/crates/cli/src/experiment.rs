//! Command implementations: each takes a validated configuration, runs the
//! corresponding pipeline stage deterministically, and emits files through
//! the atomic writers in [`crate::output`].

use std::path::Path;

use anyhow::{bail, Context};
use fuselab_core::anomaly::{roc_auc, AnomalyModel};
use fuselab_core::autoencoder::{
    load_snapshot, save_snapshot, train, write_train_log, MultimodalAutoencoder, TrainConfig,
    TrainLog,
};
use fuselab_core::bounds::{
    aggregation_bounds, attention_func_bound, attention_grad_bound,
    calibrated_attention_grad_coefficient, default_attention_grad_coefficient, measure_max_norm,
    mlp_func_lipschitz,
};
use fuselab_core::estimator::{
    estimate_function_lipschitz, estimate_gradient_lipschitz, SamplingDomain, DEFAULT_EPSILON,
};
use fuselab_core::fusion::{FusionKind, FusionRegistry};
use fuselab_core::linalg::Vector;
use fuselab_core::rng::derive_seed;
use fuselab_core::synthdata::{generate, Label, MultimodalDataset, Split};
use rayon::prelude::*;

use crate::config::ExperimentConfig;
use crate::output::{csv_bytes, fmt_f64, write_atomic, write_schema};

/// Non-fatal conditions (divergence, reduced components). The caller
/// escalates them to a failing exit code under --strict.
#[derive(Debug, Default)]
pub struct Warnings(pub Vec<String>);

impl Warnings {
    fn push(&mut self, msg: String) {
        eprintln!("warning: {msg}");
        self.0.push(msg);
    }
}

fn write_common(config: &ExperimentConfig, out_dir: &Path) -> anyhow::Result<()> {
    write_atomic(&out_dir.join("effective_config.toml"), config.to_toml().as_bytes())?;
    write_schema(out_dir)
}

pub fn run_gen_data(config: &ExperimentConfig, out_dir: &Path) -> anyhow::Result<()> {
    let dataset = generate(&config.synthetic_spec())?;
    let dir = out_dir.join("dataset");
    dataset.export_dir(&dir)?;
    write_common(config, out_dir)?;
    println!(
        "wrote {} windowed samples across {} modalities to {}",
        dataset.n_samples(),
        dataset.n_modalities(),
        dir.display()
    );
    Ok(())
}

/// One (fusion kind, trial) training job; trial seeds derive from the base
/// training seed so runs are independent but reproducible.
fn trial_config(base: &TrainConfig, trial: usize) -> TrainConfig {
    TrainConfig { seed: derive_seed(base.seed, "trial", trial as u64), ..base.clone() }
}

struct Stats {
    mean: f64,
    std: f64,
    min: f64,
    max: f64,
}

fn stats(values: &[f64]) -> Stats {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = if values.len() < 2 {
        0.0
    } else {
        values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)
    };
    let min = values.iter().cloned().fold(f64::INFINITY, f64::min);
    let max = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    Stats { mean, std: var.sqrt(), min, max }
}

fn push_stats(row: &mut Vec<String>, values: &[f64]) {
    if values.is_empty() {
        row.extend(std::iter::repeat(String::new()).take(4));
        return;
    }
    let s = stats(values);
    row.push(fmt_f64(s.mean));
    row.push(fmt_f64(s.std));
    row.push(fmt_f64(s.min));
    row.push(fmt_f64(s.max));
}

pub fn run_train(
    config: &ExperimentConfig,
    out_dir: &Path,
    warnings: &mut Warnings,
) -> anyhow::Result<()> {
    let dataset = generate(&config.synthetic_spec())?;
    let model_spec = config.model_spec(&dataset)?;
    let registry = FusionRegistry::builtin();
    let base = config.train_config();

    let jobs: Vec<(String, usize)> = config
        .model
        .fusion_kinds
        .iter()
        .flat_map(|kind| (0..base.trials).map(move |t| (kind.clone(), t)))
        .collect();
    let logs: Vec<TrainLog> = jobs
        .par_iter()
        .map(|(kind, trial)| {
            train(&model_spec, kind, &registry, &dataset, &trial_config(&base, *trial))
        })
        .collect::<fuselab_core::Result<Vec<_>>>()?;

    let mut summary_rows = Vec::new();
    for kind in &config.model.fusion_kinds {
        let kind_logs: Vec<&TrainLog> = jobs
            .iter()
            .zip(&logs)
            .filter(|((k, _), _)| k == kind)
            .map(|(_, log)| log)
            .collect();
        for ((_, trial), log) in jobs.iter().zip(&logs).filter(|((k, _), _)| k == kind) {
            let snapshot_name = format!("snapshot_{kind}_trial{trial}.json");
            save_snapshot(&out_dir.join(&snapshot_name), &log.model)?;
            write_train_log(
                &out_dir.join(format!("train_{kind}_trial{trial}.jsonl")),
                &log.records,
                log.diverged,
                Some(&snapshot_name),
            )?;
            if log.diverged {
                warnings.push(format!(
                    "{kind} trial {trial} diverged after epoch {}",
                    log.records.len()
                ));
            }
        }
        let diverged_trials = kind_logs.iter().filter(|l| l.diverged).count();
        let max_epoch = kind_logs.iter().map(|l| l.records.len()).max().unwrap_or(0);
        for epoch in 1..=max_epoch {
            let at_epoch: Vec<_> = kind_logs
                .iter()
                .filter_map(|l| l.records.get(epoch - 1))
                .collect();
            let mut row = vec![
                kind.clone(),
                epoch.to_string(),
                at_epoch.len().to_string(),
                diverged_trials.to_string(),
            ];
            let train_losses: Vec<f64> =
                at_epoch.iter().map(|r| r.combined_train_loss).collect();
            let test_losses: Vec<f64> = at_epoch.iter().map(|r| r.combined_test_loss).collect();
            let lipschitz: Vec<f64> = at_epoch
                .iter()
                .filter_map(|r| r.lipschitz.as_ref().map(|s| s.overall))
                .collect();
            push_stats(&mut row, &train_losses);
            push_stats(&mut row, &test_losses);
            push_stats(&mut row, &lipschitz);
            summary_rows.push(row);
        }
        let finals: Vec<f64> = kind_logs
            .iter()
            .filter_map(|l| l.final_record().map(|r| r.combined_train_loss))
            .collect();
        let final_lip: Vec<f64> =
            kind_logs.iter().filter_map(|l| l.final_lipschitz()).collect();
        println!(
            "trained {kind}: trials={}, diverged={}, final train loss mean={}, final lipschitz mean={}",
            kind_logs.len(),
            diverged_trials,
            if finals.is_empty() { "n/a".into() } else { fmt_f64(stats(&finals).mean) },
            if final_lip.is_empty() { "n/a".into() } else { fmt_f64(stats(&final_lip).mean) },
        );
    }

    let header = [
        "fusion",
        "epoch",
        "trials",
        "diverged_trials",
        "train_loss_mean",
        "train_loss_std",
        "train_loss_min",
        "train_loss_max",
        "test_loss_mean",
        "test_loss_std",
        "test_loss_min",
        "test_loss_max",
        "lipschitz_mean",
        "lipschitz_std",
        "lipschitz_min",
        "lipschitz_max",
    ];
    write_atomic(&out_dir.join("train_summary.csv"), &csv_bytes(&header, &summary_rows)?)?;
    write_common(config, out_dir)
}

fn load_model_for(
    snapshot: &Path,
    config: &ExperimentConfig,
) -> anyhow::Result<(MultimodalAutoencoder, MultimodalDataset)> {
    let model = load_snapshot(snapshot)
        .with_context(|| format!("loading snapshot {}", snapshot.display()))?;
    let dataset = generate(&config.synthetic_spec())?;
    if model.modality_dims() != dataset.feature_dims() {
        bail!(
            "snapshot expects modality dims {:?} but the configured dataset has {:?}",
            model.modality_dims(),
            dataset.feature_dims()
        );
    }
    Ok((model, dataset))
}

fn fused_latents(
    model: &MultimodalAutoencoder,
    samples: &[Vec<Vector>],
) -> anyhow::Result<Vec<Vector>> {
    samples
        .iter()
        .map(|s| Ok(model.fused_latent(s)?))
        .collect()
}

pub fn run_bounds(
    snapshot: &Path,
    config: &ExperimentConfig,
    out_dir: &Path,
) -> anyhow::Result<()> {
    let (model, dataset) = load_model_for(snapshot, config)?;
    let train_samples = dataset.split_samples(Split::Train);
    if train_samples.is_empty() {
        bail!("dataset has no training samples to measure norms on");
    }

    let mut rows: Vec<Vec<String>> = Vec::new();
    let ok_row = |rows: &mut Vec<Vec<String>>, quantity: &str, scope: String, value: f64| {
        rows.push(vec![quantity.into(), scope, fmt_f64(value), "ok".into(), String::new()]);
    };

    // functional constants from the per-layer product formula
    let act_lipschitz =
        |mlp: &fuselab_core::autoencoder::Mlp| -> Vec<f64> {
            mlp.activations().iter().map(|a| a.lipschitz()).collect()
        };
    let mut enc_func = Vec::new();
    for (i, enc) in model.encoders().iter().enumerate() {
        let l = mlp_func_lipschitz(enc.weights(), &act_lipschitz(enc))?;
        enc_func.push(l);
        ok_row(&mut rows, "mlp_func_lipschitz", format!("encoder_{i}"), l);
    }
    let mut dec_func = Vec::new();
    for (i, dec) in model.decoders().iter().enumerate() {
        let l = mlp_func_lipschitz(dec.weights(), &act_lipschitz(dec))?;
        dec_func.push(l);
        ok_row(&mut rows, "mlp_func_lipschitz", format!("decoder_{i}"), l);
    }
    let (l_concat, l_sum) = aggregation_bounds(&enc_func)?;
    ok_row(&mut rows, "aggregation_bound_concat", "encoders".into(), l_concat);
    ok_row(&mut rows, "aggregation_bound_sum", "encoders".into(), l_sum);

    // measured input and gradient magnitudes over the train split
    for m in 0..model.n_modalities() {
        let inputs = dataset.modality_split(m, Split::Train);
        let c = measure_max_norm(&inputs)?;
        ok_row(&mut rows, "measured_c_input", format!("modality_{m}"), c);
        let enc = &model.encoders()[m];
        let b = inputs
            .iter()
            .map(|x| enc.param_jacobian_norm(x))
            .collect::<fuselab_core::Result<Vec<_>>>()?
            .into_iter()
            .fold(0.0f64, f64::max);
        ok_row(&mut rows, "measured_b_grad", format!("encoder_{m}"), b);
    }
    let fused = fused_latents(&model, &train_samples)?;
    let fused_bound = measure_max_norm(&fused)?;
    ok_row(&mut rows, "measured_c_input", "fused_latent".into(), fused_bound);
    for (i, dec) in model.decoders().iter().enumerate() {
        let b = fused
            .iter()
            .map(|u| dec.param_jacobian_norm(u))
            .collect::<fuselab_core::Result<Vec<_>>>()?
            .into_iter()
            .fold(0.0f64, f64::max);
        ok_row(&mut rows, "measured_b_grad", format!("decoder_{i}"), b);
    }

    // attention bounds from measured projection gains and input norms
    if let FusionKind::Attention(params) = model.fusion() {
        let n = model.n_modalities();
        let mut m_max = 0.0f64;
        for modality in 0..n {
            m_max = m_max.max(params.effective_gain(modality)?);
        }
        let r_max = if params.unit_norm_inputs {
            1.0
        } else {
            let latents = train_samples
                .iter()
                .map(|s| Ok(model.encode(s)?))
                .collect::<anyhow::Result<Vec<_>>>()?;
            latents
                .iter()
                .flatten()
                .map(Vector::norm)
                .fold(0.0f64, f64::max)
        };
        ok_row(&mut rows, "measured_m_max", "attention".into(), m_max);
        ok_row(&mut rows, "measured_r_max", "attention".into(), r_max);
        ok_row(
            &mut rows,
            "attention_func_bound",
            "attention".into(),
            attention_func_bound(m_max, r_max)?,
        );
        let c_n = calibrated_attention_grad_coefficient(n)
            .unwrap_or_else(|| default_attention_grad_coefficient(n));
        ok_row(
            &mut rows,
            "attention_grad_bound",
            "attention".into(),
            attention_grad_bound(c_n, m_max, r_max)?,
        );
    }

    // gradient-Lipschitz bounds need smoothness constants no measurement
    // provides; they are emitted as rows awaiting those parameters
    for i in 0..model.decoders().len() {
        rows.push(vec![
            "decoder_grad_bound".into(),
            format!("decoder_{i}"),
            String::new(),
            "requires-parameter".into(),
            "l_dec_grad".into(),
        ]);
    }
    for i in 0..model.encoders().len() {
        rows.push(vec![
            "encoder_grad_bound".into(),
            format!("encoder_{i}"),
            String::new(),
            "requires-parameter".into(),
            "l_dec_grad (every decoder)".into(),
        ]);
    }

    let header = ["quantity", "scope", "value", "status", "missing"];
    for row in &rows {
        println!("{:<26} {:<14} {:>24} {} {}", row[0], row[1], row[2], row[3], row[4]);
    }
    write_atomic(&out_dir.join("bounds.csv"), &csv_bytes(&header, &rows)?)?;
    write_common(config, out_dir)
}

pub fn run_estimate(
    snapshot: &Path,
    config: &ExperimentConfig,
    out_dir: &Path,
) -> anyhow::Result<()> {
    // box-domain estimates need only the snapshot, not the dataset
    let model = load_snapshot(snapshot)
        .with_context(|| format!("loading snapshot {}", snapshot.display()))?;
    let est = &config.estimation;

    let mut rows = Vec::new();
    let mut estimate_pair = |name: String,
                             mlp: &fuselab_core::autoencoder::Mlp,
                             salt: &'static str,
                             index: usize|
     -> anyhow::Result<()> {
        let domain = SamplingDomain::new(mlp.input_dim(), est.domain_low, est.domain_high)?;
        let func = estimate_function_lipschitz(
            |x| mlp.forward(x).expect("domain dim matches the submodel"),
            &domain,
            est.n_samples,
            est.epsilon,
            derive_seed(est.seed, salt, (2 * index) as u64),
        )?;
        let grad = estimate_gradient_lipschitz(
            |x| mlp.input_jacobian_flat(x).expect("domain dim matches the submodel"),
            &domain,
            est.n_samples,
            est.epsilon,
            derive_seed(est.seed, salt, (2 * index + 1) as u64),
        )?;
        for (statistic, e) in [("function", func), ("gradient", grad)] {
            println!("{name:<12} {statistic:<9} {}", fmt_f64(e.value));
            rows.push(vec![
                name.clone(),
                statistic.into(),
                fmt_f64(e.value),
                e.pairs_evaluated.to_string(),
                e.pairs_skipped.to_string(),
                e.seed.to_string(),
            ]);
        }
        Ok(())
    };

    for (i, enc) in model.encoders().iter().enumerate() {
        estimate_pair(format!("encoder_{i}"), enc, "encoder", i)?;
    }
    for (i, dec) in model.decoders().iter().enumerate() {
        estimate_pair(format!("decoder_{i}"), dec, "decoder", i)?;
    }

    let header = ["submodel", "statistic", "value", "pairs_evaluated", "pairs_skipped", "seed"];
    write_atomic(&out_dir.join("estimates.csv"), &csv_bytes(&header, &rows)?)?;
    write_common(config, out_dir)
}

/// Built-in correctness check: the gradient of f(x) = 0.5 * ||x||^2 is the
/// identity map, whose Lipschitz constant is exactly 1.
pub fn run_self_test() -> anyhow::Result<()> {
    let domain = SamplingDomain::new(4, -1.0, 1.0)?;
    let estimate =
        estimate_gradient_lipschitz(|x: &Vector| x.clone(), &domain, 1000, DEFAULT_EPSILON, 0)?;
    let error = (estimate.value - 1.0).abs();
    println!(
        "self-test: quadratic-oracle gradient estimate = {} (expected 1), error {:e}",
        fmt_f64(estimate.value),
        error
    );
    if error > 1e-12 {
        bail!("self-test failed: estimate {} deviates from 1.0", estimate.value);
    }
    println!("self-test passed");
    Ok(())
}

pub fn run_ablate(
    config: &ExperimentConfig,
    out_dir: &Path,
    warnings: &mut Warnings,
) -> anyhow::Result<()> {
    let dataset = generate(&config.synthetic_spec())?;
    let model_spec = config.model_spec(&dataset)?;
    let registry = FusionRegistry::builtin();
    let base = config.train_config();
    let grid = &config.ablation.lambda_grid;

    let logs: Vec<TrainLog> = grid
        .par_iter()
        .map(|&lambda| {
            let cfg = TrainConfig { lambda_reg: lambda, ..trial_config(&base, 0) };
            train(&model_spec, "attention", &registry, &dataset, &cfg)
        })
        .collect::<fuselab_core::Result<Vec<_>>>()?;

    let mut rows = Vec::new();
    for (i, (&lambda, log)) in grid.iter().zip(&logs).enumerate() {
        write_train_log(
            &out_dir.join(format!("ablate_lambda{i}.jsonl")),
            &log.records,
            log.diverged,
            None,
        )?;
        if log.diverged {
            warnings.push(format!("lambda={lambda} diverged after epoch {}", log.records.len()));
        }
        let final_record = log.final_record();
        let row = vec![
            fmt_f64(lambda),
            final_record.map(|r| fmt_f64(r.combined_train_loss)).unwrap_or_default(),
            final_record.map(|r| fmt_f64(r.combined_test_loss)).unwrap_or_default(),
            log.final_lipschitz().map(fmt_f64).unwrap_or_default(),
            fmt_f64(log.model.param_norm()),
            fmt_f64(log.model.attention_param_norm()),
            log.diverged.to_string(),
        ];
        println!(
            "lambda={:<8} final loss={} lipschitz={} param norm={}",
            row[0], row[1], row[3], row[4]
        );
        rows.push(row);
    }

    let lipschitz: Vec<f64> = logs.iter().filter_map(|l| l.final_lipschitz()).collect();
    if lipschitz.len() == grid.len() {
        println!("spearman(lambda, final lipschitz) = {}", fmt_f64(spearman(grid, &lipschitz)));
    }

    let header = [
        "lambda",
        "final_train_loss",
        "final_test_loss",
        "final_lipschitz",
        "param_norm",
        "attention_param_norm",
        "diverged",
    ];
    write_atomic(&out_dir.join("ablation.csv"), &csv_bytes(&header, &rows)?)?;
    write_common(config, out_dir)
}

pub fn run_detect(
    snapshot: &Path,
    config: &ExperimentConfig,
    out_dir: &Path,
    warnings: &mut Warnings,
) -> anyhow::Result<()> {
    let (model, dataset) = load_model_for(snapshot, config)?;
    let det = &config.detection;

    // consecutive windows of the slow latent walk are nearly identical, so
    // keep every stride-th one; calibration and evaluation then sample the
    // same stationary distribution and the percentile threshold transfers
    let stride = det.sample_stride;
    let strided = |n: usize| (0..n).map(move |i| i * stride);

    let calibration = dataset
        .generate_more(det.calibration_samples * stride, derive_seed(det.seed, "calibration", 0))?;
    let calibration_samples: Vec<Vec<Vector>> =
        strided(det.calibration_samples).map(|s| calibration.sample(s)).collect();
    let calibration_latents = fused_latents(&model, &calibration_samples)?;

    let kernel = config.kernel(&calibration_latents)?;
    let detector = AnomalyModel::fit(&calibration_latents, kernel, det.k_components)?;
    if detector.was_reduced() {
        warnings.push(format!(
            "projection rank-deficient: retained {} of {} components",
            detector.retained_components(),
            detector.requested_components()
        ));
    }

    let clean_eval = dataset
        .generate_more(det.evaluation_samples * stride, derive_seed(det.seed, "evaluation", 0))?;
    let faulty_eval = clean_eval.inject_faults(&config.fault_spec(dataset.n_modalities())?)?;

    // held-out calibration check on the unperturbed evaluation set
    let clean_samples: Vec<Vec<Vector>> =
        strided(det.evaluation_samples).map(|s| clean_eval.sample(s)).collect();
    let clean_latents = fused_latents(&model, &clean_samples)?;
    let clean_above = clean_latents
        .iter()
        .map(|x| detector.score(x))
        .collect::<fuselab_core::Result<Vec<_>>>()?
        .into_iter()
        .filter(|&s| s > detector.threshold())
        .count();
    let clean_fp_rate = clean_above as f64 / clean_latents.len() as f64;

    let eval_samples: Vec<Vec<Vector>> =
        strided(det.evaluation_samples).map(|s| faulty_eval.sample(s)).collect();
    let eval_latents = fused_latents(&model, &eval_samples)?;
    let labels: Vec<bool> = strided(det.evaluation_samples)
        .map(|s| faulty_eval.labels()[s] == Label::Faulty)
        .collect();
    let report = detector.detect(&eval_latents, &labels)?;

    let scores: Vec<f64> = report.samples.iter().map(|s| s.score).collect();
    let auc = if labels.iter().any(|&l| l) && labels.iter().any(|&l| !l) {
        Some(roc_auc(&scores, &labels)?)
    } else {
        None
    };

    let mut report_rows = Vec::new();
    for (i, s) in report.samples.iter().enumerate() {
        report_rows.push(vec![
            i.to_string(),
            fmt_f64(s.score),
            s.true_faulty.to_string(),
            s.predicted_faulty.to_string(),
        ]);
    }
    let header = ["sample", "score", "true_faulty", "predicted_faulty"];
    write_atomic(&out_dir.join("detection_report.csv"), &csv_bytes(&header, &report_rows)?)?;

    let mut summary = report.summary();
    summary.push_str(&format!(
        "roc_auc: {}\nheld_out_clean_fp_rate: {}\nkernel: {:?}\nretained_components: {}\n",
        auc.map(fmt_f64).unwrap_or_else(|| "n/a".into()),
        fmt_f64(clean_fp_rate),
        detector.kernel(),
        detector.retained_components(),
    ));
    print!("{summary}");
    write_atomic(&out_dir.join("detection_summary.txt"), summary.as_bytes())?;
    write_common(config, out_dir)
}

/// Spearman rank correlation with average ranks for ties; 0 when either
/// side has no rank variance.
pub fn spearman(xs: &[f64], ys: &[f64]) -> f64 {
    assert_eq!(xs.len(), ys.len());
    let rx = ranks(xs);
    let ry = ranks(ys);
    let n = rx.len() as f64;
    let mx = rx.iter().sum::<f64>() / n;
    let my = ry.iter().sum::<f64>() / n;
    let cov: f64 = rx.iter().zip(&ry).map(|(a, b)| (a - mx) * (b - my)).sum();
    let vx: f64 = rx.iter().map(|a| (a - mx).powi(2)).sum();
    let vy: f64 = ry.iter().map(|b| (b - my).powi(2)).sum();
    if vx == 0.0 || vy == 0.0 {
        return 0.0;
    }
    cov / (vx.sqrt() * vy.sqrt())
}

fn ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut out = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &idx in &order[i..=j] {
            out[idx] = avg;
        }
        i = j + 1;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stats_of_known_values() {
        let s = stats(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(s.mean, 2.5);
        assert_eq!(s.min, 1.0);
        assert_eq!(s.max, 4.0);
        assert!((s.std - (5.0f64 / 3.0).sqrt()).abs() < 1e-12);
        let single = stats(&[7.0]);
        assert_eq!(single.std, 0.0);
    }

    #[test]
    fn spearman_detects_monotone_trends() {
        let xs = [1.0, 2.0, 3.0, 4.0, 5.0];
        assert!((spearman(&xs, &[10.0, 20.0, 30.0, 40.0, 50.0]) - 1.0).abs() < 1e-12);
        assert!((spearman(&xs, &[5.0, 4.0, 3.0, 2.0, 1.0]) + 1.0).abs() < 1e-12);
        assert_eq!(spearman(&xs, &[2.0, 2.0, 2.0, 2.0, 2.0]), 0.0);
        // nonlinear but monotone stays 1
        assert!((spearman(&xs, &[1.0, 8.0, 27.0, 64.0, 125.0]) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn ranks_average_ties() {
        assert_eq!(ranks(&[3.0, 1.0, 3.0]), vec![2.5, 1.0, 2.5]);
    }

    #[test]
    fn trial_seeds_are_distinct_and_stable() {
        let base = TrainConfig::default();
        let a = trial_config(&base, 0).seed;
        let b = trial_config(&base, 1).seed;
        assert_ne!(a, b);
        assert_eq!(a, trial_config(&base, 0).seed);
    }
}
