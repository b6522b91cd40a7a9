//! Maintainer tool: trains one model per fusion kind on the default
//! synthetic dataset and prints loss and per-submodel gradient-Lipschitz
//! trajectories, for picking experiment defaults.
//!
//! Run with `cargo run --release --example train_fusion_compare`.

use fuselab_core::autoencoder::{train, MlpSpec, ModelSpec, TrainConfig};
use fuselab_core::fusion::{AttentionSettings, FusionRegistry};
use fuselab_core::synthdata::{generate, SyntheticSpec};

fn main() {
    let dataset = generate(&SyntheticSpec::default()).unwrap();
    let dims = dataset.feature_dims();
    println!("dataset: {} samples, feature dims {dims:?}", dataset.n_samples());

    let hidden: usize = std::env::var("HIDDEN").ok().and_then(|s| s.parse().ok()).unwrap_or(32);
    let latent: usize = std::env::var("LATENT").ok().and_then(|s| s.parse().ok()).unwrap_or(8);
    let epochs: usize = std::env::var("EPOCHS").ok().and_then(|s| s.parse().ok()).unwrap_or(200);
    let every: usize = std::env::var("EVERY").ok().and_then(|s| s.parse().ok()).unwrap_or(25);
    let batch: usize = std::env::var("BATCH").ok().and_then(|s| s.parse().ok()).unwrap_or(16);
    let lr: f64 = std::env::var("LR").ok().and_then(|s| s.parse().ok()).unwrap_or(0.01);
    let seed: u64 = std::env::var("SEED").ok().and_then(|s| s.parse().ok()).unwrap_or(1);
    println!("hidden={hidden} latent={latent} epochs={epochs} batch={batch} lr={lr} seed={seed}");
    let spec = ModelSpec {
        encoders: dims
            .iter()
            .map(|&d| MlpSpec::relu_stack(vec![d, hidden, latent]).unwrap())
            .collect(),
        attention: AttentionSettings::default(),
    };
    let config = TrainConfig {
        epochs,
        batch_size: batch,
        learning_rate: lr,
        lambda_reg: 1e-5,
        seed,
        trials: 1,
        lipschitz_every: every,
        lipschitz_pairs: 200,
    };
    let registry = FusionRegistry::builtin();

    for kind in ["sum", "concat", "attention"] {
        let t0 = std::time::Instant::now();
        let log = train(&spec, kind, &registry, &dataset, &config).unwrap();
        println!(
            "\n== {kind} ({:.1} s, diverged={}) ==",
            t0.elapsed().as_secs_f64(),
            log.diverged
        );
        for rec in &log.records {
            if let Some(snap) = &rec.lipschitz {
                let enc: Vec<String> =
                    snap.encoders.iter().map(|e| format!("{:.3}", e.value)).collect();
                let dec: Vec<String> =
                    snap.decoders.iter().map(|e| format!("{:.3}", e.value)).collect();
                println!(
                    "epoch {:3}: train {:8.4} test {:8.4} | enc [{}] dec [{}] overall {:.3}",
                    rec.epoch,
                    rec.combined_train_loss,
                    rec.combined_test_loss,
                    enc.join(", "),
                    dec.join(", "),
                    snap.overall
                );
            }
        }
        println!("param norm {:.3}", log.model.param_norm());
    }
}
