//! Recomputes the calibrated coefficients behind
//! `bounds::calibrated_attention_grad_coefficient`.
//!
//! For each modality count this samples raw attention instances with
//! projection spectral norms in [0.7, 1.7] and input radii in [0.25, 2],
//! estimates the gradient-Lipschitz constant of the fused map by sampling,
//! and reports the worst observed ratio against M^3 R. The frozen constants
//! are that ratio times a 1.5 safety margin, rounded up.

use fuselab_core::estimator::{estimate_gradient_lipschitz, SamplingDomain, DEFAULT_EPSILON};
use fuselab_core::fusion::{AttentionParams, AttentionSettings, FusionStrategy};
use fuselab_core::linalg::{spectral_norm_default, Matrix, Vector};
use fuselab_core::rng::{derive_seed, seeded_rng};
use rand::Rng;

fn main() {
    for n in [2usize, 3, 4] {
        let mut worst = 0.0f64;
        let mut worst_desc = String::new();
        for instance in 0..60u64 {
            let mut rng = seeded_rng(derive_seed(0xca1b, "instance", n as u64 * 1000 + instance));
            let d = 2 + (instance as usize) % 7;

            let chains: Vec<Vec<Matrix>> = (0..n)
                .map(|_| {
                    let target = rng.gen_range(0.7..1.7);
                    let raw = Matrix::from_fn(d, d, |_, _| rng.gen_range(-1.0..1.0));
                    let sigma = spectral_norm_default(&raw).unwrap().value;
                    vec![raw.scaled(target / sigma)]
                })
                .collect();
            let params = AttentionParams::with_chains(chains, false, false, false, 0.0, 0.0)
                .unwrap();
            let m = (0..n)
                .map(|i| spectral_norm_default(&params.chain(i)[0]).unwrap().value)
                .fold(0.0, f64::max);

            let r = rng.gen_range(0.25..2.0);
            let s = r / (d as f64).sqrt();
            let domain = SamplingDomain::new(n * d, -s, s).unwrap();

            let jac_map = |x: &Vector| {
                let latents: Vec<Vector> = (0..n)
                    .map(|i| Vector::from_fn(d, |j| x[i * d + j]))
                    .collect();
                let mut flat = Vec::with_capacity(n * n * d * d);
                for k in 0..n {
                    let block = params.jacobian(&latents, k).unwrap();
                    flat.extend_from_slice(block.as_slice());
                }
                Vector::from_raw(flat)
            };
            let est = estimate_gradient_lipschitz(
                jac_map,
                &domain,
                5_000,
                DEFAULT_EPSILON,
                derive_seed(0xca1b, "est", instance),
            )
            .unwrap();
            let ratio = est.value / (m.powi(3) * r);
            if ratio > worst {
                worst = ratio;
                worst_desc = format!("d={d} M={m:.3} R={r:.3} est={:.4}", est.value);
            }
        }
        println!("n={n}: worst ratio {worst:.4} ({worst_desc}); with 1.5x margin {:.4}", 1.5 * worst);
    }
}
