use fuselab_core::bounds::{
    aggregation_bounds, attention_func_bound, attention_grad_bound, decoder_grad_bound,
    encoder_grad_bound, mlp_func_lipschitz, DecoderBoundInputs, DecoderTerm, EncoderBoundInputs,
};
use fuselab_core::rng::seeded_rng;
use proptest::prelude::*;
use rand::Rng;

mod common;

#[test]
fn concat_bound_never_exceeds_sum_bound() {
    let mut rng = seeded_rng(0x9bd1);
    let mut equality_cases = 0usize;
    for _ in 0..100_000 {
        let len = rng.gen_range(1..=6);
        let ls: Vec<f64> = (0..len)
            .map(|_| {
                if rng.gen_bool(0.15) {
                    0.0
                } else {
                    rng.gen_range(0.0..10.0)
                }
            })
            .collect();
        let (concat, sum) = aggregation_bounds(&ls).unwrap();
        assert!(
            concat <= sum + 1e-12 * sum.max(1.0),
            "concat bound {concat} exceeded sum bound {sum} for {ls:?}"
        );
        let nonzero = ls.iter().filter(|&&l| l != 0.0).count();
        if nonzero <= 1 {
            equality_cases += 1;
            assert!(
                (concat - sum).abs() <= 1e-12 * sum.max(1.0),
                "expected equality with {nonzero} nonzero entries, got {concat} vs {sum}"
            );
        } else {
            assert!(
                concat < sum,
                "expected strict inequality with {nonzero} nonzero entries for {ls:?}"
            );
        }
    }
    assert!(equality_cases > 100, "equality branch barely exercised");
}

fn bump_field(inputs: &DecoderBoundInputs, field: usize, delta: f64) -> DecoderBoundInputs {
    let mut out = *inputs;
    match field {
        0 => out.b_grad += delta,
        1 => out.l_dec_func += delta,
        2 => out.l_dec_grad += delta,
        3 => out.c_input += delta,
        4 => out.l_agg += delta,
        _ => out.l_enc_func += delta,
    }
    out
}

#[test]
fn decoder_bound_is_monotone_in_every_field() {
    let mut rng = seeded_rng(0x51aa);
    for _ in 0..2_000 {
        let inputs = DecoderBoundInputs {
            b_grad: rng.gen_range(0.0..5.0),
            l_dec_func: rng.gen_range(0.0..5.0),
            l_dec_grad: rng.gen_range(0.0..5.0),
            c_input: rng.gen_range(0.0..5.0),
            l_agg: rng.gen_range(0.0..5.0),
            l_enc_func: rng.gen_range(0.0..5.0),
        };
        let base = decoder_grad_bound(&inputs).unwrap();
        for field in 0..6 {
            let bumped = decoder_grad_bound(&bump_field(&inputs, field, rng.gen_range(0.0..2.0)))
                .unwrap();
            assert!(
                bumped >= base - 1e-12 * base.max(1.0),
                "field {field} bump decreased bound: {base} -> {bumped}"
            );
        }
    }
}

#[test]
fn encoder_bound_is_monotone_in_every_field() {
    let mut rng = seeded_rng(0xe0c0);
    for _ in 0..2_000 {
        let n = rng.gen_range(1..=3);
        let inputs = EncoderBoundInputs {
            decoders: (0..n)
                .map(|_| DecoderTerm {
                    l_dec_func: rng.gen_range(0.0..4.0),
                    l_dec_grad: rng.gen_range(0.0..4.0),
                })
                .collect(),
            b_agg: rng.gen_range(0.0..4.0),
            l_agg_func: rng.gen_range(0.0..4.0),
            l_agg_grad_k: rng.gen_range(0.0..4.0),
            c_input: rng.gen_range(0.0..4.0),
        };
        let base = encoder_grad_bound(&inputs).unwrap();
        let delta = rng.gen_range(0.0..2.0);
        for field in 0..(4 + 2 * n) {
            let mut bumped = inputs.clone();
            match field {
                0 => bumped.b_agg += delta,
                1 => bumped.l_agg_func += delta,
                2 => bumped.l_agg_grad_k += delta,
                3 => bumped.c_input += delta,
                f => {
                    let idx = (f - 4) / 2;
                    if (f - 4) % 2 == 0 {
                        bumped.decoders[idx].l_dec_func += delta;
                    } else {
                        bumped.decoders[idx].l_dec_grad += delta;
                    }
                }
            }
            let value = encoder_grad_bound(&bumped).unwrap();
            assert!(
                value >= base - 1e-12 * base.max(1.0),
                "field {field} bump decreased bound: {base} -> {value}"
            );
        }
    }
}

#[test]
fn mlp_lipschitz_matches_svd_oracle_product() {
    let mut rng = seeded_rng(0x717e);
    for case in 0..50 {
        let depth = 1 + case % 3;
        let mut dims = vec![2 + case % 4];
        for _ in 0..depth {
            dims.push(2 + rng.gen_range(0..4));
        }
        let weights: Vec<_> = (0..depth)
            .map(|l| common::random_matrix(&mut rng, dims[l + 1], dims[l], 2.0))
            .collect();
        let acts: Vec<f64> = (0..depth).map(|_| rng.gen_range(0.2..2.0)).collect();

        let got = mlp_func_lipschitz(&weights, &acts).unwrap();
        let want: f64 = weights
            .iter()
            .zip(&acts)
            .map(|(w, &a)| common::svd_spectral_norm(w) * a)
            .product();
        assert!(
            (got - want).abs() <= 1e-6 * want.max(1.0),
            "case {case}: product {got} vs oracle {want}"
        );
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn attention_bounds_scale_as_stated(
        m in 0.0f64..4.0,
        r in 0.0f64..4.0,
        c in 0.0f64..8.0,
        scale in 0.1f64..3.0,
    ) {
        let func = attention_func_bound(m, r).unwrap();
        let func_scaled = attention_func_bound(scale * m, scale * r).unwrap();
        // quadratic in each of M and R jointly: quartic under a shared scale
        prop_assert!((func_scaled - scale.powi(4) * func).abs() <= 1e-9 * func.max(1.0));

        let grad = attention_grad_bound(c, m, r).unwrap();
        let grad_scaled = attention_grad_bound(c, scale * m, scale * r).unwrap();
        prop_assert!((grad_scaled - scale.powi(4) * grad).abs() <= 1e-9 * grad.max(1.0));
    }

    #[test]
    fn bounds_reject_any_negative_input(which in 0usize..4, value in -10.0f64..-0.001) {
        let err = match which {
            0 => attention_func_bound(value, 1.0).is_err(),
            1 => attention_grad_bound(1.0, value, 1.0).is_err(),
            2 => aggregation_bounds(&[1.0, value]).is_err(),
            _ => mlp_func_lipschitz(
                &[fuselab_core::linalg::Matrix::identity(2)],
                &[value],
            )
            .is_err(),
        };
        prop_assert!(err);
    }
}
