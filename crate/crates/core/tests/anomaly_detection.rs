//! End-to-end detector behavior on held-out data: calibration of the
//! false-positive rate and separation of shifted latents.

use fuselab_core::anomaly::{roc_auc, AnomalyModel, Kernel};
use fuselab_core::linalg::Vector;
use fuselab_core::rng::seeded_rng;
use rand_distr::{Distribution, StandardNormal};

fn gaussian_cloud(n: usize, dim: usize, seed: u64) -> Vec<Vector> {
    let mut rng = seeded_rng(seed);
    (0..n)
        .map(|_| Vector::from_fn(dim, |_| StandardNormal.sample(&mut rng)))
        .collect()
}

#[test]
fn false_positive_rate_is_calibrated_on_held_out_clean_data() {
    let train = gaussian_cloud(400, 3, 501);
    let kernel = Kernel::rbf_median_heuristic(&train).unwrap();
    let model = AnomalyModel::fit(&train, kernel, 8).unwrap();
    assert_eq!(model.retained_components(), 8);

    let held_out = gaussian_cloud(400, 3, 502);
    let labels = vec![false; held_out.len()];
    let report = model.detect(&held_out, &labels).unwrap();
    assert!(
        (0.02..=0.08).contains(&report.false_positive_rate),
        "held-out false positive rate {} outside [0.02, 0.08]",
        report.false_positive_rate
    );
}

#[test]
fn shifted_latents_are_separated_from_clean_ones() {
    let train = gaussian_cloud(300, 3, 601);
    let kernel = Kernel::rbf_median_heuristic(&train).unwrap();
    let model = AnomalyModel::fit(&train, kernel, 8).unwrap();

    let clean = gaussian_cloud(200, 3, 602);
    let mut rng = seeded_rng(603);
    let shifted: Vec<Vector> = (0..200)
        .map(|_| {
            let offset: f64 = StandardNormal.sample(&mut rng);
            Vector::from_fn(3, |j| {
                let base: f64 = StandardNormal.sample(&mut rng);
                if j == 0 { base + 3.0 + 0.1 * offset } else { base }
            })
        })
        .collect();

    let mut scores = Vec::new();
    let mut labels = Vec::new();
    for x in &clean {
        scores.push(model.score(x).unwrap());
        labels.push(false);
    }
    for x in &shifted {
        scores.push(model.score(x).unwrap());
        labels.push(true);
    }
    let auc = roc_auc(&scores, &labels).unwrap();
    assert!(auc > 0.85, "auc {auc} too low for a 3-sigma shift");

    // detect agrees with score-then-threshold
    let all: Vec<Vector> = clean.iter().chain(&shifted).cloned().collect();
    let report = model.detect(&all, &labels).unwrap();
    assert_eq!(report.counts.total(), 400);
    assert!(report.true_positive_rate > 0.5);
    assert!(report.false_positive_rate < 0.15);
}
