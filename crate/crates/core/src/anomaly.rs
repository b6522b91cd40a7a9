//! Latent-space fault detection via kernel PCA and Mahalanobis scoring.
//!
//! A detector is fitted on clean latent vectors only: the centered kernel
//! Gram matrix is eigendecomposed, training latents are projected onto the
//! top components, and the projected scores define a Gaussian model
//! (mean + regularized covariance). A sample is flagged as faulty when the
//! Mahalanobis distance of its projection exceeds the 95th percentile of
//! the clean training distances.

use crate::error::{Error, Result};
use crate::linalg::{Matrix, Vector};

/// Eigenvalues at or below this floor are treated as numerical zeros and
/// their components dropped from the projection.
pub const EIGENVALUE_FLOOR: f64 = 1e-10;

/// Default number of principal components retained by the projection.
pub const DEFAULT_COMPONENTS: usize = 8;

/// Kernel used for the Gram matrix.
#[derive(Debug, Clone, PartialEq)]
pub enum Kernel {
    /// exp(-gamma * ||a - b||^2).
    Rbf { gamma: f64 },
    /// Plain dot product; reduces kernel PCA to ordinary PCA.
    Linear,
}

impl Kernel {
    /// RBF kernel with the median heuristic bandwidth:
    /// gamma = 1 / (2 * median^2) over pairwise training distances.
    pub fn rbf_median_heuristic(latents: &[Vector]) -> Result<Self> {
        if latents.len() < 2 {
            return Err(Error::InvalidInput(
                "median heuristic needs at least 2 latents".into(),
            ));
        }
        let mut dists = Vec::with_capacity(latents.len() * (latents.len() - 1) / 2);
        for i in 0..latents.len() {
            for j in (i + 1)..latents.len() {
                dists.push(latents[i].sub(&latents[j]).norm());
            }
        }
        dists.sort_by(|a, b| a.total_cmp(b));
        let mid = dists.len() / 2;
        let median = if dists.len() % 2 == 1 {
            dists[mid]
        } else {
            0.5 * (dists[mid - 1] + dists[mid])
        };
        if !(median > 0.0) || !median.is_finite() {
            return Err(Error::DegenerateInput(format!(
                "median pairwise distance {median} does not define a bandwidth"
            )));
        }
        Ok(Kernel::Rbf { gamma: 1.0 / (2.0 * median * median) })
    }

    fn validate(&self) -> Result<()> {
        match self {
            Kernel::Rbf { gamma } if !(gamma.is_finite() && *gamma > 0.0) => Err(
                Error::InvalidInput(format!("rbf gamma must be finite and positive, got {gamma}")),
            ),
            _ => Ok(()),
        }
    }

    fn eval(&self, a: &Vector, b: &Vector) -> f64 {
        match self {
            Kernel::Rbf { gamma } => {
                let d = a.sub(b);
                (-gamma * d.dot(&d)).exp()
            }
            Kernel::Linear => a.dot(b),
        }
    }
}

/// Fitted kernel PCA projection with Mahalanobis statistics and a
/// 95th-percentile decision threshold.
#[derive(Debug, Clone)]
pub struct AnomalyModel {
    kernel: Kernel,
    train_latents: Vec<Vector>,
    // centering statistics of the training Gram matrix
    row_means: Vec<f64>,
    grand_mean: f64,
    // row l holds the unit eigenvector for eigenvalues[l]
    components: Matrix,
    eigenvalues: Vec<f64>,
    requested_components: usize,
    score_mean: Vector,
    score_cov_inverse: Matrix,
    threshold: f64,
}

impl AnomalyModel {
    /// Fits the detector on clean latents. Components whose centered-Gram
    /// eigenvalue is at or below [`EIGENVALUE_FLOOR`] are dropped; when that
    /// leaves fewer than `k_components`, the model is fitted with the reduced
    /// count and [`AnomalyModel::was_reduced`] reports it.
    pub fn fit(latents_clean: &[Vector], kernel: Kernel, k_components: usize) -> Result<Self> {
        kernel.validate()?;
        if k_components == 0 {
            return Err(Error::InvalidInput("k_components must be at least 1".into()));
        }
        let n = latents_clean.len();
        if n < 2 {
            return Err(Error::InvalidInput(format!(
                "need at least 2 clean latents, got {n}"
            )));
        }
        if n < k_components + 1 {
            return Err(Error::InvalidInput(format!(
                "need at least k_components + 1 = {} latents, got {n}",
                k_components + 1
            )));
        }
        let dim = latents_clean[0].len();
        for (i, x) in latents_clean.iter().enumerate() {
            if x.len() != dim {
                return Err(Error::ShapeMismatch(format!(
                    "latent {i} has dim {}, expected {dim}",
                    x.len()
                )));
            }
            if !x.is_finite() {
                return Err(Error::InvalidInput(format!("latent {i} has non-finite entries")));
            }
        }

        let mut gram = Matrix::zeros(n, n);
        for i in 0..n {
            for j in i..n {
                let k = kernel.eval(&latents_clean[i], &latents_clean[j]);
                gram.set(i, j, k);
                gram.set(j, i, k);
            }
        }
        let row_means: Vec<f64> =
            (0..n).map(|i| gram.row(i).iter().sum::<f64>() / n as f64).collect();
        let grand_mean = row_means.iter().sum::<f64>() / n as f64;
        let centered = Matrix::from_fn(n, n, |i, j| {
            gram.get(i, j) - row_means[i] - row_means[j] + grand_mean
        });

        let (eigenvalues_all, eigenvectors) = symmetric_eigen(&centered);
        let retained = eigenvalues_all
            .iter()
            .take(k_components)
            .filter(|&&l| l > EIGENVALUE_FLOOR)
            .count();
        if retained == 0 {
            return Err(Error::DegenerateInput(
                "centered Gram matrix has no variance above the eigenvalue floor \
                 (are all latents identical?)"
                    .into(),
            ));
        }
        let eigenvalues = eigenvalues_all[..retained].to_vec();
        let components =
            Matrix::from_fn(retained, n, |l, i| eigenvectors.get(l, i));

        // training score s_i[l] = sqrt(lambda_l) * a_l[i]
        let scores: Vec<Vector> = (0..n)
            .map(|i| {
                Vector::from_fn(retained, |l| eigenvalues[l].sqrt() * components.get(l, i))
            })
            .collect();
        let score_mean = Vector::from_fn(retained, |l| {
            scores.iter().map(|s| s.as_slice()[l]).sum::<f64>() / n as f64
        });
        let mut cov = Matrix::zeros(retained, retained);
        for s in &scores {
            let d = s.sub(&score_mean);
            cov.add_scaled(1.0 / (n - 1) as f64, &Matrix::outer(&d, &d));
        }
        let trace: f64 = (0..retained).map(|l| cov.get(l, l)).sum();
        let epsilon = 1e-8 * trace / retained as f64;
        for l in 0..retained {
            cov.set(l, l, cov.get(l, l) + epsilon);
        }
        let score_cov_inverse = spd_inverse(&cov)?;

        let mut model = AnomalyModel {
            kernel,
            train_latents: latents_clean.to_vec(),
            row_means,
            grand_mean,
            components,
            eigenvalues,
            requested_components: k_components,
            score_mean,
            score_cov_inverse,
            threshold: f64::INFINITY,
        };
        let mut train_dists: Vec<f64> =
            scores.iter().map(|s| model.mahalanobis(s)).collect();
        train_dists.sort_by(|a, b| a.total_cmp(b));
        model.threshold = percentile_95(&train_dists);
        Ok(model)
    }

    /// Projects a latent onto the retained kernel principal components using
    /// the centered-kernel formula against the stored training latents.
    pub fn project(&self, latent: &Vector) -> Result<Vector> {
        let dim = self.train_latents[0].len();
        if latent.len() != dim {
            return Err(Error::ShapeMismatch(format!(
                "latent has dim {}, model expects {dim}",
                latent.len()
            )));
        }
        let n = self.train_latents.len();
        let kx: Vec<f64> =
            self.train_latents.iter().map(|t| self.kernel.eval(latent, t)).collect();
        let kx_mean = kx.iter().sum::<f64>() / n as f64;
        let centered: Vec<f64> = (0..n)
            .map(|j| kx[j] - kx_mean - self.row_means[j] + self.grand_mean)
            .collect();
        Ok(Vector::from_fn(self.eigenvalues.len(), |l| {
            let dot: f64 =
                (0..n).map(|j| self.components.get(l, j) * centered[j]).sum();
            dot / self.eigenvalues[l].sqrt()
        }))
    }

    /// Mahalanobis distance of the latent's projection from the clean score
    /// distribution. Always non-negative.
    pub fn score(&self, latent: &Vector) -> Result<f64> {
        Ok(self.mahalanobis(&self.project(latent)?))
    }

    fn mahalanobis(&self, s: &Vector) -> f64 {
        let d = s.sub(&self.score_mean);
        let quad = d.dot(&self.score_cov_inverse.matvec(&d));
        quad.max(0.0).sqrt()
    }

    /// Scores every latent and labels it faulty when the score exceeds the
    /// fitted threshold, then tallies the confusion matrix against the given
    /// ground-truth labels (`true` = faulty).
    pub fn detect(&self, latents: &[Vector], true_faulty: &[bool]) -> Result<DetectionReport> {
        if latents.is_empty() {
            return Err(Error::InvalidInput("detect needs at least one latent".into()));
        }
        if latents.len() != true_faulty.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} latents but {} labels",
                latents.len(),
                true_faulty.len()
            )));
        }
        let mut samples = Vec::with_capacity(latents.len());
        let mut counts = ConfusionCounts::default();
        for (latent, &truth) in latents.iter().zip(true_faulty) {
            let score = self.score(latent)?;
            let predicted = score > self.threshold;
            match (truth, predicted) {
                (true, true) => counts.true_positives += 1,
                (true, false) => counts.false_negatives += 1,
                (false, true) => counts.false_positives += 1,
                (false, false) => counts.true_negatives += 1,
            }
            samples.push(DetectionSample { score, true_faulty: truth, predicted_faulty: predicted });
        }
        Ok(DetectionReport::new(samples, counts, self.threshold))
    }

    pub fn kernel(&self) -> &Kernel {
        &self.kernel
    }

    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    /// Eigenvalues of the retained components, descending.
    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn requested_components(&self) -> usize {
        self.requested_components
    }

    pub fn retained_components(&self) -> usize {
        self.eigenvalues.len()
    }

    /// True when rank deficiency forced fewer components than requested.
    pub fn was_reduced(&self) -> bool {
        self.retained_components() < self.requested_components
    }

    pub fn score_mean(&self) -> &Vector {
        &self.score_mean
    }

    pub fn score_cov_inverse(&self) -> &Matrix {
        &self.score_cov_inverse
    }
}

/// One scored sample of a detection run.
#[derive(Debug, Clone, PartialEq)]
pub struct DetectionSample {
    pub score: f64,
    pub true_faulty: bool,
    pub predicted_faulty: bool,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ConfusionCounts {
    pub true_positives: usize,
    pub false_positives: usize,
    pub true_negatives: usize,
    pub false_negatives: usize,
}

impl ConfusionCounts {
    pub fn total(&self) -> usize {
        self.true_positives + self.false_positives + self.true_negatives + self.false_negatives
    }
}

/// Result of scoring a batch of latents against a fitted detector.
#[derive(Debug, Clone, PartialEq)]
pub struct DetectionReport {
    pub samples: Vec<DetectionSample>,
    pub counts: ConfusionCounts,
    pub threshold: f64,
    /// TP / (TP + FN); 0 when there are no faulty samples.
    pub true_positive_rate: f64,
    /// FP / (FP + TN); 0 when there are no clean samples.
    pub false_positive_rate: f64,
    pub accuracy: f64,
    /// TP / (TP + FP); 0 when nothing was flagged.
    pub precision: f64,
}

impl DetectionReport {
    fn new(samples: Vec<DetectionSample>, counts: ConfusionCounts, threshold: f64) -> Self {
        let ratio = |num: usize, den: usize| if den == 0 { 0.0 } else { num as f64 / den as f64 };
        let c = &counts;
        DetectionReport {
            true_positive_rate: ratio(c.true_positives, c.true_positives + c.false_negatives),
            false_positive_rate: ratio(c.false_positives, c.false_positives + c.true_negatives),
            accuracy: ratio(c.true_positives + c.true_negatives, c.total()),
            precision: ratio(c.true_positives, c.true_positives + c.false_positives),
            samples,
            counts,
            threshold,
        }
    }

    /// Plain-text summary of counts, rates, and the decision threshold.
    pub fn summary(&self) -> String {
        let c = &self.counts;
        format!(
            "samples: {} (faulty: {})\n\
             threshold: {:.6}\n\
             confusion: TP={} FP={} TN={} FN={}\n\
             true positive rate: {:.4}\n\
             false positive rate: {:.4}\n\
             accuracy: {:.4}\n\
             precision: {:.4}\n",
            c.total(),
            c.true_positives + c.false_negatives,
            self.threshold,
            c.true_positives,
            c.false_positives,
            c.true_negatives,
            c.false_negatives,
            self.true_positive_rate,
            self.false_positive_rate,
            self.accuracy,
            self.precision,
        )
    }
}

/// Area under the ROC curve of `scores` against boolean labels
/// (`true` = positive class), using average ranks for ties.
pub fn roc_auc(scores: &[f64], labels: &[bool]) -> Result<f64> {
    if scores.len() != labels.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} scores but {} labels",
            scores.len(),
            labels.len()
        )));
    }
    let n_pos = labels.iter().filter(|&&l| l).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::InvalidInput(
            "roc auc needs both positive and negative samples".into(),
        ));
    }
    if scores.iter().any(|s| !s.is_finite()) {
        return Err(Error::InvalidInput("roc auc scores must be finite".into()));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    // average ranks over tied scores (1-based)
    let mut rank_sum_pos = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        let avg_rank = (i + j) as f64 / 2.0 + 1.0;
        for &idx in &order[i..=j] {
            if labels[idx] {
                rank_sum_pos += avg_rank;
            }
        }
        i = j + 1;
    }
    let u = rank_sum_pos - (n_pos * (n_pos + 1)) as f64 / 2.0;
    Ok(u / (n_pos as f64 * n_neg as f64))
}

/// Threshold position of the 95th percentile in an ascending-sorted slice.
fn percentile_95(sorted: &[f64]) -> f64 {
    let n = sorted.len();
    let idx = ((0.95 * n as f64).ceil() as usize).clamp(1, n) - 1;
    sorted[idx]
}

/// Eigendecomposition of a symmetric matrix by cyclic Jacobi rotations.
/// Returns eigenvalues in descending order and the matching unit
/// eigenvectors as rows.
fn symmetric_eigen(a: &Matrix) -> (Vec<f64>, Matrix) {
    let n = a.rows();
    debug_assert_eq!(n, a.cols());
    let mut m = a.clone();
    // columns of v accumulate the eigenvectors
    let mut v = Matrix::identity(n);
    let frob = m.as_slice().iter().map(|x| x * x).sum::<f64>().sqrt();
    let tol = 1e-13 * frob.max(f64::MIN_POSITIVE);
    for _sweep in 0..64 {
        let mut off = 0.0f64;
        for p in 0..n {
            for q in (p + 1)..n {
                off += m.get(p, q).powi(2);
            }
        }
        if (2.0 * off).sqrt() <= tol {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = m.get(p, q);
                if apq == 0.0 {
                    continue;
                }
                let app = m.get(p, p);
                let aqq = m.get(q, q);
                let theta = (aqq - app) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                m.set(p, p, app - t * apq);
                m.set(q, q, aqq + t * apq);
                m.set(p, q, 0.0);
                m.set(q, p, 0.0);
                for i in 0..n {
                    if i != p && i != q {
                        let aip = m.get(i, p);
                        let aiq = m.get(i, q);
                        m.set(i, p, c * aip - s * aiq);
                        m.set(p, i, c * aip - s * aiq);
                        m.set(i, q, s * aip + c * aiq);
                        m.set(q, i, s * aip + c * aiq);
                    }
                    let vip = v.get(i, p);
                    let viq = v.get(i, q);
                    v.set(i, p, c * vip - s * viq);
                    v.set(i, q, s * vip + c * viq);
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| m.get(j, j).total_cmp(&m.get(i, i)));
    let eigenvalues: Vec<f64> = order.iter().map(|&i| m.get(i, i)).collect();
    let eigenvectors = Matrix::from_fn(n, n, |l, i| v.get(i, order[l]));
    (eigenvalues, eigenvectors)
}

/// Inverse of a symmetric positive definite matrix via Cholesky.
fn spd_inverse(a: &Matrix) -> Result<Matrix> {
    let n = a.rows();
    debug_assert_eq!(n, a.cols());
    // a = l * l^T with l lower triangular
    let mut l = Matrix::zeros(n, n);
    for i in 0..n {
        for j in 0..=i {
            let mut sum = a.get(i, j);
            for k in 0..j {
                sum -= l.get(i, k) * l.get(j, k);
            }
            if i == j {
                if sum <= 0.0 || !sum.is_finite() {
                    return Err(Error::DegenerateInput(format!(
                        "covariance is not positive definite (pivot {sum} at {i})"
                    )));
                }
                l.set(i, j, sum.sqrt());
            } else {
                l.set(i, j, sum / l.get(j, j));
            }
        }
    }
    // invert l by forward substitution, then a^-1 = l^-T * l^-1
    let mut linv = Matrix::zeros(n, n);
    for j in 0..n {
        linv.set(j, j, 1.0 / l.get(j, j));
        for i in (j + 1)..n {
            let mut sum = 0.0;
            for k in j..i {
                sum -= l.get(i, k) * linv.get(k, j);
            }
            linv.set(i, j, sum / l.get(i, i));
        }
    }
    Ok(Matrix::from_fn(n, n, |i, j| {
        (i.max(j)..n).map(|k| linv.get(k, i) * linv.get(k, j)).sum()
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded_rng;
    use rand::Rng;

    fn random_latents(n: usize, dim: usize, seed: u64) -> Vec<Vector> {
        let mut rng = seeded_rng(seed);
        (0..n)
            .map(|_| Vector::from_fn(dim, |_| rng.gen_range(-1.0..1.0)))
            .collect()
    }

    #[test]
    fn jacobi_recovers_known_2x2_spectrum() {
        let a = Matrix::from_raw(2, 2, vec![2.0, 1.0, 1.0, 2.0]);
        let (vals, vecs) = symmetric_eigen(&a);
        assert!((vals[0] - 3.0).abs() < 1e-12);
        assert!((vals[1] - 1.0).abs() < 1e-12);
        let inv_sqrt2 = std::f64::consts::FRAC_1_SQRT_2;
        let top: Vec<f64> = vecs.row(0).to_vec();
        assert!((top[0].abs() - inv_sqrt2).abs() < 1e-12);
        assert!((top[1].abs() - inv_sqrt2).abs() < 1e-12);
        assert!((top[0] - top[1]).abs() < 1e-12 || (top[0] + top[1]).abs() < 1e-12);
    }

    #[test]
    fn jacobi_reconstructs_random_symmetric_matrix() {
        let mut rng = seeded_rng(7);
        let n = 6;
        let mut a = Matrix::zeros(n, n);
        for i in 0..n {
            for j in i..n {
                let x = rng.gen_range(-1.0..1.0);
                a.set(i, j, x);
                a.set(j, i, x);
            }
        }
        let (vals, vecs) = symmetric_eigen(&a);
        for w in vals.windows(2) {
            assert!(w[0] >= w[1]);
        }
        // a == sum_l vals[l] * v_l v_l^T
        let mut rebuilt = Matrix::zeros(n, n);
        for l in 0..n {
            let v = vecs.row_vector(l);
            rebuilt.add_scaled(vals[l], &Matrix::outer(&v, &v));
        }
        for (x, y) in a.as_slice().iter().zip(rebuilt.as_slice()) {
            assert!((x - y).abs() < 1e-10);
        }
        // eigenvectors orthonormal
        for l in 0..n {
            for k in l..n {
                let dot = vecs.row_vector(l).dot(&vecs.row_vector(k));
                let expect = if l == k { 1.0 } else { 0.0 };
                assert!((dot - expect).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn spd_inverse_matches_identity_product() {
        let mut rng = seeded_rng(11);
        let n = 5;
        let b = Matrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0));
        // b b^T + I is symmetric positive definite
        let mut a = b.matmul(&b.transpose());
        for i in 0..n {
            a.set(i, i, a.get(i, i) + 1.0);
        }
        let inv = spd_inverse(&a).unwrap();
        let prod = a.matmul(&inv);
        for i in 0..n {
            for j in 0..n {
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!((prod.get(i, j) - expect).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn fit_rejects_degenerate_and_undersized_inputs() {
        let x = Vector::from_raw(vec![0.5, -0.25]);
        let identical = vec![x.clone(); 12];
        match AnomalyModel::fit(&identical, Kernel::Linear, 3) {
            Err(Error::DegenerateInput(_)) => {}
            other => panic!("expected degenerate input, got {other:?}"),
        }
        match AnomalyModel::fit(&[x.clone()], Kernel::Linear, 1) {
            Err(Error::InvalidInput(_)) => {}
            other => panic!("expected invalid input, got {other:?}"),
        }
        match AnomalyModel::fit(&random_latents(4, 2, 1), Kernel::Linear, 4) {
            Err(Error::InvalidInput(_)) => {}
            other => panic!("expected invalid input for n < k+1, got {other:?}"),
        }
        match AnomalyModel::fit(&random_latents(6, 2, 1), Kernel::Linear, 0) {
            Err(Error::InvalidInput(_)) => {}
            other => panic!("expected invalid input for k=0, got {other:?}"),
        }
        match AnomalyModel::fit(&random_latents(6, 2, 1), Kernel::Rbf { gamma: -1.0 }, 2) {
            Err(Error::InvalidInput(_)) => {}
            other => panic!("expected invalid gamma, got {other:?}"),
        }
    }

    #[test]
    fn score_matches_direct_quadratic_form() {
        let latents = random_latents(30, 3, 42);
        let kernel = Kernel::rbf_median_heuristic(&latents).unwrap();
        let model = AnomalyModel::fit(&latents, kernel, 4).unwrap();
        let mut rng = seeded_rng(43);
        for _ in 0..20 {
            let probe = Vector::from_fn(3, |_| rng.gen_range(-2.0..2.0));
            let s = model.project(&probe).unwrap();
            let d = s.sub(model.score_mean());
            let quad: f64 = (0..d.len())
                .map(|i| {
                    (0..d.len())
                        .map(|j| {
                            d.as_slice()[i]
                                * model.score_cov_inverse().get(i, j)
                                * d.as_slice()[j]
                        })
                        .sum::<f64>()
                })
                .sum();
            let oracle = quad.max(0.0).sqrt();
            let got = model.score(&probe).unwrap();
            assert!((got - oracle).abs() < 1e-10, "score {got} vs oracle {oracle}");
            assert!(got >= 0.0);
        }
    }

    #[test]
    fn mahalanobis_trivial_cases() {
        let latents = random_latents(20, 2, 5);
        let mut model = AnomalyModel::fit(&latents, Kernel::Linear, 2).unwrap();
        // projection equal to the mean scores zero
        let at_mean = model.score_mean.clone();
        assert!(model.mahalanobis(&at_mean).abs() < 1e-15);
        // identity covariance turns the distance Euclidean
        let k = model.retained_components();
        model.score_cov_inverse = Matrix::identity(k);
        let s = Vector::from_fn(k, |i| i as f64 + 1.0);
        let expect = s.sub(&model.score_mean).norm();
        assert!((model.mahalanobis(&s) - expect).abs() < 1e-12);
    }

    #[test]
    fn linear_kernel_matches_plain_pca_oracle() {
        let dim = 3;
        let raw = random_latents(25, dim, 99);
        // mean-center so both sides see the same data
        let mean = Vector::from_fn(dim, |j| {
            raw.iter().map(|x| x.as_slice()[j]).sum::<f64>() / raw.len() as f64
        });
        let latents: Vec<Vector> = raw.iter().map(|x| x.sub(&mean)).collect();
        let model = AnomalyModel::fit(&latents, Kernel::Linear, 2).unwrap();

        // independent pca oracle: power iteration with deflation on the
        // scatter matrix x^t x
        let n = latents.len();
        let mut scatter = Matrix::zeros(dim, dim);
        for x in &latents {
            scatter.add_scaled(1.0, &Matrix::outer(x, x));
        }
        let mut axes: Vec<Vector> = Vec::new();
        for _ in 0..2 {
            let mut v = Vector::from_fn(dim, |i| 1.0 / (i + 1) as f64);
            for _ in 0..20_000 {
                let mut w = scatter.matvec(&v);
                for a in &axes {
                    let proj = w.dot(a);
                    w.add_scaled(-proj, a);
                }
                let norm = w.norm();
                v = w.scaled(1.0 / norm);
            }
            axes.push(v);
        }

        for component in 0..2 {
            let kpca: Vec<f64> = latents
                .iter()
                .map(|x| model.project(x).unwrap().as_slice()[component].to_owned())
                .collect();
            let pca: Vec<f64> = latents.iter().map(|x| x.dot(&axes[component])).collect();
            let same: f64 =
                kpca.iter().zip(&pca).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
            let flipped: f64 =
                kpca.iter().zip(&pca).map(|(a, b)| (a + b).powi(2)).sum::<f64>().sqrt();
            assert!(
                same.min(flipped) < 1e-8 * (n as f64).sqrt(),
                "component {component}: kpca and pca scores differ ({same}, {flipped})"
            );
        }
    }

    #[test]
    fn five_percent_of_training_data_exceeds_threshold() {
        let latents = random_latents(100, 3, 17);
        let kernel = Kernel::rbf_median_heuristic(&latents).unwrap();
        let model = AnomalyModel::fit(&latents, kernel, 4).unwrap();
        let above = latents
            .iter()
            .filter(|x| model.score(x).unwrap() > model.threshold())
            .count();
        assert!((4..=6).contains(&above), "{above} of 100 above threshold");
    }

    #[test]
    fn rbf_scores_are_translation_invariant() {
        let latents = random_latents(24, 3, 23);
        let shift = Vector::from_raw(vec![5.0, -3.0, 2.5]);
        let shifted: Vec<Vector> = latents.iter().map(|x| x.add(&shift)).collect();
        let kernel = Kernel::Rbf { gamma: 0.7 };
        let base = AnomalyModel::fit(&latents, kernel.clone(), 4).unwrap();
        let moved = AnomalyModel::fit(&shifted, kernel, 4).unwrap();
        let mut rng = seeded_rng(24);
        for _ in 0..10 {
            let probe = Vector::from_fn(3, |_| rng.gen_range(-2.0..2.0));
            let a = base.score(&probe).unwrap();
            let b = moved.score(&probe.add(&shift)).unwrap();
            assert!((a - b).abs() < 1e-8, "translation changed score: {a} vs {b}");
        }
        assert!((base.threshold() - moved.threshold()).abs() < 1e-8);
    }

    #[test]
    fn median_heuristic_matches_hand_computation() {
        let latents = vec![
            Vector::from_raw(vec![0.0]),
            Vector::from_raw(vec![1.0]),
            Vector::from_raw(vec![3.0]),
        ];
        // pairwise distances 1, 3, 2 -> median 2 -> gamma = 1/8
        match Kernel::rbf_median_heuristic(&latents).unwrap() {
            Kernel::Rbf { gamma } => assert!((gamma - 0.125).abs() < 1e-15),
            other => panic!("unexpected kernel {other:?}"),
        }
    }

    #[test]
    fn detect_counts_and_errors() {
        let latents = random_latents(40, 2, 31);
        let model = AnomalyModel::fit(&latents, Kernel::Linear, 3).unwrap();
        let eval = random_latents(30, 2, 32);
        // labels chosen to match the decision exactly: perfect confusion matrix
        let labels: Vec<bool> =
            eval.iter().map(|x| model.score(x).unwrap() > model.threshold()).collect();
        let report = model.detect(&eval, &labels).unwrap();
        assert_eq!(report.counts.total(), eval.len());
        assert_eq!(report.counts.false_positives, 0);
        assert_eq!(report.counts.false_negatives, 0);
        assert_eq!(report.accuracy, 1.0);
        assert_eq!(report.samples.len(), eval.len());
        let flagged = labels.iter().filter(|&&l| l).count();
        assert_eq!(report.counts.true_positives, flagged);
        assert!(report.summary().contains("confusion: TP="));

        match model.detect(&[], &[]) {
            Err(Error::InvalidInput(_)) => {}
            other => panic!("expected invalid input, got {other:?}"),
        }
        match model.detect(&eval, &labels[..5]) {
            Err(Error::ShapeMismatch(_)) => {}
            other => panic!("expected shape mismatch, got {other:?}"),
        }
    }

    #[test]
    fn roc_auc_hand_cases() {
        let perfect = roc_auc(&[0.1, 0.2, 0.8, 0.9], &[false, false, true, true]).unwrap();
        assert_eq!(perfect, 1.0);
        let inverted = roc_auc(&[0.9, 0.8, 0.2, 0.1], &[false, false, true, true]).unwrap();
        assert_eq!(inverted, 0.0);
        let tied = roc_auc(&[1.0, 1.0], &[true, false]).unwrap();
        assert!((tied - 0.5).abs() < 1e-15);
        // one inversion among 2x2 pairs: auc = 3/4
        let mixed = roc_auc(&[0.1, 0.6, 0.4, 0.9], &[false, false, true, true]).unwrap();
        assert!((mixed - 0.75).abs() < 1e-15);
        assert!(roc_auc(&[1.0, 2.0], &[true, true]).is_err());
        assert!(roc_auc(&[1.0], &[true, false]).is_err());
    }

    #[test]
    fn far_outliers_score_above_threshold_under_linear_kernel() {
        let latents = random_latents(60, 3, 77);
        let model = AnomalyModel::fit(&latents, Kernel::Linear, 3).unwrap();
        let mut rng = seeded_rng(78);
        for _ in 0..10 {
            let far = Vector::from_fn(3, |_| 40.0 + rng.gen_range(0.0..1.0));
            let score = model.score(&far).unwrap();
            assert!(
                score > model.threshold(),
                "outlier score {score} under threshold {}",
                model.threshold()
            );
        }
    }

    #[test]
    fn rbf_scores_saturate_in_the_far_field() {
        // far outside the training support every kernel value vanishes, so
        // all distant probes collapse onto one fixed projection; the
        // detector is a near-field instrument under the rbf kernel
        let latents = random_latents(60, 3, 77);
        let kernel = Kernel::rbf_median_heuristic(&latents).unwrap();
        let model = AnomalyModel::fit(&latents, kernel, 4).unwrap();
        let a = model.score(&Vector::from_raw(vec![50.0, 0.0, 0.0])).unwrap();
        let b = model.score(&Vector::from_raw(vec![0.0, -60.0, 30.0])).unwrap();
        assert!((a - b).abs() < 1e-8, "far-field scores differ: {a} vs {b}");
    }

    #[test]
    fn rank_deficient_data_reduces_components_with_flag() {
        // 1-dimensional structure embedded in 3 dims: linear kernel has rank 1
        let mut rng = seeded_rng(9);
        let dir = Vector::from_raw(vec![1.0, 2.0, -1.0]);
        let latents: Vec<Vector> = (0..12)
            .map(|_| dir.scaled(rng.gen_range(-1.0f64..1.0)))
            .collect();
        let model = AnomalyModel::fit(&latents, Kernel::Linear, 3).unwrap();
        assert_eq!(model.retained_components(), 1);
        assert!(model.was_reduced());
        assert_eq!(model.requested_components(), 3);
    }
}
