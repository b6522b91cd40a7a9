//! Sampling-based Lipschitz estimation.
//!
//! The estimators draw random pairs, evaluate a difference ratio, and keep
//! the maximum. Applied to a function they estimate its Lipschitz constant;
//! applied to a gradient map they estimate the gradient's Lipschitz
//! constant (the smoothness constant). Every estimate is a lower bound on
//! the true constant, so it can be checked against the closed-form bounds
//! in [`crate::bounds`].
//!
//! Each attempt derives its own RNG stream from the base seed, so results
//! are identical no matter how the attempts are scheduled across threads,
//! and growing the attempt count only appends new attempts to the stream.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Vector;
use crate::rng::{derive_seed, seeded_rng};

/// Default minimum pair distance; pairs closer than this are skipped to
/// avoid dividing by (nearly) zero.
pub const DEFAULT_EPSILON: f64 = 1e-9;

/// Axis-aligned box `[low, high]^dim` to draw sample points from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SamplingDomain {
    dim: usize,
    low: f64,
    high: f64,
}

impl SamplingDomain {
    pub fn new(dim: usize, low: f64, high: f64) -> Result<Self> {
        if dim == 0 {
            return Err(Error::invalid("sampling domain needs dim >= 1"));
        }
        if !low.is_finite() || !high.is_finite() || low >= high {
            return Err(Error::invalid(format!(
                "sampling domain needs finite low < high, got [{low}, {high}]"
            )));
        }
        Ok(Self { dim, low, high })
    }

    /// The default domain `[-1, 1]^dim`, matching z-scored data scale.
    pub fn unit(dim: usize) -> Self {
        Self { dim, low: -1.0, high: 1.0 }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn low(&self) -> f64 {
        self.low
    }

    pub fn high(&self) -> f64 {
        self.high
    }

    fn sample(&self, rng: &mut ChaCha8Rng) -> Vector {
        let raw = (0..self.dim).map(|_| rng.gen_range(self.low..self.high)).collect();
        Vector::from_raw(raw)
    }
}

/// Result of one estimation run. `pairs_evaluated + pairs_skipped` always
/// equals the requested attempt count.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LipschitzEstimate {
    pub value: f64,
    pub pairs_evaluated: usize,
    pub pairs_skipped: usize,
    pub seed: u64,
}

enum Attempt {
    Skipped,
    Ratio(f64),
    NonFinite(Vector),
}

fn distance(a: &Vector, b: &Vector) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::shape(format!(
            "pair members have dims {} and {}",
            a.len(),
            b.len()
        )));
    }
    let sum: f64 = a
        .as_slice()
        .iter()
        .zip(b.as_slice())
        .map(|(x, y)| (x - y) * (x - y))
        .sum();
    Ok(sum.sqrt())
}

fn check_attempt_args(n_samples: usize, epsilon: f64) -> Result<()> {
    if n_samples == 0 {
        return Err(Error::invalid("need at least one sample pair"));
    }
    if !epsilon.is_finite() || epsilon <= 0.0 {
        return Err(Error::invalid(format!("epsilon must be > 0, got {epsilon}")));
    }
    Ok(())
}

fn run_attempts<F, S>(
    f: &F,
    draw_pair: &S,
    n_samples: usize,
    epsilon: f64,
    seed: u64,
) -> Result<LipschitzEstimate>
where
    F: Fn(&Vector) -> Vector + Sync,
    S: Fn(&mut ChaCha8Rng) -> Result<(Vector, Vector)> + Sync,
{
    let outcomes: Vec<Result<Attempt>> = (0..n_samples as u64)
        .into_par_iter()
        .map(|attempt| {
            let mut rng = seeded_rng(derive_seed(seed, "pair", attempt));
            let (x, y) = draw_pair(&mut rng)?;
            let dist = distance(&x, &y)?;
            if dist <= epsilon {
                return Ok(Attempt::Skipped);
            }
            let fx = f(&x);
            if !fx.is_finite() {
                return Ok(Attempt::NonFinite(x));
            }
            let fy = f(&y);
            if !fy.is_finite() {
                return Ok(Attempt::NonFinite(y));
            }
            let diff = distance(&fx, &fy)?;
            Ok(Attempt::Ratio(diff / dist))
        })
        .collect();

    let mut value = 0.0f64;
    let mut evaluated = 0usize;
    let mut skipped = 0usize;
    for outcome in outcomes {
        match outcome? {
            Attempt::Skipped => skipped += 1,
            Attempt::Ratio(r) => {
                evaluated += 1;
                value = value.max(r);
            }
            Attempt::NonFinite(sample) => {
                return Err(Error::NonFiniteEvaluation { sample: sample.into_vec() })
            }
        }
    }
    if evaluated == 0 {
        return Err(Error::DegenerateDomain(format!(
            "all {n_samples} sampled pairs were within epsilon = {epsilon} of each other"
        )));
    }
    Ok(LipschitzEstimate { value, pairs_evaluated: evaluated, pairs_skipped: skipped, seed })
}

/// Estimates the Lipschitz constant of `f` as the largest difference ratio
/// `|f(x) - f(y)| / |x - y|` over `n_samples` random pairs from `domain`.
pub fn estimate_function_lipschitz<F>(
    f: F,
    domain: &SamplingDomain,
    n_samples: usize,
    epsilon: f64,
    seed: u64,
) -> Result<LipschitzEstimate>
where
    F: Fn(&Vector) -> Vector + Sync,
{
    check_attempt_args(n_samples, epsilon)?;
    let draw = |rng: &mut ChaCha8Rng| Ok((domain.sample(rng), domain.sample(rng)));
    run_attempts(&f, &draw, n_samples, epsilon, seed)
}

/// Estimates the Lipschitz constant of a gradient map, i.e. the smoothness
/// constant of the underlying function. Same ratio statistic as
/// [`estimate_function_lipschitz`], applied to `grad_f`.
pub fn estimate_gradient_lipschitz<G>(
    grad_f: G,
    domain: &SamplingDomain,
    n_samples: usize,
    epsilon: f64,
    seed: u64,
) -> Result<LipschitzEstimate>
where
    G: Fn(&Vector) -> Vector + Sync,
{
    check_attempt_args(n_samples, epsilon)?;
    let draw = |rng: &mut ChaCha8Rng| Ok((domain.sample(rng), domain.sample(rng)));
    run_attempts(&grad_f, &draw, n_samples, epsilon, seed)
}

/// Estimates the gradient-Lipschitz constant of a model component over real
/// data instead of a box domain: pairs are drawn uniformly with replacement
/// from `data_sample`, and the ratio is evaluated on the component's
/// input-gradient map (for an MLP, its flattened input Jacobian).
pub fn estimate_model_lipschitz<G>(
    input_gradient_map: G,
    data_sample: &[Vector],
    n_pairs: usize,
    epsilon: f64,
    seed: u64,
) -> Result<LipschitzEstimate>
where
    G: Fn(&Vector) -> Vector + Sync,
{
    check_attempt_args(n_pairs, epsilon)?;
    if data_sample.len() < 2 {
        return Err(Error::invalid(format!(
            "need at least 2 data points, got {}",
            data_sample.len()
        )));
    }
    let dim = data_sample[0].len();
    if let Some(bad) = data_sample.iter().find(|v| v.len() != dim) {
        return Err(Error::shape(format!(
            "data points mix dims {dim} and {}",
            bad.len()
        )));
    }
    let draw = |rng: &mut ChaCha8Rng| {
        let i = rng.gen_range(0..data_sample.len());
        let j = rng.gen_range(0..data_sample.len());
        Ok((data_sample[i].clone(), data_sample[j].clone()))
    };
    run_attempts(&input_gradient_map, &draw, n_pairs, epsilon, seed)
}
