//! Flat-vector Adam optimizer.

use crate::error::{Error, Result};

const BETA1: f64 = 0.9;
const BETA2: f64 = 0.999;
const EPS: f64 = 1e-8;

/// First and second moment accumulators plus the step counter used for
/// bias correction.
#[derive(Debug, Clone)]
pub struct AdamState {
    m: Vec<f64>,
    v: Vec<f64>,
    t: u64,
}

impl AdamState {
    pub fn new(param_count: usize) -> Self {
        Self { m: vec![0.0; param_count], v: vec![0.0; param_count], t: 0 }
    }

    pub fn steps_taken(&self) -> u64 {
        self.t
    }
}

/// One Adam update in place: `beta1 = 0.9`, `beta2 = 0.999`, `eps = 1e-8`,
/// with standard bias correction.
pub fn adam_step(
    params: &mut [f64],
    grads: &[f64],
    state: &mut AdamState,
    learning_rate: f64,
) -> Result<()> {
    if params.len() != grads.len() || params.len() != state.m.len() {
        return Err(Error::shape(format!(
            "{} params, {} grads, {} state entries",
            params.len(),
            grads.len(),
            state.m.len()
        )));
    }
    if !learning_rate.is_finite() || learning_rate <= 0.0 {
        return Err(Error::invalid(format!("learning rate must be > 0, got {learning_rate}")));
    }
    if grads.iter().any(|g| !g.is_finite()) {
        return Err(Error::TrainingDiverged("non-finite gradient in optimizer step".to_string()));
    }
    state.t += 1;
    let t = state.t as i32;
    let m_corr = 1.0 - BETA1.powi(t);
    let v_corr = 1.0 - BETA2.powi(t);
    for i in 0..params.len() {
        state.m[i] = BETA1 * state.m[i] + (1.0 - BETA1) * grads[i];
        state.v[i] = BETA2 * state.v[i] + (1.0 - BETA2) * grads[i] * grads[i];
        let m_hat = state.m[i] / m_corr;
        let v_hat = state.v[i] / v_corr;
        params[i] -= learning_rate * m_hat / (v_hat.sqrt() + EPS);
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_leaves_params_unchanged() {
        let mut params = vec![1.0, -2.0, 3.0];
        let mut state = AdamState::new(3);
        adam_step(&mut params, &[0.0; 3], &mut state, 0.1).unwrap();
        assert_eq!(params, vec![1.0, -2.0, 3.0]);
    }

    #[test]
    fn first_step_moves_each_coordinate_by_roughly_lr() {
        let mut params = vec![0.0, 0.0];
        let mut state = AdamState::new(2);
        adam_step(&mut params, &[5.0, -0.01], &mut state, 0.1).unwrap();
        // bias-corrected first step normalizes gradient magnitude away
        assert!((params[0] + 0.1).abs() < 1e-6);
        assert!((params[1] - 0.1).abs() < 1e-4);
    }

    #[test]
    fn quadratic_bowl_loss_decreases_monotonically_after_warmup() {
        // f(x) = |x - c|^2 / 2 with gradient x - c
        let c = [3.0, -1.0, 0.5];
        let mut x = vec![0.0; 3];
        let mut state = AdamState::new(3);
        let loss =
            |x: &[f64]| x.iter().zip(&c).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / 2.0;
        let mut prev = f64::INFINITY;
        for step in 0..100 {
            let grads: Vec<f64> = x.iter().zip(&c).map(|(a, b)| a - b).collect();
            adam_step(&mut x, &grads, &mut state, 0.05).unwrap();
            let now = loss(&x);
            if step >= 5 {
                assert!(now < prev, "loss rose from {prev} to {now} at step {step}");
            }
            prev = now;
        }
        assert!(prev < 1.0);
    }

    #[test]
    fn non_finite_gradient_is_a_divergence_error() {
        let mut params = vec![0.0];
        let mut state = AdamState::new(1);
        let err = adam_step(&mut params, &[f64::NAN], &mut state, 0.1);
        assert!(matches!(err, Err(Error::TrainingDiverged(_))));
    }

    #[test]
    fn mismatched_lengths_are_shape_errors() {
        let mut params = vec![0.0];
        let mut state = AdamState::new(2);
        assert!(adam_step(&mut params, &[1.0], &mut state, 0.1).is_err());
    }
}
