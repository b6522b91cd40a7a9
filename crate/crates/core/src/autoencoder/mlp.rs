//! Dense MLP building block used for every encoder and decoder.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{Matrix, Vector};
use crate::rng::{derive_seed, seeded_rng};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Relu,
    Identity,
}

impl Activation {
    fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Relu => x.max(0.0),
            Activation::Identity => x,
        }
    }

    /// Derivative at `x`; the ReLU kink at zero takes the left value 0.
    fn derivative(self, x: f64) -> f64 {
        match self {
            Activation::Relu => {
                if x > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Identity => 1.0,
        }
    }

    pub fn lipschitz(self) -> f64 {
        1.0
    }
}

/// Architecture of an MLP: layer widths from input to output and one
/// activation per affine layer.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MlpSpec {
    pub layer_widths: Vec<usize>,
    pub activations: Vec<Activation>,
}

impl MlpSpec {
    pub fn new(layer_widths: Vec<usize>, activations: Vec<Activation>) -> Result<Self> {
        let spec = Self { layer_widths, activations };
        spec.validate()?;
        Ok(spec)
    }

    /// Widths with ReLU on every layer except an Identity output layer.
    pub fn relu_stack(layer_widths: Vec<usize>) -> Result<Self> {
        let n_layers = layer_widths.len().saturating_sub(1);
        let mut activations = vec![Activation::Relu; n_layers];
        if let Some(last) = activations.last_mut() {
            *last = Activation::Identity;
        }
        Self::new(layer_widths, activations)
    }

    pub fn validate(&self) -> Result<()> {
        if self.layer_widths.len() < 2 {
            return Err(Error::invalid("mlp spec needs at least input and output widths"));
        }
        if self.layer_widths.iter().any(|&w| w == 0) {
            return Err(Error::invalid("mlp layer widths must be >= 1"));
        }
        if self.activations.len() != self.layer_widths.len() - 1 {
            return Err(Error::invalid(format!(
                "{} affine layers need {} activations, got {}",
                self.layer_widths.len() - 1,
                self.layer_widths.len() - 1,
                self.activations.len()
            )));
        }
        Ok(())
    }

    pub fn input_dim(&self) -> usize {
        self.layer_widths[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.layer_widths.last().unwrap()
    }
}

/// A dense network `x -> act_L(W_L ... act_1(W_1 x + b_1) ... + b_L)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    weights: Vec<Matrix>,
    biases: Vec<Vector>,
    activations: Vec<Activation>,
}

/// Cached activations from one forward pass, consumed by `backward`.
pub struct MlpCache {
    /// `post[0]` is the input; `post[l]` the output of layer `l`.
    post: Vec<Vector>,
    /// Pre-activation values of each layer.
    pre: Vec<Vector>,
}

impl MlpCache {
    pub fn output(&self) -> &Vector {
        self.post.last().unwrap()
    }
}

/// Per-layer parameter gradients, matching the shapes of the network.
#[derive(Debug, Clone)]
pub struct MlpGrads {
    pub weights: Vec<Matrix>,
    pub biases: Vec<Vector>,
}

impl Mlp {
    /// Seeded initialization: every weight and bias uniform in
    /// `[-1/sqrt(fan_in), 1/sqrt(fan_in)]`.
    pub fn initialized(spec: &MlpSpec, seed: u64) -> Result<Self> {
        spec.validate()?;
        let mut weights = Vec::new();
        let mut biases = Vec::new();
        for l in 0..spec.activations.len() {
            let (fan_in, fan_out) = (spec.layer_widths[l], spec.layer_widths[l + 1]);
            let bound = 1.0 / (fan_in as f64).sqrt();
            let mut rng = seeded_rng(derive_seed(seed, "mlp-layer", l as u64));
            weights.push(Matrix::from_fn(fan_out, fan_in, |_, _| rng.gen_range(-bound..bound)));
            biases.push(Vector::from_fn(fan_out, |_| rng.gen_range(-bound..bound)));
        }
        Ok(Self { weights, biases, activations: spec.activations.clone() })
    }

    pub fn from_parts(
        weights: Vec<Matrix>,
        biases: Vec<Vector>,
        activations: Vec<Activation>,
    ) -> Result<Self> {
        let mlp = Self { weights, biases, activations };
        mlp.validate()?;
        Ok(mlp)
    }

    /// Re-checks the structural invariants of `from_parts`; needed after
    /// deserialization, which bypasses the constructors.
    pub fn validate(&self) -> Result<()> {
        if self.weights.is_empty()
            || self.weights.len() != self.biases.len()
            || self.weights.len() != self.activations.len()
        {
            return Err(Error::invalid("mlp needs equal numbers of weights, biases, activations"));
        }
        for l in 0..self.weights.len() {
            if self.biases[l].len() != self.weights[l].rows() {
                return Err(Error::shape(format!(
                    "layer {l}: bias len {} vs {} weight rows",
                    self.biases[l].len(),
                    self.weights[l].rows()
                )));
            }
            if l + 1 < self.weights.len() && self.weights[l + 1].cols() != self.weights[l].rows() {
                return Err(Error::shape(format!(
                    "layer {} input width {} does not chain from layer {l} output {}",
                    l + 1,
                    self.weights[l + 1].cols(),
                    self.weights[l].rows()
                )));
            }
            if !self.weights[l].is_finite() || !self.biases[l].is_finite() {
                return Err(Error::invalid(format!("layer {l} has non-finite entries")));
            }
        }
        Ok(())
    }

    pub fn spec(&self) -> MlpSpec {
        let mut widths = vec![self.input_dim()];
        widths.extend(self.weights.iter().map(Matrix::rows));
        MlpSpec { layer_widths: widths, activations: self.activations.clone() }
    }

    pub fn input_dim(&self) -> usize {
        self.weights[0].cols()
    }

    pub fn output_dim(&self) -> usize {
        self.weights.last().unwrap().rows()
    }

    pub fn n_layers(&self) -> usize {
        self.weights.len()
    }

    pub fn weights(&self) -> &[Matrix] {
        &self.weights
    }

    pub fn biases(&self) -> &[Vector] {
        &self.biases
    }

    pub fn activations(&self) -> &[Activation] {
        &self.activations
    }

    pub fn forward(&self, x: &Vector) -> Result<Vector> {
        Ok(self.forward_cached(x)?.post.pop().unwrap())
    }

    pub fn forward_cached(&self, x: &Vector) -> Result<MlpCache> {
        if x.len() != self.input_dim() {
            return Err(Error::shape(format!(
                "input dim {} vs expected {}",
                x.len(),
                self.input_dim()
            )));
        }
        let mut post = vec![x.clone()];
        let mut pre = Vec::with_capacity(self.n_layers());
        for l in 0..self.n_layers() {
            let mut z = self.weights[l].matvec(post.last().unwrap());
            z.add_scaled(1.0, &self.biases[l]);
            let a = Vector::from_fn(z.len(), |i| self.activations[l].apply(z[i]));
            pre.push(z);
            post.push(a);
        }
        Ok(MlpCache { post, pre })
    }

    /// Backpropagates `upstream` (the loss gradient at the output) through
    /// the cached pass; returns parameter gradients and the input gradient.
    pub fn backward(&self, cache: &MlpCache, upstream: &Vector) -> (MlpGrads, Vector) {
        let mut weight_grads = Vec::with_capacity(self.n_layers());
        let mut bias_grads = Vec::with_capacity(self.n_layers());
        let mut g = upstream.clone();
        for l in (0..self.n_layers()).rev() {
            let pre = &cache.pre[l];
            let delta =
                Vector::from_fn(g.len(), |i| g[i] * self.activations[l].derivative(pre[i]));
            weight_grads.push(Matrix::outer(&delta, &cache.post[l]));
            bias_grads.push(delta.clone());
            g = self.weights[l].matvec_transpose(&delta);
        }
        weight_grads.reverse();
        bias_grads.reverse();
        (MlpGrads { weights: weight_grads, biases: bias_grads }, g)
    }

    /// Jacobian of the output with respect to the input at `x`.
    pub fn input_jacobian(&self, x: &Vector) -> Result<Matrix> {
        let cache = self.forward_cached(x)?;
        let mut jac = Matrix::identity(self.input_dim());
        for l in 0..self.n_layers() {
            let masked = Matrix::from_fn(self.weights[l].rows(), jac.cols(), |r, c| {
                let mut sum = 0.0;
                for k in 0..self.weights[l].cols() {
                    sum += self.weights[l][(r, k)] * jac[(k, c)];
                }
                sum * self.activations[l].derivative(cache.pre[l][r])
            });
            jac = masked;
        }
        Ok(jac)
    }

    /// Input Jacobian flattened row-major, as the estimator's gradient map.
    pub fn input_jacobian_flat(&self, x: &Vector) -> Result<Vector> {
        Ok(Vector::from_raw(self.input_jacobian(x)?.as_slice().to_vec()))
    }

    /// Frobenius norm of the Jacobian of the output with respect to all
    /// parameters at input `x`; the measured stand-in for the
    /// parameter-gradient constant of the closed-form bounds.
    pub fn param_jacobian_norm(&self, x: &Vector) -> Result<f64> {
        let cache = self.forward_cached(x)?;
        // j holds d(output)/d(pre-activation of layer l), walking backward
        let out = self.output_dim();
        let mut j = Matrix::from_fn(out, out, |r, c| {
            if r == c {
                self.activations[self.n_layers() - 1].derivative(cache.pre[self.n_layers() - 1][r])
            } else {
                0.0
            }
        });
        let mut total = 0.0;
        for l in (0..self.n_layers()).rev() {
            let j_sq = j.as_slice().iter().map(|v| v * v).sum::<f64>();
            let input_sq = cache.post[l].dot(&cache.post[l]);
            total += j_sq * (input_sq + 1.0);
            if l > 0 {
                let times_w = Matrix::from_fn(out, self.weights[l].cols(), |r, c| {
                    let mut sum = 0.0;
                    for k in 0..j.cols() {
                        sum += j[(r, k)] * self.weights[l][(k, c)];
                    }
                    sum * self.activations[l - 1].derivative(cache.pre[l - 1][c])
                });
                j = times_w;
            }
        }
        Ok(total.sqrt())
    }

    pub fn param_count(&self) -> usize {
        self.weights
            .iter()
            .zip(&self.biases)
            .map(|(w, b)| w.rows() * w.cols() + b.len())
            .sum()
    }

    pub fn append_params(&self, out: &mut Vec<f64>) {
        for (w, b) in self.weights.iter().zip(&self.biases) {
            out.extend_from_slice(w.as_slice());
            out.extend_from_slice(b.as_slice());
        }
    }

    /// Reads this network's parameters back from a flat slice; returns how
    /// many values were consumed.
    pub fn read_params(&mut self, flat: &[f64]) -> Result<usize> {
        let mut offset = 0;
        for (w, b) in self.weights.iter_mut().zip(&mut self.biases) {
            let wn = w.rows() * w.cols();
            let slice = flat
                .get(offset..offset + wn)
                .ok_or_else(|| Error::shape("flat parameter slice too short".to_string()))?;
            w.as_mut_slice().copy_from_slice(slice);
            offset += wn;
            let bn = b.len();
            let slice = flat
                .get(offset..offset + bn)
                .ok_or_else(|| Error::shape("flat parameter slice too short".to_string()))?;
            b.as_mut_slice().copy_from_slice(slice);
            offset += bn;
        }
        Ok(offset)
    }
}

impl MlpGrads {
    pub fn append_to(&self, out: &mut Vec<f64>) {
        for (w, b) in self.weights.iter().zip(&self.biases) {
            out.extend_from_slice(w.as_slice());
            out.extend_from_slice(b.as_slice());
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn identity_mlp(dim: usize) -> Mlp {
        Mlp::from_parts(
            vec![Matrix::identity(dim)],
            vec![Vector::zeros(dim)],
            vec![Activation::Identity],
        )
        .unwrap()
    }

    #[test]
    fn identity_network_reproduces_input() {
        let mlp = identity_mlp(3);
        let x = Vector::from_raw(vec![1.0, -2.0, 0.5]);
        assert_eq!(mlp.forward(&x).unwrap(), x);
    }

    #[test]
    fn relu_clamps_negative_preactivations() {
        let mlp = Mlp::from_parts(
            vec![Matrix::identity(2)],
            vec![Vector::zeros(2)],
            vec![Activation::Relu],
        )
        .unwrap();
        let y = mlp.forward(&Vector::from_raw(vec![2.0, -3.0])).unwrap();
        assert_eq!(y.as_slice(), &[2.0, 0.0]);
    }

    #[test]
    fn initialization_is_seeded_and_bounded() {
        let spec = MlpSpec::relu_stack(vec![4, 8, 2]).unwrap();
        let a = Mlp::initialized(&spec, 42).unwrap();
        let b = Mlp::initialized(&spec, 42).unwrap();
        let c = Mlp::initialized(&spec, 43).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
        let bound = 1.0 / 2.0;
        assert!(a.weights()[0].as_slice().iter().all(|v| v.abs() <= bound));
    }

    #[test]
    fn spec_round_trips_through_network() {
        let spec = MlpSpec::relu_stack(vec![5, 7, 3]).unwrap();
        let mlp = Mlp::initialized(&spec, 1).unwrap();
        assert_eq!(mlp.spec(), spec);
    }

    #[test]
    fn param_round_trip_is_identity() {
        let spec = MlpSpec::relu_stack(vec![3, 4, 2]).unwrap();
        let mut mlp = Mlp::initialized(&spec, 9).unwrap();
        let mut flat = Vec::new();
        mlp.append_params(&mut flat);
        assert_eq!(flat.len(), mlp.param_count());
        let copy = mlp.clone();
        let consumed = mlp.read_params(&flat).unwrap();
        assert_eq!(consumed, flat.len());
        assert_eq!(mlp, copy);
    }

    #[test]
    fn shape_validation_rejects_broken_chains() {
        assert!(Mlp::from_parts(
            vec![Matrix::identity(2), Matrix::identity(3)],
            vec![Vector::zeros(2), Vector::zeros(3)],
            vec![Activation::Relu, Activation::Identity],
        )
        .is_err());
        assert!(MlpSpec::new(vec![3], vec![]).is_err());
        assert!(MlpSpec::new(vec![3, 0], vec![Activation::Identity]).is_err());
    }
}
