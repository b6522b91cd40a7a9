//! Pairwise-averaged bilinear attention fusion.
//!
//! Raw definition, for one projection matrix `W_i` per modality:
//!
//! ```text
//! a_ij    = (W_i v_i)^T (W_j v_j)                 i != j
//! alpha_i = (1/(n-1)) * sum_{j != i} a_ij
//! u       = [alpha_1 v_1; ...; alpha_n v_n]
//! ```
//!
//! The trained form generalizes `W_i v_i` to a short chain of square
//! matrices with ReLU between layers, and adds opt-in stabilization: unit
//! normalization of the inputs, spectral normalization of every projection
//! matrix, and `1/sqrt(d)` score scaling. With stabilization enabled, the
//! output blocks scale the *normalized* inputs.
//!
//! [`attention_jacobian`] implements the closed-form derivative of the raw
//! single-matrix, flag-free map; [`AttentionParams::backward`] implements
//! reverse-mode gradients of the full stabilized pipeline, including the
//! derivative of the spectral normalization itself.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{validate_latents, FusedOutput, FusionBackward, FusionStrategy};
use crate::error::{Error, Result};
use crate::linalg::{top_singular_triple, Matrix, Vector};
use crate::rng::{derive_seed, seeded_rng};

/// Configuration for building attention parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttentionSettings {
    /// Number of chained square projection matrices per modality (1 or 2).
    pub layers: usize,
    pub unit_norm_inputs: bool,
    pub spectral_normalize: bool,
    pub scale_by_sqrt_d: bool,
    /// Weight of the squared-Frobenius penalty on the projection matrices.
    pub lambda_reg: f64,
    /// Added to input norms before dividing, so training never divides by
    /// zero. Zero means strict: a zero input under unit normalization is an
    /// error.
    pub norm_epsilon: f64,
}

impl Default for AttentionSettings {
    fn default() -> Self {
        AttentionSettings {
            layers: 2,
            unit_norm_inputs: true,
            spectral_normalize: true,
            scale_by_sqrt_d: true,
            lambda_reg: 1e-5,
            norm_epsilon: 1e-12,
        }
    }
}

impl AttentionSettings {
    /// Flag-free single-matrix settings matching the raw definition.
    pub fn raw() -> Self {
        AttentionSettings {
            layers: 1,
            unit_norm_inputs: false,
            spectral_normalize: false,
            scale_by_sqrt_d: false,
            lambda_reg: 0.0,
            norm_epsilon: 0.0,
        }
    }
}

/// Attention fusion parameters: one projection chain per modality plus the
/// stabilization flags.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttentionParams {
    projections: Vec<Vec<Matrix>>,
    pub unit_norm_inputs: bool,
    pub spectral_normalize: bool,
    pub scale_by_sqrt_d: bool,
    pub lambda_reg: f64,
    pub norm_epsilon: f64,
}

impl AttentionParams {
    /// Single-matrix construction: one `d x d` projection per modality.
    pub fn new(
        weights: Vec<Matrix>,
        unit_norm_inputs: bool,
        spectral_normalize: bool,
        scale_by_sqrt_d: bool,
        lambda_reg: f64,
    ) -> Result<Self> {
        Self::with_chains(
            weights.into_iter().map(|w| vec![w]).collect(),
            unit_norm_inputs,
            spectral_normalize,
            scale_by_sqrt_d,
            lambda_reg,
            0.0,
        )
    }

    /// Raw flag-free construction from single matrices.
    pub fn raw(weights: Vec<Matrix>) -> Result<Self> {
        Self::new(weights, false, false, false, 0.0)
    }

    /// General construction from per-modality projection chains.
    pub fn with_chains(
        projections: Vec<Vec<Matrix>>,
        unit_norm_inputs: bool,
        spectral_normalize: bool,
        scale_by_sqrt_d: bool,
        lambda_reg: f64,
        norm_epsilon: f64,
    ) -> Result<Self> {
        let n = projections.len();
        if n < 2 {
            return Err(Error::invalid(
                "attention needs at least two modalities".to_string(),
            ));
        }
        let depth = projections[0].len();
        if depth == 0 {
            return Err(Error::invalid("projection chains must be non-empty"));
        }
        if projections.iter().any(|c| c.len() != depth) {
            return Err(Error::invalid("projection chains must share one depth"));
        }
        let d = projections[0][0].rows();
        for (i, chain) in projections.iter().enumerate() {
            for (l, w) in chain.iter().enumerate() {
                if w.rows() != d || w.cols() != d {
                    return Err(Error::shape(format!(
                        "projection {i}.{l} must be {d}x{d}, got {}x{}",
                        w.rows(),
                        w.cols()
                    )));
                }
                if !w.is_finite() {
                    return Err(Error::invalid(format!(
                        "projection {i}.{l} has non-finite entries"
                    )));
                }
            }
        }
        if !lambda_reg.is_finite() || lambda_reg < 0.0 {
            return Err(Error::invalid("lambda_reg must be finite and >= 0"));
        }
        if !norm_epsilon.is_finite() || norm_epsilon < 0.0 {
            return Err(Error::invalid("norm_epsilon must be finite and >= 0"));
        }
        Ok(AttentionParams {
            projections,
            unit_norm_inputs,
            spectral_normalize,
            scale_by_sqrt_d,
            lambda_reg,
            norm_epsilon,
        })
    }

    /// Seeded initialization with entries uniform in `[-1/sqrt(d), 1/sqrt(d))`.
    pub fn initialized(
        n_modalities: usize,
        dim: usize,
        settings: &AttentionSettings,
        seed: u64,
    ) -> Result<Self> {
        if settings.layers == 0 {
            return Err(Error::invalid("attention needs at least one layer"));
        }
        let bound = 1.0 / (dim as f64).sqrt();
        let projections = (0..n_modalities)
            .map(|i| {
                (0..settings.layers)
                    .map(|l| {
                        let mut rng = seeded_rng(derive_seed(
                            seed,
                            "attention-init",
                            (i * settings.layers + l) as u64,
                        ));
                        Matrix::from_fn(dim, dim, |_, _| rng.gen_range(-bound..bound))
                    })
                    .collect()
            })
            .collect();
        Self::with_chains(
            projections,
            settings.unit_norm_inputs,
            settings.spectral_normalize,
            settings.scale_by_sqrt_d,
            settings.lambda_reg,
            settings.norm_epsilon,
        )
    }

    pub fn n_modalities(&self) -> usize {
        self.projections.len()
    }

    pub fn dim(&self) -> usize {
        self.projections[0][0].rows()
    }

    pub fn chain_depth(&self) -> usize {
        self.projections[0].len()
    }

    /// All projection matrices, modality-major then layer order. This is the
    /// canonical flat parameter order used by regularization gradients and
    /// the optimizer.
    pub fn weights_flat(&self) -> Vec<&Matrix> {
        self.projections.iter().flatten().collect()
    }

    pub fn weights_flat_mut(&mut self) -> Vec<&mut Matrix> {
        self.projections.iter_mut().flatten().collect()
    }

    pub fn chain(&self, modality: usize) -> &[Matrix] {
        &self.projections[modality]
    }

    pub fn lambda_reg(&self) -> f64 {
        self.lambda_reg
    }

    pub fn set_lambda_reg(&mut self, lambda: f64) -> Result<()> {
        if !lambda.is_finite() || lambda < 0.0 {
            return Err(Error::invalid(format!(
                "regularization weight must be finite and >= 0, got {lambda}"
            )));
        }
        self.lambda_reg = lambda;
        Ok(())
    }

    /// The projection matrix actually applied at `(modality, layer)`:
    /// spectrally normalized when that flag is on, raw otherwise.
    pub fn effective_projection(&self, modality: usize, layer: usize) -> Result<Matrix> {
        let w = self
            .projections
            .get(modality)
            .and_then(|c| c.get(layer))
            .ok_or_else(|| {
                Error::invalid(format!("no projection at modality {modality} layer {layer}"))
            })?;
        if self.spectral_normalize {
            let triple = top_singular_triple(w)?;
            if triple.sigma == 0.0 {
                return Err(Error::DegenerateInput(format!(
                    "projection {modality}.{layer} is zero; spectral normalization undefined"
                )));
            }
            Ok(w.scaled(1.0 / triple.sigma))
        } else {
            Ok(w.clone())
        }
    }

    /// Lipschitz gain of the `modality`-th projection chain: the product of
    /// the spectral norms of its effective layers (ReLU between layers is
    /// 1-Lipschitz). This is the per-modality `M` entering the attention
    /// bounds.
    pub fn effective_gain(&self, modality: usize) -> Result<f64> {
        let mut gain = 1.0;
        for layer in 0..self.chain_depth() {
            let eff = self.effective_projection(modality, layer)?;
            gain *= top_singular_triple(&eff)?.sigma;
        }
        Ok(gain)
    }

    fn is_raw(&self) -> bool {
        self.chain_depth() == 1
            && !self.unit_norm_inputs
            && !self.spectral_normalize
            && !self.scale_by_sqrt_d
    }

    fn validate_arity(&self, latents: &[Vector]) -> Result<()> {
        validate_latents(latents)?;
        if latents.len() != self.n_modalities() {
            return Err(Error::shape(format!(
                "attention built for {} modalities, got {}",
                self.n_modalities(),
                latents.len()
            )));
        }
        let d = self.dim();
        if let Some((i, v)) = latents.iter().enumerate().find(|(_, v)| v.len() != d) {
            return Err(Error::shape(format!(
                "latent {i} has dim {}, attention expects {d}",
                v.len()
            )));
        }
        Ok(())
    }

    pub(crate) fn forward(&self, latents: &[Vector]) -> Result<AttentionForward> {
        self.validate_arity(latents)?;
        let n = self.n_modalities();
        let d = self.dim();
        let depth = self.chain_depth();

        let mut norms = vec![0.0; n];
        let mut v_prime = Vec::with_capacity(n);
        for (i, v) in latents.iter().enumerate() {
            if self.unit_norm_inputs {
                let r = v.norm();
                if r == 0.0 && self.norm_epsilon == 0.0 {
                    return Err(Error::DegenerateInput(format!(
                        "latent {i} is the zero vector; unit normalization undefined"
                    )));
                }
                norms[i] = r;
                v_prime.push(v.scaled(1.0 / (r + self.norm_epsilon)));
            } else {
                v_prime.push(v.clone());
            }
        }

        let mut layer_inputs = vec![Vec::with_capacity(depth); n];
        let mut pre_acts = vec![Vec::with_capacity(depth); n];
        let mut effective = vec![Vec::with_capacity(depth); n];
        let mut sn_factors = vec![Vec::with_capacity(depth); n];
        let mut tilde = Vec::with_capacity(n);
        for i in 0..n {
            let mut h = v_prime[i].clone();
            for (l, w) in self.projections[i].iter().enumerate() {
                let (w_eff, sn) = if self.spectral_normalize {
                    let triple = top_singular_triple(w)?;
                    if triple.sigma == 0.0 {
                        return Err(Error::DegenerateInput(format!(
                            "projection {i}.{l} is zero; spectral normalization undefined"
                        )));
                    }
                    (w.scaled(1.0 / triple.sigma), Some(triple))
                } else {
                    (w.clone(), None)
                };
                let pre = w_eff.matvec(&h);
                layer_inputs[i].push(h);
                let post = if l + 1 < depth {
                    Vector::from_fn(pre.len(), |r| pre[r].max(0.0))
                } else {
                    pre.clone()
                };
                pre_acts[i].push(pre);
                effective[i].push(w_eff);
                sn_factors[i].push(sn);
                h = post;
            }
            tilde.push(h);
        }

        let scale = if self.scale_by_sqrt_d { 1.0 / (d as f64).sqrt() } else { 1.0 };
        let mut scores = Matrix::zeros(n, n);
        for i in 0..n {
            for j in (i + 1)..n {
                let s = scale * tilde[i].dot(&tilde[j]);
                scores.set(i, j, s);
                scores.set(j, i, s);
            }
        }
        let inv = 1.0 / (n as f64 - 1.0);
        let alphas: Vec<f64> = (0..n)
            .map(|i| (0..n).filter(|&j| j != i).map(|j| scores.get(i, j)).sum::<f64>() * inv)
            .collect();

        Ok(AttentionForward {
            v_prime,
            norms,
            layer_inputs,
            pre_acts,
            effective,
            sn_factors,
            tilde,
            scores,
            alphas,
            scale,
        })
    }
}

/// Cached intermediates of one attention forward pass.
pub(crate) struct AttentionForward {
    pub v_prime: Vec<Vector>,
    norms: Vec<f64>,
    layer_inputs: Vec<Vec<Vector>>,
    pre_acts: Vec<Vec<Vector>>,
    effective: Vec<Vec<Matrix>>,
    sn_factors: Vec<Vec<Option<crate::linalg::TopSingularTriple>>>,
    pub tilde: Vec<Vector>,
    pub scores: Matrix,
    pub alphas: Vec<f64>,
    scale: f64,
}

impl AttentionForward {
    pub fn fused(&self) -> FusedOutput {
        let blocks: Vec<Vector> = self
            .v_prime
            .iter()
            .zip(&self.alphas)
            .map(|(v, &a)| v.scaled(a))
            .collect();
        FusedOutput {
            u: Vector::concat(&blocks),
            coefficients: self.alphas.clone(),
            scores: Some(self.scores.clone()),
        }
    }
}

impl FusionStrategy for AttentionParams {
    fn name(&self) -> &'static str {
        "attention"
    }

    fn fused_dim(&self, latent_dims: &[usize]) -> Result<usize> {
        if latent_dims.len() != self.n_modalities() {
            return Err(Error::shape(format!(
                "attention built for {} modalities, got {}",
                self.n_modalities(),
                latent_dims.len()
            )));
        }
        let d = self.dim();
        if latent_dims.iter().any(|&x| x != d) {
            return Err(Error::shape(format!(
                "attention expects every latent dim to be {d}"
            )));
        }
        Ok(self.n_modalities() * d)
    }

    fn fuse(&self, latents: &[Vector]) -> Result<FusedOutput> {
        Ok(self.forward(latents)?.fused())
    }

    fn jacobian(&self, latents: &[Vector], k: usize) -> Result<Matrix> {
        attention_jacobian(self, latents, k)
    }

    fn backward(&self, latents: &[Vector], upstream: &Vector) -> Result<FusionBackward> {
        let fwd = self.forward(latents)?;
        let n = self.n_modalities();
        let d = self.dim();
        let depth = self.chain_depth();
        if upstream.len() != n * d {
            return Err(Error::shape(format!(
                "upstream has dim {}, fused dim is {}",
                upstream.len(),
                n * d
            )));
        }
        let blocks: Vec<Vector> = (0..n)
            .map(|i| Vector::from_raw(upstream.as_slice()[i * d..(i + 1) * d].to_vec()))
            .collect();

        // d(loss)/d(alpha_i) and the direct contribution to v'_i.
        let c: Vec<f64> = (0..n).map(|i| blocks[i].dot(&fwd.v_prime[i])).collect();
        let mut grad_v_prime: Vec<Vector> =
            (0..n).map(|i| blocks[i].scaled(fwd.alphas[i])).collect();

        // Through the scores into the transformed vectors: the pair score
        // s_ij feeds both alpha_i and alpha_j.
        let inv = fwd.scale / (n as f64 - 1.0);
        let mut grad_tilde: Vec<Vector> = (0..n)
            .map(|kx| {
                let mut g = Vector::zeros(d);
                for j in 0..n {
                    if j == kx {
                        continue;
                    }
                    g.add_scaled(inv * (c[kx] + c[j]), &fwd.tilde[j]);
                }
                g
            })
            .collect();

        // Back through each projection chain.
        let mut weight_grads: Vec<Matrix> = Vec::with_capacity(n * depth);
        for i in 0..n {
            let mut g_h = std::mem::replace(&mut grad_tilde[i], Vector::zeros(0));
            let mut chain_grads: Vec<Matrix> = Vec::with_capacity(depth);
            for l in (0..depth).rev() {
                let g_pre = if l + 1 < depth {
                    let pre = &fwd.pre_acts[i][l];
                    Vector::from_fn(d, |r| if pre[r] > 0.0 { g_h[r] } else { 0.0 })
                } else {
                    g_h.clone()
                };
                let g_w_eff = Matrix::outer(&g_pre, &fwd.layer_inputs[i][l]);
                let g_w = match &fwd.sn_factors[i][l] {
                    Some(triple) => {
                        // W_eff = W / sigma(W); the sigma term uses the top
                        // singular pair: d(sigma)/dW = u v^T.
                        let sigma = triple.sigma;
                        let inner = g_w_eff.frobenius_dot(&self.projections[i][l]);
                        let mut g = g_w_eff.scaled(1.0 / sigma);
                        g.add_scaled(
                            -inner / (sigma * sigma),
                            &Matrix::outer(&triple.u, &triple.v),
                        );
                        g
                    }
                    None => g_w_eff,
                };
                chain_grads.push(g_w);
                g_h = fwd.effective[i][l].matvec_transpose(&g_pre);
            }
            chain_grads.reverse();
            weight_grads.extend(chain_grads);
            grad_v_prime[i].add_scaled(1.0, &g_h);
        }

        // Through the unit normalization back to the raw latents.
        let latent_grads: Vec<Vector> = (0..n)
            .map(|i| {
                if self.unit_norm_inputs {
                    let r = fwd.norms[i];
                    let t = r + self.norm_epsilon;
                    let g = &grad_v_prime[i];
                    let mut out = g.scaled(1.0 / t);
                    if r > f64::MIN_POSITIVE {
                        let coeff = latents[i].dot(g) / (r * t * t);
                        out.add_scaled(-coeff, &latents[i]);
                    }
                    out
                } else {
                    grad_v_prime[i].clone()
                }
            })
            .collect();

        Ok(FusionBackward { latent_grads, weight_grads })
    }
}

/// Closed-form derivative of the raw attention map with respect to latent
/// `k`, as stacked `d x d` blocks (one per output block, `n*d x d` total).
///
/// Blocks are in gradient layout: block `i` is the transpose of the
/// numerator-layout Jacobian of output block `i`, i.e. entry `(r, c)` holds
/// `d(alpha_i v_i)[c] / d(v_k)[r]`. Concretely:
///
/// ```text
/// B_kk = alpha_k I + ((1/(n-1)) sum_{j != k} W_k^T W_j v_j) v_k^T
/// B_ik = (1/(n-1)) (W_k^T W_i v_i) v_i^T          i != k
/// ```
///
/// Only the raw map is covered: single-matrix chains with every
/// stabilization flag disabled. Anything else is an unsupported
/// configuration; the training path differentiates the stabilized pipeline
/// by its reverse-mode backward pass instead.
pub fn attention_jacobian(
    params: &AttentionParams,
    latents: &[Vector],
    k: usize,
) -> Result<Matrix> {
    if !params.is_raw() {
        return Err(Error::UnsupportedConfiguration(
            "analytic attention jacobian covers only the raw single-matrix, flag-free map"
                .to_string(),
        ));
    }
    params.validate_arity(latents)?;
    let n = params.n_modalities();
    let d = params.dim();
    if k >= n {
        return Err(Error::invalid(format!("modality index {k} out of range")));
    }

    let fwd = params.forward(latents)?;
    // With flags off, tilde_j = W_j v_j.
    let t: &Vec<Vector> = &fwd.tilde;
    let w_k = &params.projections[k][0];
    let inv = 1.0 / (n as f64 - 1.0);

    let mut jac = Matrix::zeros(n * d, d);
    for i in 0..n {
        let block = if i == k {
            let mut w = Vector::zeros(d);
            for (j, tj) in t.iter().enumerate() {
                if j != k {
                    w.add_scaled(inv, &w_k.matvec_transpose(tj));
                }
            }
            let mut b = Matrix::outer(&w, &latents[k]);
            for r in 0..d {
                b[(r, r)] += fwd.alphas[k];
            }
            b
        } else {
            Matrix::outer(&w_k.matvec_transpose(&t[i]), &latents[i]).scaled(inv)
        };
        for r in 0..d {
            for cidx in 0..d {
                jac.set(i * d + r, cidx, block.get(r, cidx));
            }
        }
    }
    Ok(jac)
}

/// Squared-Frobenius weight penalty `lambda * sum_i ||W_i||_F^2` over all
/// projection matrices.
pub fn attention_reg_term(params: &AttentionParams) -> f64 {
    params.lambda_reg
        * params
            .weights_flat()
            .iter()
            .map(|w| w.as_slice().iter().map(|x| x * x).sum::<f64>())
            .sum::<f64>()
}

/// Gradient of [`attention_reg_term`] with respect to the `index`-th matrix
/// in [`AttentionParams::weights_flat`] order: `2 lambda W`.
pub fn attention_reg_gradient(params: &AttentionParams, index: usize) -> Result<Matrix> {
    let flat = params.weights_flat();
    let w = flat
        .get(index)
        .ok_or_else(|| Error::invalid(format!("weight index {index} out of range")))?;
    Ok(w.scaled(2.0 * params.lambda_reg))
}
