//! Parameter-free fusion strategies: elementwise sum and concatenation.

use serde::{Deserialize, Serialize};

use super::{validate_latents, FusedOutput, FusionBackward, FusionStrategy};
use crate::error::{Error, Result};
use crate::linalg::{Matrix, Vector};

/// Elementwise sum of equal-dimension latents.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SumFusion;

impl SumFusion {
    fn common_dim(latents: &[Vector]) -> Result<usize> {
        let d = latents[0].len();
        if latents.iter().any(|v| v.len() != d) {
            return Err(Error::shape(
                "sum fusion requires equal latent dimensions".to_string(),
            ));
        }
        Ok(d)
    }
}

impl FusionStrategy for SumFusion {
    fn name(&self) -> &'static str {
        "sum"
    }

    fn fused_dim(&self, latent_dims: &[usize]) -> Result<usize> {
        let d = *latent_dims
            .first()
            .ok_or_else(|| Error::invalid("sum fusion requires at least one modality"))?;
        if latent_dims.iter().any(|&x| x != d) {
            return Err(Error::shape(
                "sum fusion requires equal latent dimensions".to_string(),
            ));
        }
        Ok(d)
    }

    fn fuse(&self, latents: &[Vector]) -> Result<FusedOutput> {
        validate_latents(latents)?;
        let d = Self::common_dim(latents)?;
        let mut u = Vector::zeros(d);
        for v in latents {
            u.add_scaled(1.0, v);
        }
        Ok(FusedOutput { u, coefficients: Vec::new(), scores: None })
    }

    fn jacobian(&self, latents: &[Vector], k: usize) -> Result<Matrix> {
        validate_latents(latents)?;
        let d = Self::common_dim(latents)?;
        if k >= latents.len() {
            return Err(Error::invalid(format!("modality index {k} out of range")));
        }
        Ok(Matrix::identity(d))
    }

    fn backward(&self, latents: &[Vector], upstream: &Vector) -> Result<FusionBackward> {
        validate_latents(latents)?;
        let d = Self::common_dim(latents)?;
        if upstream.len() != d {
            return Err(Error::shape(format!(
                "upstream has dim {}, fused dim is {d}",
                upstream.len()
            )));
        }
        Ok(FusionBackward {
            latent_grads: vec![upstream.clone(); latents.len()],
            weight_grads: Vec::new(),
        })
    }
}

/// Concatenation of latents in modality order.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConcatFusion;

impl FusionStrategy for ConcatFusion {
    fn name(&self) -> &'static str {
        "concat"
    }

    fn fused_dim(&self, latent_dims: &[usize]) -> Result<usize> {
        if latent_dims.is_empty() {
            return Err(Error::invalid("concat fusion requires at least one modality"));
        }
        Ok(latent_dims.iter().sum())
    }

    fn fuse(&self, latents: &[Vector]) -> Result<FusedOutput> {
        validate_latents(latents)?;
        Ok(FusedOutput {
            u: Vector::concat(latents),
            coefficients: Vec::new(),
            scores: None,
        })
    }

    fn jacobian(&self, latents: &[Vector], k: usize) -> Result<Matrix> {
        validate_latents(latents)?;
        if k >= latents.len() {
            return Err(Error::invalid(format!("modality index {k} out of range")));
        }
        let total: usize = latents.iter().map(Vector::len).sum();
        let offset: usize = latents[..k].iter().map(Vector::len).sum();
        let dk = latents[k].len();
        let mut jac = Matrix::zeros(total, dk);
        for i in 0..dk {
            jac.set(offset + i, i, 1.0);
        }
        Ok(jac)
    }

    fn backward(&self, latents: &[Vector], upstream: &Vector) -> Result<FusionBackward> {
        validate_latents(latents)?;
        let total: usize = latents.iter().map(Vector::len).sum();
        if upstream.len() != total {
            return Err(Error::shape(format!(
                "upstream has dim {}, fused dim is {total}",
                upstream.len()
            )));
        }
        let mut grads = Vec::with_capacity(latents.len());
        let mut offset = 0;
        for v in latents {
            let slice = &upstream.as_slice()[offset..offset + v.len()];
            grads.push(Vector::from_raw(slice.to_vec()));
            offset += v.len();
        }
        Ok(FusionBackward { latent_grads: grads, weight_grads: Vec::new() })
    }
}
