//! Training objectives and their gradients.

mod normals;
mod ssim;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::Image;

pub use normals::{
    normal_consistency_loss, normal_from_depth, normal_from_depth_backward, normal_loss_with_grad,
    scharr_gradients, NormalLoss, MIN_VALID_DEPTH, NORMAL_MASK_ALPHA,
};
pub use ssim::{ssim, ssim_with_grad, SSIM_RADIUS, SSIM_SIGMA};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LossWeights {
    pub lambda_l1: f64,
    pub lambda_ssim: f64,
    pub lambda_n: f64,
    pub lambda_o: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self { lambda_l1: 0.8, lambda_ssim: 0.2, lambda_n: 0.05, lambda_o: 0.01 }
    }
}

impl LossWeights {
    pub fn validate(&self) -> Result<()> {
        let all = [self.lambda_l1, self.lambda_ssim, self.lambda_n, self.lambda_o];
        if all.iter().all(|w| *w >= 0.0 && w.is_finite()) {
            Ok(())
        } else {
            Err(Error::InvalidConfig(format!("loss weights must be finite and >= 0: {all:?}")))
        }
    }
}

/// Individual loss terms of one step.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct LossParts {
    pub l1: f64,
    pub ssim: f64,
    pub normal: f64,
    pub opacity: f64,
}

pub fn total_loss(parts: &LossParts, weights: &LossWeights) -> f64 {
    weights.lambda_l1 * parts.l1
        + weights.lambda_ssim * parts.ssim
        + weights.lambda_n * parts.normal
        + weights.lambda_o * parts.opacity
}

/// Mean absolute error and its gradient with respect to `rendered`.
pub fn l1_loss_with_grad(rendered: &Image, target: &Image) -> Result<(f64, Image)> {
    rendered.check_same_shape(target)?;
    let n = rendered.data.len().max(1) as f64;
    let mut grad = Image::new(rendered.width, rendered.height, rendered.channels);
    let mut sum = 0.0;
    for ((g, a), b) in grad.data.iter_mut().zip(&rendered.data).zip(&target.data) {
        let d = a - b;
        sum += d.abs();
        *g = if d > 0.0 {
            1.0 / n
        } else if d < 0.0 {
            -1.0 / n
        } else {
            0.0
        };
    }
    Ok((sum / n, grad))
}

/// `(L1, 1 − SSIM)` between a render and its target.
pub fn photometric_loss(rendered: &Image, target: &Image) -> Result<(f64, f64)> {
    let (l1, _) = l1_loss_with_grad(rendered, target)?;
    Ok((l1, 1.0 - ssim(rendered, target)?))
}

/// Mean of `0.25 − (o − 0.5)²`; pushes opacities toward 0 or 1.
pub fn opacity_regularization(opacities: &[f64]) -> f64 {
    if opacities.is_empty() {
        return 0.0;
    }
    opacities.iter().map(|o| 0.25 - (o - 0.5) * (o - 0.5)).sum::<f64>() / opacities.len() as f64
}

/// Derivative of [`opacity_regularization`] with respect to each opacity.
pub fn opacity_regularization_grad(opacities: &[f64]) -> Vec<f64> {
    let n = opacities.len().max(1) as f64;
    opacities.iter().map(|o| -2.0 * (o - 0.5) / n).collect()
}

/// Binarized opacity: 1 at or above the threshold, 0 below. Its derivative is
/// taken to be 1 (straight-through).
#[inline]
pub fn ste_opacity(opacity: f64, threshold: f64) -> f64 {
    if opacity >= threshold {
        1.0
    } else {
        0.0
    }
}
