//! Function approximators: MLPs with exact reverse-mode gradients, a
//! Gaussian action head, Adam and finite-difference checks.

mod adam;
mod gaussian;
mod gradcheck;
mod mlp;

pub use adam::AdamState;
pub use gaussian::{GaussianPolicyHead, LogProbGrad, LOG_STD_MAX, LOG_STD_MIN};
pub use gradcheck::{grad_check, GradCheckReport};
pub use mlp::{Activation, Cache, Layer, Mlp, MlpGrads};

/// Scales `grads` so their joint L2 norm is at most `max_norm`. Returns the
/// norm before clipping.
pub fn clip_grad_norm(grads: &mut [f64], max_norm: f64) -> f64 {
    let norm = grads.iter().map(|g| g * g).sum::<f64>().sqrt();
    if norm > max_norm && norm > 0.0 {
        let scale = max_norm / norm;
        grads.iter_mut().for_each(|g| *g *= scale);
    }
    norm
}
