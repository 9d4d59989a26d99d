//! Gaussian-weight layer primitives for probabilistic backpropagation.
//!
//! Every weight is an independent 1D Gaussian. Forward passes propagate
//! per-unit activation means and variances; training evaluates the Gaussian
//! marginal likelihood of a target and moves each weight's mean and variance
//! along the gradients of its logarithm.

mod likelihood;
mod matrix;
mod moments;
mod update;

pub use likelihood::{
    gaussian_log_density, log_marginal, log_marginal_gradient, GammaPosterior, MarginalGradient,
    PartitionTriple,
};
pub use matrix::{propagate_linear_gaussian, GaussianMatrix, LayerGradient};
pub use moments::{propagate_relu_moments, GaussianMoments};
pub use update::{
    incorporate_prior, pbp_update_weight, update_noise_posterior, NoiseUpdate, PriorSpec,
    WeightUpdate, DEFAULT_VARIANCE_FLOOR,
};
