use std::f64::consts::PI;

use super::moments::GaussianMoments;
use crate::error::{Error, Result};

/// Gamma posterior over the observation-noise precision.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GammaPosterior {
    alpha: f64,
    beta: f64,
}

impl GammaPosterior {
    pub fn new(alpha: f64, beta: f64) -> Result<Self> {
        if !(alpha.is_finite() && beta.is_finite() && alpha > 1.0 && beta > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "noise posterior needs alpha > 1 and beta > 0, got ({alpha}, {beta})"
            )));
        }
        Ok(Self { alpha, beta })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    /// Expected noise variance `E[1/gamma] = beta / (alpha - 1)`.
    pub fn noise_variance(&self) -> f64 {
        self.shifted_noise_variance(0)
    }

    /// Expected noise variance under `Gamma(alpha + k, beta)`.
    pub fn shifted_noise_variance(&self, k: u32) -> f64 {
        self.beta / (self.alpha + f64::from(k) - 1.0)
    }

    pub fn precision_mean(&self) -> f64 {
        self.alpha / self.beta
    }

    pub fn precision_variance(&self) -> f64 {
        self.alpha / (self.beta * self.beta)
    }
}

impl Default for GammaPosterior {
    fn default() -> Self {
        Self {
            alpha: 6.0,
            beta: 6.0,
        }
    }
}

/// Log marginal likelihoods evaluated with the noise posterior at `alpha`,
/// `alpha + 1` and `alpha + 2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PartitionTriple {
    pub log_z: f64,
    pub log_z1: f64,
    pub log_z2: f64,
}

impl PartitionTriple {
    pub fn is_finite(&self) -> bool {
        self.log_z.is_finite() && self.log_z1.is_finite() && self.log_z2.is_finite()
    }
}

/// `ln N(y | mean, variance)`.
pub fn gaussian_log_density(y: f64, mean: f64, variance: f64) -> Result<f64> {
    if !(variance > 0.0) || !variance.is_finite() {
        return Err(Error::Numeric(format!("total variance {variance} is not positive")));
    }
    let r = y - mean;
    Ok(-0.5 * (2.0 * PI * variance).ln() - r * r / (2.0 * variance))
}

/// Log marginal likelihood of `y` under a scalar predictive Gaussian whose
/// variance is widened by the expected observation noise.
pub fn log_marginal(y: f64, prediction: &GaussianMoments, noise: &GammaPosterior) -> Result<f64> {
    if prediction.len() != 1 {
        return Err(Error::Dimension(format!(
            "log marginal needs a scalar prediction, got {} units",
            prediction.len()
        )));
    }
    gaussian_log_density(
        y,
        prediction.means[0],
        prediction.variances[0] + noise.noise_variance(),
    )
}

/// Value and partial derivatives of the log marginal likelihood.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MarginalGradient {
    pub log_z: f64,
    pub d_mean: f64,
    pub d_var: f64,
}

/// `ln N(y | mean, var + noise_var)` with its derivatives in `mean` and `var`.
pub fn log_marginal_gradient(y: f64, mean: f64, var: f64, noise_var: f64) -> Result<MarginalGradient> {
    let total = var + noise_var;
    let log_z = gaussian_log_density(y, mean, total)?;
    let r = y - mean;
    Ok(MarginalGradient {
        log_z,
        d_mean: r / total,
        d_var: -0.5 / total + 0.5 * r * r / (total * total),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_residual_unit_variance() {
        let lz = gaussian_log_density(0.7, 0.7, 1.0).unwrap();
        assert!((lz + 0.918_938_533_2).abs() < 1e-9);
    }

    #[test]
    fn closed_form_example() {
        let noise = GammaPosterior::new(2.0, 0.5).unwrap();
        let pred = GaussianMoments::new(vec![0.0], vec![0.5]).unwrap();
        let lz = log_marginal(1.0, &pred, &noise).unwrap();
        assert!((lz + 1.418_938_533_2).abs() < 1e-9);
    }

    #[test]
    fn symmetric_in_residual() {
        for d in [0.1, 0.5, 3.0] {
            let a = gaussian_log_density(0.0, d, 0.3).unwrap();
            let b = gaussian_log_density(0.0, -d, 0.3).unwrap();
            assert_eq!(a, b);
        }
    }

    #[test]
    fn density_integrates_to_one() {
        let noise = GammaPosterior::new(3.0, 1.0).unwrap();
        let pred = GaussianMoments::new(vec![0.4], vec![0.3]).unwrap();
        let h = 1e-3;
        let total: f64 = (-20_000..=20_000)
            .map(|i| log_marginal(i as f64 * h, &pred, &noise).unwrap().exp() * h)
            .sum();
        assert!((total - 1.0).abs() < 1e-3);
    }

    #[test]
    fn invalid_inputs() {
        assert!(gaussian_log_density(0.0, 0.0, 0.0).is_err());
        assert!(GammaPosterior::new(1.0, 1.0).is_err());
        assert!(GammaPosterior::new(2.0, 0.0).is_err());
        let noise = GammaPosterior::default();
        assert!(log_marginal(0.0, &GaussianMoments::zeros(2), &noise).is_err());
    }

    #[test]
    fn gradient_matches_central_differences() {
        let (y, m, v, s) = (1.0, 0.2, 0.4, 0.3);
        let g = log_marginal_gradient(y, m, v, s).unwrap();
        let h = 1e-6;
        let f = |m: f64, v: f64| gaussian_log_density(y, m, v + s).unwrap();
        let dm = (f(m + h, v) - f(m - h, v)) / (2.0 * h);
        let dv = (f(m, v + h) - f(m, v - h)) / (2.0 * h);
        assert!((g.d_mean - dm).abs() < 1e-8);
        assert!((g.d_var - dv).abs() < 1e-8);
    }
}
