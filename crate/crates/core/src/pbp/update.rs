use super::likelihood::{GammaPosterior, PartitionTriple};
use super::matrix::GaussianMatrix;
use crate::error::{Error, Result};

/// Smallest variance a weight may be clamped to after an overshooting update.
pub const DEFAULT_VARIANCE_FLOOR: f64 = 1e-10;

/// Gamma hyper-prior on the weight prior precision.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PriorSpec {
    alpha_lambda: f64,
    beta_lambda: f64,
}

impl PriorSpec {
    pub fn new(alpha_lambda: f64, beta_lambda: f64) -> Result<Self> {
        if !(alpha_lambda.is_finite() && beta_lambda.is_finite() && alpha_lambda > 0.0 && beta_lambda > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "prior hyper-parameters must be positive, got ({alpha_lambda}, {beta_lambda})"
            )));
        }
        Ok(Self {
            alpha_lambda,
            beta_lambda,
        })
    }

    pub fn alpha_lambda(&self) -> f64 {
        self.alpha_lambda
    }

    pub fn beta_lambda(&self) -> f64 {
        self.beta_lambda
    }

    /// `E[lambda_p] = alpha_lambda / beta_lambda`.
    pub fn expected_precision(&self) -> f64 {
        self.alpha_lambda / self.beta_lambda
    }
}

impl Default for PriorSpec {
    fn default() -> Self {
        Self {
            alpha_lambda: 6.0,
            beta_lambda: 6.0,
        }
    }
}

/// Result of one moment-matching weight update.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeightUpdate {
    pub mean: f64,
    pub variance: f64,
    /// The raw variance fell below the floor and was clamped.
    pub clamped: bool,
}

/// Moment-matching update of one Gaussian weight from the gradients of `log Z`.
///
/// `m' = m + v dm`, `v' = v - v^2 (dm^2 - 2 dv)`. A point mass (`v == 0`) is
/// left untouched; otherwise a variance below `floor` is raised to `floor`.
pub fn pbp_update_weight(mean: f64, variance: f64, d_mean: f64, d_var: f64, floor: f64) -> WeightUpdate {
    if variance == 0.0 {
        return WeightUpdate {
            mean,
            variance,
            clamped: false,
        };
    }
    let new_mean = mean + variance * d_mean;
    let raw = variance - variance * variance * (d_mean * d_mean - 2.0 * d_var);
    if raw < floor {
        WeightUpdate {
            mean: new_mean,
            variance: floor,
            clamped: true,
        }
    } else {
        WeightUpdate {
            mean: new_mean,
            variance: raw,
            clamped: false,
        }
    }
}

/// Outcome of a noise-posterior update.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseUpdate {
    pub posterior: GammaPosterior,
    /// The candidate posterior was invalid and the input was kept.
    pub rejected: bool,
}

/// Moment-matching update of the Gamma noise posterior from a partition triple.
pub fn update_noise_posterior(noise: &GammaPosterior, partition: &PartitionTriple) -> NoiseUpdate {
    let keep = NoiseUpdate {
        posterior: *noise,
        rejected: true,
    };
    if !partition.is_finite() {
        return keep;
    }
    let (alpha, beta) = (noise.alpha(), noise.beta());
    let r1 = (partition.log_z2 - partition.log_z1).exp();
    let r0 = (partition.log_z1 - partition.log_z).exp();
    let alpha_den = r1 / r0 * (alpha + 1.0) / alpha - 1.0;
    let beta_den = r1 * (alpha + 1.0) / beta - r0 * alpha / beta;
    if alpha_den.abs() < f64::MIN_POSITIVE || beta_den.abs() < f64::MIN_POSITIVE {
        return keep;
    }
    match GammaPosterior::new(1.0 / alpha_den, 1.0 / beta_den) {
        Ok(posterior) => NoiseUpdate {
            posterior,
            rejected: false,
        },
        Err(_) => keep,
    }
}

/// Multiplies every weight belief by the zero-mean prior factor with
/// precision `E[lambda_p]` and moment-matches the result.
///
/// Returns the updated layer and the number of clamped variances.
pub fn incorporate_prior(layer: &GaussianMatrix, prior: &PriorSpec, floor: f64) -> (GaussianMatrix, usize) {
    let prior_var = 1.0 / prior.expected_precision();
    let mut out = layer.clone();
    let mut clamps = 0;
    let (means, variances) = (layer.means(), layer.variances());
    let mut new_means = Vec::with_capacity(means.len());
    let mut new_vars = Vec::with_capacity(means.len());
    for (&m, &v) in means.iter().zip(variances) {
        // log Z = ln N(0 | m, v + prior_var)
        let total = v + prior_var;
        let d_mean = -m / total;
        let d_var = -0.5 / total + 0.5 * m * m / (total * total);
        let up = pbp_update_weight(m, v, d_mean, d_var, floor);
        clamps += usize::from(up.clamped);
        new_means.push(up.mean);
        // Rounding can push the product a hair above the input; never widen.
        new_vars.push(up.variance.min(v));
    }
    out.means_mut().copy_from_slice(&new_means);
    out.variances_mut().copy_from_slice(&new_vars);
    (out, clamps)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_is_a_fixed_point() {
        let up = pbp_update_weight(0.3, 0.7, 0.0, 0.0, DEFAULT_VARIANCE_FLOOR);
        assert_eq!((up.mean, up.variance, up.clamped), (0.3, 0.7, false));
    }

    #[test]
    fn conjugate_gaussian_update() {
        // prior N(0, 1), likelihood N(1 | w, 1): Z = N(1 | m, v + 1)
        let (m, v, y, s) = (0.0, 1.0, 1.0, 1.0);
        let total: f64 = v + s;
        let d_mean = (y - m) / total;
        let d_var = -0.5 / total + 0.5 * (y - m) * (y - m) / (total * total);
        assert_eq!((d_mean, d_var), (0.5, -0.125));
        let up = pbp_update_weight(m, v, d_mean, d_var, DEFAULT_VARIANCE_FLOOR);
        assert!((up.mean - 0.5).abs() < 1e-10);
        assert!((up.variance - 0.5).abs() < 1e-10);
    }

    #[test]
    fn point_mass_is_unchanged() {
        let up = pbp_update_weight(1.5, 0.0, 3.0, -7.0, DEFAULT_VARIANCE_FLOOR);
        assert_eq!((up.mean, up.variance), (1.5, 0.0));
    }

    #[test]
    fn overshoot_is_clamped_and_flagged() {
        let up = pbp_update_weight(0.0, 1.0, 10.0, 0.0, DEFAULT_VARIANCE_FLOOR);
        assert!(up.clamped);
        assert_eq!(up.variance, DEFAULT_VARIANCE_FLOOR);
    }

    #[test]
    fn flat_partition_keeps_alpha() {
        let noise = GammaPosterior::new(6.0, 6.0).unwrap();
        let p = PartitionTriple {
            log_z: -1.0,
            log_z1: -1.0,
            log_z2: -1.0,
        };
        let up = update_noise_posterior(&noise, &p);
        // alpha' = 1 / ((alpha + 1) / alpha - 1) = alpha; beta' = 1 / (1/beta) = beta
        assert!(!up.rejected);
        assert!((up.posterior.alpha() - 6.0).abs() < 1e-12);
        assert!((up.posterior.beta() - 6.0).abs() < 1e-12);
    }

    #[test]
    fn invalid_noise_update_is_rejected() {
        let noise = GammaPosterior::new(6.0, 6.0).unwrap();
        // r1/r0 large enough that alpha' < 1.
        let p = PartitionTriple {
            log_z: 0.0,
            log_z1: 0.0,
            log_z2: 1.0,
        };
        let up = update_noise_posterior(&noise, &p);
        assert!(up.rejected);
        assert_eq!(up.posterior, noise);
        let nan = PartitionTriple {
            log_z: f64::NAN,
            log_z1: 0.0,
            log_z2: 0.0,
        };
        assert!(update_noise_posterior(&noise, &nan).rejected);
    }

    #[test]
    fn prior_product_examples() {
        let layer = GaussianMatrix::from_parts(1, 3, vec![0.0, 2.0, -1.0], vec![1.0, 0.0, 0.4]).unwrap();
        let unit = PriorSpec::new(1.0, 1.0).unwrap();
        let (out, clamps) = incorporate_prior(&layer, &unit, DEFAULT_VARIANCE_FLOOR);
        assert_eq!(clamps, 0);
        assert!((out.mean(0, 0)).abs() < 1e-15);
        assert!((out.variance(0, 0) - 0.5).abs() < 1e-12);
        assert_eq!((out.mean(0, 1), out.variance(0, 1)), (2.0, 0.0));
        // Product of N(-1, 0.4) and N(0, 1): precision 3.5, mean -2.5/3.5.
        assert!((out.variance(0, 2) - 1.0 / 3.5).abs() < 1e-12);
        assert!((out.mean(0, 2) + 2.5 / 3.5).abs() < 1e-12);

        let vanishing = PriorSpec::new(1e-12, 1.0).unwrap();
        let (same, _) = incorporate_prior(&layer, &vanishing, DEFAULT_VARIANCE_FLOOR);
        for (a, b) in same.means().iter().zip(layer.means()) {
            assert!((a - b).abs() < 1e-9);
        }
        for (a, b) in same.variances().iter().zip(layer.variances()) {
            assert!((a - b).abs() < 1e-9);
        }
    }
}
