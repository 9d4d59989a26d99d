use std::f64::consts::{FRAC_1_SQRT_2, PI};

use crate::error::{ensure_finite, Error, Result};

/// Per-unit Gaussian activation moments.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianMoments {
    pub means: Vec<f64>,
    pub variances: Vec<f64>,
}

impl GaussianMoments {
    pub fn new(means: Vec<f64>, variances: Vec<f64>) -> Result<Self> {
        if means.len() != variances.len() {
            return Err(Error::Dimension(format!(
                "{} means but {} variances",
                means.len(),
                variances.len()
            )));
        }
        if variances.iter().any(|&v| v < 0.0) {
            return Err(Error::InvalidArgument("negative activation variance".into()));
        }
        Ok(Self { means, variances })
    }

    /// Point masses at `values`.
    pub fn deterministic(values: &[f64]) -> Self {
        Self {
            means: values.to_vec(),
            variances: vec![0.0; values.len()],
        }
    }

    pub fn zeros(len: usize) -> Self {
        Self {
            means: vec![0.0; len],
            variances: vec![0.0; len],
        }
    }

    pub fn len(&self) -> usize {
        self.means.len()
    }

    pub fn is_empty(&self) -> bool {
        self.means.is_empty()
    }

    pub(crate) fn validate(&self) -> Result<()> {
        if self.means.len() != self.variances.len() {
            return Err(Error::Dimension("moment vectors differ in length".into()));
        }
        ensure_finite(&self.means, "activation means")?;
        ensure_finite(&self.variances, "activation variances")?;
        if self.variances.iter().any(|&v| v < 0.0) {
            return Err(Error::InvalidArgument("negative activation variance".into()));
        }
        Ok(())
    }
}

pub(crate) fn std_normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * PI).sqrt()
}

pub(crate) fn std_normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x * FRAC_1_SQRT_2)
}

/// Exact mean and variance of `max(0, z)` for `z ~ N(mean, var)`, per unit.
pub fn propagate_relu_moments(input: &GaussianMoments) -> Result<GaussianMoments> {
    input.validate()?;
    let (means, variances) = input
        .means
        .iter()
        .zip(&input.variances)
        .map(|(&m, &v)| relu_moments(m, v))
        .unzip();
    Ok(GaussianMoments { means, variances })
}

fn relu_moments(m: f64, v: f64) -> (f64, f64) {
    if v == 0.0 {
        return (m.max(0.0), 0.0);
    }
    let s = v.sqrt();
    let a = m / s;
    let cdf = std_normal_cdf(a);
    let pdf = std_normal_pdf(a);
    let mean = m * cdf + s * pdf;
    let second = (m * m + v) * cdf + m * s * pdf;
    (mean, (second - mean * mean).max(0.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn relu_of_point_masses() {
        let out = propagate_relu_moments(&GaussianMoments::deterministic(&[5.0, -5.0])).unwrap();
        assert_eq!(out.means, vec![5.0, 0.0]);
        assert_eq!(out.variances, vec![0.0, 0.0]);
    }

    #[test]
    fn relu_of_standard_normal_matches_quadrature() {
        // Trapezoid rule over [-12, 12] of max(0, z) and max(0, z)^2 against the N(0,1) density.
        let n = 200_000;
        let (lo, hi) = (-12.0, 12.0);
        let h = (hi - lo) / n as f64;
        let (mut m1, mut m2) = (0.0, 0.0);
        for i in 0..=n {
            let z: f64 = lo + i as f64 * h;
            let w = if i == 0 || i == n { 0.5 } else { 1.0 };
            let r = z.max(0.0);
            let dens = (-0.5 * z * z).exp() / (2.0 * PI).sqrt();
            m1 += w * r * dens * h;
            m2 += w * r * r * dens * h;
        }
        let oracle_var = m2 - m1 * m1;
        assert!((m1 - 0.398_942_280_4).abs() < 1e-8);
        assert!((oracle_var - 0.340_845_057_2).abs() < 1e-8);

        let out = propagate_relu_moments(&GaussianMoments::new(vec![0.0], vec![1.0]).unwrap()).unwrap();
        assert!((out.means[0] - m1).abs() < 1e-8);
        assert!((out.variances[0] - oracle_var).abs() < 1e-8);
    }

    #[test]
    fn rejects_negative_variance() {
        assert!(GaussianMoments::new(vec![0.0], vec![-1.0]).is_err());
        assert!(GaussianMoments::new(vec![0.0, 1.0], vec![1.0]).is_err());
    }
}
