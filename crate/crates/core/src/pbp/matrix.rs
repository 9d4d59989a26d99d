use rand::Rng;
use rand_distr::StandardNormal;

use super::moments::GaussianMoments;
use crate::error::{ensure_finite, Error, Result};

/// A weight matrix whose entries are independent 1D Gaussians.
///
/// Stored row-major; the last column multiplies a constant bias unit.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianMatrix {
    rows: usize,
    cols: usize,
    means: Vec<f64>,
    variances: Vec<f64>,
}

/// Gradients of a scalar objective with respect to every mean and variance
/// of one [`GaussianMatrix`], same layout as the matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerGradient {
    pub means: Vec<f64>,
    pub variances: Vec<f64>,
}

impl LayerGradient {
    pub fn zeros_like(layer: &GaussianMatrix) -> Self {
        let n = layer.rows * layer.cols;
        Self {
            means: vec![0.0; n],
            variances: vec![0.0; n],
        }
    }

    pub fn is_finite(&self) -> bool {
        self.means.iter().chain(&self.variances).all(|g| g.is_finite())
    }
}

impl GaussianMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            means: vec![0.0; rows * cols],
            variances: vec![0.0; rows * cols],
        }
    }

    pub fn from_parts(rows: usize, cols: usize, means: Vec<f64>, variances: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::Dimension("layer must have at least one row and column".into()));
        }
        if means.len() != rows * cols || variances.len() != rows * cols {
            return Err(Error::Dimension(format!(
                "expected {} entries for a {rows}x{cols} layer, got {} means and {} variances",
                rows * cols,
                means.len(),
                variances.len()
            )));
        }
        ensure_finite(&means, "weight means")?;
        ensure_finite(&variances, "weight variances")?;
        if variances.iter().any(|&v| v < 0.0) {
            return Err(Error::InvalidArgument("negative weight variance".into()));
        }
        Ok(Self {
            rows,
            cols,
            means,
            variances,
        })
    }

    /// Means drawn from `N(0, 1/cols)`, variances set to `1/cols`.
    pub fn random<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> Self {
        let scale = 1.0 / cols as f64;
        let means = (0..rows * cols)
            .map(|_| rng.sample::<f64, _>(StandardNormal) * scale.sqrt())
            .collect();
        Self {
            rows,
            cols,
            means,
            variances: vec![scale; rows * cols],
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    /// Column count, including the bias column.
    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn fan_in(&self) -> usize {
        self.cols - 1
    }

    pub fn means(&self) -> &[f64] {
        &self.means
    }

    pub fn variances(&self) -> &[f64] {
        &self.variances
    }

    pub fn means_mut(&mut self) -> &mut [f64] {
        &mut self.means
    }

    pub fn variances_mut(&mut self) -> &mut [f64] {
        &mut self.variances
    }

    pub fn mean(&self, row: usize, col: usize) -> f64 {
        self.means[row * self.cols + col]
    }

    pub fn variance(&self, row: usize, col: usize) -> f64 {
        self.variances[row * self.cols + col]
    }

    pub fn set(&mut self, row: usize, col: usize, mean: f64, variance: f64) {
        let k = row * self.cols + col;
        self.means[k] = mean;
        self.variances[k] = variance;
    }

    /// Pre-activation scale `1/sqrt(cols)`.
    pub fn scale(&self) -> f64 {
        1.0 / (self.cols as f64).sqrt()
    }

    fn check_input(&self, input: &GaussianMoments) -> Result<()> {
        if input.len() != self.fan_in() {
            return Err(Error::Dimension(format!(
                "layer expects {} inputs, got {}",
                self.fan_in(),
                input.len()
            )));
        }
        input.validate()
    }

    /// Output moments for independent Gaussian inputs (see [`propagate_linear_gaussian`]).
    pub fn propagate(&self, input: &GaussianMoments) -> Result<GaussianMoments> {
        self.check_input(input)?;
        Ok(self.propagate_unchecked(&input.means, &input.variances))
    }

    pub(crate) fn propagate_unchecked(&self, in_mean: &[f64], in_var: &[f64]) -> GaussianMoments {
        let k = self.scale();
        let k2 = k * k;
        let fan_in = self.fan_in();
        let mut means = Vec::with_capacity(self.rows);
        let mut variances = Vec::with_capacity(self.rows);
        for i in 0..self.rows {
            let m_row = &self.means[i * self.cols..(i + 1) * self.cols];
            let v_row = &self.variances[i * self.cols..(i + 1) * self.cols];
            let mut mean = 0.0;
            let mut var = 0.0;
            for j in 0..fan_in {
                let (am, av) = (in_mean[j], in_var[j]);
                mean += m_row[j] * am;
                var += m_row[j] * m_row[j] * av + v_row[j] * (am * am + av);
            }
            mean += m_row[fan_in];
            var += v_row[fan_in];
            means.push(k * mean);
            variances.push(k2 * var);
        }
        GaussianMoments { means, variances }
    }

    /// Reverse-mode pass through [`GaussianMatrix::propagate`].
    ///
    /// Given the objective's gradients with respect to the output means and
    /// variances, accumulates weight gradients into `grad` and returns the
    /// gradients with respect to the input means and variances.
    pub fn backward(
        &self,
        input: &GaussianMoments,
        grad_out_mean: &[f64],
        grad_out_var: &[f64],
        grad: &mut LayerGradient,
    ) -> (Vec<f64>, Vec<f64>) {
        let k = self.scale();
        let k2 = k * k;
        let fan_in = self.fan_in();
        let mut g_in_mean = vec![0.0; fan_in];
        let mut g_in_var = vec![0.0; fan_in];
        for i in 0..self.rows {
            let gm = k * grad_out_mean[i];
            let gv = k2 * grad_out_var[i];
            if gm == 0.0 && gv == 0.0 {
                continue;
            }
            let base = i * self.cols;
            for j in 0..fan_in {
                let (am, av) = (input.means[j], input.variances[j]);
                let w_m = self.means[base + j];
                let w_v = self.variances[base + j];
                grad.means[base + j] += gm * am + gv * 2.0 * w_m * av;
                grad.variances[base + j] += gv * (am * am + av);
                g_in_mean[j] += gm * w_m + gv * 2.0 * w_v * am;
                g_in_var[j] += gv * (w_m * w_m + w_v);
            }
            grad.means[base + fan_in] += gm;
            grad.variances[base + fan_in] += gv;
        }
        (g_in_mean, g_in_var)
    }
}

/// Moment propagation through a Gaussian-weight linear layer.
///
/// With the bias unit (mean 1, variance 0) appended and `k = 1/sqrt(cols)`:
/// `mean = k * M a_m` and `var = k^2 * ((M∘M) a_v + V (a_m∘a_m + a_v))`.
pub fn propagate_linear_gaussian(layer: &GaussianMatrix, input: &GaussianMoments) -> Result<GaussianMoments> {
    layer.propagate(input)
}
