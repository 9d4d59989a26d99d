//! Observation windows fed to the collision predictors.

use crate::error::{Error, Result};

/// Number of scalar features in one observation.
pub const FEATURE_DIM: usize = 9;
/// Default window length `T`.
pub const WINDOW_LEN: usize = 8;
/// Column holding the primitive heading inside an observation.
pub const HEADING_FEATURE: usize = 8;

/// A fixed-length window of observations, row-major, oldest step first.
///
/// The first `pad_count` rows are zero padding prepended for episodes that
/// have not yet produced `len()` observations.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservationSequence {
    data: Vec<f64>,
    dim: usize,
    pad_count: usize,
}

impl ObservationSequence {
    pub fn new(steps: &[Vec<f64>], pad_count: usize) -> Result<Self> {
        let dim = steps.first().map_or(0, Vec::len);
        if steps.iter().any(|s| s.len() != dim) {
            return Err(Error::Dimension("observation rows differ in length".into()));
        }
        Self::from_flat(steps.concat(), dim, pad_count)
    }

    pub fn from_flat(data: Vec<f64>, dim: usize, pad_count: usize) -> Result<Self> {
        if dim == 0 || data.len() % dim != 0 {
            return Err(Error::Dimension(format!(
                "{} values cannot form rows of width {dim}",
                data.len()
            )));
        }
        if pad_count > data.len() / dim {
            return Err(Error::InvalidArgument(format!(
                "pad_count {pad_count} exceeds window length {}",
                data.len() / dim
            )));
        }
        Ok(Self {
            data,
            dim,
            pad_count,
        })
    }

    pub fn len(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn pad_count(&self) -> usize {
        self.pad_count
    }

    pub fn step(&self, t: usize) -> &[f64] {
        &self.data[t * self.dim..(t + 1) * self.dim]
    }

    pub fn step_mut(&mut self, t: usize) -> &mut [f64] {
        &mut self.data[t * self.dim..(t + 1) * self.dim]
    }

    pub fn steps(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.dim)
    }

    pub fn last(&self) -> &[f64] {
        self.step(self.len() - 1)
    }

    pub fn as_flat(&self) -> &[f64] {
        &self.data
    }

    pub fn as_flat_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }
}

/// Prepends zero rows so the window reaches length `len`.
pub fn zero_pad(steps: &[Vec<f64>], len: usize) -> Result<ObservationSequence> {
    if steps.is_empty() {
        return Err(Error::InvalidArgument("cannot pad an empty observation list".into()));
    }
    if steps.len() > len {
        return Err(Error::InvalidArgument(format!(
            "{} observations do not fit a window of {len}",
            steps.len()
        )));
    }
    let dim = steps[0].len();
    let pad = len - steps.len();
    let mut data = vec![0.0; pad * dim];
    for step in steps {
        if step.len() != dim {
            return Err(Error::Dimension("observation rows differ in length".into()));
        }
        data.extend_from_slice(step);
    }
    ObservationSequence::from_flat(data, dim, pad)
}

/// Predictive distribution of the collision score for one query.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PredictiveDistribution {
    pub mean: f64,
    /// Model (epistemic) variance.
    pub variance: f64,
    /// `variance` plus the expected observation-noise variance.
    pub total_variance: f64,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn full_window_is_unchanged() {
        let steps: Vec<Vec<f64>> = (0..8).map(|i| vec![i as f64; 3]).collect();
        let seq = zero_pad(&steps, 8).unwrap();
        assert_eq!(seq.pad_count(), 0);
        assert_eq!(seq.len(), 8);
        for (t, row) in seq.steps().enumerate() {
            assert_eq!(row, steps[t].as_slice());
        }
    }

    #[test]
    fn single_step_gets_seven_pad_rows() {
        let seq = zero_pad(&[vec![1.0; FEATURE_DIM]], WINDOW_LEN).unwrap();
        assert_eq!(seq.pad_count(), 7);
        for t in 0..7 {
            assert!(seq.step(t).iter().all(|&v| v == 0.0));
        }
        assert!(seq.last().iter().all(|&v| v == 1.0));
    }

    #[test]
    fn pads_are_leading() {
        let seq = zero_pad(&vec![vec![1.0; 2]; 3], 4).unwrap();
        assert_eq!(seq.as_flat(), &[0.0, 0.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0]);
        assert_eq!(seq.pad_count(), 1);
    }

    #[test]
    fn rejects_empty_and_overlong() {
        assert!(zero_pad(&[], 8).is_err());
        assert!(zero_pad(&vec![vec![0.0; 2]; 9], 8).is_err());
        assert!(zero_pad(&[vec![0.0; 2], vec![0.0; 3]], 8).is_err());
    }
}
