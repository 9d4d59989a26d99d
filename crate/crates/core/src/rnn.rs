//! Recurrent network with Gaussian weights trained by probabilistic
//! backpropagation through time.
//!
//! The hidden layer is linear: `h_t = W_x [x_t; 1] + W_h [h_{t-1}; 1]` in
//! moment space, with a non-recurrent scalar Gaussian readout on top. Each
//! window element contributes a marginal likelihood term against the episode
//! label; updates for step `t` flow through the unrolled prefix `1..=t` and
//! are applied from `t = T` back to `t = 1`.

use rand::seq::SliceRandom;
use rand::Rng;

use crate::error::{Error, Result};
use crate::pbp::{
    gaussian_log_density, incorporate_prior, log_marginal_gradient, pbp_update_weight,
    update_noise_posterior, GammaPosterior, GaussianMatrix, GaussianMoments, LayerGradient,
    PartitionTriple, PriorSpec, DEFAULT_VARIANCE_FLOOR,
};
use crate::sequence::{ObservationSequence, PredictiveDistribution};

pub use crate::sequence::zero_pad;

/// Default number of hidden units.
pub const DEFAULT_HIDDEN: usize = 16;

#[derive(Debug, Clone, PartialEq)]
pub struct RecurrentBayesNet {
    input_dim: usize,
    hidden_dim: usize,
    /// `hidden × (input + 1)`, the input-to-hidden means and variances.
    pub recurrent_input: GaussianMatrix,
    /// `hidden × (hidden + 1)`, the transition means and variances.
    pub recurrent_hidden: GaussianMatrix,
    /// `1 × (hidden + 1)`.
    pub readout: GaussianMatrix,
    pub noise: GammaPosterior,
    pub prior: PriorSpec,
}

/// Moments recorded by a forward pass.
#[derive(Debug, Clone, PartialEq)]
pub struct ForwardTrace {
    /// Hidden moments `h_1..h_T`.
    pub hidden: Vec<GaussianMoments>,
    /// Readout moments at every step.
    pub outputs: Vec<GaussianMoments>,
    /// Prediction at the final step.
    pub prediction: PredictiveDistribution,
}

/// Gradients of one objective with respect to every parameter of the net.
#[derive(Debug, Clone, PartialEq)]
pub struct NetGradient {
    pub recurrent_input: LayerGradient,
    pub recurrent_hidden: LayerGradient,
    pub readout: LayerGradient,
}

impl NetGradient {
    fn zeros_like(net: &RecurrentBayesNet) -> Self {
        Self {
            recurrent_input: LayerGradient::zeros_like(&net.recurrent_input),
            recurrent_hidden: LayerGradient::zeros_like(&net.recurrent_hidden),
            readout: LayerGradient::zeros_like(&net.readout),
        }
    }

    fn is_finite(&self) -> bool {
        self.recurrent_input.is_finite() && self.recurrent_hidden.is_finite() && self.readout.is_finite()
    }
}

/// `log Z_t` and its gradient for one window position.
#[derive(Debug, Clone, PartialEq)]
pub struct StepGradient {
    pub log_z: f64,
    pub grad: NetGradient,
}

/// Outcome of a TBPTT update on one sequence.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SequenceUpdate {
    pub partition: PartitionTriple,
    pub clamps: usize,
}

impl RecurrentBayesNet {
    pub fn new<R: Rng + ?Sized>(input_dim: usize, hidden_dim: usize, rng: &mut R) -> Result<Self> {
        if input_dim == 0 || hidden_dim == 0 {
            return Err(Error::InvalidArgument("input and hidden sizes must be positive".into()));
        }
        Ok(Self {
            input_dim,
            hidden_dim,
            recurrent_input: GaussianMatrix::random(hidden_dim, input_dim + 1, rng),
            recurrent_hidden: GaussianMatrix::random(hidden_dim, hidden_dim + 1, rng),
            readout: GaussianMatrix::random(1, hidden_dim + 1, rng),
            noise: GammaPosterior::default(),
            prior: PriorSpec::default(),
        })
    }

    pub fn from_parts(
        recurrent_input: GaussianMatrix,
        recurrent_hidden: GaussianMatrix,
        readout: GaussianMatrix,
        noise: GammaPosterior,
        prior: PriorSpec,
    ) -> Result<Self> {
        let hidden_dim = recurrent_input.rows();
        let input_dim = recurrent_input.fan_in();
        if input_dim == 0 || hidden_dim == 0 {
            return Err(Error::Dimension("input and hidden sizes must be positive".into()));
        }
        if recurrent_hidden.rows() != hidden_dim || recurrent_hidden.cols() != hidden_dim + 1 {
            return Err(Error::Dimension(format!(
                "transition matrix must be {hidden_dim}x{}",
                hidden_dim + 1
            )));
        }
        if readout.rows() != 1 || readout.cols() != hidden_dim + 1 {
            return Err(Error::Dimension(format!("readout must be 1x{}", hidden_dim + 1)));
        }
        Ok(Self {
            input_dim,
            hidden_dim,
            recurrent_input,
            recurrent_hidden,
            readout,
            noise,
            prior,
        })
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn hidden_dim(&self) -> usize {
        self.hidden_dim
    }

    fn check_sequence(&self, seq: &ObservationSequence) -> Result<()> {
        if seq.dim() != self.input_dim {
            return Err(Error::Dimension(format!(
                "net expects {} features per step, sequence has {}",
                self.input_dim,
                seq.dim()
            )));
        }
        if seq.is_empty() {
            return Err(Error::InvalidArgument("empty sequence".into()));
        }
        crate::error::ensure_finite(seq.as_flat(), "sequence")
    }

    fn hidden_step(&self, x: &[f64], prev: &GaussianMoments) -> GaussianMoments {
        let zeros = vec![0.0; x.len()];
        let from_input = self.recurrent_input.propagate_unchecked(x, &zeros);
        let from_hidden = self.recurrent_hidden.propagate_unchecked(&prev.means, &prev.variances);
        GaussianMoments {
            means: from_input.means.iter().zip(&from_hidden.means).map(|(a, b)| a + b).collect(),
            variances: from_input
                .variances
                .iter()
                .zip(&from_hidden.variances)
                .map(|(a, b)| a + b)
                .collect(),
        }
    }

    /// Propagates moments through the whole window, recording every step.
    pub fn forward_sequence(&self, seq: &ObservationSequence) -> Result<ForwardTrace> {
        self.check_sequence(seq)?;
        let mut hidden = Vec::with_capacity(seq.len());
        let mut outputs = Vec::with_capacity(seq.len());
        let mut h = GaussianMoments::zeros(self.hidden_dim);
        for x in seq.steps() {
            h = self.hidden_step(x, &h);
            outputs.push(self.readout.propagate_unchecked(&h.means, &h.variances));
            hidden.push(h.clone());
        }
        let last = outputs.last().expect("non-empty sequence");
        let prediction = self.predictive(last.means[0], last.variances[0]);
        if !(prediction.mean.is_finite() && prediction.total_variance.is_finite()) {
            return Err(Error::Numeric("forward pass overflowed".into()));
        }
        Ok(ForwardTrace {
            hidden,
            outputs,
            prediction,
        })
    }

    /// Final-step predictive distribution without keeping the trace.
    pub fn predict(&self, seq: &ObservationSequence) -> Result<PredictiveDistribution> {
        self.check_sequence(seq)?;
        let mut h = GaussianMoments::zeros(self.hidden_dim);
        for x in seq.steps() {
            h = self.hidden_step(x, &h);
        }
        let out = self.readout.propagate_unchecked(&h.means, &h.variances);
        let prediction = self.predictive(out.means[0], out.variances[0]);
        if !(prediction.mean.is_finite() && prediction.total_variance.is_finite()) {
            return Err(Error::Numeric("forward pass overflowed".into()));
        }
        Ok(prediction)
    }

    fn predictive(&self, mean: f64, variance: f64) -> PredictiveDistribution {
        PredictiveDistribution {
            mean,
            variance,
            total_variance: variance + self.noise.noise_variance(),
        }
    }

    /// Per-step log marginal likelihood of `label` and its gradient with
    /// respect to every weight mean and variance, all at the current
    /// parameter values.
    pub fn step_gradients(&self, seq: &ObservationSequence, label: f64) -> Result<Vec<StepGradient>> {
        let trace = self.forward_sequence(seq)?;
        let noise_var = self.noise.noise_variance();
        let h0 = GaussianMoments::zeros(self.hidden_dim);
        let inputs: Vec<GaussianMoments> = seq.steps().map(GaussianMoments::deterministic).collect();
        let mut result = Vec::with_capacity(seq.len());
        for t in 0..seq.len() {
            let out = &trace.outputs[t];
            let lg = log_marginal_gradient(label, out.means[0], out.variances[0], noise_var)?;
            let mut grad = NetGradient::zeros_like(self);
            let (mut gm, mut gv) =
                self.readout
                    .backward(&trace.hidden[t], &[lg.d_mean], &[lg.d_var], &mut grad.readout);
            for s in (0..=t).rev() {
                self.recurrent_input
                    .backward(&inputs[s], &gm, &gv, &mut grad.recurrent_input);
                let prev = if s == 0 { &h0 } else { &trace.hidden[s - 1] };
                let (pm, pv) = self
                    .recurrent_hidden
                    .backward(prev, &gm, &gv, &mut grad.recurrent_hidden);
                gm = pm;
                gv = pv;
            }
            result.push(StepGradient {
                log_z: lg.log_z,
                grad,
            });
        }
        Ok(result)
    }

    /// Partition triple for `label`: per-step likelihoods averaged as
    /// `ln(mean_t Z_t)` with the noise posterior at `alpha`, `alpha+1`, `alpha+2`.
    pub fn partition(&self, trace: &ForwardTrace, label: f64) -> Result<PartitionTriple> {
        let mut logs = [0.0; 3];
        for (k, slot) in logs.iter_mut().enumerate() {
            let noise_var = self.noise.shifted_noise_variance(k as u32);
            let per_step = trace
                .outputs
                .iter()
                .map(|o| gaussian_log_density(label, o.means[0], o.variances[0] + noise_var))
                .collect::<Result<Vec<f64>>>()?;
            *slot = log_mean_exp(&per_step);
        }
        Ok(PartitionTriple {
            log_z: logs[0],
            log_z1: logs[1],
            log_z2: logs[2],
        })
    }

    /// One reverse-order TBPTT sweep on `seq` with the label broadcast to
    /// every step.
    ///
    /// All gradients are taken at the pre-sweep parameters; the per-step
    /// updates are then applied from the last step to the first. On numeric
    /// failure the net is left unchanged.
    pub fn tbptt_update_sequence(&mut self, seq: &ObservationSequence, label: f64) -> Result<SequenceUpdate> {
        self.tbptt_update_with_floor(seq, label, DEFAULT_VARIANCE_FLOOR)
    }

    pub fn tbptt_update_with_floor(
        &mut self,
        seq: &ObservationSequence,
        label: f64,
        floor: f64,
    ) -> Result<SequenceUpdate> {
        let trace = self.forward_sequence(seq)?;
        let partition = self.partition(&trace, label)?;
        let steps = self.step_gradients(seq, label)?;
        if !partition.is_finite() || steps.iter().any(|s| !s.grad.is_finite()) {
            return Err(Error::Numeric("non-finite gradient or partition".into()));
        }
        let mut updated = self.clone();
        let mut clamps = 0;
        for step in steps.iter().rev() {
            clamps += apply_layer(&mut updated.readout, &step.grad.readout, floor);
            clamps += apply_layer(&mut updated.recurrent_hidden, &step.grad.recurrent_hidden, floor);
            clamps += apply_layer(&mut updated.recurrent_input, &step.grad.recurrent_input, floor);
        }
        let finite = [&updated.readout, &updated.recurrent_hidden, &updated.recurrent_input]
            .iter()
            .all(|l| l.means().iter().chain(l.variances()).all(|x| x.is_finite()));
        if !finite {
            return Err(Error::Numeric("update overflowed".into()));
        }
        *self = updated;
        Ok(SequenceUpdate { partition, clamps })
    }

    /// Multiplies the weight prior into every matrix.
    pub fn incorporate_prior(&mut self, floor: f64) -> usize {
        let mut clamps = 0;
        for layer in [&mut self.recurrent_input, &mut self.recurrent_hidden, &mut self.readout] {
            let (updated, c) = incorporate_prior(layer, &self.prior, floor);
            *layer = updated;
            clamps += c;
        }
        clamps
    }
}

fn apply_layer(layer: &mut GaussianMatrix, grad: &LayerGradient, floor: f64) -> usize {
    let mut clamps = 0;
    let n = layer.means().len();
    for k in 0..n {
        let (m, v) = (layer.means()[k], layer.variances()[k]);
        let up = pbp_update_weight(m, v, grad.means[k], grad.variances[k], floor);
        clamps += usize::from(up.clamped);
        layer.means_mut()[k] = up.mean;
        layer.variances_mut()[k] = up.variance;
    }
    clamps
}

fn log_mean_exp(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return max;
    }
    let sum: f64 = values.iter().map(|v| (v - max).exp()).sum();
    max + (sum / values.len() as f64).ln()
}

/// Per-epoch training record.
#[derive(Debug, Clone, PartialEq)]
pub struct EpochStats {
    /// Mean over sequences of the pre-update `log Z`.
    pub mean_log_z: f64,
    pub clamps: usize,
    pub skipped: usize,
    pub noise_rejected: bool,
    pub noise_variance: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainingStats {
    pub epochs: Vec<EpochStats>,
}

impl TrainingStats {
    pub fn total_clamps(&self) -> usize {
        self.epochs.iter().map(|e| e.clamps).sum()
    }

    pub fn total_rejections(&self) -> usize {
        self.epochs.iter().filter(|e| e.noise_rejected).count()
    }

    pub fn total_skipped(&self) -> usize {
        self.epochs.iter().map(|e| e.skipped).sum()
    }
}

/// Runs `epochs` passes over `dataset` in seeded shuffled order.
///
/// After every epoch the noise posterior is updated from the epoch-mean
/// partition triple and the weight prior is multiplied into every matrix.
pub fn train_epochs<R: Rng + ?Sized>(
    net: &mut RecurrentBayesNet,
    dataset: &[(ObservationSequence, f64)],
    epochs: usize,
    rng: &mut R,
) -> Result<TrainingStats> {
    if dataset.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mut stats = TrainingStats::default();
    let mut order: Vec<usize> = (0..dataset.len()).collect();
    for _ in 0..epochs {
        order.shuffle(rng);
        let mut sums = [0.0f64; 3];
        let mut used = 0usize;
        let mut skipped = 0usize;
        let mut clamps = 0usize;
        for &i in &order {
            let (seq, label) = &dataset[i];
            match net.tbptt_update_sequence(seq, *label) {
                Ok(up) => {
                    sums[0] += up.partition.log_z;
                    sums[1] += up.partition.log_z1;
                    sums[2] += up.partition.log_z2;
                    clamps += up.clamps;
                    used += 1;
                }
                Err(Error::Numeric(msg)) => {
                    log::debug!("skipping sequence {i}: {msg}");
                    skipped += 1;
                }
                Err(e) => return Err(e),
            }
        }
        let mut noise_rejected = true;
        let mut mean_log_z = f64::NAN;
        if used > 0 {
            let n = used as f64;
            let mean = PartitionTriple {
                log_z: sums[0] / n,
                log_z1: sums[1] / n,
                log_z2: sums[2] / n,
            };
            mean_log_z = mean.log_z;
            let up = update_noise_posterior(&net.noise, &mean);
            net.noise = up.posterior;
            noise_rejected = up.rejected;
        }
        clamps += net.incorporate_prior(DEFAULT_VARIANCE_FLOOR);
        stats.epochs.push(EpochStats {
            mean_log_z,
            clamps,
            skipped,
            noise_rejected,
            noise_variance: net.noise.noise_variance(),
        });
    }
    Ok(stats)
}
