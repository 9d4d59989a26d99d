use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rayon::prelude::*;

use super::adam::AdamState;
use super::lstm::{DropoutMask, LstmNet};
use crate::error::{Error, Result};
use crate::rng::SimRng;
use crate::sequence::{ObservationSequence, PredictiveDistribution};

/// Training hyper-parameters for the ensemble members.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MdeSettings {
    pub learning_rate: f64,
    pub batch_size: usize,
}

impl Default for MdeSettings {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            batch_size: 32,
        }
    }
}

/// Ensemble of independently trained LSTMs queried with MC dropout.
#[derive(Debug, Clone, PartialEq)]
pub struct Ensemble {
    pub members: Vec<LstmNet>,
    /// Drop probability of each hidden unit at inference.
    pub dropout_rate: f64,
    pub passes_per_member: usize,
    pub settings: MdeSettings,
}

impl Ensemble {
    pub fn new<R: Rng + ?Sized>(
        members: usize,
        input_dim: usize,
        hidden_dim: usize,
        dropout_rate: f64,
        passes_per_member: usize,
        rng: &mut R,
    ) -> Result<Self> {
        if members == 0 {
            return Err(Error::InvalidArgument("ensemble needs at least one member".into()));
        }
        if !(0.0..1.0).contains(&dropout_rate) {
            return Err(Error::InvalidArgument(format!("dropout rate {dropout_rate} outside [0, 1)")));
        }
        let members = (0..members)
            .map(|_| {
                let mut member_rng = SimRng::seed_from_u64(rng.random());
                LstmNet::new(input_dim, hidden_dim, &mut member_rng)
            })
            .collect();
        Ok(Self {
            members,
            dropout_rate,
            passes_per_member,
            settings: MdeSettings::default(),
        })
    }

    /// Five 16-unit members, drop rate 0.7, 20 passes each.
    pub fn standard<R: Rng + ?Sized>(input_dim: usize, rng: &mut R) -> Self {
        Self::new(5, input_dim, 16, 0.7, 20, rng).expect("valid defaults")
    }

    pub fn input_dim(&self) -> usize {
        self.members[0].input_dim()
    }

    pub fn hidden_dim(&self) -> usize {
        self.members[0].hidden_dim()
    }

    /// Draws every dropout mask for one query, member-major.
    fn draw_masks<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<Vec<DropoutMask>> {
        self.members
            .iter()
            .map(|m| {
                (0..self.passes_per_member)
                    .map(|_| DropoutMask::sample(m.hidden_dim(), self.dropout_rate, rng))
                    .collect()
            })
            .collect()
    }

    /// Every stochastic prediction for one query, serially.
    pub fn mc_samples<R: Rng + ?Sized>(&self, seq: &ObservationSequence, rng: &mut R) -> Result<Vec<f64>> {
        let masks = self.draw_masks(rng);
        let mut out = Vec::with_capacity(self.members.len() * self.passes_per_member);
        for (member, member_masks) in self.members.iter().zip(&masks) {
            for mask in member_masks {
                out.push(member.forward(seq, Some(mask))?);
            }
        }
        Ok(out)
    }

    /// Same draws as [`Ensemble::mc_samples`], with members evaluated in parallel.
    pub fn mc_samples_parallel<R: Rng + ?Sized>(&self, seq: &ObservationSequence, rng: &mut R) -> Result<Vec<f64>> {
        let masks = self.draw_masks(rng);
        let per_member: Vec<Vec<f64>> = self
            .members
            .par_iter()
            .zip(masks.par_iter())
            .map(|(member, member_masks)| {
                member_masks
                    .iter()
                    .map(|mask| member.forward(seq, Some(mask)))
                    .collect::<Result<Vec<f64>>>()
            })
            .collect::<Result<_>>()?;
        Ok(per_member.concat())
    }
}

/// Sample mean and unbiased sample variance (Welford; exact for constant input).
pub fn sample_statistics(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mut mean = 0.0;
    let mut m2 = 0.0;
    for (k, &x) in values.iter().enumerate() {
        let delta = x - mean;
        mean += delta / (k + 1) as f64;
        m2 += delta * (x - mean);
    }
    if values.len() < 2 {
        return (mean, 0.0);
    }
    (mean, m2 / (values.len() - 1) as f64)
}

/// MC-dropout prediction: sample mean and variance over all members and passes.
pub fn mc_predict<R: Rng + ?Sized>(ensemble: &Ensemble, seq: &ObservationSequence, rng: &mut R) -> Result<PredictiveDistribution> {
    let samples = ensemble.mc_samples(seq, rng)?;
    let (mean, variance) = sample_statistics(&samples);
    Ok(PredictiveDistribution {
        mean,
        variance,
        total_variance: variance,
    })
}

fn train_member(
    net: &mut LstmNet,
    dataset: &[(ObservationSequence, f64)],
    epochs: usize,
    settings: MdeSettings,
    rng: &mut SimRng,
) -> Result<Vec<f64>> {
    let mut adam = AdamState::new(net.params().len(), settings.learning_rate);
    let mut order: Vec<usize> = (0..dataset.len()).collect();
    let mut losses = Vec::with_capacity(epochs);
    let batch = settings.batch_size.max(1);
    for _ in 0..epochs {
        order.shuffle(rng);
        let mut epoch_loss = 0.0;
        for chunk in order.chunks(batch) {
            let mut grad = vec![0.0; net.params().len()];
            for &i in chunk {
                let (seq, y) = &dataset[i];
                let (loss, g) = net.loss_gradient(seq, *y)?;
                epoch_loss += loss;
                for (acc, gi) in grad.iter_mut().zip(&g) {
                    *acc += gi;
                }
            }
            let scale = 1.0 / chunk.len() as f64;
            grad.iter_mut().for_each(|g| *g *= scale);
            adam.apply(net.params_mut(), &grad);
        }
        losses.push(epoch_loss / dataset.len() as f64);
    }
    Ok(losses)
}

/// Trains every member independently by Adam on squared error, without
/// dropout. Each member gets its own seed and shuffle stream drawn from
/// `rng`. Returns per-member, per-epoch mean training losses.
pub fn train_mde<R: Rng + ?Sized>(
    ensemble: &mut Ensemble,
    dataset: &[(ObservationSequence, f64)],
    epochs: usize,
    rng: &mut R,
) -> Result<Vec<Vec<f64>>> {
    if dataset.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let seeds: Vec<u64> = ensemble.members.iter().map(|_| rng.random()).collect();
    let settings = ensemble.settings;
    ensemble
        .members
        .par_iter_mut()
        .zip(seeds.par_iter())
        .map(|(member, &seed)| {
            let mut member_rng = SimRng::seed_from_u64(seed);
            train_member(member, dataset, epochs, settings, &mut member_rng)
        })
        .collect()
}
