//! Labeled window store with class-balanced sampling and z-scoring.

use std::io::{Read, Write};

use rand::seq::SliceRandom;
use rand::Rng;

use crate::env::{EpisodeResult, Observation};
use crate::error::{Error, Result};
use crate::sequence::{zero_pad, ObservationSequence, FEATURE_DIM, WINDOW_LEN};

pub const POOL_MAGIC: &[u8; 8] = b"PBPPOOL1";
pub const STD_FLOOR: f64 = 1e-6;

/// Running per-feature mean and population variance.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureStats {
    count: u64,
    mean: Vec<f64>,
    m2: Vec<f64>,
}

impl FeatureStats {
    pub fn new(dim: usize) -> Self {
        Self {
            count: 0,
            mean: vec![0.0; dim],
            m2: vec![0.0; dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn means(&self) -> &[f64] {
        &self.mean
    }

    pub fn push(&mut self, row: &[f64]) -> Result<()> {
        if row.len() != self.dim() {
            return Err(Error::Dimension(format!("row of {} features, stats of {}", row.len(), self.dim())));
        }
        self.count += 1;
        let n = self.count as f64;
        for ((m, s), &x) in self.mean.iter_mut().zip(&mut self.m2).zip(row) {
            let d = x - *m;
            *m += d / n;
            *s += d * (x - *m);
        }
        Ok(())
    }

    /// Population standard deviations, floored.
    pub fn stds(&self) -> Vec<f64> {
        let n = self.count.max(1) as f64;
        self.m2.iter().map(|s| (s / n).sqrt().max(STD_FLOOR)).collect()
    }

    /// z-scores the real rows; padding rows stay zero.
    pub fn normalize(&self, seq: &ObservationSequence) -> Result<ObservationSequence> {
        if seq.dim() != self.dim() {
            return Err(Error::Dimension(format!("sequence of dim {}, stats of {}", seq.dim(), self.dim())));
        }
        let stds = self.stds();
        let mut out = seq.clone();
        for t in seq.pad_count()..seq.len() {
            for ((v, m), s) in out.step_mut(t).iter_mut().zip(&self.mean).zip(&stds) {
                *v = (*v - m) / s;
            }
        }
        Ok(out)
    }
}

/// One window per step, each ending at that step and zero-padded to `len`.
pub fn episode_windows(observations: &[Observation], len: usize) -> Result<Vec<ObservationSequence>> {
    let rows: Vec<Vec<f64>> = observations.iter().map(Observation::to_features).collect();
    (0..rows.len())
        .map(|t| zero_pad(&rows[(t + 1).saturating_sub(len)..=t], len))
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainingBatch {
    pub items: Vec<(ObservationSequence, f64)>,
    /// Set when one class was empty and the other filled the batch.
    pub class_fallback: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperiencePool {
    positives: Vec<ObservationSequence>,
    negatives: Vec<ObservationSequence>,
    stats: FeatureStats,
    window_len: usize,
}

impl Default for ExperiencePool {
    fn default() -> Self {
        Self::new()
    }
}

impl ExperiencePool {
    pub fn new() -> Self {
        Self::with_shape(FEATURE_DIM, WINDOW_LEN)
    }

    pub fn with_shape(dim: usize, window_len: usize) -> Self {
        Self {
            positives: Vec::new(),
            negatives: Vec::new(),
            stats: FeatureStats::new(dim),
            window_len,
        }
    }

    pub fn positives(&self) -> &[ObservationSequence] {
        &self.positives
    }

    pub fn negatives(&self) -> &[ObservationSequence] {
        &self.negatives
    }

    pub fn feature_stats(&self) -> &FeatureStats {
        &self.stats
    }

    pub fn window_len(&self) -> usize {
        self.window_len
    }

    pub fn len(&self) -> usize {
        self.positives.len() + self.negatives.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Adds every per-step window of a finished episode under its label.
    /// Each observation enters the feature statistics once.
    pub fn append_episode(&mut self, episode: &EpisodeResult) -> Result<()> {
        let windows = episode_windows(&episode.observations, self.window_len)?;
        for o in &episode.observations {
            self.stats.push(&o.to_features())?;
        }
        if episode.collided {
            self.positives.extend(windows);
        } else {
            self.negatives.extend(windows);
        }
        Ok(())
    }

    /// `n / 2` draws per class with replacement, shuffled and z-scored.
    pub fn sample_balanced<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Result<TrainingBatch> {
        if n < 2 {
            return Err(Error::InvalidArgument(format!("batch size {n} is below 2")));
        }
        if self.is_empty() {
            return Err(Error::EmptyDataset);
        }
        let half = n / 2;
        let mut picks: Vec<(&ObservationSequence, f64)> = Vec::with_capacity(n);
        let fallback = self.positives.is_empty() || self.negatives.is_empty();
        if fallback {
            let (only, label) = if self.positives.is_empty() {
                (&self.negatives, 0.0)
            } else {
                (&self.positives, 1.0)
            };
            log::warn!("experience pool holds one class only; batch drawn from label {label}");
            for _ in 0..n {
                picks.push((&only[rng.random_range(0..only.len())], label));
            }
        } else {
            for _ in 0..half {
                picks.push((&self.negatives[rng.random_range(0..self.negatives.len())], 0.0));
            }
            for _ in 0..half {
                picks.push((&self.positives[rng.random_range(0..self.positives.len())], 1.0));
            }
        }
        picks.shuffle(rng);
        let items = picks
            .into_iter()
            .map(|(s, y)| Ok((self.stats.normalize(s)?, y)))
            .collect::<Result<Vec<_>>>()?;
        Ok(TrainingBatch {
            items,
            class_fallback: fallback,
        })
    }

    pub fn write_to<W: Write>(&self, out: &mut W) -> Result<()> {
        let dim = self.stats.dim();
        out.write_all(POOL_MAGIC)?;
        out.write_all(&(dim as u32).to_le_bytes())?;
        out.write_all(&(self.window_len as u32).to_le_bytes())?;
        out.write_all(&(self.positives.len() as u64).to_le_bytes())?;
        out.write_all(&(self.negatives.len() as u64).to_le_bytes())?;
        out.write_all(&self.stats.count.to_le_bytes())?;
        for v in self.stats.mean.iter().chain(&self.stats.m2) {
            out.write_all(&v.to_le_bytes())?;
        }
        for w in self.positives.iter().chain(&self.negatives) {
            out.write_all(&(w.pad_count() as u32).to_le_bytes())?;
            for v in w.as_flat() {
                out.write_all(&v.to_le_bytes())?;
            }
        }
        Ok(())
    }

    pub fn read_from<R: Read>(input: &mut R) -> Result<Self> {
        let mut magic = [0u8; 8];
        read_exact(input, &mut magic, "pool magic")?;
        if &magic != POOL_MAGIC {
            return Err(Error::WrongMagic {
                expected: POOL_MAGIC.to_vec(),
                actual: magic.to_vec(),
            });
        }
        let dim = read_u32(input, "pool dimension")? as usize;
        let window_len = read_u32(input, "pool window length")? as usize;
        if dim == 0 || window_len == 0 {
            return Err(Error::Malformed("pool with zero dimension or window length".into()));
        }
        let n_pos = read_u64(input, "positive count")? as usize;
        let n_neg = read_u64(input, "negative count")? as usize;
        let count = read_u64(input, "stats count")?;
        let mean = read_f64s(input, dim, "stats means")?;
        let m2 = read_f64s(input, dim, "stats moments")?;
        let mut read_windows = |n: usize| -> Result<Vec<ObservationSequence>> {
            (0..n)
                .map(|_| {
                    let pad = read_u32(input, "window pad count")? as usize;
                    if pad > window_len {
                        return Err(Error::Malformed(format!("pad count {pad} exceeds window {window_len}")));
                    }
                    let data = read_f64s(input, window_len * dim, "window values")?;
                    ObservationSequence::from_flat(data, dim, pad)
                })
                .collect()
        };
        let positives = read_windows(n_pos)?;
        let negatives = read_windows(n_neg)?;
        Ok(Self {
            positives,
            negatives,
            stats: FeatureStats { count, mean, m2 },
            window_len,
        })
    }
}

pub(crate) fn read_exact<R: Read>(input: &mut R, buf: &mut [u8], what: &'static str) -> Result<()> {
    input.read_exact(buf).map_err(|e| match e.kind() {
        std::io::ErrorKind::UnexpectedEof => Error::Truncated(what),
        _ => Error::Io(e),
    })
}

pub(crate) fn read_u32<R: Read>(input: &mut R, what: &'static str) -> Result<u32> {
    let mut b = [0u8; 4];
    read_exact(input, &mut b, what)?;
    Ok(u32::from_le_bytes(b))
}

pub(crate) fn read_u64<R: Read>(input: &mut R, what: &'static str) -> Result<u64> {
    let mut b = [0u8; 8];
    read_exact(input, &mut b, what)?;
    Ok(u64::from_le_bytes(b))
}

pub(crate) fn read_f64s<R: Read>(input: &mut R, n: usize, what: &'static str) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(n.min(1 << 20));
    let mut b = [0u8; 8];
    for _ in 0..n {
        read_exact(input, &mut b, what)?;
        out.push(f64::from_le_bytes(b));
    }
    Ok(out)
}
