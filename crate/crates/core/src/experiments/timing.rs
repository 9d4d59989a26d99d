//! Per-query inference latency of the two models.

use std::time::Instant;

use crate::error::{Error, Result};
use crate::model::CollisionModel;
use crate::rng::SimRng;
use crate::sequence::ObservationSequence;

use super::stats::{mean, sample_variance};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LatencyStats {
    pub mean_ms: f64,
    pub std_ms: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimingReport {
    pub queries: usize,
    pub pbp: LatencyStats,
    pub mde: LatencyStats,
    /// MDE mean over PBP mean.
    pub ratio: f64,
}

/// Wall-clock time of each single query, in milliseconds.
pub fn time_queries(model: &dyn CollisionModel, inputs: &[ObservationSequence], rng: &mut SimRng) -> Result<LatencyStats> {
    let mut times = Vec::with_capacity(inputs.len());
    for seq in inputs {
        let start = Instant::now();
        let p = model.predict(seq, rng)?;
        times.push(start.elapsed().as_secs_f64() * 1e3);
        std::hint::black_box(p);
    }
    Ok(LatencyStats {
        mean_ms: mean(&times),
        std_ms: sample_variance(&times).sqrt(),
    })
}

/// Times both models on the same inputs, serially.
pub fn timing_benchmark(pbp: &dyn CollisionModel, mde: &dyn CollisionModel, inputs: &[ObservationSequence], rng: &mut SimRng) -> Result<TimingReport> {
    if inputs.len() < 10 {
        return Err(Error::InvalidArgument(format!("timing needs at least 10 queries, got {}", inputs.len())));
    }
    // One untimed pass each to fault in code and caches.
    pbp.predict(&inputs[0], rng)?;
    mde.predict(&inputs[0], rng)?;
    let pbp_stats = time_queries(pbp, inputs, rng)?;
    let mde_stats = time_queries(mde, inputs, rng)?;
    Ok(TimingReport {
        queries: inputs.len(),
        pbp: pbp_stats,
        mde: mde_stats,
        ratio: mde_stats.mean_ms / pbp_stats.mean_ms,
    })
}
