//! Training protocol, evaluation battery, sweeps and timing.

pub mod config;
pub mod episode;
pub mod metrics;
pub mod protocol;
pub mod report;
pub mod stats;
pub mod timing;

use rayon::prelude::*;

use crate::error::Result;
use crate::rng::SeedTree;

pub use config::{parse_config, ModelKind, RunConfig};
pub use episode::{run_mpc_episode, run_random_episode, ControlledEpisode, Perturbation, QueryRecord};
pub use metrics::{aggregate, run_scenario, run_scenario_outcomes, EpisodeOutcome, MetricsRecord, Scenario};
pub use protocol::{run_training, ModelState, RoundRecord, TrainedModel, TrainingOutcome};
pub use report::{curve, write_curves, write_metrics, CurvePoint};
pub use timing::{timing_benchmark, TimingReport};

/// Seed tree of one repetition. Both model kinds share it, so their seed
/// episodes and evaluation starts coincide.
pub fn repetition_tree(config: &RunConfig, repetition: usize) -> SeedTree {
    SeedTree::new(config.seed).child("rep", repetition as u64)
}

pub fn evaluation_tree(config: &RunConfig, repetition: usize) -> SeedTree {
    repetition_tree(config, repetition).child("eval", 0)
}

pub fn train_repetition(config: &RunConfig, kind: ModelKind, repetition: usize) -> Result<TrainingOutcome> {
    run_training(config, kind, &repetition_tree(config, repetition))
}

/// Runs `f` for repetitions `0..n` on the rayon pool, results in index order.
pub fn for_repetitions<T, F>(n: usize, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(usize) -> Result<T> + Sync + Send,
{
    (0..n).into_par_iter().map(f).collect()
}

/// The four-scenario battery for one trained model.
pub fn evaluate_battery(model: &TrainedModel, config: &RunConfig, repetition: usize) -> Result<Vec<MetricsRecord>> {
    let tree = evaluation_tree(config, repetition);
    Scenario::battery()
        .iter()
        .map(|s| run_scenario(model, *s, config, &tree))
        .collect()
}

pub fn noise_sweep(model: &TrainedModel, config: &RunConfig, repetition: usize) -> Result<Vec<MetricsRecord>> {
    let scenarios: Vec<Scenario> = config.noise_levels.iter().map(|&l| Scenario::NovelNoise(l)).collect();
    sweep(model, config, repetition, &scenarios)
}

pub fn drop_sweep(model: &TrainedModel, config: &RunConfig, repetition: usize) -> Result<Vec<MetricsRecord>> {
    let scenarios: Vec<Scenario> = config.drop_levels.iter().map(|&n| Scenario::NovelDropped(n)).collect();
    sweep(model, config, repetition, &scenarios)
}

fn sweep(model: &TrainedModel, config: &RunConfig, repetition: usize, scenarios: &[Scenario]) -> Result<Vec<MetricsRecord>> {
    let tree = evaluation_tree(config, repetition).child("sweep", 0);
    scenarios
        .iter()
        .map(|s| {
            let outcomes = run_scenario_outcomes(model, *s, config, config.sweep_episodes, &tree)?;
            aggregate(*s, &outcomes)
        })
        .collect()
}
