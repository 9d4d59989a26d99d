//! Observe-act-train loop producing a trained collision model.

use crate::env::{ResetMode, WorldConfig};
use crate::error::Result;
use crate::experience::{ExperiencePool, FeatureStats};
use crate::mde::{train_mde, Ensemble};
use crate::model::CollisionModel;
use crate::mpc::{build_primitives, EpsilonSchedule};
use crate::rng::{SeedTree, SimRng};
use crate::rnn::{train_epochs, RecurrentBayesNet};
use crate::sequence::{ObservationSequence, PredictiveDistribution, FEATURE_DIM};

use super::config::{ModelKind, RunConfig};
use super::episode::{run_mpc_episode, run_random_episode, ControlSettings, EpisodeRngs, Perturbation};

#[derive(Debug, Clone, PartialEq)]
pub enum ModelState {
    Pbp(RecurrentBayesNet),
    Mde(Ensemble),
}

/// A network plus the input statistics it was trained against.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainedModel {
    pub state: ModelState,
    pub stats: FeatureStats,
}

impl TrainedModel {
    pub fn kind(&self) -> ModelKind {
        match self.state {
            ModelState::Pbp(_) => ModelKind::PbpRnn,
            ModelState::Mde(_) => ModelKind::Mde,
        }
    }

    /// Freshly initialized, untrained model.
    pub fn init(kind: ModelKind, hidden_dim: usize, rng: &mut SimRng) -> Result<Self> {
        let state = match kind {
            ModelKind::PbpRnn => ModelState::Pbp(RecurrentBayesNet::new(FEATURE_DIM, hidden_dim, rng)?),
            ModelKind::Mde => ModelState::Mde(Ensemble::new(5, FEATURE_DIM, hidden_dim, 0.7, 20, rng)?),
        };
        Ok(Self {
            state,
            stats: FeatureStats::new(FEATURE_DIM),
        })
    }
}

impl CollisionModel for TrainedModel {
    fn predict(&self, seq: &ObservationSequence, rng: &mut SimRng) -> Result<PredictiveDistribution> {
        let x = self.stats.normalize(seq)?;
        match &self.state {
            ModelState::Pbp(net) => net.predict(&x),
            ModelState::Mde(ens) => CollisionModel::predict(ens, &x, rng),
        }
    }
}

/// Summary of one training round.
#[derive(Debug, Clone, PartialEq)]
pub struct RoundRecord {
    pub round: usize,
    /// Control episodes completed before this round's training.
    pub episodes: usize,
    pub epochs: usize,
    /// Last-epoch mean logZ for PBP, last-epoch mean squared error for MDE.
    pub fit: f64,
    pub collisions: usize,
    pub epsilon: f64,
    pub class_fallback: bool,
}

#[derive(Debug, Clone)]
pub struct TrainingOutcome {
    pub model: TrainedModel,
    pub rounds: Vec<RoundRecord>,
    pub pool: ExperiencePool,
    pub control_episodes: usize,
    pub seed_collisions: usize,
}

fn train_round(model: &mut TrainedModel, pool: &ExperiencePool, batch_size: usize, epochs: usize, rng: &mut SimRng) -> Result<(f64, bool)> {
    let batch = pool.sample_balanced(batch_size, rng)?;
    model.stats = pool.feature_stats().clone();
    let fit = match &mut model.state {
        ModelState::Pbp(net) => {
            let stats = train_epochs(net, &batch.items, epochs, rng)?;
            stats.epochs.last().map_or(f64::NAN, |e| e.mean_log_z)
        }
        ModelState::Mde(ens) => {
            let losses = train_mde(ens, &batch.items, epochs, rng)?;
            let last: Vec<f64> = losses.iter().filter_map(|l| l.last().copied()).collect();
            super::stats::mean(&last)
        }
    };
    Ok((fit, batch.class_fallback))
}

pub fn world_config(config: &RunConfig) -> WorldConfig {
    config.world
}

/// Seeds the pool with random-policy episodes, trains, then alternates
/// epsilon-greedy control rounds with retraining until epsilon reaches 0.
/// The last round may be shorter than `retrain_interval`.
pub fn run_training(config: &RunConfig, kind: ModelKind, tree: &SeedTree) -> Result<TrainingOutcome> {
    config.validate()?;
    let world = world_config(config);
    let primitives = build_primitives();
    let mut pool = ExperiencePool::new();
    let mut seed_collisions = 0;
    let mut env_rng = tree.stream("seed-env", 0);
    let mut policy_rng = tree.stream("seed-policy", 0);
    for _ in 0..config.seed_episodes {
        let ep = run_random_episode(&world, ResetMode::Train, &primitives, &mut env_rng, &mut policy_rng)?;
        seed_collisions += usize::from(ep.collided);
        pool.append_episode(&ep)?;
    }

    let mut model = TrainedModel::init(kind, config.hidden_dim, &mut tree.stream("model-init", 0))?;
    let mut train_rng = tree.stream("train", 0);
    let epochs = config.initial_epochs_for(kind);
    let (fit, class_fallback) = train_round(&mut model, &pool, config.batch_size, epochs, &mut train_rng)?;
    let mut schedule = EpsilonSchedule::default();
    let mut rounds = vec![RoundRecord {
        round: 0,
        episodes: 0,
        epochs,
        fit,
        collisions: seed_collisions,
        epsilon: schedule.epsilon,
        class_fallback,
    }];

    let settings = ControlSettings {
        primitives: &primitives,
        weights: &config.weights,
        perturbation: Perturbation::None,
    };
    let mut env_rng = tree.stream("control-env", 0);
    let mut policy_rng = tree.stream("control-policy", 0);
    let mut model_rng = tree.stream("control-model", 0);
    let mut perturb_rng = tree.stream("control-perturb", 0);
    let mut episodes = 0;
    while !schedule.is_terminal() {
        let mut collisions = 0;
        for _ in 0..config.retrain_interval {
            let ep = run_mpc_episode(
                &model,
                &world,
                ResetMode::Train,
                &settings,
                &schedule,
                &mut env_rng,
                EpisodeRngs {
                    policy: &mut policy_rng,
                    model: &mut model_rng,
                    perturb: &mut perturb_rng,
                },
                None,
            )?;
            collisions += usize::from(ep.result.collided);
            pool.append_episode(&ep.result)?;
            schedule.decay_epsilon();
            episodes += 1;
            if schedule.is_terminal() {
                break;
            }
        }
        let epochs = config.subsequent_epochs_for(kind);
        let (fit, class_fallback) = train_round(&mut model, &pool, config.batch_size, epochs, &mut train_rng)?;
        log::info!(
            "{kind} round {}: {episodes} episodes, {collisions} collisions, fit {fit:.4}, epsilon {:.4}",
            rounds.len(),
            schedule.epsilon
        );
        rounds.push(RoundRecord {
            round: rounds.len(),
            episodes,
            epochs,
            fit,
            collisions,
            epsilon: schedule.epsilon,
            class_fallback,
        });
    }
    Ok(TrainingOutcome {
        model,
        rounds,
        pool,
        control_episodes: episodes,
        seed_collisions,
    })
}
