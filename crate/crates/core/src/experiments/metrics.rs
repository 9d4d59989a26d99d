//! Evaluation scenarios and their episode-level metrics.

use std::fmt;

use crate::env::ResetMode;
use crate::error::{Error, Result};
use crate::model::CollisionModel;
use crate::mpc::{build_primitives, EpsilonSchedule};
use crate::pbp::gaussian_log_density;
use crate::rng::SeedTree;

use super::config::RunConfig;
use super::episode::{run_mpc_episode, ControlSettings, ControlledEpisode, EpisodeRngs, Perturbation, QueryRecord};
use super::protocol::world_config;
use super::stats::{mean, sample_variance};

/// Predictive mean above which a step counts as a predicted collision.
pub const COLLISION_THRESHOLD: f64 = 0.5;
/// Variance floor for the per-query log-likelihood.
pub const LOGLIK_VARIANCE_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Scenario {
    Train,
    Novel,
    NovelNoise(f64),
    NovelDropped(usize),
}

impl Scenario {
    pub fn name(&self) -> &'static str {
        match self {
            Scenario::Train => "train",
            Scenario::Novel => "novel",
            Scenario::NovelNoise(_) => "novel_noise",
            Scenario::NovelDropped(_) => "novel_dropped",
        }
    }

    pub fn param(&self) -> f64 {
        match *self {
            Scenario::Train | Scenario::Novel => 0.0,
            Scenario::NovelNoise(l) => l,
            Scenario::NovelDropped(n) => n as f64,
        }
    }

    fn reset_mode(&self) -> ResetMode {
        match self {
            Scenario::Train => ResetMode::Train,
            _ => ResetMode::Novel,
        }
    }

    fn perturbation(&self) -> Perturbation {
        match *self {
            Scenario::NovelNoise(l) => Perturbation::Noise(l),
            Scenario::NovelDropped(n) => Perturbation::Drop(n),
            _ => Perturbation::None,
        }
    }

    /// The four scenarios of the main comparison.
    pub fn battery() -> [Scenario; 4] {
        [
            Scenario::Train,
            Scenario::Novel,
            Scenario::NovelNoise(0.005),
            Scenario::NovelDropped(5),
        ]
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}({})", self.name(), self.param())
    }
}

/// What an evaluation keeps from one episode.
#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeOutcome {
    pub collided: bool,
    pub queries: Vec<QueryRecord>,
    pub min_separation: f64,
}

impl EpisodeOutcome {
    pub fn from_episode(ep: &ControlledEpisode) -> Self {
        Self {
            collided: ep.result.collided,
            queries: ep.queries.clone(),
            min_separation: ep.result.min_separation,
        }
    }

    /// Some executed step predicted a collision.
    pub fn flagged(&self) -> bool {
        self.queries.iter().any(|q| q.mean > COLLISION_THRESHOLD)
    }

    pub fn label(&self) -> f64 {
        if self.collided {
            1.0
        } else {
            0.0
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricsRecord {
    pub scenario: Scenario,
    pub episodes: usize,
    pub fpr: f64,
    pub fnr: f64,
    pub collision_rate: f64,
    /// Sorted ascending.
    pub min_separations: Vec<f64>,
    pub loglik_mean: f64,
    pub loglik_var: f64,
    pub pred_var_mean: f64,
    pub pred_var_var: f64,
}

impl MetricsRecord {
    pub fn min_sep_mean(&self) -> f64 {
        mean(&self.min_separations)
    }
}

/// Log-likelihood of the realized label under one query's prediction.
pub fn query_loglik(label: f64, q: &QueryRecord) -> f64 {
    gaussian_log_density(label, q.mean, q.total_variance.max(LOGLIK_VARIANCE_FLOOR))
        .expect("floored variance is positive")
}

/// Folds episode outcomes into rates and query statistics. The result does
/// not depend on the order of `outcomes`.
pub fn aggregate(scenario: Scenario, outcomes: &[EpisodeOutcome]) -> Result<MetricsRecord> {
    if outcomes.is_empty() {
        return Err(Error::InvalidArgument("no episodes to aggregate".into()));
    }
    let collisions = outcomes.iter().filter(|o| o.collided).count();
    let clean = outcomes.len() - collisions;
    let fp = outcomes.iter().filter(|o| !o.collided && o.flagged()).count();
    let fn_ = outcomes.iter().filter(|o| o.collided && !o.flagged()).count();
    let rate = |k: usize, n: usize| if n == 0 { 0.0 } else { k as f64 / n as f64 };
    let mut logliks = Vec::new();
    let mut vars = Vec::new();
    for o in outcomes {
        for q in &o.queries {
            logliks.push(query_loglik(o.label(), q));
            vars.push(q.variance);
        }
    }
    let mut seps: Vec<f64> = outcomes.iter().map(|o| o.min_separation).collect();
    seps.sort_by(f64::total_cmp);
    let or_nan = |v: &[f64], f: fn(&[f64]) -> f64| if v.is_empty() { f64::NAN } else { f(v) };
    Ok(MetricsRecord {
        scenario,
        episodes: outcomes.len(),
        fpr: rate(fp, clean),
        fnr: rate(fn_, collisions),
        collision_rate: rate(collisions, outcomes.len()),
        min_separations: seps,
        loglik_mean: or_nan(&logliks, mean),
        loglik_var: or_nan(&logliks, sample_variance),
        pred_var_mean: or_nan(&vars, mean),
        pred_var_var: or_nan(&vars, sample_variance),
    })
}

/// Greedy episodes of one scenario. Episode `i` draws its start and all
/// stochastic inputs from streams indexed by `i`, so scenarios sharing a
/// reset mode see the same obstacle starts.
pub fn run_scenario_outcomes(model: &dyn CollisionModel, scenario: Scenario, config: &RunConfig, episodes: usize, tree: &SeedTree) -> Result<Vec<EpisodeOutcome>> {
    if episodes == 0 {
        return Err(Error::InvalidArgument("zero evaluation episodes".into()));
    }
    let world = world_config(config);
    let primitives = build_primitives();
    let settings = ControlSettings {
        primitives: &primitives,
        weights: &config.weights,
        perturbation: scenario.perturbation(),
    };
    let schedule = EpsilonSchedule::greedy();
    (0..episodes)
        .map(|i| {
            let ep = run_mpc_episode(
                model,
                &world,
                scenario.reset_mode(),
                &settings,
                &schedule,
                &mut tree.stream("eval-env", i as u64),
                EpisodeRngs {
                    policy: &mut tree.stream("eval-policy", i as u64),
                    model: &mut tree.stream("eval-model", i as u64),
                    perturb: &mut tree.stream("eval-perturb", i as u64),
                },
                None,
            )?;
            Ok(EpisodeOutcome::from_episode(&ep))
        })
        .collect()
}

pub fn run_scenario(model: &dyn CollisionModel, scenario: Scenario, config: &RunConfig, tree: &SeedTree) -> Result<MetricsRecord> {
    let outcomes = run_scenario_outcomes(model, scenario, config, config.eval_episodes, tree)?;
    aggregate(scenario, &outcomes)
}
