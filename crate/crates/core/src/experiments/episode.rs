//! Closed-loop episodes: random seeding policy and model-predictive control.

use std::io::Write;

use rand::Rng;

use crate::env::{apply_noise, drop_observations, reset, EpisodeResult, Observation, ResetMode, World, WorldConfig};
use crate::error::Result;
use crate::model::CollisionModel;
use crate::mpc::{
    candidate_sequences, endpoint_goal_distances, evaluate_candidates, greedy_index, write_cost_rows, CostWeights,
    EpsilonSchedule, MotionPrimitiveSet,
};
use crate::rng::SimRng;
use crate::sequence::{zero_pad, ObservationSequence, WINDOW_LEN};

/// Input corruption applied to every model query.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Perturbation {
    None,
    /// Gaussian noise of this scale on every candidate input.
    Noise(f64),
    /// This many history rows zeroed per query, before candidates are formed.
    Drop(usize),
}

/// Prediction for the primitive that was executed at one step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QueryRecord {
    pub mean: f64,
    pub variance: f64,
    pub total_variance: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ControlledEpisode {
    pub result: EpisodeResult,
    /// One entry per greedy decision; exploratory steps are not scored.
    pub queries: Vec<QueryRecord>,
}

/// Streams used by one controlled episode.
pub struct EpisodeRngs<'a> {
    pub policy: &'a mut SimRng,
    pub model: &'a mut SimRng,
    pub perturb: &'a mut SimRng,
}

/// Window ending at the current state: the last executed observations plus
/// the current pre-move state with a placeholder heading.
pub fn query_window(history: &[Observation], world: &World) -> Result<ObservationSequence> {
    let start = history.len().saturating_sub(WINDOW_LEN - 1);
    let mut rows: Vec<Vec<f64>> = history[start..].iter().map(Observation::to_features).collect();
    rows.push(world.observe(0.0).to_features());
    zero_pad(&rows, WINDOW_LEN)
}

/// Uniformly random primitives until the episode ends.
pub fn run_random_episode(config: &WorldConfig, mode: ResetMode, primitives: &MotionPrimitiveSet, env_rng: &mut SimRng, policy_rng: &mut SimRng) -> Result<EpisodeResult> {
    let mut world = reset(config, mode, env_rng)?;
    while !world.is_terminal() {
        let p = primitives.get(policy_rng.random_range(0..primitives.len()));
        world.step(p.heading_offset, p.length)?;
    }
    world.finish()
}

pub struct ControlSettings<'a> {
    pub primitives: &'a MotionPrimitiveSet,
    pub weights: &'a CostWeights,
    pub perturbation: Perturbation,
}

/// MPC episode with epsilon-greedy exploration from `schedule`.
///
/// When `trace` is given, every scored decision appends its cost rows,
/// labelled with `episode_index`.
pub fn run_mpc_episode(
    model: &dyn CollisionModel,
    config: &WorldConfig,
    mode: ResetMode,
    settings: &ControlSettings<'_>,
    schedule: &EpsilonSchedule,
    env_rng: &mut SimRng,
    rngs: EpisodeRngs<'_>,
    mut trace: Option<(&mut dyn Write, usize)>,
) -> Result<ControlledEpisode> {
    let mut world = reset(config, mode, env_rng)?;
    let mut history: Vec<Observation> = Vec::new();
    let mut queries = Vec::new();
    let primitives = settings.primitives;
    while !world.is_terminal() {
        let index = match schedule.explore(primitives.len(), rngs.policy) {
            Some(i) => i,
            None => {
                let mut window = query_window(&history, &world)?;
                if let Perturbation::Drop(n) = settings.perturbation {
                    window = drop_observations(&window, n, rngs.perturb)?;
                }
                let mut candidates = candidate_sequences(&window, primitives)?;
                if let Perturbation::Noise(scale) = settings.perturbation {
                    for c in candidates.iter_mut() {
                        *c = apply_noise(c, scale, rngs.perturb)?;
                    }
                }
                let d = endpoint_goal_distances(&world, primitives);
                let costs = evaluate_candidates(model, &candidates, &d, settings.weights, schedule.epsilon, rngs.model)?;
                let raw: Vec<f64> = costs.iter().map(|c| c.cost).collect();
                let chosen = greedy_index(&raw)?;
                if let Some((out, episode)) = trace.as_mut() {
                    write_cost_rows(*out, *episode, world.steps(), &costs, chosen)?;
                }
                let c = costs[chosen];
                queries.push(QueryRecord {
                    mean: c.p_coll,
                    variance: c.epistemic,
                    total_variance: c.v_coll,
                });
                chosen
            }
        };
        let p = primitives.get(index);
        let (obs, _) = world.step(p.heading_offset, p.length)?;
        history.push(obs);
    }
    Ok(ControlledEpisode {
        result: world.finish()?,
        queries,
    })
}
