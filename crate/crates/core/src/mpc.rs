//! Motion primitives, uncertainty-penalized costs and epsilon-greedy choice.

use std::f64::consts::PI;
use std::io::Write;

use rand::Rng;

use crate::env::World;
use crate::error::{Error, Result};
use crate::model::CollisionModel;
use crate::rng::SimRng;
use crate::sequence::{ObservationSequence, HEADING_FEATURE};

pub const PRIMITIVE_COUNT: usize = 11;
pub const PRIMITIVE_LENGTH: f64 = 0.05;
pub const MAX_HEADING: f64 = PI / 5.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MotionPrimitive {
    pub heading_offset: f64,
    pub length: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MotionPrimitiveSet {
    primitives: Vec<MotionPrimitive>,
}

impl MotionPrimitiveSet {
    pub fn len(&self) -> usize {
        self.primitives.len()
    }

    pub fn is_empty(&self) -> bool {
        self.primitives.is_empty()
    }

    pub fn get(&self, i: usize) -> MotionPrimitive {
        self.primitives[i]
    }

    pub fn iter(&self) -> impl Iterator<Item = &MotionPrimitive> {
        self.primitives.iter()
    }

    /// Index of the mirrored primitive.
    pub fn mirror(&self, i: usize) -> usize {
        self.len() - 1 - i
    }
}

/// Eleven headings evenly spaced on [-pi/5, pi/5], all of length 0.05.
///
/// Offsets are computed as `(k - 5) * pi / 25` so the set is exactly
/// antisymmetric in floating point.
pub fn build_primitives() -> MotionPrimitiveSet {
    let mid = (PRIMITIVE_COUNT / 2) as f64;
    let step = 2.0 * MAX_HEADING / (PRIMITIVE_COUNT - 1) as f64;
    MotionPrimitiveSet {
        primitives: (0..PRIMITIVE_COUNT)
            .map(|k| MotionPrimitive {
                heading_offset: (k as f64 - mid) * step,
                length: PRIMITIVE_LENGTH,
            })
            .collect(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CostWeights {
    pub lambda_c: f64,
    pub lambda_v_base: f64,
    pub lambda_d: f64,
}

impl Default for CostWeights {
    fn default() -> Self {
        Self {
            lambda_c: 25.0,
            lambda_v_base: 200.0,
            lambda_d: 3.0,
        }
    }
}

impl CostWeights {
    pub fn validate(&self) -> Result<()> {
        if [self.lambda_c, self.lambda_v_base, self.lambda_d]
            .iter()
            .all(|w| *w >= 0.0 && w.is_finite())
        {
            Ok(())
        } else {
            Err(Error::InvalidArgument(format!("cost weights must be finite and non-negative: {self:?}")))
        }
    }

    /// Cost of one candidate at exploration rate `epsilon`.
    pub fn cost(&self, p_coll: f64, v_coll: f64, d_goal: f64, epsilon: f64) -> f64 {
        (1.0 - epsilon) * self.lambda_v_base * v_coll + self.lambda_c * p_coll + self.lambda_d * d_goal
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CandidateCost {
    pub cost: f64,
    pub p_coll: f64,
    /// Total predictive variance, the quantity penalized.
    pub v_coll: f64,
    /// Model-only part of `v_coll`.
    pub epistemic: f64,
    pub d_goal: f64,
}

/// Copies of `history` whose final heading feature is each primitive's offset.
pub fn candidate_sequences(history: &ObservationSequence, primitives: &MotionPrimitiveSet) -> Result<Vec<ObservationSequence>> {
    if history.is_empty() || history.dim() <= HEADING_FEATURE {
        return Err(Error::Dimension(format!(
            "history needs at least one row of dimension > {HEADING_FEATURE}"
        )));
    }
    let last = history.len() - 1;
    Ok(primitives
        .iter()
        .map(|p| {
            let mut c = history.clone();
            c.step_mut(last)[HEADING_FEATURE] = p.heading_offset;
            c
        })
        .collect())
}

/// Goal distance from each primitive's endpoint.
pub fn endpoint_goal_distances(world: &World, primitives: &MotionPrimitiveSet) -> Vec<f64> {
    primitives
        .iter()
        .map(|p| crate::env::distance(world.displaced_agent(p.heading_offset, p.length), world.agent.goal))
        .collect()
}

/// Scores already-formed candidate sequences.
pub fn evaluate_candidates(
    model: &dyn CollisionModel,
    candidates: &[ObservationSequence],
    d_goals: &[f64],
    weights: &CostWeights,
    epsilon: f64,
    rng: &mut SimRng,
) -> Result<Vec<CandidateCost>> {
    if candidates.len() != d_goals.len() {
        return Err(Error::Dimension(format!(
            "{} candidates but {} goal distances",
            candidates.len(),
            d_goals.len()
        )));
    }
    candidates
        .iter()
        .zip(d_goals)
        .map(|(seq, &d_goal)| {
            let pred = model.predict(seq, rng)?;
            Ok(CandidateCost {
                cost: weights.cost(pred.mean, pred.total_variance, d_goal, epsilon),
                p_coll: pred.mean,
                v_coll: pred.total_variance,
                epistemic: pred.variance,
                d_goal,
            })
        })
        .collect()
}

/// Forms the candidates for `history` in `world` and scores them.
pub fn evaluate_costs(
    model: &dyn CollisionModel,
    history: &ObservationSequence,
    world: &World,
    primitives: &MotionPrimitiveSet,
    weights: &CostWeights,
    epsilon: f64,
    rng: &mut SimRng,
) -> Result<Vec<CandidateCost>> {
    let candidates = candidate_sequences(history, primitives)?;
    let d = endpoint_goal_distances(world, primitives);
    evaluate_candidates(model, &candidates, &d, weights, epsilon, rng)
}

/// Smallest-cost index, ties going to the smaller index.
pub fn greedy_index(costs: &[f64]) -> Result<usize> {
    if costs.is_empty() {
        return Err(Error::InvalidArgument("no candidate costs".into()));
    }
    if let Some(i) = costs.iter().position(|c| !c.is_finite()) {
        return Err(Error::Numeric(format!("cost {i} is {}", costs[i])));
    }
    let mut best = 0;
    for (i, &c) in costs.iter().enumerate().skip(1) {
        if c < costs[best] {
            best = i;
        }
    }
    Ok(best)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpsilonSchedule {
    pub epsilon: f64,
    pub floor: f64,
    pub decay: f64,
    terminal: bool,
    episodes: usize,
}

impl Default for EpsilonSchedule {
    fn default() -> Self {
        Self::new(1.0)
    }
}

impl EpsilonSchedule {
    pub fn new(epsilon: f64) -> Self {
        Self {
            epsilon: epsilon.clamp(0.0, 1.0),
            floor: 0.1,
            decay: 49.0 / 50.0,
            terminal: false,
            episodes: 0,
        }
    }

    /// Pure greedy schedule, for evaluation.
    pub fn greedy() -> Self {
        let mut s = Self::new(0.0);
        s.terminal = true;
        s
    }

    pub fn is_terminal(&self) -> bool {
        self.terminal
    }

    /// Number of decays applied so far.
    pub fn episodes(&self) -> usize {
        self.episodes
    }

    /// One end-of-episode decay. Once at or below the floor, epsilon snaps
    /// to zero and stays there.
    pub fn decay_epsilon(&mut self) {
        self.episodes += 1;
        if self.terminal {
            self.epsilon = 0.0;
            return;
        }
        self.epsilon *= self.decay;
        if self.epsilon <= self.floor {
            self.epsilon = 0.0;
            self.terminal = true;
        }
    }

    /// With probability epsilon, a uniform random index in `0..n`.
    pub fn explore<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Option<usize> {
        if self.epsilon > 0.0 && rng.random::<f64>() < self.epsilon {
            Some(rng.random_range(0..n))
        } else {
            None
        }
    }
}

/// Epsilon-greedy selection over candidate costs.
pub fn select_action<R: Rng + ?Sized>(costs: &[f64], schedule: &EpsilonSchedule, rng: &mut R) -> Result<usize> {
    let greedy = greedy_index(costs)?;
    Ok(schedule.explore(costs.len(), rng).unwrap_or(greedy))
}

pub const COST_TRACE_HEADER: &str = "episode,step,index,P,V,d,cost,chosen";

/// Eleven rows per decision.
pub fn write_cost_rows<W: Write + ?Sized>(out: &mut W, episode: usize, step: usize, costs: &[CandidateCost], chosen: usize) -> Result<()> {
    for (i, c) in costs.iter().enumerate() {
        writeln!(
            out,
            "{episode},{step},{i},{},{},{},{},{}",
            c.p_coll,
            c.v_coll,
            c.d_goal,
            c.cost,
            u8::from(i == chosen)
        )?;
    }
    Ok(())
}
