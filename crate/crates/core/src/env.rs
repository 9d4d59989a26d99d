//! Two-agent 2D collision-avoidance world.
//!
//! The controlled agent starts below the dynamic obstacle and each must
//! cross to the other's start line. Positions are in world units, velocities
//! in units per step. The obstacle either avoids the agent with a simplified
//! reciprocal rule or drives straight at its goal.

use std::f64::consts::FRAC_PI_2;
use std::io::Write;

use rand::seq::index::sample;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::sequence::ObservationSequence;

pub type Vec2 = [f64; 2];

pub const AGENT_RADIUS: f64 = 0.03;
pub const GOAL_TOLERANCE: f64 = 0.05;
/// Distance inside which the collaborative obstacle starts deflecting.
pub const INFLUENCE_RADIUS: f64 = 0.3;
/// Largest collaborative deflection, reached at zero separation.
pub const MAX_DEFLECTION: f64 = std::f64::consts::FRAC_PI_4;

fn sub(a: Vec2, b: Vec2) -> Vec2 {
    [a[0] - b[0], a[1] - b[1]]
}

fn norm(a: Vec2) -> f64 {
    a[0].hypot(a[1])
}

pub fn distance(a: Vec2, b: Vec2) -> f64 {
    norm(sub(a, b))
}

fn heading_vec(angle: f64, len: f64) -> Vec2 {
    [len * angle.cos(), len * angle.sin()]
}

fn wrap_angle(a: f64) -> f64 {
    let mut a = a % std::f64::consts::TAU;
    if a > std::f64::consts::PI {
        a -= std::f64::consts::TAU;
    } else if a < -std::f64::consts::PI {
        a += std::f64::consts::TAU;
    }
    a
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AgentState {
    pub position: Vec2,
    pub velocity: Vec2,
    pub goal: Vec2,
    pub radius: f64,
}

impl AgentState {
    pub fn new(position: Vec2, goal: Vec2) -> Self {
        Self::with_radius(position, goal, AGENT_RADIUS)
    }

    pub fn with_radius(position: Vec2, goal: Vec2, radius: f64) -> Self {
        Self {
            position,
            velocity: [0.0, 0.0],
            goal,
            radius,
        }
    }

    pub fn goal_distance(&self) -> f64 {
        distance(self.position, self.goal)
    }

    /// Bearing from the position to the goal, radians.
    pub fn goal_bearing(&self) -> f64 {
        let d = sub(self.goal, self.position);
        d[1].atan2(d[0])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ObstaclePolicy {
    Collaborative,
    StraightLine,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ResetMode {
    /// Fixed starts, collaborative obstacle.
    Train,
    /// Random obstacle start height, straight-line obstacle.
    Novel,
}

/// How goals are placed relative to the start positions.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GoalRule {
    /// Each agent heads for the other's start line along its own x
    /// coordinate: the agent to `[x_a, y_o']` and the obstacle to
    /// `[x_o, y_a]`, where `y_o'` is the configured obstacle start height.
    SwapStartLines,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WorldConfig {
    pub agent_start: Vec2,
    pub obstacle_start: Vec2,
    pub obstacle_start_y_range: (f64, f64),
    pub goal_rule: GoalRule,
    pub max_steps: usize,
    pub obstacle_policy: ObstaclePolicy,
    pub obstacle_speed: f64,
    pub radius: f64,
    pub influence_radius: f64,
    pub max_deflection: f64,
}

impl Default for WorldConfig {
    fn default() -> Self {
        Self {
            agent_start: [0.0, -0.25],
            obstacle_start: [0.0, 0.25],
            obstacle_start_y_range: (-0.25, 0.25),
            goal_rule: GoalRule::SwapStartLines,
            max_steps: 50,
            obstacle_policy: ObstaclePolicy::Collaborative,
            obstacle_speed: 0.05,
            radius: AGENT_RADIUS,
            influence_radius: INFLUENCE_RADIUS,
            max_deflection: MAX_DEFLECTION,
        }
    }
}

impl WorldConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_steps == 0 {
            return Err(Error::InvalidArgument("max_steps must be at least 1".into()));
        }
        let (lo, hi) = self.obstacle_start_y_range;
        if !(lo <= hi) || !(self.obstacle_speed >= 0.0) {
            return Err(Error::InvalidArgument("invalid obstacle start range or speed".into()));
        }
        if !(self.radius > 0.0) || !(self.influence_radius > 0.0) || !(self.max_deflection >= 0.0) {
            return Err(Error::InvalidArgument("radii must be positive and deflection non-negative".into()));
        }
        Ok(())
    }
}

/// One row of the network input: both agents' positions and velocities
/// before the move, and the executed primitive's heading offset.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Observation {
    pub a1_pos: Vec2,
    pub a1_vel: Vec2,
    pub a2_pos: Vec2,
    pub a2_vel: Vec2,
    pub primitive_heading: f64,
}

impl Observation {
    pub fn to_features(&self) -> Vec<f64> {
        vec![
            self.a1_pos[0],
            self.a1_pos[1],
            self.a1_vel[0],
            self.a1_vel[1],
            self.a2_pos[0],
            self.a2_pos[1],
            self.a2_vel[0],
            self.a2_vel[1],
            self.primitive_heading,
        ]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct StepEvents {
    pub collision: bool,
    pub agent_goal: bool,
    pub obstacle_goal: bool,
    pub timeout: bool,
}

impl StepEvents {
    pub fn terminal(&self) -> bool {
        self.collision || self.agent_goal || self.timeout
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TerminalCause {
    Collision,
    Goal,
    Timeout,
}

/// Per-step record kept for trace export and replay checks.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepRecord {
    pub observation: Observation,
    /// Centre distance after the move.
    pub separation: f64,
    pub goal_distance: f64,
    pub events: StepEvents,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeResult {
    pub observations: Vec<Observation>,
    pub records: Vec<StepRecord>,
    pub collided: bool,
    pub reached_goal: bool,
    pub cause: TerminalCause,
    pub min_separation: f64,
    pub steps_taken: usize,
}

impl EpisodeResult {
    pub fn label(&self) -> f64 {
        if self.collided {
            1.0
        } else {
            0.0
        }
    }
}

/// Mutable world state for one episode.
#[derive(Debug, Clone, PartialEq)]
pub struct World {
    pub config: WorldConfig,
    pub agent: AgentState,
    pub obstacle: AgentState,
    pub policy: ObstaclePolicy,
    steps: usize,
    terminal: Option<TerminalCause>,
    records: Vec<StepRecord>,
    min_separation: f64,
}

/// Starts a new episode.
pub fn reset<R: Rng + ?Sized>(config: &WorldConfig, mode: ResetMode, rng: &mut R) -> Result<World> {
    config.validate()?;
    let mut obstacle_start = config.obstacle_start;
    let policy = match mode {
        ResetMode::Train => config.obstacle_policy,
        ResetMode::Novel => {
            let (lo, hi) = config.obstacle_start_y_range;
            obstacle_start[1] = if lo == hi { lo } else { rng.random_range(lo..=hi) };
            ObstaclePolicy::StraightLine
        }
    };
    let (agent_goal, obstacle_goal) = match config.goal_rule {
        GoalRule::SwapStartLines => (
            [config.agent_start[0], config.obstacle_start[1]],
            [obstacle_start[0], config.agent_start[1]],
        ),
    };
    let agent = AgentState::with_radius(config.agent_start, agent_goal, config.radius);
    let obstacle = AgentState::with_radius(obstacle_start, obstacle_goal, config.radius);
    Ok(World {
        config: *config,
        min_separation: distance(agent.position, obstacle.position),
        agent,
        obstacle,
        policy,
        steps: 0,
        terminal: None,
        records: Vec::new(),
    })
}

/// Velocity of the collaborative obstacle for the coming step.
///
/// Heads for its goal at `obstacle_speed`; when the agent is within the
/// influence radius and in the forward half-plane, the heading turns away
/// from the agent by up to the maximum deflection, scaled by
/// `1 - separation / influence_radius`. An agent
/// exactly dead ahead is passed on the obstacle's right.
pub fn collaborative_policy_step(world: &World) -> Vec2 {
    let ob = &world.obstacle;
    let to_goal = ob.goal_distance();
    if to_goal < 1e-12 {
        return [0.0, 0.0];
    }
    let speed = world.config.obstacle_speed.min(to_goal);
    let mut heading = ob.goal_bearing();
    let rel = sub(world.agent.position, ob.position);
    let sep = norm(rel);
    let cfg = &world.config;
    if sep < cfg.influence_radius && sep > 0.0 {
        let agent_bearing = rel[1].atan2(rel[0]);
        let off = wrap_angle(agent_bearing - heading);
        if off.abs() <= FRAC_PI_2 {
            let turn = cfg.max_deflection * (1.0 - sep / cfg.influence_radius);
            // Agent on the left (off > 0): turn right, and vice versa.
            heading += if off > 0.0 { -turn } else if off < 0.0 { turn } else { -turn };
        }
    }
    heading_vec(heading, speed)
}

fn straight_line_step(world: &World) -> Vec2 {
    let ob = &world.obstacle;
    let to_goal = ob.goal_distance();
    if to_goal < 1e-12 {
        return [0.0, 0.0];
    }
    heading_vec(ob.goal_bearing(), world.config.obstacle_speed.min(to_goal))
}

impl World {
    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn is_terminal(&self) -> bool {
        self.terminal.is_some()
    }

    pub fn records(&self) -> &[StepRecord] {
        &self.records
    }

    pub fn separation(&self) -> f64 {
        distance(self.agent.position, self.obstacle.position)
    }

    /// Observation of the current state paired with a candidate heading.
    pub fn observe(&self, heading_offset: f64) -> Observation {
        Observation {
            a1_pos: self.agent.position,
            a1_vel: self.agent.velocity,
            a2_pos: self.obstacle.position,
            a2_vel: self.obstacle.velocity,
            primitive_heading: heading_offset,
        }
    }

    /// Agent position after a primitive with this heading offset and length,
    /// headings measured from the current agent-to-goal bearing.
    pub fn displaced_agent(&self, heading_offset: f64, length: f64) -> Vec2 {
        let d = heading_vec(self.agent.goal_bearing() + heading_offset, length);
        [self.agent.position[0] + d[0], self.agent.position[1] + d[1]]
    }

    /// Executes one primitive for the agent and one policy step for the obstacle.
    pub fn step(&mut self, heading_offset: f64, length: f64) -> Result<(Observation, StepEvents)> {
        if self.is_terminal() {
            return Err(Error::TerminalWorld);
        }
        let observation = self.observe(heading_offset);
        let obstacle_velocity = match self.policy {
            ObstaclePolicy::Collaborative => collaborative_policy_step(self),
            ObstaclePolicy::StraightLine => straight_line_step(self),
        };
        let new_pos = self.displaced_agent(heading_offset, length);
        self.agent.velocity = sub(new_pos, self.agent.position);
        self.agent.position = new_pos;
        self.obstacle.velocity = obstacle_velocity;
        self.obstacle.position = [
            self.obstacle.position[0] + obstacle_velocity[0],
            self.obstacle.position[1] + obstacle_velocity[1],
        ];
        self.steps += 1;

        let separation = self.separation();
        self.min_separation = self.min_separation.min(separation);
        let goal_distance = self.agent.goal_distance();
        let collision = separation < self.agent.radius + self.obstacle.radius;
        let agent_goal = !collision && goal_distance < GOAL_TOLERANCE;
        let timeout = !collision && !agent_goal && self.steps >= self.config.max_steps;
        let events = StepEvents {
            collision,
            agent_goal,
            obstacle_goal: self.obstacle.goal_distance() < GOAL_TOLERANCE,
            timeout,
        };
        self.terminal = if collision {
            Some(TerminalCause::Collision)
        } else if agent_goal {
            Some(TerminalCause::Goal)
        } else if timeout {
            Some(TerminalCause::Timeout)
        } else {
            None
        };
        self.records.push(StepRecord {
            observation,
            separation,
            goal_distance,
            events,
        });
        Ok((observation, events))
    }

    /// Summary of a finished episode.
    pub fn finish(self) -> Result<EpisodeResult> {
        let cause = self
            .terminal
            .ok_or_else(|| Error::InvalidArgument("episode has not terminated".into()))?;
        let min_separation = self
            .records
            .iter()
            .map(|r| r.separation)
            .fold(f64::INFINITY, f64::min);
        Ok(EpisodeResult {
            observations: self.records.iter().map(|r| r.observation).collect(),
            collided: cause == TerminalCause::Collision,
            reached_goal: cause == TerminalCause::Goal,
            cause,
            min_separation,
            steps_taken: self.steps,
            records: self.records,
        })
    }
}

/// Adds `lambda_xi` times i.i.d. standard normal noise to every feature.
pub fn apply_noise<R: Rng + ?Sized>(features: &ObservationSequence, lambda_xi: f64, rng: &mut R) -> Result<ObservationSequence> {
    if !(lambda_xi >= 0.0) {
        return Err(Error::InvalidArgument(format!("noise scale {lambda_xi} is negative")));
    }
    let mut out = features.clone();
    if lambda_xi > 0.0 {
        for v in out.as_flat_mut() {
            *v += lambda_xi * rng.sample::<f64, _>(StandardNormal);
        }
    }
    Ok(out)
}

/// Zeroes `n_dropped` distinct rows chosen uniformly without replacement.
pub fn drop_observations<R: Rng + ?Sized>(seq: &ObservationSequence, n_dropped: usize, rng: &mut R) -> Result<ObservationSequence> {
    if n_dropped > seq.len() {
        return Err(Error::InvalidArgument(format!(
            "cannot drop {n_dropped} of {} observations",
            seq.len()
        )));
    }
    let mut out = seq.clone();
    if n_dropped > 0 {
        for t in sample(rng, seq.len(), n_dropped).iter() {
            out.step_mut(t).iter_mut().for_each(|v| *v = 0.0);
        }
    }
    Ok(out)
}

pub const TRACE_HEADER: &str = "step,a1_px,a1_py,a1_vx,a1_vy,a2_px,a2_py,a2_vx,a2_vy,heading,separation,goal_distance,collision,agent_goal,obstacle_goal,timeout,terminal";

/// Writes one CSV row per step (17 columns, fixed header).
pub fn write_trace<W: Write>(episode: &EpisodeResult, out: &mut W) -> Result<()> {
    writeln!(out, "{TRACE_HEADER}")?;
    for (i, r) in episode.records.iter().enumerate() {
        let f = r.observation.to_features();
        let e = r.events;
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            i + 1,
            f[0],
            f[1],
            f[2],
            f[3],
            f[4],
            f[5],
            f[6],
            f[7],
            f[8],
            r.separation,
            r.goal_distance,
            u8::from(e.collision),
            u8::from(e.agent_goal),
            u8::from(e.obstacle_goal),
            u8::from(e.timeout),
            u8::from(e.terminal()),
        )?;
    }
    Ok(())
}
