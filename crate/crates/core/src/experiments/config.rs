//! Run configuration and its flat `key = value` text format.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::env::WorldConfig;
use crate::mpc::CostWeights;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ModelKind {
    PbpRnn,
    Mde,
}

impl ModelKind {
    pub fn name(self) -> &'static str {
        match self {
            ModelKind::PbpRnn => "pbp_rnn",
            ModelKind::Mde => "mde",
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ModelKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "pbp_rnn" | "pbp-rnn" | "pbp" => Ok(ModelKind::PbpRnn),
            "mde" => Ok(ModelKind::Mde),
            other => Err(format!("unknown model '{other}' (expected pbp_rnn or mde)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub seed: u64,
    pub model_kind: ModelKind,
    pub seed_episodes: usize,
    pub retrain_interval: usize,
    /// Unset means the model's default (PBP 5, MDE 100).
    pub initial_epochs: Option<usize>,
    /// Unset means the model's default (PBP 2, MDE 10).
    pub subsequent_epochs: Option<usize>,
    pub batch_size: usize,
    pub eval_episodes: usize,
    pub sweep_episodes: usize,
    pub repetitions: usize,
    pub noise_levels: Vec<f64>,
    pub drop_levels: Vec<usize>,
    pub weights: CostWeights,
    pub hidden_dim: usize,
    pub world: WorldConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            model_kind: ModelKind::PbpRnn,
            seed_episodes: 100,
            retrain_interval: 10,
            initial_epochs: None,
            subsequent_epochs: None,
            batch_size: 500,
            eval_episodes: 20,
            sweep_episodes: 10,
            repetitions: 10,
            noise_levels: vec![0.0, 0.0025, 0.005, 0.0075, 0.01],
            drop_levels: (0..=8).collect(),
            weights: CostWeights::default(),
            hidden_dim: 16,
            world: WorldConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn initial_epochs_for(&self, kind: ModelKind) -> usize {
        self.initial_epochs.unwrap_or(match kind {
            ModelKind::PbpRnn => 5,
            ModelKind::Mde => 100,
        })
    }

    pub fn subsequent_epochs_for(&self, kind: ModelKind) -> usize {
        self.subsequent_epochs.unwrap_or(match kind {
            ModelKind::PbpRnn => 2,
            ModelKind::Mde => 10,
        })
    }

    pub fn validate(&self) -> Result<()> {
        let counts = [
            ("seed_episodes", self.seed_episodes),
            ("retrain_interval", self.retrain_interval),
            ("eval_episodes", self.eval_episodes),
            ("sweep_episodes", self.sweep_episodes),
            ("repetitions", self.repetitions),
            ("hidden_dim", self.hidden_dim),
            ("max_steps", self.world.max_steps),
        ];
        for (key, v) in counts {
            if v == 0 {
                return Err(config_error(0, Some(key), "must be at least 1"));
            }
        }
        if self.batch_size < 2 {
            return Err(config_error(0, Some("batch_size"), "must be at least 2"));
        }
        if let Some(l) = self.noise_levels.iter().find(|l| !(**l >= 0.0 && l.is_finite())) {
            return Err(config_error(0, Some("noise_levels"), &format!("level {l} is not a finite non-negative number")));
        }
        if let Some(n) = self.drop_levels.iter().find(|n| **n > crate::sequence::WINDOW_LEN) {
            return Err(config_error(0, Some("drop_levels"), &format!("cannot drop {n} of {} observations", crate::sequence::WINDOW_LEN)));
        }
        self.world
            .validate()
            .map_err(|e| config_error(0, Some("world"), &e.to_string()))?;
        self.weights
            .validate()
            .map_err(|e| config_error(0, Some("lambda"), &e.to_string()))
    }
}

fn config_error(line: usize, key: Option<&str>, message: &str) -> Error {
    Error::Config {
        line,
        key: key.map(str::to_owned),
        message: message.to_owned(),
    }
}

fn parse_value<T: FromStr>(line: usize, key: &str, raw: &str) -> Result<T> {
    raw.parse()
        .map_err(|_| config_error(line, Some(key), &format!("cannot parse '{raw}'")))
}

fn parse_list<T: FromStr>(line: usize, key: &str, raw: &str) -> Result<Vec<T>> {
    raw.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| parse_value(line, key, s))
        .collect()
}

/// Parses `key = value` lines. `#` starts a comment; blank lines are
/// skipped; lists are comma-separated. Missing keys keep their defaults.
pub fn parse_config(text: &str) -> Result<RunConfig> {
    let mut cfg = RunConfig::default();
    for (i, raw_line) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw_line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| config_error(line_no, None, &format!("expected 'key = value', found '{line}'")))?;
        let (key, value) = (key.trim(), value.trim());
        let n = line_no;
        match key {
            "seed" => cfg.seed = parse_value(n, key, value)?,
            "model" => cfg.model_kind = value.parse().map_err(|e: String| config_error(n, Some(key), &e))?,
            "seed_episodes" => cfg.seed_episodes = parse_value(n, key, value)?,
            "retrain_interval" => cfg.retrain_interval = parse_value(n, key, value)?,
            "initial_epochs" => cfg.initial_epochs = Some(parse_value(n, key, value)?),
            "subsequent_epochs" => cfg.subsequent_epochs = Some(parse_value(n, key, value)?),
            "batch_size" => cfg.batch_size = parse_value(n, key, value)?,
            "eval_episodes" => cfg.eval_episodes = parse_value(n, key, value)?,
            "sweep_episodes" => cfg.sweep_episodes = parse_value(n, key, value)?,
            "repetitions" => cfg.repetitions = parse_value(n, key, value)?,
            "noise_levels" => cfg.noise_levels = parse_list(n, key, value)?,
            "drop_levels" => cfg.drop_levels = parse_list(n, key, value)?,
            "lambda_c" => cfg.weights.lambda_c = parse_value(n, key, value)?,
            "lambda_v" => cfg.weights.lambda_v_base = parse_value(n, key, value)?,
            "lambda_d" => cfg.weights.lambda_d = parse_value(n, key, value)?,
            "hidden_dim" => cfg.hidden_dim = parse_value(n, key, value)?,
            "max_steps" => cfg.world.max_steps = parse_value(n, key, value)?,
            "agent_radius" => cfg.world.radius = parse_value(n, key, value)?,
            "influence_radius" => cfg.world.influence_radius = parse_value(n, key, value)?,
            "max_deflection_deg" => cfg.world.max_deflection = parse_value::<f64>(n, key, value)?.to_radians(),
            other => return Err(config_error(n, Some(other), "unknown key")),
        }
    }
    cfg.validate()?;
    Ok(cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_is_default() {
        assert_eq!(parse_config("").unwrap(), RunConfig::default());
        assert_eq!(parse_config("# nothing\n\n   \n").unwrap(), RunConfig::default());
    }

    #[test]
    fn weights_and_lists() {
        let cfg = parse_config("lambda_c = 25\nlambda_v = 200\nlambda_d = 3\nnoise_levels = 0, 0.5 # half\ndrop_levels=1,2").unwrap();
        assert_eq!(cfg.weights, CostWeights::default());
        assert_eq!(cfg.noise_levels, vec![0.0, 0.5]);
        assert_eq!(cfg.drop_levels, vec![1, 2]);
    }

    #[test]
    fn epochs_default_by_model() {
        let cfg = RunConfig::default();
        assert_eq!(cfg.initial_epochs_for(ModelKind::PbpRnn), 5);
        assert_eq!(cfg.initial_epochs_for(ModelKind::Mde), 100);
        assert_eq!(cfg.subsequent_epochs_for(ModelKind::PbpRnn), 2);
        assert_eq!(cfg.subsequent_epochs_for(ModelKind::Mde), 10);
        let cfg = parse_config("initial_epochs = 7").unwrap();
        assert_eq!(cfg.initial_epochs_for(ModelKind::Mde), 7);
    }

    #[test]
    fn errors_name_line_and_key() {
        match parse_config("seed = 1\ninitial_epochs = banana") {
            Err(Error::Config { line, key, .. }) => {
                assert_eq!(line, 2);
                assert_eq!(key.as_deref(), Some("initial_epochs"));
            }
            other => panic!("unexpected {other:?}"),
        }
        match parse_config("epochs = banana") {
            Err(e @ Error::Config { line: 1, .. }) => assert!(e.to_string().contains("epochs")),
            other => panic!("unexpected {other:?}"),
        }
        assert!(parse_config("just words").is_err());
        assert!(parse_config("repetitions = 0").is_err());
        assert!(parse_config("noise_levels = -1").is_err());
        assert!(parse_config("drop_levels = 9").is_err());
    }
}
