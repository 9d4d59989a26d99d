//! Probabilistic backpropagation for recurrent networks, an MC-dropout LSTM
//! ensemble baseline, and a seeded 2D collision-avoidance harness driven by
//! an uncertainty-penalized motion-primitive controller.

pub mod checkpoint;
pub mod env;
pub mod error;
pub mod experience;
pub mod experiments;
pub mod mde;
pub mod model;
pub mod mpc;
pub mod oracle;
pub mod pbp;
pub mod rng;
pub mod rnn;
pub mod sequence;

pub use error::{Error, Result};
pub use model::CollisionModel;
pub use rng::{SeedTree, SimRng};
pub use sequence::{ObservationSequence, PredictiveDistribution};
