//! MC-dropout LSTM ensemble baseline.

mod adam;
mod ensemble;
mod lstm;

pub use adam::AdamState;
pub use ensemble::{mc_predict, sample_statistics, train_mde, Ensemble, MdeSettings};
pub use lstm::{lstm_forward, DropoutMask, LstmGradient, LstmNet};
