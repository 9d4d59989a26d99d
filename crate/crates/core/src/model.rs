use crate::error::Result;
use crate::rng::SimRng;
use crate::sequence::{ObservationSequence, PredictiveDistribution};

/// Anything that scores an observation window with a collision prediction.
///
/// Deterministic models ignore `rng`; sampling-based ones draw from it.
pub trait CollisionModel: Sync {
    fn predict(&self, seq: &ObservationSequence, rng: &mut SimRng) -> Result<PredictiveDistribution>;
}

impl CollisionModel for crate::rnn::RecurrentBayesNet {
    fn predict(&self, seq: &ObservationSequence, _rng: &mut SimRng) -> Result<PredictiveDistribution> {
        crate::rnn::RecurrentBayesNet::predict(self, seq)
    }
}

impl CollisionModel for crate::mde::Ensemble {
    fn predict(&self, seq: &ObservationSequence, rng: &mut SimRng) -> Result<PredictiveDistribution> {
        crate::mde::mc_predict(self, seq, rng)
    }
}
