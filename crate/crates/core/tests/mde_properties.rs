use pbprnn::mde::{lstm_forward, mc_predict, train_mde, AdamState, DropoutMask, Ensemble, LstmNet};
use pbprnn::{ObservationSequence, SeedTree, SimRng};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};

fn cases() -> ProptestConfig {
    ProptestConfig::with_cases(1000)
}

fn seq(rng: &mut impl Rng, t: usize, d: usize) -> ObservationSequence {
    ObservationSequence::from_flat((0..t * d).map(|_| rng.random_range(-1.5..1.5)).collect(), d, 0).unwrap()
}

proptest! {
    #![proptest_config(cases())]

    #[test]
    fn mc_variance_is_non_negative(seed in any::<u64>(), rate in 0.0..0.95f64, t in 1usize..6) {
        let mut rng = SimRng::seed_from_u64(seed);
        let ens = Ensemble::new(2, 3, 4, rate, 5, &mut rng).unwrap();
        let s = seq(&mut rng, t, 3);
        let p = mc_predict(&ens, &s, &mut rng).unwrap();
        prop_assert!(p.variance >= 0.0);
        prop_assert!(p.mean >= 0.0);
        prop_assert_eq!(p.total_variance, p.variance);
    }

    #[test]
    fn no_stochastic_source_gives_zero_variance(seed in any::<u64>(), t in 1usize..6) {
        let mut rng = SimRng::seed_from_u64(seed);
        let mut ens = Ensemble::new(3, 3, 4, 0.0, 4, &mut rng).unwrap();
        let first = ens.members[0].clone();
        ens.members.iter_mut().for_each(|m| *m = first.clone());
        let s = seq(&mut rng, t, 3);
        prop_assert_eq!(mc_predict(&ens, &s, &mut rng).unwrap().variance, 0.0);
    }

    #[test]
    fn forward_is_deterministic_under_fixed_mask(seed in any::<u64>(), rate in 0.0..0.9f64) {
        let mut rng = SimRng::seed_from_u64(seed);
        let net = LstmNet::new(3, 5, &mut rng);
        let mask = DropoutMask::sample(5, rate, &mut rng);
        let s = seq(&mut rng, 4, 3);
        let a = lstm_forward(&net, &s, Some(&mask)).unwrap();
        let b = lstm_forward(&net, &s, Some(&mask)).unwrap();
        prop_assert_eq!(a.to_bits(), b.to_bits());
    }

    #[test]
    fn adam_zero_gradient_is_identity(
        params in prop::collection::vec(-5.0..5.0f64, 1..20),
        steps in 1usize..10,
    ) {
        let mut adam = AdamState::new(params.len(), 1e-3);
        let mut p = params.clone();
        for _ in 0..steps {
            adam.apply(&mut p, &vec![0.0; params.len()]);
        }
        prop_assert_eq!(p, params);
    }
}

#[test]
fn training_loss_falls_over_ten_epochs() {
    let mut monotone = 0;
    for trial in 0..10u64 {
        let mut rng = SeedTree::new(trial).stream("mde-loss", 0);
        let data: Vec<(ObservationSequence, f64)> = (0..64)
            .map(|_| {
                let s = seq(&mut rng, 8, 9);
                let y = if s.last()[0] + s.last()[1] > 0.0 { 1.0 } else { 0.0 };
                (s, y)
            })
            .collect();
        let mut ens = Ensemble::new(1, 9, 16, 0.7, 20, &mut rng).unwrap();
        let losses = train_mde(&mut ens, &data, 10, &mut rng).unwrap().remove(0);
        if losses.windows(2).all(|w| w[1] <= w[0]) {
            monotone += 1;
        }
    }
    assert!(monotone >= 8, "{monotone} of 10 trials had non-increasing loss");
}
