use pbprnn::checkpoint::{save_checkpoint, PBP_MAGIC};
use pbprnn::env::ResetMode;
use pbprnn::experiments::episode::{ControlSettings, EpisodeRngs};
use pbprnn::experiments::metrics::COLLISION_THRESHOLD;
use pbprnn::experiments::{
    aggregate, repetition_tree, run_mpc_episode, run_random_episode, train_repetition, EpisodeOutcome, ModelKind,
    Perturbation, QueryRecord, RunConfig, Scenario, TrainedModel,
};
use pbprnn::mpc::{build_primitives, EpsilonSchedule};
use pbprnn::{SeedTree, SimRng};
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};

fn cases() -> ProptestConfig {
    ProptestConfig::with_cases(1000)
}

fn checkpoint_bytes(model: &TrainedModel, pool: &pbprnn::experience::ExperiencePool) -> Vec<u8> {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.ckpt");
    save_checkpoint(&path, model, pool).unwrap();
    let mut bytes = std::fs::read(&path).unwrap();
    bytes.extend(std::fs::read(pbprnn::checkpoint::pool_path(&path)).unwrap());
    bytes
}

#[test]
fn schedule_turns_greedy_on_episode_114() {
    let mut s = EpsilonSchedule::new(1.0);
    let mut n = 0;
    while !s.is_terminal() {
        s.decay_epsilon();
        n += 1;
    }
    assert_eq!(n, 114);
    assert_eq!(s.epsilon, 0.0);
}

#[test]
fn training_runs_the_full_schedule() {
    let cfg = RunConfig::default();
    let out = train_repetition(&cfg, ModelKind::PbpRnn, 0).unwrap();
    assert_eq!(out.control_episodes, 114);
    // Initial fit, eleven full rounds of ten, and the four-episode tail.
    assert_eq!(out.rounds.len(), 13);
    assert_eq!(out.rounds.last().unwrap().episodes, 114);
    assert_eq!(out.rounds.last().unwrap().epsilon, 0.0);
}

#[test]
fn equal_seeds_give_identical_checkpoints() {
    let cfg = RunConfig::default();
    let a = train_repetition(&cfg, ModelKind::PbpRnn, 1).unwrap();
    let b = train_repetition(&cfg, ModelKind::PbpRnn, 1).unwrap();
    let (ba, bb) = (checkpoint_bytes(&a.model, &a.pool), checkpoint_bytes(&b.model, &b.pool));
    assert!(ba.starts_with(PBP_MAGIC));
    assert_eq!(ba, bb);

    let mut quick = RunConfig::default();
    quick.initial_epochs = Some(2);
    quick.subsequent_epochs = Some(1);
    quick.seed_episodes = 20;
    let a = train_repetition(&quick, ModelKind::Mde, 0).unwrap();
    let b = train_repetition(&quick, ModelKind::Mde, 0).unwrap();
    assert_eq!(checkpoint_bytes(&a.model, &a.pool), checkpoint_bytes(&b.model, &b.pool));
}

#[test]
fn random_seed_phase_sees_both_classes() {
    let prims = build_primitives();
    let mut both = 0;
    for seed in 0..10u64 {
        let cfg = RunConfig { seed, ..RunConfig::default() };
        let tree = repetition_tree(&cfg, 0);
        let (mut env, mut policy) = (tree.stream("seed-env", 0), tree.stream("seed-policy", 0));
        let collisions = (0..cfg.seed_episodes)
            .filter(|_| {
                run_random_episode(&cfg.world, ResetMode::Train, &prims, &mut env, &mut policy)
                    .unwrap()
                    .collided
            })
            .count();
        if collisions > 0 && collisions < cfg.seed_episodes {
            both += 1;
        }
    }
    assert!(both >= 9, "{both} of 10 seeds saw both classes");
}

fn outcome(rng: &mut SimRng) -> EpisodeOutcome {
    let n = rng.random_range(0..6);
    EpisodeOutcome {
        collided: rng.random_bool(0.4),
        queries: (0..n)
            .map(|_| {
                let variance = rng.random_range(0.0..0.1);
                QueryRecord {
                    mean: rng.random_range(-0.2..1.2),
                    variance,
                    total_variance: variance + rng.random_range(0.0..0.5),
                }
            })
            .collect(),
        min_separation: rng.random_range(0.0..0.5),
    }
}

proptest! {
    #![proptest_config(cases())]

    #[test]
    fn aggregation_ignores_episode_order(seed in any::<u64>(), n in 1usize..30) {
        let mut rng = SimRng::seed_from_u64(seed);
        let mut outcomes: Vec<EpisodeOutcome> = (0..n).map(|_| outcome(&mut rng)).collect();
        let a = aggregate(Scenario::Novel, &outcomes).unwrap();
        outcomes.shuffle(&mut rng);
        let b = aggregate(Scenario::Novel, &outcomes).unwrap();
        prop_assert_eq!(a.fpr, b.fpr);
        prop_assert_eq!(a.fnr, b.fnr);
        prop_assert_eq!(a.collision_rate, b.collision_rate);
        prop_assert_eq!(&a.min_separations, &b.min_separations);
        for (x, y) in [(a.loglik_mean, b.loglik_mean), (a.loglik_var, b.loglik_var), (a.pred_var_mean, b.pred_var_mean), (a.pred_var_var, b.pred_var_var)] {
            prop_assert!(x.to_bits() == y.to_bits() || (x.is_nan() && y.is_nan()));
        }
    }
}

/// Recounts false alarms and misses from the cost trace of executed steps.
#[test]
fn rates_match_a_recount_from_the_cost_trace() {
    let cfg = RunConfig::default();
    let tree = SeedTree::new(21);
    let model = TrainedModel::init(ModelKind::PbpRnn, 16, &mut tree.stream("init", 0)).unwrap();
    let prims = build_primitives();
    let settings = ControlSettings {
        primitives: &prims,
        weights: &cfg.weights,
        perturbation: Perturbation::None,
    };
    let mut trace: Vec<u8> = Vec::new();
    let mut outcomes = Vec::new();
    for i in 0..20 {
        let ep = run_mpc_episode(
            &model,
            &cfg.world,
            ResetMode::Novel,
            &settings,
            &EpsilonSchedule::greedy(),
            &mut tree.stream("env", i as u64),
            EpisodeRngs {
                policy: &mut tree.stream("policy", i as u64),
                model: &mut tree.stream("model", i as u64),
                perturb: &mut tree.stream("perturb", i as u64),
            },
            Some((&mut trace, i)),
        )
        .unwrap();
        outcomes.push(EpisodeOutcome::from_episode(&ep));
    }
    let mut flagged = vec![false; outcomes.len()];
    for line in String::from_utf8(trace).unwrap().lines() {
        let f: Vec<&str> = line.split(',').collect();
        let p: f64 = f[3].parse().unwrap();
        if f[7] == "1" && p > COLLISION_THRESHOLD {
            flagged[f[0].parse::<usize>().unwrap()] = true;
        }
    }
    let clean = outcomes.iter().filter(|o| !o.collided).count();
    let hits = outcomes.len() - clean;
    let fp = outcomes.iter().zip(&flagged).filter(|(o, f)| !o.collided && **f).count();
    let fn_ = outcomes.iter().zip(&flagged).filter(|(o, f)| o.collided && !**f).count();
    let m = aggregate(Scenario::Novel, &outcomes).unwrap();
    let rate = |k: usize, n: usize| if n == 0 { 0.0 } else { k as f64 / n as f64 };
    assert_eq!(m.fpr, rate(fp, clean));
    assert_eq!(m.fnr, rate(fn_, hits));
}
