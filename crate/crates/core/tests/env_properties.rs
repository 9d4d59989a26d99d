use pbprnn::env::{distance, reset, ResetMode, WorldConfig};
use pbprnn::experiments::run_random_episode;
use pbprnn::mpc::{build_primitives, PRIMITIVE_LENGTH};
use pbprnn::SimRng;
use proptest::prelude::*;
use rand::SeedableRng;

fn cases() -> ProptestConfig {
    ProptestConfig::with_cases(1000)
}

fn mode(novel: bool) -> ResetMode {
    if novel {
        ResetMode::Novel
    } else {
        ResetMode::Train
    }
}

proptest! {
    #![proptest_config(cases())]

    #[test]
    fn equal_seeds_give_identical_episodes(env_seed in any::<u64>(), policy_seed in any::<u64>(), novel in any::<bool>()) {
        let cfg = WorldConfig::default();
        let prims = build_primitives();
        let run = || {
            run_random_episode(
                &cfg,
                mode(novel),
                &prims,
                &mut SimRng::seed_from_u64(env_seed),
                &mut SimRng::seed_from_u64(policy_seed),
            )
            .unwrap()
        };
        prop_assert_eq!(run(), run());
    }

    #[test]
    fn replay_reproduces_separations_and_speed_bound(env_seed in any::<u64>(), policy_seed in any::<u64>(), novel in any::<bool>()) {
        let cfg = WorldConfig::default();
        let ep = run_random_episode(
            &cfg,
            mode(novel),
            &build_primitives(),
            &mut SimRng::seed_from_u64(env_seed),
            &mut SimRng::seed_from_u64(policy_seed),
        )
        .unwrap();
        let mut world = reset(&cfg, mode(novel), &mut SimRng::seed_from_u64(env_seed)).unwrap();
        let mut min_sep = f64::INFINITY;
        for (i, obs) in ep.observations.iter().enumerate() {
            let before = world.obstacle.position;
            let (replayed, events) = world.step(obs.primitive_heading, PRIMITIVE_LENGTH).unwrap();
            prop_assert_eq!(&replayed, obs);
            let moved = distance(before, world.obstacle.position);
            prop_assert!(moved <= cfg.obstacle_speed * (1.0 + 1e-12));
            let sep = distance(world.agent.position, world.obstacle.position);
            prop_assert_eq!(sep, ep.records[i].separation);
            prop_assert!(!(events.collision && events.agent_goal));
            min_sep = min_sep.min(sep);
        }
        prop_assert!(world.is_terminal());
        prop_assert_eq!(min_sep, ep.min_separation);
        prop_assert_eq!(ep.steps_taken, ep.observations.len());
        if ep.collided {
            prop_assert!(!ep.reached_goal);
        }
    }
}

#[test]
fn collision_beats_goal_when_both_happen() {
    let cfg = WorldConfig::default();
    let mut world = reset(&cfg, ResetMode::Train, &mut SimRng::seed_from_u64(0)).unwrap();
    world.agent.position = [0.0, 0.21];
    world.agent.goal = [0.0, 0.25];
    world.obstacle.position = [0.0, 0.31];
    world.obstacle.goal = [0.0, 0.31];
    let (_, events) = world.step(0.0, PRIMITIVE_LENGTH).unwrap();
    assert!(events.collision);
    assert!(!events.agent_goal);
    assert_eq!(world.finish().unwrap().cause, pbprnn::env::TerminalCause::Collision);
}
