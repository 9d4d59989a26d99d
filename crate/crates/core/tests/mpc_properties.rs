use pbprnn::env::{reset, ResetMode, WorldConfig};
use pbprnn::mpc::{build_primitives, evaluate_costs, greedy_index, select_action, CostWeights, EpsilonSchedule};
use pbprnn::{CollisionModel, ObservationSequence, PredictiveDistribution, Result, SimRng};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};

fn cases() -> ProptestConfig {
    ProptestConfig::with_cases(1000)
}

/// Feature indices that change sign when the world is reflected in x = 0.
const ODD: [usize; 5] = [0, 2, 4, 6, 8];
const EVEN: [usize; 4] = [1, 3, 5, 7];

/// A stand-in model that is exactly invariant under the reflection.
struct MirrorModel {
    odd: [f64; 5],
    even: [f64; 4],
}

impl CollisionModel for MirrorModel {
    fn predict(&self, seq: &ObservationSequence, _rng: &mut SimRng) -> Result<PredictiveDistribution> {
        let mut s = 0.0;
        let mut q = 0.0;
        for row in seq.steps() {
            let u: f64 = ODD.iter().zip(&self.odd).map(|(&i, w)| w * row[i]).sum();
            q += u * u;
            s += EVEN.iter().zip(&self.even).map(|(&i, w)| w * row[i]).sum::<f64>();
        }
        let mean = 1.0 / (1.0 + (-(s + q)).exp());
        let variance = 0.01 * q / (1.0 + q);
        Ok(PredictiveDistribution {
            mean,
            variance,
            total_variance: variance + 0.001,
        })
    }
}

fn costs_from(p: &[f64], v: &[f64], d: &[f64], w: &CostWeights, eps: f64) -> Vec<f64> {
    (0..p.len()).map(|i| w.cost(p[i], v[i], d[i], eps)).collect()
}

fn rank(costs: &[f64], i: usize) -> usize {
    costs.iter().filter(|c| **c < costs[i]).count()
}

fn margin(costs: &[f64]) -> f64 {
    let mut s = costs.to_vec();
    s.sort_by(f64::total_cmp);
    s[1] - s[0]
}

fn triple() -> impl Strategy<Value = (Vec<f64>, Vec<f64>, Vec<f64>)> {
    (
        prop::collection::vec(0.0..1.0f64, 11),
        prop::collection::vec(0.0..0.5f64, 11),
        prop::collection::vec(0.0..1.0f64, 11),
    )
}

proptest! {
    #![proptest_config(cases())]

    #[test]
    fn common_scaling_keeps_greedy_choice(
        (p, v, d) in triple(),
        eps in 0.0..1.0f64,
        c in 0.01..100.0f64,
    ) {
        let w = CostWeights::default();
        let base = costs_from(&p, &v, &d, &w, eps);
        prop_assume!(margin(&base) > 1e-9 * base.iter().fold(1.0f64, |a, b| a.max(b.abs())));
        let scaled = CostWeights { lambda_c: c * w.lambda_c, lambda_v_base: c * w.lambda_v_base, lambda_d: c * w.lambda_d };
        let greedy = EpsilonSchedule::greedy();
        let mut rng = SimRng::seed_from_u64(0);
        let a = select_action(&base, &greedy, &mut rng).unwrap();
        let b = select_action(&costs_from(&p, &v, &d, &scaled, eps), &greedy, &mut rng).unwrap();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn more_variance_never_improves_rank(
        (p, v, d) in triple(),
        eps in 0.0..1.0f64,
        i in 0usize..11,
        extra in 0.0..1.0f64,
    ) {
        let w = CostWeights::default();
        let before = costs_from(&p, &v, &d, &w, eps);
        let mut v2 = v.clone();
        v2[i] += extra;
        let after = costs_from(&p, &v2, &d, &w, eps);
        prop_assert!(rank(&after, i) >= rank(&before, i));
    }

    #[test]
    fn mirrored_worlds_mirror_the_choice(seed in any::<u64>()) {
        let mut rng = SimRng::seed_from_u64(seed);
        let model = MirrorModel {
            odd: std::array::from_fn(|_| rng.random_range(-3.0..3.0)),
            even: std::array::from_fn(|_| rng.random_range(-1.0..1.0)),
        };
        let cfg = WorldConfig::default();
        let mut world = reset(&cfg, ResetMode::Train, &mut rng).unwrap();
        world.agent.position = [rng.random_range(-0.2..0.2), rng.random_range(-0.3..0.0)];
        world.agent.goal = [rng.random_range(-0.2..0.2), rng.random_range(0.1..0.4)];
        world.obstacle.position = [rng.random_range(-0.3..0.3), rng.random_range(-0.2..0.3)];
        world.obstacle.velocity = [rng.random_range(-0.05..0.05), rng.random_range(-0.05..0.05)];
        let rows: Vec<f64> = (0..8 * 9).map(|_| rng.random_range(-0.3..0.3)).collect();
        let history = ObservationSequence::from_flat(rows.clone(), 9, 0).unwrap();

        let mut mirror_world = world.clone();
        for a in [&mut mirror_world.agent, &mut mirror_world.obstacle] {
            a.position[0] = -a.position[0];
            a.velocity[0] = -a.velocity[0];
            a.goal[0] = -a.goal[0];
        }
        let mirrored_rows: Vec<f64> = rows
            .iter()
            .enumerate()
            .map(|(k, x)| if ODD.contains(&(k % 9)) { -x } else { *x })
            .collect();
        let mirror_history = ObservationSequence::from_flat(mirrored_rows, 9, 0).unwrap();

        let prims = build_primitives();
        let w = CostWeights::default();
        let eps = rng.random_range(0.0..1.0);
        let a: Vec<f64> = evaluate_costs(&model, &history, &world, &prims, &w, eps, &mut rng)
            .unwrap()
            .iter()
            .map(|c| c.cost)
            .collect();
        let b: Vec<f64> = evaluate_costs(&model, &mirror_history, &mirror_world, &prims, &w, eps, &mut rng)
            .unwrap()
            .iter()
            .map(|c| c.cost)
            .collect();
        prop_assume!(margin(&a) > 1e-9);
        let i = greedy_index(&a).unwrap();
        prop_assert_eq!(greedy_index(&b).unwrap(), prims.mirror(i));
        for k in 0..prims.len() {
            prop_assert!((a[k] - b[prims.mirror(k)]).abs() < 1e-12);
        }
    }
}

#[test]
fn greedy_agrees_with_brute_force_scan() {
    let mut rng = SimRng::seed_from_u64(7);
    let w = CostWeights::default();
    for _ in 0..10_000 {
        let eps = rng.random_range(0.0..1.0);
        let p: Vec<f64> = (0..11).map(|_| rng.random_range(0.0..1.0)).collect();
        let v: Vec<f64> = (0..11).map(|_| rng.random_range(0.0..0.5)).collect();
        let d: Vec<f64> = (0..11).map(|_| rng.random_range(0.0..1.0)).collect();
        let costs = costs_from(&p, &v, &d, &w, eps);
        let mut best = 0;
        for i in 0..11 {
            let c = (1.0 - eps) * w.lambda_v_base * v[i] + w.lambda_c * p[i] + w.lambda_d * d[i];
            let cb = (1.0 - eps) * w.lambda_v_base * v[best] + w.lambda_c * p[best] + w.lambda_d * d[best];
            if c < cb {
                best = i;
            }
        }
        assert_eq!(greedy_index(&costs).unwrap(), best);
    }
}
