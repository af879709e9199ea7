// Scratch diagnostics; deleted before release.
use proforage::baselines::fqi::{fqi_fit, FqiConfig};
use proforage::embed::EmbeddingConfig;
use proforage::env::{self, EnvConfig, EnvState};
use proforage::learners::ForestParams;
use proforage::oracle;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() {
    let env_cfg = EnvConfig::default();
    let embed_cfg = EmbeddingConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(33);
    let traj = env::run_policy(
        &env_cfg,
        |p, _| {
            let legal = env::legal_actions(&env_cfg, p).unwrap();
            legal[rng.random_range(0..legal.len())]
        },
        env_cfg.start_state(),
        1500,
    )
    .unwrap();
    let buffer = traj.transitions;
    let cfg = FqiConfig {
        iterations: 30,
        time_aware: true,
        forest: ForestParams {
            n_trees: 120,
            ..ForestParams::default()
        },
        ..FqiConfig::default()
    };
    let t0 = std::time::Instant::now();
    let q = fqi_fit(&buffer, &cfg, &embed_cfg).unwrap();
    println!("fqi_fit took {:?}", t0.elapsed());
    let table = oracle::solve(&env_cfg, cfg.gamma, 1e-10).unwrap();
    let window = 20;
    for (p, t0) in [(2usize, 1200u64), (5, 1230), (3, 1260), (0, 1290)] {
        let start = EnvState {
            position: p,
            tick: t0,
        };
        let mut positions = Vec::new();
        let mut cur = start;
        for _ in 0..window {
            let a = q.greedy_action(&env_cfg, cur.position, cur.tick).unwrap();
            cur = EnvState {
                position: (cur.position as i64 + a as i64) as usize,
                tick: cur.tick + 1,
            };
            positions.push(cur.position);
        }
        let regret =
            oracle::prospective_regret(&positions, &table, &env_cfg, start, window).unwrap();
        let norm = oracle::normalized_regret(regret, &table, &env_cfg, start, window).unwrap();
        let optimal = oracle::optimal_trajectory(&table, &env_cfg, start, window).unwrap();
        println!(
            "start ({p},{t0}): norm {norm:.4}\n  mine {positions:?}\n  best {:?}",
            &optimal[1..]
        );
    }
    // Q-value sanity at a known state: patch A about to boost.
    for a in [-1, 0, 1] {
        let q_v = q.value(2, a, 1209).map(|v| format!("{v:.3}")).unwrap();
        let truth = env::reward_at(&env_cfg, 1210, (2i64 + a as i64) as usize)
            + 0.9 * table.value((2i64 + a as i64) as usize, 1210);
        println!("Q(2, {a}, 1209) = {q_v}, true {truth:.3}");
    }
}
