//! Online fitted Q-iteration with epsilon-greedy exploration. The Q-function
//! is a forest regressor over state features, a one-hot action encoding, and,
//! in the time-aware variant, the sinusoidal time block.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::state_action_features;
use crate::embed::EmbeddingConfig;
use crate::env::{self, EnvConfig, EnvState, Trajectory, Transition};
use crate::error::{Error, Result};
use crate::learners::{self, Dataset, ForestParams, RegressorSpec, TrainedRegressor};
use crate::planner::{EvalPlan, EvalRollout, RunOutput};

/// Exploration never decays below this.
pub const EPSILON_FLOOR: f64 = 0.01;

#[derive(Debug, Clone, PartialEq)]
pub struct FqiConfig {
    /// Bellman-backup sweeps per refit.
    pub iterations: usize,
    pub gamma: f64,
    pub epsilon0: f64,
    /// Buffer size required before the first fit.
    pub warmup: usize,
    /// Ticks between refits.
    pub update_interval: usize,
    pub time_aware: bool,
    pub forest: ForestParams,
    pub seed: u64,
}

impl Default for FqiConfig {
    fn default() -> Self {
        FqiConfig {
            iterations: 20,
            gamma: 0.9,
            epsilon0: 1.0,
            warmup: 200,
            update_interval: 250,
            time_aware: true,
            forest: ForestParams {
                n_trees: 1000,
                ..ForestParams::default()
            },
            seed: 0,
        }
    }
}

impl FqiConfig {
    pub fn validate(&self) -> Result<()> {
        if self.iterations == 0 {
            return Err(Error::InvalidConfig("fqi needs at least one iteration".into()));
        }
        if !(0.0..1.0).contains(&self.gamma) {
            return Err(Error::InvalidDiscount(self.gamma));
        }
        if !(0.0..=1.0).contains(&self.epsilon0) {
            return Err(Error::InvalidConfig(format!(
                "fqi.epsilon0 must lie in [0, 1], got {}",
                self.epsilon0
            )));
        }
        if self.warmup == 0 || self.update_interval == 0 {
            return Err(Error::InvalidConfig(
                "fqi warmup and update interval must be positive".into(),
            ));
        }
        self.forest.validate()
    }
}

/// Exploration probability at tick `t`: `max(0.01, epsilon0 * 0.999^t)`.
pub fn epsilon_at(epsilon0: f64, t: u64) -> f64 {
    let decayed = epsilon0 * 0.999f64.powi(t.min(i32::MAX as u64) as i32);
    decayed.max(EPSILON_FLOOR)
}

/// A fitted Q-function over (state, action[, time]) features.
#[derive(Debug, Clone)]
pub struct QModel {
    regressor: TrainedRegressor,
    embed: EmbeddingConfig,
    time_aware: bool,
}

impl QModel {
    pub fn value(&self, position: usize, action: i32, tick: u64) -> Result<f64> {
        let x = state_action_features(&self.embed, position, action, tick, self.time_aware)?;
        self.regressor.predict(&x)
    }

    /// Argmax over legal actions; ties keep the first action in -1, 0, +1
    /// order.
    pub fn greedy_action(&self, cfg: &EnvConfig, position: usize, tick: u64) -> Result<i32> {
        let mut best = f64::NEG_INFINITY;
        let mut best_action = 0;
        for a in env::legal_actions(cfg, position)? {
            let q = self.value(position, a, tick)?;
            if q > best {
                best = q;
                best_action = a;
            }
        }
        Ok(best_action)
    }
}

/// One labeled row per buffered transition:
/// `r + gamma * max_a' Q(s', a'[, t+1])`, or the raw reward when no Q-function
/// exists yet.
pub fn fqi_targets(
    buffer: &[Transition],
    q: Option<&QModel>,
    gamma: f64,
    time_aware: bool,
    embed_cfg: &EmbeddingConfig,
) -> Result<Dataset> {
    if buffer.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let rows: Vec<(Vec<f64>, f64)> = buffer
        .par_iter()
        .map(|t| -> Result<(Vec<f64>, f64)> {
            let x = state_action_features(embed_cfg, t.position, t.action, t.tick, time_aware)?;
            let future = match q {
                None => 0.0,
                Some(q) => {
                    let mut best = f64::NEG_INFINITY;
                    for a in env::legal_actions_in_width(embed_cfg.width, t.next_position) {
                        let v = q.value(t.next_position, a, t.tick + 1)?;
                        if v > best {
                            best = v;
                        }
                    }
                    best
                }
            };
            Ok((x, t.reward + gamma * future))
        })
        .collect::<Result<_>>()?;
    let mut data = Dataset::new(rows[0].0.len());
    for (x, y) in &rows {
        data.push(x, *y)?;
    }
    Ok(data)
}

/// Runs the full fitted Q-iteration on a frozen buffer.
pub fn fqi_fit(
    buffer: &[Transition],
    cfg: &FqiConfig,
    embed_cfg: &EmbeddingConfig,
) -> Result<QModel> {
    cfg.validate()?;
    if buffer.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mut q: Option<QModel> = None;
    for k in 0..cfg.iterations {
        let data = fqi_targets(buffer, q.as_ref(), cfg.gamma, cfg.time_aware, embed_cfg)?;
        let seed = cfg
            .seed
            .wrapping_add((k as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15));
        let spec = RegressorSpec::forest(cfg.forest.clone(), seed);
        let regressor = learners::fit(&spec, &data)?;
        q = Some(QModel {
            regressor,
            embed: embed_cfg.clone(),
            time_aware: cfg.time_aware,
        });
    }
    Ok(q.expect("at least one iteration"))
}

/// The exact online loop: epsilon-greedy behavior, buffer append, refit when
/// the buffer is warm and the tick hits the update interval.
pub fn run_online_fqi(
    env_cfg: &EnvConfig,
    cfg: &FqiConfig,
    embed_cfg: &EmbeddingConfig,
    total_steps: usize,
    eval: &EvalPlan,
    rng: &mut ChaCha8Rng,
) -> Result<RunOutput> {
    cfg.validate()?;
    env_cfg.validate()?;
    if total_steps <= cfg.warmup {
        return Err(Error::InvalidConfig(format!(
            "fqi needs more steps than its warmup ({} <= {})",
            total_steps, cfg.warmup
        )));
    }
    let mut trajectory = Trajectory::new(env_cfg.start_state());
    let mut scores: Vec<Option<f64>> = Vec::with_capacity(total_steps);
    let mut buffer: Vec<Transition> = Vec::with_capacity(total_steps);
    let mut q: Option<QModel> = None;
    let mut evals = Vec::new();

    for _ in 0..total_steps {
        let state = trajectory.end_state();
        let u: f64 = rng.random();
        let explore = u < epsilon_at(cfg.epsilon0, state.tick) || q.is_none();
        let (action, score) = if explore {
            let legal = env::legal_actions(env_cfg, state.position)?;
            (legal[rng.random_range(0..legal.len())], None)
        } else {
            let q_ref = q.as_ref().unwrap();
            let a = q_ref.greedy_action(env_cfg, state.position, state.tick)?;
            let s = q_ref.value(state.position, a, state.tick)?;
            (a, Some(s))
        };
        let transition = env::step(env_cfg, state, action)?;
        buffer.push(transition);
        trajectory.push(transition);
        scores.push(score);

        let tick_done = state.tick + 1;
        if buffer.len() >= cfg.warmup && tick_done % cfg.update_interval as u64 == 0 {
            q = Some(fqi_fit(&buffer, cfg, embed_cfg)?);
        }

        if eval.every > 0 && tick_done % eval.every as u64 == 0 {
            if let Some(q_ref) = q.as_ref() {
                evals.push(greedy_rollout(
                    env_cfg,
                    q_ref,
                    trajectory.end_state(),
                    eval.window,
                )?);
            }
        }
    }

    Ok(RunOutput {
        trajectory,
        scores,
        evals,
        warmup_len: cfg.warmup,
    })
}

fn greedy_rollout(
    env_cfg: &EnvConfig,
    q: &QModel,
    state: EnvState,
    window: usize,
) -> Result<EvalRollout> {
    let mut positions = Vec::with_capacity(window);
    let mut cur = state;
    for _ in 0..window {
        let a = q.greedy_action(env_cfg, cur.position, cur.tick)?;
        cur = EnvState {
            position: (cur.position as i64 + a as i64) as usize,
            tick: cur.tick + 1,
        };
        positions.push(cur.position);
    }
    Ok(EvalRollout { state, positions })
}
