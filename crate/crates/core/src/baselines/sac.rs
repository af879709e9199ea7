//! Online soft actor-critic adapted to the discrete track: the actor outputs
//! a categorical distribution over legal moves, twin critics score
//! (state, action) pairs, and target critics trail the mains by polyak
//! averaging. Critic targets follow the single-sample pseudocode by default;
//! a flag switches them to the closed-form expectation over next actions.

use ndarray::{Array1, Array2};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::{state_action_features, state_features, ACTIONS};
use crate::embed::EmbeddingConfig;
use crate::env::{self, EnvConfig, EnvState, Trajectory, Transition};
use crate::error::{Error, Result};
use crate::learners::mlp::{Adam, Mlp};
use crate::planner::{EvalPlan, EvalRollout, RunOutput};

const PROB_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct SacConfig {
    pub hidden: Vec<usize>,
    /// Entropy temperature.
    pub alpha: f64,
    /// Polyak coefficient: target <- rho * target + (1 - rho) * main.
    pub rho: f64,
    pub batch: usize,
    pub actor_lr: f64,
    pub critic_lr: f64,
    pub gamma: f64,
    pub time_aware: bool,
    /// When set, critic targets average over next actions instead of
    /// sampling one.
    pub target_expectation: bool,
    pub seed: u64,
}

impl Default for SacConfig {
    fn default() -> Self {
        SacConfig {
            hidden: vec![128, 128],
            alpha: 0.2,
            rho: 0.995,
            batch: 64,
            actor_lr: 3e-4,
            critic_lr: 3e-4,
            gamma: 0.9,
            time_aware: true,
            target_expectation: false,
            seed: 0,
        }
    }
}

impl SacConfig {
    pub fn validate(&self) -> Result<()> {
        if self.hidden.is_empty() || self.hidden.contains(&0) {
            return Err(Error::InvalidConfig(
                "sac hidden layer sizes must be positive".into(),
            ));
        }
        if !(self.alpha > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "sac.alpha must be positive, got {}",
                self.alpha
            )));
        }
        if !(self.rho > 0.0 && self.rho < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "sac.rho must lie in (0, 1), got {}",
                self.rho
            )));
        }
        if self.batch == 0 {
            return Err(Error::InvalidConfig("sac.batch must be positive".into()));
        }
        if !(self.actor_lr > 0.0 && self.critic_lr > 0.0) {
            return Err(Error::InvalidConfig("sac step sizes must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.gamma) {
            return Err(Error::InvalidDiscount(self.gamma));
        }
        Ok(())
    }
}

/// The full agent state: actor, twin critics, their targets, and optimizers.
pub struct SacAgent {
    cfg: SacConfig,
    embed: EmbeddingConfig,
    width: usize,
    actor: Mlp,
    critics: [Mlp; 2],
    targets: [Mlp; 2],
    actor_opt: Adam,
    critic_opts: [Adam; 2],
}

impl SacAgent {
    pub fn new(env_cfg: &EnvConfig, cfg: &SacConfig, embed: &EmbeddingConfig) -> Result<SacAgent> {
        cfg.validate()?;
        env_cfg.validate()?;
        let state_dim = state_features(embed, 0, 0, cfg.time_aware)?.len();
        let sa_dim = state_action_features(embed, 0, 0, 0, cfg.time_aware)?.len();
        let mut actor_dims = vec![state_dim];
        actor_dims.extend_from_slice(&cfg.hidden);
        actor_dims.push(ACTIONS.len());
        let mut critic_dims = vec![sa_dim];
        critic_dims.extend_from_slice(&cfg.hidden);
        critic_dims.push(1);

        let actor = Mlp::new(&actor_dims, cfg.seed);
        let critics = [
            Mlp::new(&critic_dims, cfg.seed.wrapping_add(1)),
            Mlp::new(&critic_dims, cfg.seed.wrapping_add(2)),
        ];
        // Target parameters start equal to the mains.
        let targets = [critics[0].clone(), critics[1].clone()];
        let actor_opt = Adam::new(&actor, cfg.actor_lr);
        let critic_opts = [
            Adam::new(&critics[0], cfg.critic_lr),
            Adam::new(&critics[1], cfg.critic_lr),
        ];
        Ok(SacAgent {
            cfg: cfg.clone(),
            embed: embed.clone(),
            width: env_cfg.width,
            actor,
            critics,
            targets,
            actor_opt,
            critic_opts,
        })
    }

    /// Masked categorical distribution over the move alphabet; illegal moves
    /// carry exactly zero probability.
    pub fn policy_probs(&self, position: usize, tick: u64) -> Result<[f64; 3]> {
        let x = state_features(&self.embed, position, tick, self.cfg.time_aware)?;
        let logits = self.actor.forward_one(&x);
        Ok(masked_softmax(&logits, position, self.width))
    }

    /// Most likely legal move; ties keep the first in -1, 0, +1 order.
    pub fn mode_action(&self, position: usize, tick: u64) -> Result<i32> {
        let probs = self.policy_probs(position, tick)?;
        let mut best = f64::NEG_INFINITY;
        let mut best_action = 0;
        for (i, a) in ACTIONS.iter().enumerate() {
            if probs[i] > best {
                best = probs[i];
                best_action = *a;
            }
        }
        Ok(best_action)
    }

    pub fn sample_action(&self, position: usize, tick: u64, rng: &mut ChaCha8Rng) -> Result<i32> {
        let probs = self.policy_probs(position, tick)?;
        Ok(ACTIONS[sample_index(&probs, rng)])
    }

    /// One gradient step on both critics and the actor from a replay batch,
    /// then a polyak update of the targets.
    pub fn update(&mut self, batch: &[Transition], rng: &mut ChaCha8Rng) -> Result<()> {
        let b = batch.len();
        let gamma = self.cfg.gamma;
        let alpha = self.cfg.alpha;

        // Critic targets from the next states.
        let mut ys = Array1::zeros(b);
        for (i, t) in batch.iter().enumerate() {
            let next_tick = t.tick + 1;
            let probs = self.policy_probs(t.next_position, next_tick)?;
            let future = if self.cfg.target_expectation {
                let mut acc = 0.0;
                for (k, &a) in ACTIONS.iter().enumerate() {
                    if probs[k] == 0.0 {
                        continue;
                    }
                    let q = self.target_q_min(t.next_position, a, next_tick)?;
                    acc += probs[k] * (q - alpha * probs[k].max(PROB_FLOOR).ln());
                }
                acc
            } else {
                let k = sample_index(&probs, rng);
                let q = self.target_q_min(t.next_position, ACTIONS[k], next_tick)?;
                q - alpha * probs[k].max(PROB_FLOOR).ln()
            };
            ys[i] = t.reward + gamma * future;
        }

        // Twin critics descend the squared error against the shared targets.
        let mut sa = Array2::zeros((b, self.critic_input_dim()));
        for (i, t) in batch.iter().enumerate() {
            let x =
                state_action_features(&self.embed, t.position, t.action, t.tick, self.cfg.time_aware)?;
            sa.row_mut(i)
                .assign(&ndarray::ArrayView1::from_shape(x.len(), &x).unwrap());
        }
        for c in 0..2 {
            let acts = self.critics[c].forward(sa.view());
            let out = acts.last().unwrap();
            let mut d_out = Array2::zeros(out.raw_dim());
            for i in 0..b {
                d_out[[i, 0]] = 2.0 * (out[[i, 0]] - ys[i]) / b as f64;
            }
            let grads = self.critics[c].backward(&acts, d_out);
            self.critic_opts[c].update(&mut self.critics[c], &grads);
        }

        // Actor ascends the entropy-regularized min target-critic value.
        let states: Vec<(usize, u64)> = batch.iter().map(|t| (t.position, t.tick)).collect();
        let mut q_min = Array2::zeros((b, ACTIONS.len()));
        for (i, &(p, tick)) in states.iter().enumerate() {
            for (k, &a) in ACTIONS.iter().enumerate() {
                if legal(p, a, self.width) {
                    q_min[[i, k]] = self.target_q_min(p, a, tick)?;
                }
            }
        }
        self.actor_step(&states, &q_min)?;

        self.polyak_update();
        Ok(())
    }

    /// Gradient-ascent step on
    /// `mean_i sum_a pi(a|s_i) (q_min[i,a] - alpha * log pi(a|s_i))`,
    /// exact over the discrete action set.
    pub(crate) fn actor_step(&mut self, states: &[(usize, u64)], q_min: &Array2<f64>) -> Result<()> {
        let b = states.len();
        let mut xs = Array2::zeros((b, self.actor.input_dim()));
        for (i, &(p, tick)) in states.iter().enumerate() {
            let x = state_features(&self.embed, p, tick, self.cfg.time_aware)?;
            xs.row_mut(i)
                .assign(&ndarray::ArrayView1::from_shape(x.len(), &x).unwrap());
        }
        let acts = self.actor.forward(xs.view());
        let logits = acts.last().unwrap();
        let alpha = self.cfg.alpha;
        let mut d_out = Array2::zeros(logits.raw_dim());
        for (i, &(p, _)) in states.iter().enumerate() {
            let row: Vec<f64> = logits.row(i).to_vec();
            let probs = masked_softmax(&row, p, self.width);
            let mut objective = 0.0;
            let mut adv = [0.0; 3];
            for k in 0..ACTIONS.len() {
                if probs[k] == 0.0 {
                    continue;
                }
                adv[k] = q_min[[i, k]] - alpha * probs[k].max(PROB_FLOOR).ln();
                objective += probs[k] * adv[k];
            }
            for k in 0..ACTIONS.len() {
                if probs[k] == 0.0 {
                    continue;
                }
                // Ascent on the objective: negate for the descent-shaped
                // optimizer, averaged over the batch.
                d_out[[i, k]] = -(probs[k] * (adv[k] - objective)) / b as f64;
            }
        }
        let grads = self.actor.backward(&acts, d_out);
        self.actor_opt.update(&mut self.actor, &grads);
        Ok(())
    }

    fn target_q_min(&self, position: usize, action: i32, tick: u64) -> Result<f64> {
        let x = state_action_features(&self.embed, position, action, tick, self.cfg.time_aware)?;
        let q0 = self.targets[0].predict(&x);
        let q1 = self.targets[1].predict(&x);
        Ok(q0.min(q1))
    }

    fn critic_input_dim(&self) -> usize {
        self.critics[0].input_dim()
    }

    /// `target <- rho * target + (1 - rho) * main`, elementwise.
    pub fn polyak_update(&mut self) {
        let rho = self.cfg.rho;
        for c in 0..2 {
            for (t, m) in self.targets[c]
                .layers
                .iter_mut()
                .zip(self.critics[c].layers.iter())
            {
                t.w.zip_mut_with(&m.w, |t, m| *t = rho * *t + (1.0 - rho) * m);
                t.b.zip_mut_with(&m.b, |t, m| *t = rho * *t + (1.0 - rho) * m);
            }
        }
    }

    pub fn target_params(&self) -> Vec<f64> {
        let mut v = self.targets[0].params();
        v.extend(self.targets[1].params());
        v
    }
}

fn legal(position: usize, action: i32, width: usize) -> bool {
    let t = position as i64 + action as i64;
    t >= 0 && (t as usize) < width
}

fn masked_softmax(logits: &[f64], position: usize, width: usize) -> [f64; 3] {
    let mut out = [0.0; 3];
    let mut max = f64::NEG_INFINITY;
    for (k, &a) in ACTIONS.iter().enumerate() {
        if legal(position, a, width) && logits[k] > max {
            max = logits[k];
        }
    }
    let mut total = 0.0;
    for (k, &a) in ACTIONS.iter().enumerate() {
        if legal(position, a, width) {
            out[k] = (logits[k] - max).exp();
            total += out[k];
        }
    }
    for v in &mut out {
        *v /= total;
    }
    out
}

fn sample_index(probs: &[f64; 3], rng: &mut ChaCha8Rng) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    let mut last = 0;
    for (k, p) in probs.iter().enumerate() {
        if *p == 0.0 {
            continue;
        }
        acc += p;
        last = k;
        if u < acc {
            return k;
        }
    }
    last
}

/// The online loop: sample from the policy, store, and update once the
/// buffer holds a batch.
pub fn run_online_sac(
    env_cfg: &EnvConfig,
    cfg: &SacConfig,
    embed_cfg: &EmbeddingConfig,
    total_steps: usize,
    eval: &EvalPlan,
    rng: &mut ChaCha8Rng,
) -> Result<RunOutput> {
    if total_steps <= cfg.batch {
        return Err(Error::InvalidConfig(format!(
            "sac needs more steps than one batch ({} <= {})",
            total_steps, cfg.batch
        )));
    }
    let mut agent = SacAgent::new(env_cfg, cfg, embed_cfg)?;
    let mut trajectory = Trajectory::new(env_cfg.start_state());
    let mut buffer: Vec<Transition> = Vec::with_capacity(total_steps);
    let mut scores = Vec::with_capacity(total_steps);
    let mut evals = Vec::new();
    let mut updated = false;

    for _ in 0..total_steps {
        let state = trajectory.end_state();
        let action = agent.sample_action(state.position, state.tick, rng)?;
        let transition = env::step(env_cfg, state, action)?;
        buffer.push(transition);
        trajectory.push(transition);
        scores.push(None);

        if buffer.len() >= cfg.batch {
            let batch: Vec<Transition> = (0..cfg.batch)
                .map(|_| buffer[rng.random_range(0..buffer.len())])
                .collect();
            agent.update(&batch, rng)?;
            updated = true;
        }

        let tick_done = state.tick + 1;
        if updated && eval.every > 0 && tick_done % eval.every as u64 == 0 {
            evals.push(mode_rollout(
                &agent,
                trajectory.end_state(),
                eval.window,
            )?);
        }
    }

    Ok(RunOutput {
        trajectory,
        scores,
        evals,
        warmup_len: 0,
    })
}

fn mode_rollout(agent: &SacAgent, state: EnvState, window: usize) -> Result<EvalRollout> {
    let mut positions = Vec::with_capacity(window);
    let mut cur = state;
    for _ in 0..window {
        let a = agent.mode_action(cur.position, cur.tick)?;
        cur = EnvState {
            position: (cur.position as i64 + a as i64) as usize,
            tick: cur.tick + 1,
        };
        positions.push(cur.position);
    }
    Ok(EvalRollout { state, positions })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle;
    use rand::SeedableRng;

    fn toy_env() -> EnvConfig {
        EnvConfig {
            width: 2,
            patch_a: 0,
            patch_b: 1,
            period: 4,
            tau: 1.0,
            gamma: 0.9,
        }
    }

    fn toy_embed() -> EmbeddingConfig {
        EmbeddingConfig {
            width: 2,
            time_dim: 10,
            ..EmbeddingConfig::default()
        }
    }

    fn small_cfg() -> SacConfig {
        SacConfig {
            hidden: vec![32, 32],
            ..SacConfig::default()
        }
    }

    #[test]
    fn masked_softmax_zeroes_illegal_moves() {
        let probs = masked_softmax(&[0.3, -0.2, 1.0], 0, 7);
        assert_eq!(probs[0], 0.0);
        assert!((probs[1] + probs[2] - 1.0).abs() < 1e-12);
        let probs = masked_softmax(&[0.3, -0.2, 1.0], 6, 7);
        assert_eq!(probs[2], 0.0);
        let probs = masked_softmax(&[5.0, 5.0, 5.0], 3, 7);
        for p in probs {
            assert!((p - 1.0 / 3.0).abs() < 1e-12);
        }
    }

    #[test]
    fn polyak_with_rho_one_freezes_targets() {
        let env_cfg = toy_env();
        let mut cfg = small_cfg();
        cfg.rho = 1.0 - f64::EPSILON; // validate() rejects exactly 1.0
        let mut agent = SacAgent::new(&env_cfg, &cfg, &toy_embed()).unwrap();
        agent.cfg.rho = 1.0;
        let before = agent.target_params();
        // Move the mains far away, then polyak.
        for c in 0..2 {
            for l in &mut agent.critics[c].layers {
                l.w.mapv_inplace(|v| v + 1.0);
            }
        }
        agent.polyak_update();
        assert_eq!(agent.target_params(), before);
    }

    #[test]
    fn polyak_is_the_stated_convex_combination() {
        let env_cfg = toy_env();
        let cfg = small_cfg();
        let mut agent = SacAgent::new(&env_cfg, &cfg, &toy_embed()).unwrap();
        let target_before = agent.target_params();
        for c in 0..2 {
            for l in &mut agent.critics[c].layers {
                l.w.mapv_inplace(|v| v + 2.0);
                l.b.mapv_inplace(|v| v - 1.0);
            }
        }
        let mains: Vec<f64> = {
            let mut v = agent.critics[0].params();
            v.extend(agent.critics[1].params());
            v
        };
        agent.polyak_update();
        for ((t, m), t0) in agent.target_params().iter().zip(&mains).zip(&target_before) {
            let expected = cfg.rho * t0 + (1.0 - cfg.rho) * m;
            assert!((t - expected).abs() < 1e-12);
        }
    }

    #[test]
    fn time_agnostic_policy_is_time_invariant() {
        let env_cfg = EnvConfig::default();
        let cfg = SacConfig {
            time_aware: false,
            hidden: vec![16],
            ..SacConfig::default()
        };
        let agent = SacAgent::new(&env_cfg, &cfg, &EmbeddingConfig::default()).unwrap();
        for p in 0..env_cfg.width {
            let a = agent.policy_probs(p, 3).unwrap();
            let b = agent.policy_probs(p, 8_888).unwrap();
            assert_eq!(a, b);
        }
    }

    /// With the temperature pushed toward zero and the critics pinned to the
    /// true Q-values, actor ascent alone recovers the value-iteration policy
    /// on a two-cell track.
    #[test]
    fn near_zero_temperature_recovers_the_oracle_policy() {
        let env_cfg = toy_env();
        let embed_cfg = toy_embed();
        let table = oracle::solve(&env_cfg, 0.9, 1e-12).unwrap();
        let cfg = SacConfig {
            hidden: vec![32, 32],
            alpha: 1e-6,
            actor_lr: 3e-3,
            time_aware: true,
            ..SacConfig::default()
        };
        let mut agent = SacAgent::new(&env_cfg, &cfg, &embed_cfg).unwrap();

        let true_q = |p: usize, a: i32, t: u64| -> f64 {
            let q = (p as i64 + a as i64) as usize;
            env::reward_at(&env_cfg, t + 1, q) + 0.9 * table.value(q, t + 1)
        };
        let states: Vec<(usize, u64)> = (0..2usize)
            .flat_map(|p| (0..40u64).map(move |t| (p, t)))
            .collect();
        let mut q_min = Array2::zeros((states.len(), ACTIONS.len()));
        for (i, &(p, t)) in states.iter().enumerate() {
            for (k, &a) in ACTIONS.iter().enumerate() {
                if legal(p, a, env_cfg.width) {
                    q_min[[i, k]] = true_q(p, a, t);
                }
            }
        }
        for _ in 0..600 {
            agent.actor_step(&states, &q_min).unwrap();
        }
        for p in 0..2usize {
            for phi in 0..4u64 {
                assert_eq!(
                    agent.mode_action(p, phi).unwrap(),
                    table.action(p, phi),
                    "state ({p}, {phi})"
                );
            }
        }
    }

    #[test]
    fn online_run_is_deterministic_and_legal() {
        let env_cfg = EnvConfig::default();
        let cfg = SacConfig {
            hidden: vec![16, 16],
            batch: 16,
            ..SacConfig::default()
        };
        let embed_cfg = EmbeddingConfig::default();
        let eval = EvalPlan { every: 40, window: 5 };
        let mut r1 = ChaCha8Rng::seed_from_u64(5);
        let a = run_online_sac(&env_cfg, &cfg, &embed_cfg, 120, &eval, &mut r1).unwrap();
        let mut r2 = ChaCha8Rng::seed_from_u64(5);
        let b = run_online_sac(&env_cfg, &cfg, &embed_cfg, 120, &eval, &mut r2).unwrap();
        assert_eq!(a.trajectory, b.trajectory);
        for t in &a.trajectory.transitions {
            assert!(t.next_position < env_cfg.width);
        }
        assert!(!a.evals.is_empty());
    }
}
