//! Receding-horizon foraging planner: warm-start pretraining of a next-reward
//! regressor and a discounted-future-return regressor, exhaustive legal-path
//! enumeration, combined lookahead + terminal scoring, first-step execution,
//! and full-history refits after every online step.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::embed::{embed, EmbeddingConfig};
use crate::env::{self, EnvConfig, EnvState, Trajectory};
use crate::error::{Error, Result};
use crate::learners::{self, Dataset, RegressorSpec, TrainedRegressor};

/// Which score components drive path selection.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Variant {
    /// Lookahead sum plus discounted terminal value.
    Full,
    /// Lookahead sum only.
    InstantaneousOnly,
    /// Discounted terminal value only.
    TerminalOnly,
}

/// Whether the behavior policy is the planner itself or uniform exploration.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Online,
    Offline,
}

/// Moves the planner may consider at each depth, always enumerated in
/// ascending order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ActionSet {
    /// Step left, stay, step right.
    Three,
    /// Step left or right only.
    Two,
}

impl ActionSet {
    pub fn actions(&self) -> &'static [i32] {
        match self {
            ActionSet::Three => &[-1, 0, 1],
            ActionSet::Two => &[-1, 1],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlannerConfig {
    pub horizon: usize,
    pub gamma: f64,
    pub warmup_steps: usize,
    pub variant: Variant,
    pub mode: Mode,
    pub refit_interval: usize,
    /// Minimum realized future steps a row needs before it enters the
    /// cumulative training set; 0 derives the value from `gamma` so that
    /// truncated labels sit within 1% of their untruncated value.
    pub label_horizon: usize,
    pub action_set: ActionSet,
}

impl Default for PlannerConfig {
    fn default() -> Self {
        PlannerConfig {
            horizon: 6,
            gamma: 0.9,
            warmup_steps: 200,
            variant: Variant::Full,
            mode: Mode::Online,
            refit_interval: 1,
            label_horizon: 0,
            action_set: ActionSet::Three,
        }
    }
}

impl PlannerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.horizon == 0 {
            return Err(Error::InvalidConfig("planner horizon must be >= 1".into()));
        }
        if !(0.0..1.0).contains(&self.gamma) {
            return Err(Error::InvalidDiscount(self.gamma));
        }
        if self.warmup_steps < 2 {
            return Err(Error::InvalidConfig(
                "planner warmup needs at least 2 steps".into(),
            ));
        }
        if self.refit_interval == 0 {
            return Err(Error::InvalidConfig("refit interval must be >= 1".into()));
        }
        Ok(())
    }

    /// Rows need this many realized future steps before their discounted
    /// label is trusted for training.
    pub fn effective_label_horizon(&self) -> usize {
        if self.label_horizon > 0 {
            return self.label_horizon;
        }
        derived_label_horizon(self.gamma)
    }
}

/// Smallest m with gamma^m / (1 - gamma) <= 0.01, i.e. the point where the
/// truncated tail of a discounted label is within 1% of a unit reward stream.
pub fn derived_label_horizon(gamma: f64) -> usize {
    if gamma <= 0.0 {
        return 1;
    }
    let m = ((0.01 * (1.0 - gamma)).ln() / gamma.ln()).ceil();
    (m as usize).max(1)
}

/// Anything that can score a (position, tick) pair, used for both the
/// next-reward and future-return roles during path scoring.
pub trait StateValue {
    fn value_at(&self, position: usize, tick: u64) -> Result<f64>;
}

impl<F> StateValue for F
where
    F: Fn(usize, u64) -> f64,
{
    fn value_at(&self, position: usize, tick: u64) -> Result<f64> {
        Ok(self(position, tick))
    }
}

/// A trained regressor composed with the feature embedding.
pub struct EmbeddedModel<'a> {
    pub embed: &'a EmbeddingConfig,
    pub model: &'a TrainedRegressor,
}

impl StateValue for EmbeddedModel<'_> {
    fn value_at(&self, position: usize, tick: u64) -> Result<f64> {
        let x = embed(self.embed, position, tick)?;
        self.model.predict(&x)
    }
}

/// A candidate path and its score.
#[derive(Debug, Clone, PartialEq)]
pub struct PathScore {
    pub path: Vec<usize>,
    pub score: f64,
}

impl PathScore {
    /// First step of the path: the position the agent would move to.
    pub fn next_position(&self) -> usize {
        self.path[0]
    }
}

/// Labels every index with the discounted sum of the strictly-later rewards:
/// `label[s] = sum_{t > s} gamma^(t-s-1) * rewards[t]`; the last label is 0.
pub fn discounted_labels(rewards: &[f64], gamma: f64) -> Vec<f64> {
    let mut labels = vec![0.0; rewards.len()];
    let mut acc = 0.0;
    for s in (0..rewards.len().saturating_sub(1)).rev() {
        acc = rewards[s + 1] + gamma * acc;
        labels[s] = acc;
    }
    labels
}

/// The two training sets carved out of one visited history: next-reward rows
/// for every observed step and discounted-future-return rows for the steps
/// with enough realized future.
#[derive(Debug, Clone)]
pub struct LabeledHistory {
    pub instantaneous: Dataset,
    pub cumulative: Dataset,
}

/// Arrival states and rewards of every executed transition, the planner's raw
/// memory between refits.
#[derive(Debug, Clone, Default)]
struct History {
    states: Vec<(usize, u64)>,
    rewards: Vec<f64>,
}

impl History {
    fn absorb(&mut self, traj: &Trajectory) {
        for t in &traj.transitions {
            self.states.push((t.next_position, t.tick + 1));
            self.rewards.push(t.reward);
        }
    }

    fn push(&mut self, t: &crate::env::Transition) {
        self.states.push((t.next_position, t.tick + 1));
        self.rewards.push(t.reward);
    }

    fn labeled(
        &self,
        embed_cfg: &EmbeddingConfig,
        gamma: f64,
        label_horizon: usize,
    ) -> Result<LabeledHistory> {
        let n = self.states.len();
        let mut instantaneous = Dataset::new(embed_cfg.dim());
        let mut cumulative = Dataset::new(embed_cfg.dim());
        let labels = discounted_labels(&self.rewards, gamma);
        for (i, &(p, t)) in self.states.iter().enumerate() {
            let x = embed(embed_cfg, p, t)?;
            instantaneous.push(&x, self.rewards[i])?;
            if n - 1 - i >= label_horizon {
                cumulative.push(&x, labels[i])?;
            }
        }
        Ok(LabeledHistory {
            instantaneous,
            cumulative,
        })
    }
}

/// Everything the warm-up phase produces: the exploratory trajectory, its
/// labeled datasets, and the two initial regressors.
pub struct WarmStart {
    pub trajectory: Trajectory,
    pub history: LabeledHistory,
    pub reward_model: TrainedRegressor,
    pub value_model: TrainedRegressor,
}

/// Runs the uniform-random warm-up walk and fits both regressors on it.
pub fn warm_start(
    env_cfg: &EnvConfig,
    cfg: &PlannerConfig,
    embed_cfg: &EmbeddingConfig,
    spec: &RegressorSpec,
    start: EnvState,
    rng: &mut ChaCha8Rng,
) -> Result<WarmStart> {
    cfg.validate()?;
    env_cfg.validate()?;
    let trajectory = env::run_policy(
        env_cfg,
        |p, _| random_action(env_cfg, cfg.action_set, p, rng),
        start,
        cfg.warmup_steps,
    )?;
    let mut history = History::default();
    history.absorb(&trajectory);
    let labeled = history.labeled(embed_cfg, cfg.gamma, cfg.effective_label_horizon())?;
    if labeled.cumulative.is_empty() {
        return Err(Error::InvalidConfig(format!(
            "warmup of {} steps leaves no rows with {} realized future steps",
            cfg.warmup_steps,
            cfg.effective_label_horizon()
        )));
    }
    let reward_model = learners::fit(spec, &labeled.instantaneous)?;
    let value_model = learners::fit(spec, &labeled.cumulative)?;
    Ok(WarmStart {
        trajectory,
        history: labeled,
        reward_model,
        value_model,
    })
}

fn random_action(
    env_cfg: &EnvConfig,
    action_set: ActionSet,
    position: usize,
    rng: &mut ChaCha8Rng,
) -> i32 {
    let legal = env::legal_actions(env_cfg, position).expect("position in range");
    let allowed: Vec<i32> = legal
        .into_iter()
        .filter(|a| action_set.actions().contains(a))
        .collect();
    allowed[rng.random_range(0..allowed.len())]
}

/// Every legal position sequence of length `horizon` starting from a legal
/// successor of `position`, in depth-first order with actions ascending at
/// every depth.
pub fn all_paths(
    env_cfg: &EnvConfig,
    action_set: ActionSet,
    position: usize,
    horizon: usize,
) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut prefix = Vec::with_capacity(horizon);
    extend_paths(env_cfg, action_set, position, horizon, &mut prefix, &mut out);
    out
}

fn extend_paths(
    env_cfg: &EnvConfig,
    action_set: ActionSet,
    position: usize,
    remaining: usize,
    prefix: &mut Vec<usize>,
    out: &mut Vec<Vec<usize>>,
) {
    if remaining == 0 {
        out.push(prefix.clone());
        return;
    }
    for &a in action_set.actions() {
        let target = position as i64 + a as i64;
        if target < 0 || target as usize >= env_cfg.width {
            continue;
        }
        prefix.push(target as usize);
        extend_paths(
            env_cfg,
            action_set,
            target as usize,
            remaining - 1,
            prefix,
            out,
        );
        prefix.pop();
    }
}

/// Scores one candidate path from the state at `tick`. The full score is the
/// discounted lookahead sum plus the discounted terminal value; the ablations
/// keep exactly one of the two parts, so full = instantaneous + terminal holds
/// identically.
pub fn score_path<R: StateValue + ?Sized, V: StateValue + ?Sized>(
    path: &[usize],
    reward_model: &R,
    value_model: &V,
    gamma: f64,
    tick: u64,
    variant: Variant,
) -> Result<f64> {
    let mut lookahead = 0.0;
    let mut weight = 1.0;
    for (h, &p) in path.iter().enumerate() {
        if variant != Variant::TerminalOnly {
            lookahead += weight * reward_model.value_at(p, tick + 1 + h as u64)?;
        }
        weight *= gamma;
    }
    let terminal = if variant == Variant::InstantaneousOnly {
        0.0
    } else {
        let end = *path.last().expect("paths are non-empty");
        weight * value_model.value_at(end, tick + path.len() as u64)?
    };
    Ok(match variant {
        Variant::Full => lookahead + terminal,
        Variant::InstantaneousOnly => lookahead,
        Variant::TerminalOnly => terminal,
    })
}

/// The chosen next position: argmax of the path score over all legal paths,
/// first maximal path in enumeration order on ties.
pub fn select_action<R: StateValue + ?Sized, V: StateValue + ?Sized>(
    env_cfg: &EnvConfig,
    cfg: &PlannerConfig,
    state: EnvState,
    reward_model: &R,
    value_model: &V,
) -> Result<PathScore> {
    let h = cfg.horizon;
    let w = env_cfg.width;
    // Path scores only depend on (position, depth), so the model calls are
    // shared across all candidate paths.
    let mut reward_table = vec![0.0; h * w];
    if cfg.variant != Variant::TerminalOnly {
        for d in 0..h {
            for p in 0..w {
                reward_table[d * w + p] = reward_model.value_at(p, state.tick + 1 + d as u64)?;
            }
        }
    }
    let mut value_table = vec![0.0; w];
    if cfg.variant != Variant::InstantaneousOnly {
        for p in 0..w {
            value_table[p] = value_model.value_at(p, state.tick + h as u64)?;
        }
    }

    let paths = all_paths(env_cfg, cfg.action_set, state.position, h);
    let mut best: Option<PathScore> = None;
    for path in paths {
        let mut lookahead = 0.0;
        let mut weight = 1.0;
        for (d, &p) in path.iter().enumerate() {
            if cfg.variant != Variant::TerminalOnly {
                lookahead += weight * reward_table[d * w + p];
            }
            weight *= cfg.gamma;
        }
        let score = match cfg.variant {
            Variant::Full => lookahead + weight * value_table[*path.last().unwrap()],
            Variant::InstantaneousOnly => lookahead,
            Variant::TerminalOnly => weight * value_table[*path.last().unwrap()],
        };
        if best.as_ref().map_or(true, |b| score > b.score) {
            best = Some(PathScore { path, score });
        }
    }
    best.ok_or_else(|| Error::InvalidConfig("no legal path from the current state".into()))
}

/// Evaluation cadence for regret snapshots; `every = 0` disables them.
#[derive(Debug, Clone, Copy)]
pub struct EvalPlan {
    pub every: usize,
    pub window: usize,
}

impl EvalPlan {
    pub fn none() -> Self {
        EvalPlan { every: 0, window: 0 }
    }
}

/// A frozen-policy rollout recorded during a run: the state it started from
/// and the positions the policy would visit over the following window.
#[derive(Debug, Clone)]
pub struct EvalRollout {
    pub state: EnvState,
    pub positions: Vec<usize>,
}

/// A finished run: the executed trajectory, the chosen-path score per step
/// (None for warm-up and exploratory steps), and the recorded policy
/// rollouts.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub trajectory: Trajectory,
    pub scores: Vec<Option<f64>>,
    pub evals: Vec<EvalRollout>,
    pub warmup_len: usize,
}

/// Warm-starts and then runs the planner for `online_steps` steps. Online
/// mode executes the planner's choice; offline mode explores uniformly while
/// the same refits happen, leaving the greedy policy to the recorded eval
/// rollouts.
pub fn run(
    env_cfg: &EnvConfig,
    cfg: &PlannerConfig,
    embed_cfg: &EmbeddingConfig,
    spec: &RegressorSpec,
    online_steps: usize,
    eval: &EvalPlan,
    rng: &mut ChaCha8Rng,
) -> Result<RunOutput> {
    let start = env_cfg.start_state();
    let warm = warm_start(env_cfg, cfg, embed_cfg, spec, start, rng)?;
    let mut trajectory = warm.trajectory;
    let mut scores: Vec<Option<f64>> = vec![None; trajectory.len()];
    let mut reward_model = warm.reward_model;
    let mut value_model = warm.value_model;
    let mut history = History::default();
    history.absorb(&trajectory);

    let mut evals = Vec::new();
    let label_horizon = cfg.effective_label_horizon();

    if eval.every > 0 {
        evals.push(greedy_rollout(
            env_cfg,
            cfg,
            embed_cfg,
            &reward_model,
            &value_model,
            trajectory.end_state(),
            eval.window,
        )?);
    }

    for k in 1..=online_steps {
        let state = trajectory.end_state();
        let (next_position, score) = match cfg.mode {
            Mode::Online => {
                let chosen = select_action(
                    env_cfg,
                    cfg,
                    state,
                    &EmbeddedModel {
                        embed: embed_cfg,
                        model: &reward_model,
                    },
                    &EmbeddedModel {
                        embed: embed_cfg,
                        model: &value_model,
                    },
                )?;
                (chosen.next_position(), Some(chosen.score))
            }
            Mode::Offline => {
                let a = random_action(env_cfg, cfg.action_set, state.position, rng);
                ((state.position as i64 + a as i64) as usize, None)
            }
        };
        let action = next_position as i32 - state.position as i32;
        let transition = env::step(env_cfg, state, action)?;
        history.push(&transition);
        trajectory.push(transition);
        scores.push(score);

        if k % cfg.refit_interval == 0 {
            let labeled = history.labeled(embed_cfg, cfg.gamma, label_horizon)?;
            reward_model = learners::refit_all(spec, &labeled.instantaneous)?;
            value_model = learners::refit_all(spec, &labeled.cumulative)?;
        }

        if eval.every > 0 && k % eval.every == 0 {
            evals.push(greedy_rollout(
                env_cfg,
                cfg,
                embed_cfg,
                &reward_model,
                &value_model,
                trajectory.end_state(),
                eval.window,
            )?);
        }
    }

    Ok(RunOutput {
        trajectory,
        scores,
        evals,
        warmup_len: cfg.warmup_steps,
    })
}

/// Rolls the frozen greedy policy forward from `state` for `window` steps,
/// recording only the positions it would visit.
fn greedy_rollout(
    env_cfg: &EnvConfig,
    cfg: &PlannerConfig,
    embed_cfg: &EmbeddingConfig,
    reward_model: &TrainedRegressor,
    value_model: &TrainedRegressor,
    state: EnvState,
    window: usize,
) -> Result<EvalRollout> {
    let mut positions = Vec::with_capacity(window);
    let mut cur = state;
    for _ in 0..window {
        let chosen = select_action(
            env_cfg,
            cfg,
            cur,
            &EmbeddedModel {
                embed: embed_cfg,
                model: reward_model,
            },
            &EmbeddedModel {
                embed: embed_cfg,
                model: value_model,
            },
        )?;
        cur = EnvState {
            position: chosen.next_position(),
            tick: cur.tick + 1,
        };
        positions.push(cur.position);
    }
    Ok(EvalRollout { state, positions })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::learners::ForestParams;
    use crate::oracle;
    use approx::assert_abs_diff_eq;
    use rand::SeedableRng;

    fn env_defaults() -> EnvConfig {
        EnvConfig::default()
    }

    fn planner_defaults() -> PlannerConfig {
        PlannerConfig::default()
    }

    fn small_forest_spec() -> RegressorSpec {
        RegressorSpec::forest(
            ForestParams {
                n_trees: 20,
                ..ForestParams::default()
            },
            0,
        )
    }

    #[test]
    fn discounted_labels_match_the_worked_example() {
        assert_eq!(discounted_labels(&[1.0, 1.0, 1.0], 0.5), vec![1.5, 1.0, 0.0]);
        assert_eq!(discounted_labels(&[0.0; 5], 0.9), vec![0.0; 5]);
        assert_eq!(discounted_labels(&[], 0.9), Vec::<f64>::new());
    }

    #[test]
    fn discounted_labels_match_a_double_loop() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let rewards: Vec<f64> = (0..300).map(|_| rng.random::<f64>()).collect();
        let gamma = 0.9;
        let fast = discounted_labels(&rewards, gamma);
        for s in 0..rewards.len() {
            let mut weight = 1.0;
            let mut label = 0.0;
            for r in &rewards[s + 1..] {
                label += weight * r;
                weight *= gamma;
            }
            assert_abs_diff_eq!(fast[s], label, epsilon = 1e-12);
        }
    }

    #[test]
    fn label_horizon_derivation() {
        assert_eq!(derived_label_horizon(0.9), 66);
        assert_eq!(derived_label_horizon(0.0), 1);
        assert_eq!(derived_label_horizon(0.5), 8);
    }

    #[test]
    fn warm_start_row_counts_and_determinism() {
        let env_cfg = env_defaults();
        let cfg = planner_defaults();
        let embed_cfg = EmbeddingConfig::default();
        let spec = small_forest_spec();
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let warm = warm_start(
            &env_cfg,
            &cfg,
            &embed_cfg,
            &spec,
            env_cfg.start_state(),
            &mut rng,
        )
        .unwrap();
        assert_eq!(warm.history.instantaneous.len(), 200);
        // 66 youngest rows lack enough realized future for a trusted label.
        assert_eq!(warm.history.cumulative.len(), 200 - 66);

        let mut rng2 = ChaCha8Rng::seed_from_u64(77);
        let again = warm_start(
            &env_cfg,
            &cfg,
            &embed_cfg,
            &spec,
            env_cfg.start_state(),
            &mut rng2,
        )
        .unwrap();
        assert_eq!(warm.trajectory, again.trajectory);
        let probe = embed(&embed_cfg, 3, 123).unwrap();
        assert_eq!(
            warm.reward_model.predict(&probe).unwrap(),
            again.reward_model.predict(&probe).unwrap()
        );
    }

    #[test]
    fn zero_gamma_cumulative_labels_are_next_rewards() {
        let env_cfg = env_defaults();
        let cfg = PlannerConfig {
            gamma: 0.0,
            warmup_steps: 50,
            ..planner_defaults()
        };
        let embed_cfg = EmbeddingConfig::default();
        let spec = small_forest_spec();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let warm = warm_start(
            &env_cfg,
            &cfg,
            &embed_cfg,
            &spec,
            env_cfg.start_state(),
            &mut rng,
        )
        .unwrap();
        let inst = &warm.history.instantaneous;
        let cum = &warm.history.cumulative;
        assert_eq!(cum.len(), inst.len() - 1);
        for i in 0..cum.len() {
            assert_eq!(cum.target(i), inst.target(i + 1));
        }
    }

    #[test]
    fn all_paths_counts() {
        let wide = EnvConfig {
            width: 30,
            patch_a: 2,
            patch_b: 5,
            ..env_defaults()
        };
        assert_eq!(all_paths(&wide, ActionSet::Three, 15, 6).len(), 729);
        assert_eq!(all_paths(&wide, ActionSet::Two, 15, 6).len(), 64);
    }

    #[test]
    fn all_paths_boundary_enumeration() {
        let env_cfg = env_defaults();
        let paths = all_paths(&env_cfg, ActionSet::Three, 0, 2);
        let expected: Vec<Vec<usize>> = vec![
            vec![0, 0],
            vec![0, 1],
            vec![1, 0],
            vec![1, 1],
            vec![1, 2],
        ];
        assert_eq!(paths, expected);
    }

    #[test]
    fn score_path_algebra() {
        let zero = |_: usize, _: u64| 0.0;
        let one = |_: usize, _: u64| 1.0;
        let c = |_: usize, _: u64| 2.5;
        let path = vec![3, 3, 3, 3, 3, 3];

        let s = score_path(&path, &zero, &c, 0.9, 0, Variant::Full).unwrap();
        assert_abs_diff_eq!(s, 0.9f64.powi(6) * 2.5, epsilon = 1e-12);

        let s = score_path(&path, &one, &zero, 0.9, 0, Variant::Full).unwrap();
        assert_abs_diff_eq!(s, 4.68559, epsilon = 1e-5);
    }

    #[test]
    fn score_decomposes_exactly() {
        let r = |p: usize, t: u64| ((p as f64 + 1.3) * (t % 13) as f64).sin();
        let v = |p: usize, t: u64| ((p as f64 - 0.7) * (t % 7) as f64).cos();
        let env_cfg = env_defaults();
        for start in 0..env_cfg.width {
            for path in all_paths(&env_cfg, ActionSet::Three, start, 4) {
                let full = score_path(&path, &r, &v, 0.9, 31, Variant::Full).unwrap();
                let inst =
                    score_path(&path, &r, &v, 0.9, 31, Variant::InstantaneousOnly).unwrap();
                let term = score_path(&path, &r, &v, 0.9, 31, Variant::TerminalOnly).unwrap();
                assert_eq!(full, inst + term);
            }
        }
    }

    #[test]
    fn oracle_models_score_like_env_rollouts() {
        let env_cfg = env_defaults();
        let table = oracle::solve(&env_cfg, 0.9, 1e-12).unwrap();
        let reward = |p: usize, t: u64| env::reward_at(&env_cfg, t, p);
        let value = |p: usize, t: u64| table.value(p, t);
        let state = EnvState {
            position: 3,
            tick: 12,
        };
        for path in all_paths(&env_cfg, ActionSet::Three, state.position, 6) {
            let score =
                score_path(&path, &reward, &value, 0.9, state.tick, Variant::Full).unwrap();
            // Re-derive the same quantity by stepping the real environment.
            let mut expected = 0.0;
            let mut weight = 1.0;
            let mut cur = state;
            for &p in &path {
                let action = p as i32 - cur.position as i32;
                let t = env::step(&env_cfg, cur, action).unwrap();
                expected += weight * t.reward;
                weight *= 0.9;
                cur = t.next_state();
            }
            expected += weight * table.value(cur.position, cur.tick);
            assert_abs_diff_eq!(score, expected, epsilon = 1e-6);
        }
    }

    #[test]
    fn select_action_agrees_with_the_oracle_everywhere() {
        let env_cfg = env_defaults();
        let cfg = planner_defaults();
        let table = oracle::solve(&env_cfg, cfg.gamma, 1e-13).unwrap();
        let reward = |p: usize, t: u64| env::reward_at(&env_cfg, t, p);
        let value = |p: usize, t: u64| table.value(p, t);
        for p in 0..env_cfg.width {
            for phi in 0..env_cfg.period {
                let state = EnvState {
                    position: p,
                    tick: phi,
                };
                let chosen = select_action(&env_cfg, &cfg, state, &reward, &value).unwrap();
                let oracle_next = (p as i64 + table.action(p, phi) as i64) as usize;
                assert_eq!(
                    chosen.next_position(), oracle_next,
                    "state ({p}, {phi}) disagrees"
                );
            }
        }
    }

    #[test]
    fn select_action_moves_toward_a_flagged_cell() {
        let env_cfg = env_defaults();
        let cfg = planner_defaults();
        let target = env_cfg.patch_a;
        let reward = move |p: usize, _: u64| if p == target { 1.0 } else { 0.0 };
        let zero = |_: usize, _: u64| 0.0;
        let state = EnvState {
            position: target + 1,
            tick: 0,
        };
        let chosen = select_action(&env_cfg, &cfg, state, &reward, &zero).unwrap();
        assert_eq!(chosen.next_position(), target);
    }

    #[test]
    fn all_zero_models_fall_back_to_the_first_path() {
        let env_cfg = env_defaults();
        let cfg = planner_defaults();
        let zero = |_: usize, _: u64| 0.0;
        let interior = select_action(
            &env_cfg,
            &cfg,
            EnvState {
                position: 3,
                tick: 0,
            },
            &zero,
            &zero,
        )
        .unwrap();
        assert_eq!(interior.next_position(), 2);
        let left_edge = select_action(
            &env_cfg,
            &cfg,
            EnvState {
                position: 0,
                tick: 0,
            },
            &zero,
            &zero,
        )
        .unwrap();
        assert_eq!(left_edge.next_position(), 0);
    }

    #[test]
    fn zero_online_steps_returns_the_warmup_trajectory() {
        let env_cfg = env_defaults();
        let cfg = PlannerConfig {
            warmup_steps: 80,
            ..planner_defaults()
        };
        let embed_cfg = EmbeddingConfig::default();
        let spec = small_forest_spec();
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let out = run(
            &env_cfg,
            &cfg,
            &embed_cfg,
            &spec,
            0,
            &EvalPlan::none(),
            &mut rng,
        )
        .unwrap();
        let mut rng2 = ChaCha8Rng::seed_from_u64(10);
        let warm = warm_start(
            &env_cfg,
            &cfg,
            &embed_cfg,
            &spec,
            env_cfg.start_state(),
            &mut rng2,
        )
        .unwrap();
        assert_eq!(out.trajectory, warm.trajectory);
        assert!(out.scores.iter().all(Option::is_none));
    }

    #[test]
    fn runs_are_deterministic_and_legal() {
        let env_cfg = env_defaults();
        let cfg = PlannerConfig {
            warmup_steps: 70,
            ..planner_defaults()
        };
        let embed_cfg = EmbeddingConfig::default();
        let spec = small_forest_spec();
        let eval = EvalPlan { every: 5, window: 8 };
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let a = run(&env_cfg, &cfg, &embed_cfg, &spec, 12, &eval, &mut rng).unwrap();
        let mut rng2 = ChaCha8Rng::seed_from_u64(4);
        let b = run(&env_cfg, &cfg, &embed_cfg, &spec, 12, &eval, &mut rng2).unwrap();
        assert_eq!(a.trajectory, b.trajectory);
        assert_eq!(a.scores, b.scores);
        assert_eq!(a.evals.len(), b.evals.len());
        for t in &a.trajectory.transitions {
            assert!(t.next_position < env_cfg.width);
            assert!((t.next_position as i64 - t.position as i64).abs() <= 1);
        }
        // Online steps carry a chosen-path score.
        assert!(a.scores[cfg.warmup_steps..].iter().all(Option::is_some));
    }

    #[test]
    fn offline_mode_explores_but_still_records_greedy_evals() {
        let env_cfg = env_defaults();
        let cfg = PlannerConfig {
            warmup_steps: 70,
            mode: Mode::Offline,
            ..planner_defaults()
        };
        let embed_cfg = EmbeddingConfig::default();
        let spec = small_forest_spec();
        let eval = EvalPlan { every: 10, window: 5 };
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let out = run(&env_cfg, &cfg, &embed_cfg, &spec, 20, &eval, &mut rng).unwrap();
        assert!(out.scores.iter().all(Option::is_none));
        assert_eq!(out.evals.len(), 3); // step 0, 10, 20
        for ev in &out.evals {
            assert_eq!(ev.positions.len(), 5);
        }
    }
}
