//! Deterministic 1-D foraging track with two periodically boosted reward
//! patches. Patch rewards decay exponentially and re-boost every `period`
//! ticks, with the second patch shifted by half a period.

use crate::error::{Error, Result};

/// Track geometry and reward schedule.
#[derive(Debug, Clone, PartialEq)]
pub struct EnvConfig {
    /// Number of cells on the track.
    pub width: usize,
    /// Cell index of the first reward patch.
    pub patch_a: usize,
    /// Cell index of the second reward patch.
    pub patch_b: usize,
    /// Boost period in ticks. Must be even so the half-period shift is integral.
    pub period: u64,
    /// Exponential decay time constant of a boosted patch, in ticks.
    pub tau: f64,
    /// Discount factor used by planners and the oracle.
    pub gamma: f64,
}

impl Default for EnvConfig {
    fn default() -> Self {
        EnvConfig {
            width: 7,
            patch_a: 2,
            patch_b: 5,
            period: 10,
            tau: 2.0,
            gamma: 0.9,
        }
    }
}

impl EnvConfig {
    pub fn validate(&self) -> Result<()> {
        if self.width == 0 {
            return Err(Error::InvalidConfig("env.width must be positive".into()));
        }
        if !(self.patch_a < self.patch_b && self.patch_b < self.width) {
            return Err(Error::InvalidConfig(format!(
                "patches must satisfy 0 <= patch_a < patch_b < width, got a={} b={} width={}",
                self.patch_a, self.patch_b, self.width
            )));
        }
        if self.period == 0 || self.period % 2 != 0 {
            return Err(Error::InvalidConfig(format!(
                "env.period must be positive and even, got {}",
                self.period
            )));
        }
        if !(self.tau > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "env.tau must be positive, got {}",
                self.tau
            )));
        }
        if !(0.0..1.0).contains(&self.gamma) {
            return Err(Error::InvalidDiscount(self.gamma));
        }
        Ok(())
    }

    /// Start state used by the experiment harness: the track center at tick 0.
    pub fn start_state(&self) -> EnvState {
        EnvState {
            position: self.width / 2,
            tick: 0,
        }
    }
}

/// Agent position and global tick.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct EnvState {
    pub position: usize,
    pub tick: u64,
}

/// One observed step: the state left behind, the move taken, and the reward
/// collected on arrival. `reward` always equals
/// `reward_field(tick + 1)[next_position]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Transition {
    pub position: usize,
    pub tick: u64,
    pub action: i32,
    pub next_position: usize,
    pub reward: f64,
}

impl Transition {
    pub fn next_state(&self) -> EnvState {
        EnvState {
            position: self.next_position,
            tick: self.tick + 1,
        }
    }
}

/// A chained sequence of transitions from a start state.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Trajectory {
    pub start: EnvState,
    pub transitions: Vec<Transition>,
}

impl Trajectory {
    pub fn new(start: EnvState) -> Self {
        Trajectory {
            start,
            transitions: Vec::new(),
        }
    }

    /// Appends a transition, checking that it chains onto the current end.
    pub fn push(&mut self, t: Transition) {
        let end = self.end_state();
        assert_eq!(
            (t.position, t.tick),
            (end.position, end.tick),
            "transition does not chain onto the trajectory"
        );
        self.transitions.push(t);
    }

    pub fn end_state(&self) -> EnvState {
        self.transitions
            .last()
            .map(|t| t.next_state())
            .unwrap_or(self.start)
    }

    pub fn len(&self) -> usize {
        self.transitions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.transitions.is_empty()
    }

    /// Rewards in step order.
    pub fn rewards(&self) -> Vec<f64> {
        self.transitions.iter().map(|t| t.reward).collect()
    }

    /// Discounted sum of rewards, first reward undiscounted.
    pub fn discounted_return(&self, gamma: f64) -> f64 {
        let mut acc = 0.0;
        for t in self.transitions.iter().rev() {
            acc = t.reward + gamma * acc;
        }
        acc
    }
}

/// Reward available at every cell at the given tick.
///
/// Patch `a` pays `exp(-(tick mod r)/tau)`, patch `b` the same shifted by
/// half a period; every other cell pays exactly zero.
pub fn reward_field(cfg: &EnvConfig, tick: u64) -> Vec<f64> {
    let mut field = vec![0.0; cfg.width];
    field[cfg.patch_a] = patch_reward(cfg, tick, 0);
    field[cfg.patch_b] = patch_reward(cfg, tick, cfg.period / 2);
    field
}

/// Reward at a single cell at the given tick, without building the full field.
pub fn reward_at(cfg: &EnvConfig, tick: u64, position: usize) -> f64 {
    if position == cfg.patch_a {
        patch_reward(cfg, tick, 0)
    } else if position == cfg.patch_b {
        patch_reward(cfg, tick, cfg.period / 2)
    } else {
        0.0
    }
}

fn patch_reward(cfg: &EnvConfig, tick: u64, shift: u64) -> f64 {
    let phase = (tick + shift) % cfg.period;
    (-(phase as f64) / cfg.tau).exp()
}

/// Actions available at a position, always in the order -1, 0, +1 so that
/// downstream argmax tie-breaking is deterministic.
pub fn legal_actions(cfg: &EnvConfig, position: usize) -> Result<Vec<i32>> {
    if position >= cfg.width {
        return Err(Error::OutOfBounds {
            position,
            width: cfg.width,
        });
    }
    Ok(legal_actions_in_width(cfg.width, position))
}

/// Same alphabet for callers that only carry the track width.
pub fn legal_actions_in_width(width: usize, position: usize) -> Vec<i32> {
    let mut actions = Vec::with_capacity(3);
    for a in [-1i32, 0, 1] {
        let target = position as i64 + a as i64;
        if target >= 0 && (target as usize) < width {
            actions.push(a);
        }
    }
    actions
}

/// Executes one move. The reward is read at the new tick at the new position.
/// Illegal moves are rejected, never clipped.
pub fn step(cfg: &EnvConfig, state: EnvState, action: i32) -> Result<Transition> {
    if state.position >= cfg.width {
        return Err(Error::OutOfBounds {
            position: state.position,
            width: cfg.width,
        });
    }
    if !(-1..=1).contains(&action) {
        return Err(Error::IllegalMove {
            position: state.position,
            tick: state.tick,
            action,
        });
    }
    let target = state.position as i64 + action as i64;
    if target < 0 || target as usize >= cfg.width {
        return Err(Error::IllegalMove {
            position: state.position,
            tick: state.tick,
            action,
        });
    }
    let next_position = target as usize;
    let reward = reward_at(cfg, state.tick + 1, next_position);
    Ok(Transition {
        position: state.position,
        tick: state.tick,
        action,
        next_position,
        reward,
    })
}

/// Rolls a deterministic policy forward for `horizon` steps.
pub fn run_policy<P>(
    cfg: &EnvConfig,
    mut policy: P,
    start: EnvState,
    horizon: usize,
) -> Result<Trajectory>
where
    P: FnMut(usize, u64) -> i32,
{
    let mut traj = Trajectory::new(start);
    let mut state = start;
    for _ in 0..horizon {
        let action = policy(state.position, state.tick);
        let t = step(cfg, state, action)?;
        state = t.next_state();
        traj.push(t);
    }
    Ok(traj)
}
