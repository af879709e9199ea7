//! Exact optimal value and policy for the periodic track, by value iteration
//! over the (position, phase) state space, plus prospective-regret
//! measurement against the optimal trajectory.
//!
//! Rewards depend on the tick only through `tick mod period`, so the
//! (position, phase) space is an exact reduction.

use crate::env::{self, EnvConfig, EnvState};
use crate::error::{Error, Result};

/// Solved value and greedy policy over all (position, phase) states.
#[derive(Debug, Clone)]
pub struct OracleTable {
    env: EnvConfig,
    gamma: f64,
    /// Row-major `width x period`: value of standing at `p` with phase `phi`,
    /// counting rewards from the next tick on.
    values: Vec<f64>,
    /// Greedy action per state, ties broken toward -1, then 0, then +1.
    policy: Vec<i32>,
    /// Final sup-norm change between the last two sweeps.
    pub residual: f64,
    pub sweeps: usize,
}

impl OracleTable {
    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn width(&self) -> usize {
        self.env.width
    }

    pub fn period(&self) -> u64 {
        self.env.period
    }

    fn index(&self, position: usize, phase: u64) -> usize {
        position * self.env.period as usize + phase as usize
    }

    pub fn value(&self, position: usize, tick: u64) -> f64 {
        self.values[self.index(position, tick % self.env.period)]
    }

    pub fn action(&self, position: usize, tick: u64) -> i32 {
        self.policy[self.index(position, tick % self.env.period)]
    }

    /// Errors unless the table was solved for this exact reward schedule.
    pub fn check_env(&self, cfg: &EnvConfig) -> Result<()> {
        let same = self.env.width == cfg.width
            && self.env.patch_a == cfg.patch_a
            && self.env.patch_b == cfg.patch_b
            && self.env.period == cfg.period
            && self.env.tau == cfg.tau;
        if same {
            Ok(())
        } else {
            Err(Error::TableMismatch(format!(
                "table solved for {:?}, asked about {:?}",
                self.env, cfg
            )))
        }
    }
}

/// Solves the track by synchronous value iteration until the sup-norm residual
/// drops below `tolerance`.
pub fn solve(cfg: &EnvConfig, gamma: f64, tolerance: f64) -> Result<OracleTable> {
    cfg.validate()?;
    if !(0.0..1.0).contains(&gamma) {
        return Err(Error::InvalidDiscount(gamma));
    }
    if !(tolerance > 0.0) {
        return Err(Error::InvalidConfig(format!(
            "oracle tolerance must be positive, got {tolerance}"
        )));
    }
    let w = cfg.width;
    let r = cfg.period as usize;
    let n = w * r;
    let mut values = vec![0.0f64; n];
    let mut next = vec![0.0f64; n];
    let mut residual = f64::INFINITY;
    let mut sweeps = 0usize;
    // Geometric contraction makes the bound generous.
    let max_sweeps = 10_000;

    while residual >= tolerance && sweeps < max_sweeps {
        residual = 0.0;
        for p in 0..w {
            let actions = env::legal_actions(cfg, p)?;
            for phi in 0..r {
                let phi_next = (phi + 1) % r;
                let mut best = f64::NEG_INFINITY;
                for &a in &actions {
                    let q = (p as i64 + a as i64) as usize;
                    let reward = env::reward_at(cfg, phi_next as u64, q);
                    let v = reward + gamma * values[q * r + phi_next];
                    if v > best {
                        best = v;
                    }
                }
                let idx = p * r + phi;
                let delta = (best - values[idx]).abs();
                if delta > residual {
                    residual = delta;
                }
                next[idx] = best;
            }
        }
        std::mem::swap(&mut values, &mut next);
        sweeps += 1;
    }

    let mut policy = vec![0i32; n];
    for p in 0..w {
        let actions = env::legal_actions(cfg, p)?;
        for phi in 0..r {
            let phi_next = (phi + 1) % r;
            let mut best = f64::NEG_INFINITY;
            let mut best_action = actions[0];
            for &a in &actions {
                let q = (p as i64 + a as i64) as usize;
                let reward = env::reward_at(cfg, phi_next as u64, q);
                let v = reward + gamma * values[q * r + phi_next];
                if v > best {
                    best = v;
                    best_action = a;
                }
            }
            policy[p * r + phi] = best_action;
        }
    }

    Ok(OracleTable {
        env: cfg.clone(),
        gamma,
        values,
        policy,
        residual,
        sweeps,
    })
}

/// Greedy rollout of the tabled policy: positions at ticks
/// `start.tick ..= start.tick + steps`, starting with the start position.
pub fn optimal_trajectory(
    table: &OracleTable,
    cfg: &EnvConfig,
    start: EnvState,
    steps: usize,
) -> Result<Vec<usize>> {
    table.check_env(cfg)?;
    if start.position >= cfg.width {
        return Err(Error::OutOfBounds {
            position: start.position,
            width: cfg.width,
        });
    }
    let mut positions = Vec::with_capacity(steps + 1);
    positions.push(start.position);
    let mut p = start.position;
    for k in 0..steps {
        let a = table.action(p, start.tick + k as u64);
        p = (p as i64 + a as i64) as usize;
        positions.push(p);
    }
    Ok(positions)
}

/// Averaged prospective regret of an executed position sequence against the
/// optimal trajectory from the same start:
/// `(1/T) * sum_k gamma^k (y(x*_k) - y(x_k))` over the T ticks after the
/// start, where `actual[k]` is the agent's position at tick
/// `start.tick + 1 + k`.
pub fn prospective_regret(
    actual: &[usize],
    table: &OracleTable,
    cfg: &EnvConfig,
    start: EnvState,
    window: usize,
) -> Result<f64> {
    table.check_env(cfg)?;
    if actual.len() < window {
        return Err(Error::SequenceTooShort {
            needed: window,
            got: actual.len(),
        });
    }
    let optimal = optimal_trajectory(table, cfg, start, window)?;
    let gamma = table.gamma;
    let mut weight = 1.0;
    let mut gap = 0.0;
    for k in 0..window {
        let tick = start.tick + 1 + k as u64;
        let best = env::reward_at(cfg, tick, optimal[k + 1]);
        let got = env::reward_at(cfg, tick, actual[k]);
        gap += weight * (best - got);
        weight *= gamma;
    }
    Ok(gap / window as f64)
}

/// Oracle's own averaged discounted reward over the window; the normalizer
/// for [`normalized_regret`].
pub fn oracle_window_reward(
    table: &OracleTable,
    cfg: &EnvConfig,
    start: EnvState,
    window: usize,
) -> Result<f64> {
    let optimal = optimal_trajectory(table, cfg, start, window)?;
    let gamma = table.gamma;
    let mut weight = 1.0;
    let mut total = 0.0;
    for k in 0..window {
        total += weight * env::reward_at(cfg, start.tick + 1 + k as u64, optimal[k + 1]);
        weight *= gamma;
    }
    Ok(total / window as f64)
}

/// Regret divided by the oracle's averaged discounted reward over the same
/// window: 0 for optimal play, 1 for a policy that collects nothing.
pub fn normalized_regret(
    regret: f64,
    table: &OracleTable,
    cfg: &EnvConfig,
    start: EnvState,
    window: usize,
) -> Result<f64> {
    let normalizer = oracle_window_reward(table, cfg, start, window)?;
    if !(normalizer > 0.0) {
        return Err(Error::ZeroNormalizer);
    }
    Ok(regret / normalizer)
}

/// Per-evaluation-point regret measurements for one run.
#[derive(Debug, Clone, Default)]
pub struct RegretSeries {
    pub points: Vec<RegretPoint>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegretPoint {
    pub tick: u64,
    pub averaged: f64,
    pub normalized: f64,
}
