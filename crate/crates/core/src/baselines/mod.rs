//! Reinforcement-learning baselines sharing the environment, embedding, and
//! learner modules: online fitted Q-iteration and an online discrete-action
//! soft actor-critic, each in time-aware and time-agnostic flavors.

pub mod fqi;
pub mod sac;

use crate::embed::{embed, EmbeddingConfig};
use crate::error::Result;

/// The track's move alphabet in enumeration order.
pub const ACTIONS: [i32; 3] = [-1, 0, 1];

/// Position block, plus the time block in time-aware mode.
pub(crate) fn state_features(
    cfg: &EmbeddingConfig,
    position: usize,
    tick: u64,
    time_aware: bool,
) -> Result<Vec<f64>> {
    let full = embed(cfg, position, tick)?;
    if time_aware {
        Ok(full)
    } else {
        Ok(full[..cfg.position_dim()].to_vec())
    }
}

/// Position block, one-hot action encoding, then the optional time block.
pub(crate) fn state_action_features(
    cfg: &EmbeddingConfig,
    position: usize,
    action: i32,
    tick: u64,
    time_aware: bool,
) -> Result<Vec<f64>> {
    let full = embed(cfg, position, tick)?;
    let pos_dim = cfg.position_dim();
    let mut v = Vec::with_capacity(full.len() + ACTIONS.len());
    v.extend_from_slice(&full[..pos_dim]);
    for a in ACTIONS {
        v.push(if a == action { 1.0 } else { 0.0 });
    }
    if time_aware {
        v.extend_from_slice(&full[pos_dim..]);
    }
    Ok(v)
}
