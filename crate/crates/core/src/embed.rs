//! Feature construction for (position, tick) pairs: a position block (one-hot
//! by default) concatenated with a sinusoidal time block.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PositionMode {
    /// One indicator entry per cell.
    OneHot,
    /// A single entry holding the raw cell index. Kept for ablations.
    Scalar,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingConfig {
    pub width: usize,
    /// Length of the sinusoidal time block. Must be even.
    pub time_dim: usize,
    pub frequency_base: f64,
    pub position_mode: PositionMode,
}

impl Default for EmbeddingConfig {
    fn default() -> Self {
        EmbeddingConfig {
            width: 7,
            time_dim: 50,
            frequency_base: 10_000.0,
            position_mode: PositionMode::OneHot,
        }
    }
}

impl EmbeddingConfig {
    pub fn validate(&self) -> Result<()> {
        if self.width == 0 {
            return Err(Error::InvalidConfig("embed width must be positive".into()));
        }
        if self.time_dim == 0 || self.time_dim % 2 != 0 {
            return Err(Error::InvalidConfig(format!(
                "embed.time_dim must be positive and even, got {}",
                self.time_dim
            )));
        }
        if !(self.frequency_base > 1.0) {
            return Err(Error::InvalidConfig(format!(
                "embed.frequency_base must exceed 1, got {}",
                self.frequency_base
            )));
        }
        Ok(())
    }

    /// Total feature dimensionality.
    pub fn dim(&self) -> usize {
        self.position_dim() + self.time_dim
    }

    /// Length of the position block.
    pub fn position_dim(&self) -> usize {
        match self.position_mode {
            PositionMode::OneHot => self.width,
            PositionMode::Scalar => 1,
        }
    }
}

pub type FeatureVector = Vec<f64>;

/// Embeds a (position, tick) pair. Pure and deterministic.
///
/// Time entry `i` is `sin(tick / base^(2*(i/2)/time_dim))` for even `i` and
/// the matching cosine for odd `i`.
pub fn embed(cfg: &EmbeddingConfig, position: usize, tick: u64) -> Result<FeatureVector> {
    if position >= cfg.width {
        return Err(Error::OutOfBounds {
            position,
            width: cfg.width,
        });
    }
    let mut v = Vec::with_capacity(cfg.dim());
    match cfg.position_mode {
        PositionMode::OneHot => {
            v.resize(cfg.width, 0.0);
            v[position] = 1.0;
        }
        PositionMode::Scalar => v.push(position as f64),
    }
    let t = tick as f64;
    for i in 0..cfg.time_dim {
        let exponent = (2 * (i / 2)) as f64 / cfg.time_dim as f64;
        let angle = t / cfg.frequency_base.powf(exponent);
        v.push(if i % 2 == 0 { angle.sin() } else { angle.cos() });
    }
    Ok(v)
}
