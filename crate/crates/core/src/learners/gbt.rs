//! Least-squares gradient boosting: a mean base prediction plus shallow CART
//! trees fit to the running residuals.

use super::tree::{self, RegressionTree, TreeParams};
use super::Dataset;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct GbtParams {
    pub n_rounds: usize,
    pub learning_rate: f64,
    pub max_depth: usize,
}

impl Default for GbtParams {
    fn default() -> Self {
        GbtParams {
            n_rounds: 100,
            learning_rate: 0.1,
            max_depth: 3,
        }
    }
}

impl GbtParams {
    pub fn validate(&self) -> Result<()> {
        if self.n_rounds == 0 {
            return Err(Error::InvalidConfig("gbt needs at least one round".into()));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate <= 1.0) {
            return Err(Error::InvalidConfig(format!(
                "gbt learning rate must lie in (0, 1], got {}",
                self.learning_rate
            )));
        }
        if self.max_depth == 0 {
            return Err(Error::InvalidConfig("gbt max_depth must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub(crate) struct Gbt {
    pub base: f64,
    pub learning_rate: f64,
    pub trees: Vec<RegressionTree>,
}

impl Gbt {
    pub fn predict(&self, x: &[f64]) -> f64 {
        self.base
            + self.learning_rate
                * self
                    .trees
                    .iter()
                    .map(|t| t.predict(x))
                    .sum::<f64>()
    }

    /// Prediction using only the first `rounds` trees; `rounds = 0` gives the
    /// base prediction. Lets tests trace the training loss per round.
    pub fn predict_staged(&self, x: &[f64], rounds: usize) -> f64 {
        self.base
            + self.learning_rate
                * self
                    .trees
                    .iter()
                    .take(rounds)
                    .map(|t| t.predict(x))
                    .sum::<f64>()
    }
}

pub(crate) fn fit(data: &Dataset, params: &GbtParams) -> Gbt {
    let tp = TreeParams {
        max_depth: params.max_depth,
        min_leaf: 1,
    };
    let base = data.targets().iter().sum::<f64>() / data.len() as f64;
    let mut residuals: Vec<f64> = data.targets().iter().map(|y| y - base).collect();
    let mut trees = Vec::with_capacity(params.n_rounds);
    for _ in 0..params.n_rounds {
        let t = tree::fit(data.features(), &residuals, data.dim(), &tp);
        for (i, r) in residuals.iter_mut().enumerate() {
            *r -= params.learning_rate * t.predict(data.row(i));
        }
        trees.push(t);
    }
    Gbt {
        base,
        learning_rate: params.learning_rate,
        trees,
    }
}
