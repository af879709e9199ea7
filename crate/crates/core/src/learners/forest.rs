//! Bagged ensembles of CART regression trees.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::tree::{self, RegressionTree, TreeParams};
use super::Dataset;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct ForestParams {
    pub n_trees: usize,
    /// 0 means unlimited depth.
    pub max_depth: usize,
    pub min_leaf: usize,
    pub bootstrap: bool,
}

impl Default for ForestParams {
    fn default() -> Self {
        ForestParams {
            n_trees: 100,
            max_depth: 0,
            min_leaf: 1,
            bootstrap: true,
        }
    }
}

impl ForestParams {
    pub fn validate(&self) -> Result<()> {
        if self.n_trees == 0 {
            return Err(Error::InvalidConfig("forest needs at least one tree".into()));
        }
        if self.min_leaf == 0 {
            return Err(Error::InvalidConfig("min_leaf must be positive".into()));
        }
        Ok(())
    }

    fn tree_params(&self) -> TreeParams {
        TreeParams {
            max_depth: if self.max_depth == 0 {
                usize::MAX
            } else {
                self.max_depth
            },
            min_leaf: self.min_leaf,
        }
    }
}

#[derive(Debug, Clone)]
pub(crate) struct Forest {
    pub trees: Vec<RegressionTree>,
}

impl Forest {
    pub fn predict(&self, x: &[f64]) -> f64 {
        let sum: f64 = self.trees.iter().map(|t| t.predict(x)).sum();
        sum / self.trees.len() as f64
    }
}

/// Tree seeds are drawn up front so the parallel fit is schedule-independent.
pub(crate) fn fit(data: &Dataset, params: &ForestParams, seed: u64) -> Forest {
    let mut master = ChaCha8Rng::seed_from_u64(seed);
    let tree_seeds: Vec<u64> = (0..params.n_trees).map(|_| master.next_u64()).collect();
    let tp = params.tree_params();
    let m = data.len();
    let dim = data.dim();

    let trees: Vec<RegressionTree> = tree_seeds
        .par_iter()
        .map(|&ts| {
            let mut x = Vec::with_capacity(m * dim);
            let mut y = Vec::with_capacity(m);
            if params.bootstrap {
                let mut rng = ChaCha8Rng::seed_from_u64(ts);
                for _ in 0..m {
                    let r = rng.random_range(0..m);
                    x.extend_from_slice(data.row(r));
                    y.push(data.target(r));
                }
            } else {
                x.extend_from_slice(data.features());
                y.extend_from_slice(data.targets());
            }
            tree::fit(&x, &y, dim, &tp)
        })
        .collect();

    Forest { trees }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy_data() -> Dataset {
        let mut data = Dataset::new(1);
        for i in 0..32 {
            let x = i as f64 / 4.0;
            data.push(&[x], if x < 4.0 { 1.0 } else { 3.0 }).unwrap();
        }
        data
    }

    #[test]
    fn fit_is_bit_deterministic() {
        let data = toy_data();
        let params = ForestParams::default();
        let a = fit(&data, &params, 42);
        let b = fit(&data, &params, 42);
        for x in [0.1, 3.9, 4.1, 7.5] {
            assert_eq!(a.predict(&[x]), b.predict(&[x]));
        }
    }

    #[test]
    fn different_seeds_differ_with_bootstrap() {
        let mut data = Dataset::new(1);
        for i in 0..64 {
            data.push(&[i as f64], (i % 7) as f64).unwrap();
        }
        let params = ForestParams {
            n_trees: 10,
            ..ForestParams::default()
        };
        let a = fit(&data, &params, 1);
        let b = fit(&data, &params, 2);
        let differs = (0..64).any(|i| a.predict(&[i as f64]) != b.predict(&[i as f64]));
        assert!(differs);
    }

    #[test]
    fn learns_a_step_function() {
        let data = toy_data();
        let forest = fit(&data, &ForestParams::default(), 7);
        assert!((forest.predict(&[1.0]) - 1.0).abs() < 0.2);
        assert!((forest.predict(&[6.0]) - 3.0).abs() < 0.2);
    }
}
