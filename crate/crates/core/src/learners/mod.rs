//! From-scratch supervised regressors behind one fit/predict interface:
//! bagged CART forests, least-squares gradient-boosted trees, and a small
//! multilayer perceptron. Fits are deterministic functions of
//! (spec, seed, data); trained models are immutable.

pub mod forest;
pub mod gbt;
pub mod mlp;
mod snapshot;
mod tree;

use crate::error::{Error, Result};

pub use forest::ForestParams;
pub use gbt::GbtParams;
pub use mlp::MlpParams;

/// Labeled regression rows with one shared feature dimensionality.
#[derive(Debug, Clone, Default)]
pub struct Dataset {
    dim: usize,
    x: Vec<f64>,
    y: Vec<f64>,
}

impl Dataset {
    pub fn new(dim: usize) -> Self {
        Dataset {
            dim,
            x: Vec::new(),
            y: Vec::new(),
        }
    }

    pub fn push(&mut self, features: &[f64], target: f64) -> Result<()> {
        if features.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: features.len(),
            });
        }
        if !target.is_finite() {
            return Err(Error::NonFiniteTarget { row: self.len() });
        }
        self.x.extend_from_slice(features);
        self.y.push(target);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.x[i * self.dim..(i + 1) * self.dim]
    }

    pub fn target(&self, i: usize) -> f64 {
        self.y[i]
    }

    pub fn features(&self) -> &[f64] {
        &self.x
    }

    pub fn targets(&self) -> &[f64] {
        &self.y
    }
}

/// Which model family a spec describes, with its family-specific knobs.
#[derive(Debug, Clone, PartialEq)]
pub enum RegressorKind {
    Forest(ForestParams),
    Gbt(GbtParams),
    Mlp(MlpParams),
}

/// A complete, seedable description of a regressor to train.
#[derive(Debug, Clone, PartialEq)]
pub struct RegressorSpec {
    pub kind: RegressorKind,
    pub seed: u64,
}

impl RegressorSpec {
    pub fn forest(params: ForestParams, seed: u64) -> Self {
        RegressorSpec {
            kind: RegressorKind::Forest(params),
            seed,
        }
    }

    pub fn gbt(params: GbtParams, seed: u64) -> Self {
        RegressorSpec {
            kind: RegressorKind::Gbt(params),
            seed,
        }
    }

    pub fn mlp(params: MlpParams, seed: u64) -> Self {
        RegressorSpec {
            kind: RegressorKind::Mlp(params),
            seed,
        }
    }

    /// Same spec with a different seed; used by runners to mix per-run seeds in.
    pub fn with_seed(&self, seed: u64) -> Self {
        RegressorSpec {
            kind: self.kind.clone(),
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match &self.kind {
            RegressorKind::Forest(p) => p.validate(),
            RegressorKind::Gbt(p) => p.validate(),
            RegressorKind::Mlp(p) => p.validate(),
        }
    }
}

#[derive(Debug, Clone)]
pub(crate) enum Model {
    Forest(forest::Forest),
    Gbt(gbt::Gbt),
    Mlp(mlp::MlpModel),
}

/// A frozen fitted model. Prediction is pure; refits build new values.
#[derive(Debug, Clone)]
pub struct TrainedRegressor {
    spec: RegressorSpec,
    dim: usize,
    train_size: usize,
    pub(crate) model: Model,
}

impl TrainedRegressor {
    pub fn spec(&self) -> &RegressorSpec {
        &self.spec
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn train_size(&self) -> usize {
        self.train_size
    }

    pub fn predict(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: x.len(),
            });
        }
        let v = match &self.model {
            Model::Forest(m) => m.predict(x),
            Model::Gbt(m) => m.predict(x),
            Model::Mlp(m) => m.predict(x),
        };
        Ok(v)
    }

    /// For boosted models, the prediction truncated to the first `rounds`
    /// trees, letting callers trace the training loss round by round. `None`
    /// for other model kinds.
    pub fn gbt_stage(&self, x: &[f64], rounds: usize) -> Result<Option<f64>> {
        if x.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: x.len(),
            });
        }
        match &self.model {
            Model::Gbt(m) => Ok(Some(m.predict_staged(x, rounds))),
            _ => Ok(None),
        }
    }

    /// Number of boosting rounds for boosted models, `None` otherwise.
    pub fn gbt_rounds(&self) -> Option<usize> {
        match &self.model {
            Model::Gbt(m) => Some(m.trees.len()),
            _ => None,
        }
    }

    /// Writes a versioned binary snapshot of the model.
    pub fn save<W: std::io::Write>(&self, w: W) -> Result<()> {
        snapshot::save(self, w)
    }

    /// Restores a model from a snapshot written by [`TrainedRegressor::save`].
    pub fn load<R: std::io::Read>(r: R) -> Result<TrainedRegressor> {
        snapshot::load(r)
    }
}

/// Trains a regressor. Same spec, same seed, same data give a bit-identical
/// model.
pub fn fit(spec: &RegressorSpec, data: &Dataset) -> Result<TrainedRegressor> {
    spec.validate()?;
    if data.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if let Some(row) = data.targets().iter().position(|t| !t.is_finite()) {
        return Err(Error::NonFiniteTarget { row });
    }
    let model = match &spec.kind {
        RegressorKind::Forest(p) => Model::Forest(forest::fit(data, p, spec.seed)),
        RegressorKind::Gbt(p) => Model::Gbt(gbt::fit(data, p)),
        RegressorKind::Mlp(p) => Model::Mlp(mlp::fit(data, p, spec.seed)),
    };
    Ok(TrainedRegressor {
        spec: spec.clone(),
        dim: data.dim(),
        train_size: data.len(),
        model,
    })
}

/// Retrains from scratch on the full history. Online updates are full
/// retrains, not incremental tweaks; the returned model is independent of any
/// previously fitted one.
pub fn refit_all(spec: &RegressorSpec, full_history: &Dataset) -> Result<TrainedRegressor> {
    fit(spec, full_history)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn onehot(i: usize, d: usize) -> Vec<f64> {
        let mut v = vec![0.0; d];
        v[i] = 1.0;
        v
    }

    fn all_specs() -> Vec<RegressorSpec> {
        vec![
            RegressorSpec::forest(ForestParams::default(), 3),
            RegressorSpec::gbt(GbtParams::default(), 3),
            RegressorSpec::mlp(
                MlpParams {
                    hidden: vec![8, 8],
                    epochs: 20,
                    ..MlpParams::default()
                },
                3,
            ),
        ]
    }

    #[test]
    fn constant_target_fits_to_the_constant() {
        let mut data = Dataset::new(4);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..30 {
            let x: Vec<f64> = (0..4).map(|_| rng.random::<f64>()).collect();
            data.push(&x, 2.5).unwrap();
        }
        for spec in all_specs() {
            let model = fit(&spec, &data).unwrap();
            for i in 0..data.len() {
                assert_abs_diff_eq!(model.predict(data.row(i)).unwrap(), 2.5, epsilon = 1e-9);
            }
        }
    }

    #[test]
    fn memorizing_forest_reproduces_a_distinct_key_table() {
        let mut data = Dataset::new(8);
        for i in 0..8 {
            data.push(&onehot(i, 8), (i as f64) * 0.25 - 2.0).unwrap();
        }
        let spec = RegressorSpec::forest(
            ForestParams {
                n_trees: 5,
                max_depth: 0,
                min_leaf: 1,
                bootstrap: false,
            },
            0,
        );
        let model = fit(&spec, &data).unwrap();
        for i in 0..8 {
            assert_eq!(model.predict(data.row(i)).unwrap(), data.target(i));
        }
    }

    #[test]
    fn empty_and_non_finite_inputs_error() {
        let data = Dataset::new(3);
        let spec = RegressorSpec::forest(ForestParams::default(), 0);
        assert!(matches!(fit(&spec, &data), Err(Error::EmptyDataset)));

        let mut bad = Dataset::new(1);
        assert!(matches!(
            bad.push(&[0.0], f64::NAN),
            Err(Error::NonFiniteTarget { .. })
        ));
    }

    #[test]
    fn predict_rejects_dimension_mismatch() {
        let mut data = Dataset::new(2);
        data.push(&[0.0, 1.0], 1.0).unwrap();
        data.push(&[1.0, 0.0], 2.0).unwrap();
        let model = fit(&RegressorSpec::forest(ForestParams::default(), 0), &data).unwrap();
        assert!(matches!(
            model.predict(&[1.0]),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn refits_are_deterministic_and_independent() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut data = Dataset::new(5);
        for _ in 0..40 {
            let x: Vec<f64> = (0..5).map(|_| rng.random::<f64>()).collect();
            let y = x.iter().sum::<f64>() + 0.1 * rng.random::<f64>();
            data.push(&x, y).unwrap();
        }
        for spec in all_specs() {
            let a = refit_all(&spec, &data).unwrap();
            let b = refit_all(&spec, &data).unwrap();
            let probe: Vec<f64> = (0..5).map(|_| rng.random::<f64>()).collect();
            assert_eq!(a.predict(&probe).unwrap(), b.predict(&probe).unwrap());
        }

        // Growing the history leaves earlier models untouched.
        let spec = RegressorSpec::forest(ForestParams::default(), 1);
        let small = refit_all(&spec, &data).unwrap();
        let before = small.predict(data.row(0)).unwrap();
        let mut grown = data.clone();
        grown.push(&[1.0, 1.0, 1.0, 1.0, 1.0], 10.0).unwrap();
        let _big = refit_all(&spec, &grown).unwrap();
        assert_eq!(small.predict(data.row(0)).unwrap(), before);
        assert_eq!(small.train_size(), 40);
    }

    #[test]
    fn forest_predictions_stay_within_target_range() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut data = Dataset::new(3);
        for _ in 0..60 {
            let x: Vec<f64> = (0..3).map(|_| rng.random::<f64>()).collect();
            data.push(&x, rng.random_range(-4.0..9.0)).unwrap();
        }
        let lo = data.targets().iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = data
            .targets()
            .iter()
            .cloned()
            .fold(f64::NEG_INFINITY, f64::max);
        let model = fit(&RegressorSpec::forest(ForestParams::default(), 2), &data).unwrap();
        for _ in 0..200 {
            let x: Vec<f64> = (0..3).map(|_| rng.random_range(-1.0..2.0)).collect();
            let p = model.predict(&x).unwrap();
            assert!(p >= lo - 1e-12 && p <= hi + 1e-12);
        }
    }

    #[test]
    fn snapshot_roundtrip_preserves_predictions() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let mut data = Dataset::new(4);
        for _ in 0..50 {
            let x: Vec<f64> = (0..4).map(|_| rng.random::<f64>()).collect();
            let y = x[0] * 2.0 - x[2];
            data.push(&x, y).unwrap();
        }
        for spec in all_specs() {
            let model = fit(&spec, &data).unwrap();
            let mut buf = Vec::new();
            model.save(&mut buf).unwrap();
            let restored = TrainedRegressor::load(buf.as_slice()).unwrap();
            assert_eq!(restored.train_size(), model.train_size());
            assert_eq!(restored.dim(), model.dim());
            for i in 0..data.len() {
                assert_eq!(
                    model.predict(data.row(i)).unwrap(),
                    restored.predict(data.row(i)).unwrap()
                );
            }
        }
    }

    #[test]
    fn snapshot_rejects_garbage() {
        assert!(TrainedRegressor::load(&b"not a snapshot"[..]).is_err());
    }
}
