//! A small dense feedforward network: tanh hidden layers, linear output,
//! trained by mini-batch gradient descent with momentum. The backward pass is
//! exposed so actor/critic losses can push their own output gradients through
//! the same machinery.

use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::Dataset;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct MlpParams {
    pub hidden: Vec<usize>,
    pub step_size: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub momentum: f64,
}

impl Default for MlpParams {
    fn default() -> Self {
        MlpParams {
            hidden: vec![128, 128],
            step_size: 1e-3,
            epochs: 200,
            batch_size: 32,
            momentum: 0.9,
        }
    }
}

impl MlpParams {
    pub fn validate(&self) -> Result<()> {
        if self.hidden.is_empty() || self.hidden.contains(&0) {
            return Err(Error::InvalidConfig(
                "mlp hidden layer sizes must be positive".into(),
            ));
        }
        if !(self.step_size > 0.0 && self.step_size <= 1.0) {
            return Err(Error::InvalidConfig(format!(
                "mlp step size must lie in (0, 1], got {}",
                self.step_size
            )));
        }
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(Error::InvalidConfig(
                "mlp epochs and batch size must be positive".into(),
            ));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::InvalidConfig(format!(
                "mlp momentum must lie in [0, 1), got {}",
                self.momentum
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct Layer {
    /// (fan_in, fan_out)
    pub w: Array2<f64>,
    pub b: Array1<f64>,
}

#[derive(Debug, Clone)]
pub struct Mlp {
    pub layers: Vec<Layer>,
}

/// Per-layer gradients in the same shapes as the parameters.
#[derive(Debug, Clone)]
pub struct Gradients {
    pub layers: Vec<Layer>,
}

impl Mlp {
    /// Builds a net with the given layer widths, e.g. `[57, 128, 128, 1]`.
    /// Initialization is uniform Xavier, deterministic in the seed.
    pub fn new(dims: &[usize], seed: u64) -> Mlp {
        assert!(dims.len() >= 2, "need input and output dims");
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let layers = dims
            .windows(2)
            .map(|d| {
                let (fan_in, fan_out) = (d[0], d[1]);
                let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
                let w = Array2::from_shape_fn((fan_in, fan_out), |_| {
                    rng.random_range(-bound..bound)
                });
                Layer {
                    w,
                    b: Array1::zeros(fan_out),
                }
            })
            .collect();
        Mlp { layers }
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].w.nrows()
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().unwrap().w.ncols()
    }

    /// Batch forward pass returning all post-activation values;
    /// `acts[0]` is the input, `acts.last()` the linear output.
    pub fn forward(&self, x: ArrayView2<f64>) -> Vec<Array2<f64>> {
        let mut acts = Vec::with_capacity(self.layers.len() + 1);
        acts.push(x.to_owned());
        for (k, layer) in self.layers.iter().enumerate() {
            let mut z = acts[k].dot(&layer.w) + &layer.b;
            if k + 1 < self.layers.len() {
                z.mapv_inplace(f64::tanh);
            }
            acts.push(z);
        }
        acts
    }

    /// Forward pass for a single input row.
    pub fn forward_one(&self, x: &[f64]) -> Vec<f64> {
        let input = ArrayView2::from_shape((1, x.len()), x).expect("row shape");
        let acts = self.forward(input);
        acts.last().unwrap().row(0).to_vec()
    }

    /// Scalar prediction; the first output unit.
    pub fn predict(&self, x: &[f64]) -> f64 {
        self.forward_one(x)[0]
    }

    /// Backpropagates an output-side gradient `d_out` (same shape as the
    /// output batch) through activations from [`Mlp::forward`].
    pub fn backward(&self, acts: &[Array2<f64>], d_out: Array2<f64>) -> Gradients {
        let mut grads: Vec<Layer> = self
            .layers
            .iter()
            .map(|l| Layer {
                w: Array2::zeros(l.w.raw_dim()),
                b: Array1::zeros(l.b.raw_dim()),
            })
            .collect();
        let mut delta = d_out;
        for k in (0..self.layers.len()).rev() {
            grads[k].w = acts[k].t().dot(&delta);
            grads[k].b = delta.sum_axis(Axis(0));
            if k > 0 {
                let mut back = delta.dot(&self.layers[k].w.t());
                // tanh'(z) expressed through the stored activation
                back.zip_mut_with(&acts[k], |g, a| *g *= 1.0 - a * a);
                delta = back;
            }
        }
        Gradients { layers: grads }
    }

    /// Mean squared error of the first output unit over a batch.
    pub fn mse_loss(&self, x: ArrayView2<f64>, y: &[f64]) -> f64 {
        let out = self.forward(x).pop().unwrap();
        let n = y.len() as f64;
        out.column(0)
            .iter()
            .zip(y)
            .map(|(p, t)| (p - t) * (p - t))
            .sum::<f64>()
            / n
    }

    /// Analytic gradient of [`Mlp::mse_loss`] with respect to every parameter,
    /// flattened in [`Mlp::params`] order.
    pub fn mse_gradient(&self, x: ArrayView2<f64>, y: &[f64]) -> Vec<f64> {
        self.mse_gradients(x, y).flatten()
    }

    fn mse_gradients(&self, x: ArrayView2<f64>, y: &[f64]) -> Gradients {
        let acts = self.forward(x);
        let out = acts.last().unwrap();
        let n = y.len() as f64;
        let mut d_out = Array2::zeros(out.raw_dim());
        for (i, t) in y.iter().enumerate() {
            d_out[[i, 0]] = 2.0 * (out[[i, 0]] - t) / n;
        }
        self.backward(&acts, d_out)
    }

    /// Parameters flattened layer by layer, weights row-major then bias.
    pub fn params(&self) -> Vec<f64> {
        let mut v = Vec::new();
        for l in &self.layers {
            v.extend(l.w.iter());
            v.extend(l.b.iter());
        }
        v
    }

    pub fn set_params(&mut self, params: &[f64]) {
        let mut it = params.iter();
        for l in &mut self.layers {
            for w in l.w.iter_mut() {
                *w = *it.next().expect("parameter underflow");
            }
            for b in l.b.iter_mut() {
                *b = *it.next().expect("parameter underflow");
            }
        }
        assert!(it.next().is_none(), "parameter overflow");
    }
}

impl Gradients {
    pub fn flatten(&self) -> Vec<f64> {
        let mut v = Vec::new();
        for l in &self.layers {
            v.extend(l.w.iter());
            v.extend(l.b.iter());
        }
        v
    }

    pub fn scale(&mut self, c: f64) {
        for l in &mut self.layers {
            l.w.mapv_inplace(|v| v * c);
            l.b.mapv_inplace(|v| v * c);
        }
    }
}

/// Mini-batch SGD with momentum.
#[derive(Debug, Clone)]
pub struct Momentum {
    velocity: Vec<Layer>,
    step_size: f64,
    momentum: f64,
}

impl Momentum {
    pub fn new(net: &Mlp, step_size: f64, momentum: f64) -> Self {
        Momentum {
            velocity: zeros_like(net),
            step_size,
            momentum,
        }
    }

    pub fn update(&mut self, net: &mut Mlp, grads: &Gradients) {
        for ((l, v), g) in net
            .layers
            .iter_mut()
            .zip(&mut self.velocity)
            .zip(&grads.layers)
        {
            v.w.zip_mut_with(&g.w, |v, g| *v = self.momentum * *v - self.step_size * g);
            v.b.zip_mut_with(&g.b, |v, g| *v = self.momentum * *v - self.step_size * g);
            l.w += &v.w;
            l.b += &v.b;
        }
    }
}

/// Adam, used by the actor-critic updates.
#[derive(Debug, Clone)]
pub struct Adam {
    m: Vec<Layer>,
    v: Vec<Layer>,
    step_size: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
    t: i32,
}

impl Adam {
    pub fn new(net: &Mlp, step_size: f64) -> Self {
        Adam {
            m: zeros_like(net),
            v: zeros_like(net),
            step_size,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            t: 0,
        }
    }

    pub fn update(&mut self, net: &mut Mlp, grads: &Gradients) {
        self.t += 1;
        let bc1 = 1.0 - self.beta1.powi(self.t);
        let bc2 = 1.0 - self.beta2.powi(self.t);
        for (k, layer) in net.layers.iter_mut().enumerate() {
            let g = &grads.layers[k];
            let m = &mut self.m[k];
            let v = &mut self.v[k];
            m.w.zip_mut_with(&g.w, |m, g| *m = self.beta1 * *m + (1.0 - self.beta1) * g);
            m.b.zip_mut_with(&g.b, |m, g| *m = self.beta1 * *m + (1.0 - self.beta1) * g);
            v.w.zip_mut_with(&g.w, |v, g| *v = self.beta2 * *v + (1.0 - self.beta2) * g * g);
            v.b.zip_mut_with(&g.b, |v, g| *v = self.beta2 * *v + (1.0 - self.beta2) * g * g);
            azip_update(
                &mut layer.w,
                &m.w,
                &v.w,
                self.step_size,
                bc1,
                bc2,
                self.eps,
            );
            azip_update_1d(
                &mut layer.b,
                &m.b,
                &v.b,
                self.step_size,
                bc1,
                bc2,
                self.eps,
            );
        }
    }
}

fn azip_update(
    w: &mut Array2<f64>,
    m: &Array2<f64>,
    v: &Array2<f64>,
    lr: f64,
    bc1: f64,
    bc2: f64,
    eps: f64,
) {
    ndarray::Zip::from(w).and(m).and(v).for_each(|w, &m, &v| {
        *w -= lr * (m / bc1) / ((v / bc2).sqrt() + eps);
    });
}

fn azip_update_1d(
    b: &mut Array1<f64>,
    m: &Array1<f64>,
    v: &Array1<f64>,
    lr: f64,
    bc1: f64,
    bc2: f64,
    eps: f64,
) {
    ndarray::Zip::from(b).and(m).and(v).for_each(|b, &m, &v| {
        *b -= lr * (m / bc1) / ((v / bc2).sqrt() + eps);
    });
}

fn zeros_like(net: &Mlp) -> Vec<Layer> {
    net.layers
        .iter()
        .map(|l| Layer {
            w: Array2::zeros(l.w.raw_dim()),
            b: Array1::zeros(l.b.raw_dim()),
        })
        .collect()
}

/// A fitted regressor: the network plus the target mean it was centered on.
/// Centering with a zero-initialized output layer makes the variance-zero fit
/// exact and keeps early training stable.
#[derive(Debug, Clone)]
pub struct MlpModel {
    pub net: Mlp,
    pub y_mean: f64,
}

impl MlpModel {
    pub fn predict(&self, x: &[f64]) -> f64 {
        self.net.predict(x) + self.y_mean
    }
}

/// Trains a fresh regressor on the dataset.
pub(crate) fn fit(data: &Dataset, params: &MlpParams, seed: u64) -> MlpModel {
    let mut dims = vec![data.dim()];
    dims.extend_from_slice(&params.hidden);
    dims.push(1);
    let mut net = Mlp::new(&dims, seed);
    let last = net.layers.last_mut().unwrap();
    last.w.fill(0.0);
    last.b.fill(0.0);
    let y_mean = data.targets().iter().sum::<f64>() / data.len() as f64;

    let mut opt = Momentum::new(&net, params.step_size, params.momentum);
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15);
    let n = data.len();
    let mut order: Vec<usize> = (0..n).collect();
    for _ in 0..params.epochs {
        shuffle(&mut order, &mut rng);
        for chunk in order.chunks(params.batch_size) {
            let mut xb = Array2::zeros((chunk.len(), data.dim()));
            let mut yb = Vec::with_capacity(chunk.len());
            for (r, &i) in chunk.iter().enumerate() {
                xb.row_mut(r).assign(
                    &ndarray::ArrayView1::from_shape(data.dim(), data.row(i)).unwrap(),
                );
                yb.push(data.target(i) - y_mean);
            }
            let grads = net.mse_gradients(xb.view(), &yb);
            opt.update(&mut net, &grads);
        }
    }
    MlpModel { net, y_mean }
}

fn shuffle(order: &mut [usize], rng: &mut ChaCha8Rng) {
    for i in (1..order.len()).rev() {
        let j = rng.random_range(0..=i);
        order.swap(i, j);
    }
}
