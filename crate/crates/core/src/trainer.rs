//! Mean-squared-error regression for dense ReLU networks.
//!
//! Hidden layers are ReLU, the last layer is affine. Weights start from a
//! seeded Glorot-uniform draw and are fitted by mini-batch Adam; the shuffle
//! order comes from the same seeded stream, so a run is reproducible.

use ndarray::{Array1, Array2, Axis};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tracing::debug;

use crate::error::{Error, Result};
use crate::netmodel::{DenseNN, Layer};

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    /// Input width, hidden widths, output width.
    pub widths: Vec<usize>,
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub seed: u64,
    /// Stop once the full-data MSE falls to this value.
    pub target_mse: f64,
}

impl TrainConfig {
    pub fn new(widths: Vec<usize>) -> Self {
        Self {
            widths,
            epochs: 5000,
            batch_size: 32,
            lr: 1e-3,
            seed: 0,
            target_mse: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.widths.len() < 2 || self.widths.contains(&0) {
            return Err(Error::InvalidArgument(format!("layer widths {:?}", self.widths)));
        }
        if self.epochs == 0 || self.batch_size == 0 || !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(Error::InvalidArgument(
                "epochs, batch size and learning rate must be positive".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct TrainReport {
    pub nn: DenseNN,
    /// Full-data MSE after each epoch.
    pub mse_history: Vec<f64>,
    pub final_mse: f64,
}

/// Glorot-uniform weights, zero biases.
pub fn init_network(widths: &[usize], seed: u64) -> Result<DenseNN> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let last = widths.len() - 2;
    let layers = widths
        .windows(2)
        .enumerate()
        .map(|(k, w)| {
            let (fan_in, fan_out) = (w[0], w[1]);
            let a = (6.0 / (fan_in + fan_out) as f64).sqrt();
            let weight = Array2::from_shape_fn((fan_out, fan_in), |_| rng.gen_range(-a..=a));
            let bias = Array1::zeros(fan_out);
            if k == last {
                Layer::affine(weight, bias)
            } else {
                Layer::relu(weight, bias)
            }
        })
        .collect::<Result<Vec<_>>>()?;
    DenseNN::new(layers)
}

fn to_matrix(rows: &[Vec<f64>], width: usize) -> Result<Array2<f64>> {
    if let Some(r) = rows.iter().find(|r| r.len() != width) {
        return Err(Error::Shape(format!("row of length {}, expected {width}", r.len())));
    }
    Ok(Array2::from_shape_fn((rows.len(), width), |(i, j)| rows[i][j]))
}

/// `(∂W, ∂b)` for one layer.
pub type LayerGradient = (Array2<f64>, Array1<f64>);

/// MSE over all samples and outputs, and its gradient per layer as
/// `(∂W, ∂b)`. Rows of `x` and `y` are samples.
pub fn loss_and_gradient(nn: &DenseNN, x: &Array2<f64>, y: &Array2<f64>) -> (f64, Vec<LayerGradient>) {
    let mut acts = vec![x.clone()];
    let mut pres = Vec::with_capacity(nn.layers.len());
    for layer in &nn.layers {
        let v = acts.last().expect("non-empty").dot(&layer.weight.t()) + &layer.bias;
        let mut h = v.clone();
        for (j, &m) in layer.mask.iter().enumerate() {
            if m {
                h.column_mut(j).mapv_inplace(|t| t.max(0.0));
            }
        }
        pres.push(v);
        acts.push(h);
    }
    let out = acts.last().expect("non-empty");
    let diff = out - y;
    let count = diff.len() as f64;
    let loss = diff.iter().map(|d| d * d).sum::<f64>() / count;

    let mut grads = Vec::with_capacity(nn.layers.len());
    let mut d_h = diff * (2.0 / count);
    for (k, layer) in nn.layers.iter().enumerate().rev() {
        let mut d_v = d_h;
        for (j, &m) in layer.mask.iter().enumerate() {
            if m {
                let pre = pres[k].column(j);
                d_v.column_mut(j).zip_mut_with(&pre, |g, &p| {
                    if p <= 0.0 {
                        *g = 0.0;
                    }
                });
            }
        }
        let d_w = d_v.t().dot(&acts[k]);
        let d_b = d_v.sum_axis(Axis(0));
        d_h = d_v.dot(&layer.weight);
        grads.push((d_w, d_b));
    }
    grads.reverse();
    (loss, grads)
}

struct Adam {
    m: Vec<LayerGradient>,
    v: Vec<LayerGradient>,
    t: i32,
}

impl Adam {
    const BETA1: f64 = 0.9;
    const BETA2: f64 = 0.999;
    const EPS: f64 = 1e-8;

    fn new(nn: &DenseNN) -> Self {
        let zeros: Vec<_> = nn
            .layers
            .iter()
            .map(|l| (Array2::zeros(l.weight.dim()), Array1::zeros(l.bias.len())))
            .collect();
        Self {
            m: zeros.clone(),
            v: zeros,
            t: 0,
        }
    }

    fn step(&mut self, nn: &mut DenseNN, grads: &[LayerGradient], lr: f64) {
        self.t += 1;
        let c1 = 1.0 - Self::BETA1.powi(self.t);
        let c2 = 1.0 - Self::BETA2.powi(self.t);
        let update = |p: &mut f64, g: f64, m: &mut f64, v: &mut f64| {
            *m = Self::BETA1 * *m + (1.0 - Self::BETA1) * g;
            *v = Self::BETA2 * *v + (1.0 - Self::BETA2) * g * g;
            *p -= lr * (*m / c1) / ((*v / c2).sqrt() + Self::EPS);
        };
        for (k, layer) in nn.layers.iter_mut().enumerate() {
            let (gw, gb) = &grads[k];
            let (mw, mb) = &mut self.m[k];
            let (vw, vb) = &mut self.v[k];
            for (((p, &g), m), v) in layer.weight.iter_mut().zip(gw).zip(mw.iter_mut()).zip(vw.iter_mut()) {
                update(p, g, m, v);
            }
            for (((p, &g), m), v) in layer.bias.iter_mut().zip(gb).zip(mb.iter_mut()).zip(vb.iter_mut()) {
                update(p, g, m, v);
            }
        }
    }
}

/// Fits a network mapping `inputs` to `targets`.
pub fn train(inputs: &[Vec<f64>], targets: &[Vec<f64>], config: &TrainConfig) -> Result<TrainReport> {
    config.validate()?;
    if inputs.is_empty() {
        return Err(Error::InvalidArgument("empty dataset".into()));
    }
    if inputs.len() != targets.len() {
        return Err(Error::Shape(format!("{} inputs but {} targets", inputs.len(), targets.len())));
    }
    let x = to_matrix(inputs, config.widths[0])?;
    let y = to_matrix(targets, *config.widths.last().expect("validated"))?;
    let mut nn = init_network(&config.widths, config.seed)?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed.wrapping_add(1));
    let mut adam = Adam::new(&nn);
    let mut order: Vec<usize> = (0..inputs.len()).collect();
    let mut history = Vec::with_capacity(config.epochs);
    for epoch in 0..config.epochs {
        order.shuffle(&mut rng);
        for batch in order.chunks(config.batch_size) {
            let xb = x.select(Axis(0), batch);
            let yb = y.select(Axis(0), batch);
            let (loss, grads) = loss_and_gradient(&nn, &xb, &yb);
            if !loss.is_finite() {
                return Err(Error::Diverged {
                    epoch,
                    message: format!(
                        "batch loss {loss} (last epoch MSE {:?}, lr {})",
                        history.last(),
                        config.lr
                    ),
                });
            }
            adam.step(&mut nn, &grads, config.lr);
        }
        let (mse, _) = loss_and_gradient(&nn, &x, &y);
        if !mse.is_finite() {
            return Err(Error::Diverged {
                epoch,
                message: format!("epoch MSE {mse}"),
            });
        }
        history.push(mse);
        if epoch % 500 == 0 {
            debug!(epoch, mse, "training");
        }
        if mse <= config.target_mse {
            break;
        }
    }
    let final_mse = *history.last().expect("at least one epoch");
    Ok(TrainReport {
        nn,
        mse_history: history,
        final_mse,
    })
}
