//! Dense layers, LeakyReLU, squared-error metrics and Adam.

use rand::Rng;
use rand_distr::{Distribution, Uniform};
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Fully connected layer; `weights` is `[out, in]` row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseLayer {
    pub in_dim: usize,
    pub out_dim: usize,
    pub weights: Vec<f64>,
    pub bias: Option<Vec<f64>>,
}

impl DenseLayer {
    pub fn zeros(in_dim: usize, out_dim: usize, with_bias: bool) -> Self {
        DenseLayer {
            in_dim,
            out_dim,
            weights: vec![0.0; in_dim * out_dim],
            bias: with_bias.then(|| vec![0.0; out_dim]),
        }
    }

    /// Weights and bias drawn from `U(-1/sqrt(in), 1/sqrt(in))`.
    pub fn init_uniform<R: Rng + ?Sized>(in_dim: usize, out_dim: usize, with_bias: bool, rng: &mut R) -> Self {
        let bound = (1.0 / in_dim as f64).sqrt();
        let dist = Uniform::new_inclusive(-bound, bound).expect("finite bound");
        let weights = (0..in_dim * out_dim).map(|_| dist.sample(rng)).collect();
        let bias = with_bias.then(|| (0..out_dim).map(|_| dist.sample(rng)).collect());
        DenseLayer {
            in_dim,
            out_dim,
            weights,
            bias,
        }
    }

    pub fn from_parts(in_dim: usize, out_dim: usize, weights: Vec<f64>, bias: Option<Vec<f64>>) -> Result<Self> {
        if weights.len() != in_dim * out_dim {
            return Err(Error::Shape(format!(
                "weights have {} entries, expected {out_dim}x{in_dim}",
                weights.len()
            )));
        }
        if let Some(b) = &bias {
            if b.len() != out_dim {
                return Err(Error::Shape(format!("bias has {} entries, expected {out_dim}", b.len())));
            }
        }
        Ok(DenseLayer {
            in_dim,
            out_dim,
            weights,
            bias,
        })
    }

    pub fn param_count(&self) -> usize {
        self.weights.len() + self.bias.as_ref().map_or(0, Vec::len)
    }

    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.in_dim {
            return Err(Error::Shape(format!(
                "layer expects {} inputs, got {}",
                self.in_dim,
                x.len()
            )));
        }
        let mut out: Vec<f64> = self.weights.chunks_exact(self.in_dim).map(|row| dot(row, x)).collect();
        if let Some(b) = &self.bias {
            for (o, b) in out.iter_mut().zip(b) {
                *o += b;
            }
        }
        Ok(out)
    }

    /// Accumulates `dL/dW += g x^T`, `dL/db += g` into `grad` and returns
    /// `dL/dx` when `want_input` is set.
    pub fn backward(&self, x: &[f64], g: &[f64], grad: &mut DenseGrad, want_input: bool) -> Option<Vec<f64>> {
        debug_assert_eq!(g.len(), self.out_dim);
        for (row, &go) in grad.weights.chunks_exact_mut(self.in_dim).zip(g) {
            if go != 0.0 {
                axpy(go, x, row);
            }
        }
        if let Some(gb) = grad.bias.as_mut() {
            for (b, &go) in gb.iter_mut().zip(g) {
                *b += go;
            }
        }
        want_input.then(|| {
            let mut dx = vec![0.0; self.in_dim];
            for (row, &go) in self.weights.chunks_exact(self.in_dim).zip(g) {
                if go != 0.0 {
                    axpy(go, row, &mut dx);
                }
            }
            dx
        })
    }
}

/// Gradient buffers shaped like a [`DenseLayer`].
#[derive(Debug, Clone, PartialEq)]
pub struct DenseGrad {
    pub weights: Vec<f64>,
    pub bias: Option<Vec<f64>>,
}

impl DenseGrad {
    pub fn zeros_like(layer: &DenseLayer) -> Self {
        DenseGrad {
            weights: vec![0.0; layer.weights.len()],
            bias: layer.bias.as_ref().map(|b| vec![0.0; b.len()]),
        }
    }
}

/// Forward pass of a single layer as a free function.
pub fn dense_forward(layer: &DenseLayer, x: &[f64]) -> Result<Vec<f64>> {
    layer.forward(x)
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    // Four independent accumulators so the loop vectorizes.
    let mut acc = [0.0f64; 4];
    let chunks = a.len() / 4;
    for i in 0..chunks {
        let k = 4 * i;
        acc[0] += a[k] * b[k];
        acc[1] += a[k + 1] * b[k + 1];
        acc[2] += a[k + 2] * b[k + 2];
        acc[3] += a[k + 3] * b[k + 3];
    }
    let mut tail = 0.0;
    for k in 4 * chunks..a.len() {
        tail += a[k] * b[k];
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

#[inline]
pub(crate) fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

/// `x` if `x >= 0`, otherwise `slope * x`. The slope is used as given, sign included.
pub fn leaky_relu(x: &[f64], slope: f64) -> Vec<f64> {
    x.iter().map(|&v| if v >= 0.0 { v } else { slope * v }).collect()
}

/// Derivative of [`leaky_relu`]; 1 at zero.
pub fn leaky_relu_grad(x: &[f64], slope: f64) -> Vec<f64> {
    x.iter().map(|&v| if v >= 0.0 { 1.0 } else { slope }).collect()
}

/// `(mean squared error, root mean squared error)`.
pub fn mse_and_rmse(preds: &[f64], targets: &[f64]) -> Result<(f64, f64)> {
    if preds.is_empty() {
        return Err(Error::EmptyBatch);
    }
    if preds.len() != targets.len() {
        return Err(Error::Shape(format!(
            "{} predictions vs {} targets",
            preds.len(),
            targets.len()
        )));
    }
    let mse = preds.iter().zip(targets).map(|(p, t)| (p - t) * (p - t)).sum::<f64>() / preds.len() as f64;
    Ok((mse, mse.sqrt()))
}

/// Adam with bias-corrected moments. One `(m, v)` pair per parameter tensor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdamState {
    pub m: Vec<Vec<f64>>,
    pub v: Vec<Vec<f64>>,
    pub step_count: u64,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl AdamState {
    pub fn new(shapes: &[usize], learning_rate: f64) -> Self {
        AdamState {
            m: shapes.iter().map(|&n| vec![0.0; n]).collect(),
            v: shapes.iter().map(|&n| vec![0.0; n]).collect(),
            step_count: 0,
            learning_rate,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }

    /// Applies one update to `params` in place.
    pub fn step(&mut self, params: &mut [&mut [f64]], grads: &[Vec<f64>]) -> Result<()> {
        if params.len() != self.m.len() || grads.len() != self.m.len() {
            return Err(Error::Shape(format!(
                "optimizer tracks {} tensors, got {} params / {} grads",
                self.m.len(),
                params.len(),
                grads.len()
            )));
        }
        for (i, (p, g)) in params.iter().zip(grads).enumerate() {
            if p.len() != self.m[i].len() || g.len() != self.m[i].len() {
                return Err(Error::Shape(format!("tensor {i} does not match optimizer state")));
            }
        }
        self.step_count += 1;
        let t = self.step_count as i32;
        let bc1 = 1.0 - self.beta1.powi(t);
        let bc2 = 1.0 - self.beta2.powi(t);
        let (b1, b2, lr, eps) = (self.beta1, self.beta2, self.learning_rate, self.epsilon);
        for ((p, g), (m, v)) in params.iter_mut().zip(grads).zip(self.m.iter_mut().zip(self.v.iter_mut())) {
            for k in 0..g.len() {
                m[k] = b1 * m[k] + (1.0 - b1) * g[k];
                v[k] = b2 * v[k] + (1.0 - b2) * g[k] * g[k];
                let m_hat = m[k] / bc1;
                let v_hat = v[k] / bc2;
                p[k] -= lr * m_hat / (v_hat.sqrt() + eps);
            }
        }
        Ok(())
    }
}

/// Free-function form of [`AdamState::step`].
pub fn adam_step(params: &mut [&mut [f64]], grads: &[Vec<f64>], state: &mut AdamState) -> Result<()> {
    state.step(params, grads)
}
