//! The three regressors and their training loop.
//!
//! | kind            | pipeline                                                                     |
//! |-----------------|------------------------------------------------------------------------------|
//! | `Fnn`           | dense+bias, LeakyReLU -> dense+bias, LeakyReLU -> dense+bias -> y            |
//! | `QmlAmplitude`  | dense+bias, LeakyReLU -> amplitude encode -> PQC -> `<Z>` -> dense+bias -> y |
//! | `QmlAngle`      | dense+bias, LeakyReLU -> dense (no bias) -> `R_x` encode -> PQC -> `<Z>` -> dense+bias -> y |
//!
//! With the default 256 inputs this gives 67,857 / 65,825 / 67,873 trainable
//! parameters respectively.

use std::f64::consts::TAU;
use std::time::Instant;

use num_complex::Complex64;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Uniform};
use serde::{Deserialize, Serialize};

use crate::classical::{leaky_relu, leaky_relu_grad, mse_and_rmse, AdamState, DenseGrad, DenseLayer};
use crate::data::Subset;
use crate::encoders::{amplitude_encode_direct, amplitude_vjp, angle_encode, angle_state_derivative};
use crate::noise::NoiseParams;
use crate::pqc::{adjoint_from_output, measure_all_z, pqc_forward, PqcParams};
use crate::statesim::{QuantumState, MAX_QUBITS};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelKind {
    Fnn,
    QmlAngle,
    QmlAmplitude,
}

impl ModelKind {
    pub fn is_quantum(self) -> bool {
        !matches!(self, ModelKind::Fnn)
    }
}

impl std::str::FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fnn" => Ok(ModelKind::Fnn),
            "qml-angle" => Ok(ModelKind::QmlAngle),
            "qml-amplitude" => Ok(ModelKind::QmlAmplitude),
            other => Err(Error::Spec(format!(
                "unknown model kind `{other}` (expected fnn, qml-angle or qml-amplitude)"
            ))),
        }
    }
}

impl std::fmt::Display for ModelKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ModelKind::Fnn => "fnn",
            ModelKind::QmlAngle => "qml-angle",
            ModelKind::QmlAmplitude => "qml-amplitude",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelSpec {
    pub kind: ModelKind,
    pub input_dim: usize,
    pub hidden_dim: usize,
    pub n_qubits: usize,
    pub fnn_second_hidden: usize,
    pub pqc_layers: usize,
    pub leaky_slope: f64,
    pub seed: u64,
}

impl Default for ModelSpec {
    fn default() -> Self {
        ModelSpec::new(ModelKind::QmlAmplitude)
    }
}

impl ModelSpec {
    pub fn new(kind: ModelKind) -> Self {
        ModelSpec {
            kind,
            input_dim: 256,
            hidden_dim: 256,
            n_qubits: 8,
            fnn_second_hidden: 8,
            pqc_layers: 1,
            leaky_slope: -0.3,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Spec(m));
        if self.input_dim == 0 || self.hidden_dim == 0 {
            return fail("input_dim and hidden_dim must be positive".into());
        }
        if !self.leaky_slope.is_finite() {
            return fail("leaky_slope must be finite".into());
        }
        match self.kind {
            ModelKind::Fnn => {
                if self.fnn_second_hidden == 0 {
                    return fail("fnn_second_hidden must be positive".into());
                }
            }
            ModelKind::QmlAngle | ModelKind::QmlAmplitude => {
                if !(1..=MAX_QUBITS).contains(&self.n_qubits) {
                    return fail(format!("n_qubits must be in 1..={MAX_QUBITS}, got {}", self.n_qubits));
                }
                if self.pqc_layers == 0 {
                    return fail("pqc_layers must be at least 1".into());
                }
                if self.kind == ModelKind::QmlAmplitude && self.hidden_dim > 1 << self.n_qubits {
                    return fail(format!(
                        "hidden_dim {} does not fit in 2^{} amplitudes",
                        self.hidden_dim, self.n_qubits
                    ));
                }
            }
        }
        Ok(())
    }

    /// Names and sizes of every trainable tensor, in canonical order.
    pub fn tensor_layout(&self) -> Result<Vec<(&'static str, usize)>> {
        self.validate()?;
        let (i, h, n) = (self.input_dim, self.hidden_dim, self.n_qubits);
        let mut layout = vec![("hidden.weight", h * i), ("hidden.bias", h)];
        let head_in = match self.kind {
            ModelKind::Fnn => {
                let s = self.fnn_second_hidden;
                layout.extend([("second.weight", s * h), ("second.bias", s)]);
                s
            }
            ModelKind::QmlAngle => {
                layout.extend([("aux.weight", n * h), ("pqc.theta", 3 * n * self.pqc_layers)]);
                n
            }
            ModelKind::QmlAmplitude => {
                layout.push(("pqc.theta", 3 * n * self.pqc_layers));
                n
            }
        };
        layout.extend([("output.weight", head_in), ("output.bias", 1)]);
        Ok(layout)
    }
}

/// Exact number of trainable parameters of `build_model(spec)`.
pub fn count_params(spec: &ModelSpec) -> Result<usize> {
    Ok(spec.tensor_layout()?.iter().map(|(_, n)| n).sum())
}

#[derive(Debug, Clone, PartialEq)]
pub struct HybridModel {
    pub spec: ModelSpec,
    pub hidden: DenseLayer,
    /// FNN second hidden layer, or the angle model's bias-free auxiliary layer.
    pub middle: Option<DenseLayer>,
    pub pqc: Option<PqcParams>,
    pub output: DenseLayer,
}

/// Instantiates a model with seeded initial parameters.
pub fn build_model(spec: &ModelSpec) -> Result<HybridModel> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let (i, h, n) = (spec.input_dim, spec.hidden_dim, spec.n_qubits);
    let hidden = DenseLayer::init_uniform(i, h, true, &mut rng);
    let (middle, pqc, head_in) = match spec.kind {
        ModelKind::Fnn => {
            let s = spec.fnn_second_hidden;
            (Some(DenseLayer::init_uniform(h, s, true, &mut rng)), None, s)
        }
        ModelKind::QmlAngle => {
            let aux = DenseLayer::init_uniform(h, n, false, &mut rng);
            (Some(aux), Some(init_pqc(n, spec.pqc_layers, &mut rng)), n)
        }
        ModelKind::QmlAmplitude => (None, Some(init_pqc(n, spec.pqc_layers, &mut rng)), n),
    };
    let output = DenseLayer::init_uniform(head_in, 1, true, &mut rng);
    Ok(HybridModel {
        spec: spec.clone(),
        hidden,
        middle,
        pqc,
        output,
    })
}

fn init_pqc(n_qubits: usize, n_layers: usize, rng: &mut ChaCha8Rng) -> PqcParams {
    let dist = Uniform::new(0.0, TAU).expect("finite range");
    let thetas = (0..3 * n_qubits * n_layers).map(|_| dist.sample(rng)).collect();
    PqcParams {
        n_qubits,
        n_layers,
        thetas,
    }
}

/// Per-tensor gradients aligned with [`ModelSpec::tensor_layout`].
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub tensors: Vec<Vec<f64>>,
}

impl Gradients {
    pub fn add_assign(&mut self, other: &Gradients) {
        for (a, b) in self.tensors.iter_mut().zip(&other.tensors) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += y;
            }
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.tensors.iter().flatten().fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// Gradient accumulators for one pass; flattened by [`LayerGrads::into_gradients`].
pub(crate) struct LayerGrads {
    pub hidden: DenseGrad,
    pub middle: Option<DenseGrad>,
    pub pqc: Option<Vec<f64>>,
    pub output: DenseGrad,
}

impl LayerGrads {
    pub(crate) fn zeros(model: &HybridModel) -> Self {
        LayerGrads {
            hidden: DenseGrad::zeros_like(&model.hidden),
            middle: model.middle.as_ref().map(DenseGrad::zeros_like),
            pqc: model.pqc.as_ref().map(|p| vec![0.0; p.thetas.len()]),
            output: DenseGrad::zeros_like(&model.output),
        }
    }

    pub(crate) fn into_gradients(self) -> Gradients {
        let mut tensors = vec![self.hidden.weights];
        tensors.extend(self.hidden.bias);
        if let Some(m) = self.middle {
            tensors.push(m.weights);
            tensors.extend(m.bias);
        }
        tensors.extend(self.pqc);
        tensors.push(self.output.weights);
        tensors.extend(self.output.bias);
        Gradients { tensors }
    }
}

/// Intermediate values of one forward pass.
#[derive(Debug, Clone)]
pub struct Trace {
    pub z1: Vec<f64>,
    pub a1: Vec<f64>,
    /// FNN: second pre-activation. Angle model: rotation angles.
    pub z2: Option<Vec<f64>>,
    pub a2: Option<Vec<f64>>,
    /// State fed into the PQC.
    pub encoded: Option<QuantumState>,
    /// State leaving the PQC.
    pub circuit_out: Option<QuantumState>,
    pub head_in: Vec<f64>,
    pub prediction: f64,
}

impl HybridModel {
    pub fn param_count(&self) -> usize {
        self.tensors().iter().map(|(_, t)| t.len()).sum()
    }

    /// `(name, values)` of every trainable tensor in canonical order.
    pub fn tensors(&self) -> Vec<(&'static str, &[f64])> {
        let names = self.spec.tensor_layout().expect("validated at build time");
        let mut values: Vec<&[f64]> = vec![&self.hidden.weights];
        values.extend(self.hidden.bias.as_deref());
        if let Some(m) = &self.middle {
            values.push(&m.weights);
            values.extend(m.bias.as_deref());
        }
        if let Some(p) = &self.pqc {
            values.push(&p.thetas);
        }
        values.push(&self.output.weights);
        values.extend(self.output.bias.as_deref());
        names.into_iter().map(|(n, _)| n).zip(values).collect()
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out: Vec<&mut [f64]> = vec![&mut self.hidden.weights];
        if let Some(b) = self.hidden.bias.as_mut() {
            out.push(b);
        }
        if let Some(m) = self.middle.as_mut() {
            out.push(&mut m.weights);
            if let Some(b) = m.bias.as_mut() {
                out.push(b);
            }
        }
        if let Some(p) = self.pqc.as_mut() {
            out.push(&mut p.thetas);
        }
        out.push(&mut self.output.weights);
        if let Some(b) = self.output.bias.as_mut() {
            out.push(b);
        }
        out
    }

    /// The state presented to the PQC for input `x`, plus the classical trace up to it.
    pub fn encode(&self, x: &[f64]) -> Result<(Vec<f64>, Vec<f64>, Option<Vec<f64>>, QuantumState)> {
        let z1 = self.hidden.forward(x)?;
        let a1 = leaky_relu(&z1, self.spec.leaky_slope);
        match self.spec.kind {
            ModelKind::QmlAmplitude => {
                let state = amplitude_encode_direct(&a1, self.spec.n_qubits)?;
                Ok((z1, a1, None, state))
            }
            ModelKind::QmlAngle => {
                let angles = self.middle.as_ref().expect("aux layer").forward(&a1)?;
                let state = angle_encode(&angles)?;
                Ok((z1, a1, Some(angles), state))
            }
            ModelKind::Fnn => Err(Error::Spec("the FNN has no quantum encoding".into())),
        }
    }

    pub fn forward_trace(&self, x: &[f64]) -> Result<Trace> {
        if x.len() != self.spec.input_dim {
            return Err(Error::Shape(format!(
                "model expects {} features, got {}",
                self.spec.input_dim,
                x.len()
            )));
        }
        let trace = match self.spec.kind {
            ModelKind::Fnn => {
                let z1 = self.hidden.forward(x)?;
                let a1 = leaky_relu(&z1, self.spec.leaky_slope);
                let z2 = self.middle.as_ref().expect("second layer").forward(&a1)?;
                let a2 = leaky_relu(&z2, self.spec.leaky_slope);
                Trace {
                    z1,
                    a1,
                    head_in: a2.clone(),
                    z2: Some(z2),
                    a2: Some(a2),
                    encoded: None,
                    circuit_out: None,
                    prediction: 0.0,
                }
            }
            ModelKind::QmlAmplitude | ModelKind::QmlAngle => {
                let (z1, a1, z2, state) = self.encode(x)?;
                let out = pqc_forward(state.clone(), self.pqc.as_ref().expect("pqc"))?;
                Trace {
                    z1,
                    a1,
                    z2,
                    a2: None,
                    head_in: measure_all_z(&out),
                    encoded: Some(state),
                    circuit_out: Some(out),
                    prediction: 0.0,
                }
            }
        };
        let prediction = self.output.forward(&trace.head_in)?[0];
        Ok(Trace { prediction, ..trace })
    }

    pub fn forward(&self, x: &[f64]) -> Result<f64> {
        Ok(self.forward_trace(x)?.prediction)
    }

    pub fn predict(&self, data: &Subset<'_>) -> Result<Vec<f64>> {
        (0..data.len()).map(|i| self.forward(data.input(i))).collect()
    }

    /// Back-propagates `d_pred = dL/dy_hat` for one sample into `acc`.
    fn backward_sample(&self, x: &[f64], trace: &Trace, d_pred: f64, acc: &mut LayerGrads) -> Result<()> {
        let slope = self.spec.leaky_slope;
        let d_head = self
            .output
            .backward(&trace.head_in, &[d_pred], &mut acc.output, true)
            .expect("input gradient requested");
        let d_a1 = match self.spec.kind {
            ModelKind::Fnn => {
                let z2 = trace.z2.as_ref().expect("fnn trace");
                let d_z2: Vec<f64> = d_head.iter().zip(leaky_relu_grad(z2, slope)).map(|(g, d)| g * d).collect();
                let middle = self.middle.as_ref().expect("second layer");
                middle
                    .backward(&trace.a1, &d_z2, acc.middle.as_mut().expect("second grad"), true)
                    .expect("input gradient requested")
            }
            ModelKind::QmlAmplitude => {
                let out = trace.circuit_out.as_ref().expect("quantum trace");
                let adj = adjoint_from_output(out, self.pqc.as_ref().expect("pqc"), &d_head)?;
                add_into(acc.pqc.as_mut().expect("pqc grad"), &adj.thetas);
                let real: Vec<f64> = adj.input.iter().map(|g| g.re).collect();
                amplitude_vjp(&trace.a1, &real)
            }
            ModelKind::QmlAngle => {
                let out = trace.circuit_out.as_ref().expect("quantum trace");
                let adj = adjoint_from_output(out, self.pqc.as_ref().expect("pqc"), &d_head)?;
                add_into(acc.pqc.as_mut().expect("pqc grad"), &adj.thetas);
                let angles = trace.z2.as_ref().expect("angles");
                let d_angles = angle_input_grad(angles, &adj.input);
                let aux = self.middle.as_ref().expect("aux layer");
                aux.backward(&trace.a1, &d_angles, acc.middle.as_mut().expect("aux grad"), true)
                    .expect("input gradient requested")
            }
        };
        let d_z1: Vec<f64> = d_a1.iter().zip(leaky_relu_grad(&trace.z1, slope)).map(|(g, d)| g * d).collect();
        self.hidden.backward(x, &d_z1, &mut acc.hidden, false);
        Ok(())
    }

    /// Gradient of the batch mean squared error with respect to every
    /// parameter, plus the batch MSE.
    pub fn backward(&self, inputs: &[&[f64]], targets: &[f64]) -> Result<(Gradients, f64)> {
        if inputs.is_empty() {
            return Err(Error::EmptyBatch);
        }
        if inputs.len() != targets.len() {
            return Err(Error::Shape(format!("{} inputs vs {} targets", inputs.len(), targets.len())));
        }
        let (acc, sse) = self.backward_chunk(inputs, targets, inputs.len())?;
        Ok((acc.into_gradients(), sse / inputs.len() as f64))
    }

    /// Sums per-sample gradients over a chunk. `batch_len` sets the `2/B` scale.
    fn backward_chunk(&self, inputs: &[&[f64]], targets: &[f64], batch_len: usize) -> Result<(LayerGrads, f64)> {
        let mut acc = LayerGrads::zeros(self);
        let mut sse = 0.0;
        for (x, &y) in inputs.iter().zip(targets) {
            let trace = self.forward_trace(x)?;
            let err = trace.prediction - y;
            sse += err * err;
            self.backward_sample(x, &trace, 2.0 * err / batch_len as f64, &mut acc)?;
        }
        Ok((acc, sse))
    }

    /// As [`HybridModel::backward`], splitting the batch into `chunks`
    /// contiguous pieces evaluated in parallel and summed in chunk order.
    #[cfg(feature = "parallel")]
    pub fn backward_parallel(&self, inputs: &[&[f64]], targets: &[f64], chunks: usize) -> Result<(Gradients, f64)> {
        use rayon::prelude::*;
        if chunks <= 1 {
            return self.backward(inputs, targets);
        }
        if inputs.is_empty() {
            return Err(Error::EmptyBatch);
        }
        let size = inputs.len().div_ceil(chunks);
        let parts: Vec<Result<(LayerGrads, f64)>> = inputs
            .par_chunks(size)
            .zip(targets.par_chunks(size))
            .map(|(xs, ys)| self.backward_chunk(xs, ys, inputs.len()))
            .collect();
        let mut total: Option<(Gradients, f64)> = None;
        for part in parts {
            let (g, sse) = part?;
            let g = g.into_gradients();
            match total.as_mut() {
                None => total = Some((g, sse)),
                Some((t, s)) => {
                    t.add_assign(&g);
                    *s += sse;
                }
            }
        }
        let (g, sse) = total.expect("non-empty batch");
        Ok((g, sse / inputs.len() as f64))
    }
}

fn add_into(acc: &mut [f64], g: &[f64]) {
    for (a, b) in acc.iter_mut().zip(g) {
        *a += b;
    }
}

/// Chains the PQC input gradient through `tensor_i R_x(angle_i)|0>`.
pub(crate) fn angle_input_grad(angles: &[f64], input_grad: &[Complex64]) -> Vec<f64> {
    (0..angles.len())
        .map(|slot| {
            angle_state_derivative(angles, slot)
                .iter()
                .zip(input_grad)
                .map(|(d, g)| (g.conj() * d).re)
                .sum()
        })
        .collect()
}

/// Free-function form of [`HybridModel::forward`].
pub fn forward(model: &HybridModel, x: &[f64]) -> Result<f64> {
    model.forward(x)
}

/// Free-function form of [`HybridModel::backward`]; returns gradients only.
pub fn backward(model: &HybridModel, inputs: &[&[f64]], targets: &[f64]) -> Result<Gradients> {
    Ok(model.backward(inputs, targets)?.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub shuffle_seed: u64,
    /// Worker threads for per-sample gradients; 1 keeps runs bit-reproducible.
    pub threads: usize,
    /// When false, per-epoch wall-clock times are recorded as zero.
    pub record_timing: bool,
    /// Train and evaluate under this noise model (quantum kinds only).
    pub noise: Option<NoiseParams>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 100,
            batch_size: 64,
            learning_rate: 0.001,
            shuffle_seed: 0,
            threads: 1,
            record_timing: true,
            noise: None,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(Error::Spec("epochs and batch_size must be at least 1".into()));
        }
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Spec(format!("invalid learning rate {}", self.learning_rate)));
        }
        if self.threads == 0 {
            return Err(Error::Spec("threads must be at least 1".into()));
        }
        if let Some(n) = &self.noise {
            n.validate()?;
        }
        Ok(())
    }
}

/// Position of the shuffle generator, enough to resume it exactly.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RngState {
    pub seed: u64,
    pub stream: u64,
    #[serde(with = "u128_string")]
    pub word_pos: u128,
}

impl RngState {
    pub fn capture(seed: u64, rng: &ChaCha8Rng) -> Self {
        RngState {
            seed,
            stream: rng.get_stream(),
            word_pos: rng.get_word_pos(),
        }
    }

    pub fn restore(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(self.stream);
        rng.set_word_pos(self.word_pos);
        rng
    }
}

mod u128_string {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &u128, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&v.to_string())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<u128, D::Error> {
        String::deserialize(d)?.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainHistory {
    pub train_rmse: Vec<f64>,
    pub test_rmse: Vec<f64>,
    pub seconds: Vec<f64>,
    /// Observation ids of the test rows, in residual order.
    pub test_rows: Vec<usize>,
    /// `target - prediction` on the test rows after each epoch.
    pub test_residuals: Vec<Vec<f64>>,
    pub rng_state: RngState,
}

impl TrainHistory {
    pub fn epochs(&self) -> usize {
        self.test_rmse.len()
    }

    pub fn final_residuals(&self) -> &[f64] {
        self.test_residuals.last().map(Vec::as_slice).unwrap_or(&[])
    }
}

/// Predictions with or without noise.
pub fn predict_with(model: &HybridModel, data: &Subset<'_>, noise: Option<&NoiseParams>) -> Result<Vec<f64>> {
    match noise {
        None => model.predict(data),
        Some(n) => (0..data.len()).map(|i| crate::noise::noisy_forward(model, data.input(i), n)).collect(),
    }
}

fn residuals(preds: &[f64], data: &Subset<'_>) -> Vec<f64> {
    preds.iter().enumerate().map(|(i, p)| data.target(i) - p).collect()
}

/// Mini-batch Adam over shuffled epochs. The final partial batch is kept.
pub fn train(model: &mut HybridModel, train_set: &Subset<'_>, test_set: &Subset<'_>, config: &TrainConfig) -> Result<TrainHistory> {
    config.validate()?;
    if train_set.is_empty() || test_set.is_empty() {
        return Err(Error::EmptyBatch);
    }
    for set in [train_set, test_set] {
        if set.dataset.n_features != model.spec.input_dim {
            return Err(Error::Shape(format!(
                "dataset has {} features, model expects {}",
                set.dataset.n_features, model.spec.input_dim
            )));
        }
    }
    if config.noise.is_some() && !model.spec.kind.is_quantum() {
        return Err(Error::Spec("noisy training needs a quantum model".into()));
    }

    #[cfg(feature = "parallel")]
    let pool = (config.threads > 1)
        .then(|| rayon::ThreadPoolBuilder::new().num_threads(config.threads).build())
        .transpose()
        .map_err(|e| Error::Spec(format!("thread pool: {e}")))?;

    let shapes: Vec<usize> = model.tensors().iter().map(|(_, t)| t.len()).collect();
    let mut adam = AdamState::new(&shapes, config.learning_rate);
    let mut rng = ChaCha8Rng::seed_from_u64(config.shuffle_seed);
    let mut order: Vec<usize> = (0..train_set.len()).collect();
    let mut history = TrainHistory {
        train_rmse: Vec::with_capacity(config.epochs),
        test_rmse: Vec::with_capacity(config.epochs),
        seconds: Vec::with_capacity(config.epochs),
        test_rows: test_set.rows.clone(),
        test_residuals: Vec::with_capacity(config.epochs),
        rng_state: RngState::capture(config.shuffle_seed, &rng),
    };
    let noise = config.noise.as_ref();

    for _ in 0..config.epochs {
        let started = Instant::now();
        order.shuffle(&mut rng);
        for batch in order.chunks(config.batch_size) {
            let inputs: Vec<&[f64]> = batch.iter().map(|&i| train_set.input(i)).collect();
            let targets: Vec<f64> = batch.iter().map(|&i| train_set.target(i)).collect();
            let grads = match noise {
                Some(n) => crate::noise::noisy_train_gradient(model, &inputs, &targets, n)?,
                None => {
                    #[cfg(feature = "parallel")]
                    let g = match &pool {
                        Some(p) => p.install(|| model.backward_parallel(&inputs, &targets, config.threads))?.0,
                        None => model.backward(&inputs, &targets)?.0,
                    };
                    #[cfg(not(feature = "parallel"))]
                    let g = model.backward(&inputs, &targets)?.0;
                    g
                }
            };
            adam.step(&mut model.tensors_mut(), &grads.tensors)?;
        }
        let elapsed = started.elapsed().as_secs_f64();

        let train_preds = predict_with(model, train_set, noise)?;
        let train_targets: Vec<f64> = (0..train_set.len()).map(|i| train_set.target(i)).collect();
        let test_preds = predict_with(model, test_set, noise)?;
        let test_targets: Vec<f64> = (0..test_set.len()).map(|i| test_set.target(i)).collect();
        history.train_rmse.push(mse_and_rmse(&train_preds, &train_targets)?.1);
        history.test_rmse.push(mse_and_rmse(&test_preds, &test_targets)?.1);
        history.test_residuals.push(residuals(&test_preds, test_set));
        history.seconds.push(if config.record_timing { elapsed } else { 0.0 });
    }
    history.rng_state = RngState::capture(config.shuffle_seed, &rng);
    Ok(history)
}
