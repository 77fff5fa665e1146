//! Density-matrix simulation of the quantum pipeline under gate noise.
//!
//! A density matrix on `n` qubits is stored row-major as a `4^n` vector and
//! treated as a `2n`-qubit register: qubit `q` of the row index is register
//! qubit `q`, qubit `q` of the column index is register qubit `n + q`. Then
//! `K rho K^dagger` is `K` on the row qubit followed by `conj(K)` on the
//! column qubit, which reuses the state-vector kernels.
//!
//! Noise placement: every single-qubit gate (each `ROT` counts as one) is followed by 1q depolarizing,
//! amplitude damping and dephasing on its qubit; every CNOT by 2q
//! depolarizing on its pair. Readout error scales each `<Z>` by `1 - 2p`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::classical::{leaky_relu, leaky_relu_grad};
use crate::encoders::{amplitude_plan, amplitude_vjp, normalized_padded, prep_circuit, PrepGate};
use crate::hybrid::{Gradients, HybridModel, LayerGrads, ModelKind};
use crate::pqc::{parameter_shift_gradient, steps, PqcParams, Step};
use crate::statesim::{apply_1q_raw, apply_cnot_raw, qubit_mask, Gate1Q, QuantumState, MAX_QUBITS, ONE, ZERO};
use crate::{Error, Result};

/// Largest register simulated as a density matrix (`4^12` amplitudes).
pub const MAX_DM_QUBITS: usize = 12;

const COMPLETENESS_TOL: f64 = 1e-10;
const FD_STEP: f64 = 1e-5;

#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    n_qubits: usize,
    rho: Vec<Complex64>,
}

impl DensityMatrix {
    pub fn from_pure(state: &QuantumState) -> Result<Self> {
        let n = state.n_qubits();
        if n > MAX_DM_QUBITS {
            return Err(Error::Capacity(n));
        }
        let psi = state.amplitudes();
        let mut rho = Vec::with_capacity(psi.len() * psi.len());
        for a in psi {
            rho.extend(psi.iter().map(|b| a * b.conj()));
        }
        Ok(DensityMatrix { n_qubits: n, rho })
    }

    pub fn zero_state(n_qubits: usize) -> Result<Self> {
        DensityMatrix::from_pure(&QuantumState::new_zero_state(n_qubits)?)
    }

    /// Wraps a row-major `2^n x 2^n` matrix. Only the shape is checked.
    pub fn from_matrix(n_qubits: usize, rho: Vec<Complex64>) -> Result<Self> {
        if !(1..=MAX_DM_QUBITS).contains(&n_qubits) {
            return Err(Error::Capacity(n_qubits));
        }
        if rho.len() != 1 << (2 * n_qubits) {
            return Err(Error::Shape(format!(
                "density matrix on {n_qubits} qubits needs {} entries, got {}",
                1usize << (2 * n_qubits),
                rho.len()
            )));
        }
        Ok(DensityMatrix { n_qubits, rho })
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn dim(&self) -> usize {
        1 << self.n_qubits
    }

    /// Row-major entries.
    pub fn entries(&self) -> &[Complex64] {
        &self.rho
    }

    pub fn get(&self, row: usize, col: usize) -> Complex64 {
        self.rho[row * self.dim() + col]
    }

    pub fn trace(&self) -> Complex64 {
        (0..self.dim()).map(|i| self.get(i, i)).sum()
    }

    /// `max |rho - rho^dagger|`.
    pub fn hermiticity_defect(&self) -> f64 {
        let d = self.dim();
        let mut worst: f64 = 0.0;
        for r in 0..d {
            for c in r..d {
                worst = worst.max((self.get(r, c) - self.get(c, r).conj()).norm());
            }
        }
        worst
    }

    fn check_qubit(&self, q: usize) -> Result<()> {
        if q < self.n_qubits {
            Ok(())
        } else {
            Err(Error::Index(format!("qubit {q} out of range for {} qubits", self.n_qubits)))
        }
    }

    pub fn apply_unitary_1q(&mut self, qubit: usize, gate: &Gate1Q) -> Result<()> {
        self.check_qubit(qubit)?;
        self.conjugate_1q(qubit, &gate.matrix);
        Ok(())
    }

    pub fn apply_cnot(&mut self, control: usize, target: usize) -> Result<()> {
        self.check_qubit(control)?;
        self.check_qubit(target)?;
        if control == target {
            return Err(Error::Index(format!("CNOT control and target are both {control}")));
        }
        self.cnot_unchecked(control, target);
        Ok(())
    }

    fn cnot_unchecked(&mut self, control: usize, target: usize) {
        let n = self.n_qubits;
        apply_cnot_raw(&mut self.rho, 2 * n, control, target);
        apply_cnot_raw(&mut self.rho, 2 * n, n + control, n + target);
    }

    /// `rho -> K rho K^dagger` for a single-qubit `K`.
    fn conjugate_1q(&mut self, qubit: usize, k: &[[Complex64; 2]; 2]) {
        conjugate_1q_raw(&mut self.rho, self.n_qubits, qubit, k);
    }

    /// `<Z_qubit> = tr(rho Z_qubit)`.
    pub fn expval_z(&self, qubit: usize) -> Result<f64> {
        self.check_qubit(qubit)?;
        let mask = qubit_mask(self.n_qubits, qubit);
        Ok((0..self.dim())
            .map(|i| {
                let p = self.get(i, i).re;
                if i & mask == 0 {
                    p
                } else {
                    -p
                }
            })
            .sum())
    }

    /// Applies a channel given by Kraus operators to one or two qubits.
    pub fn apply_kraus(&mut self, qubits: &[usize], kraus: &KrausSet) -> Result<()> {
        if qubits.len() != kraus.arity {
            return Err(Error::Channel(format!(
                "{}-qubit channel applied to {} qubit(s)",
                kraus.arity,
                qubits.len()
            )));
        }
        for &q in qubits {
            self.check_qubit(q)?;
        }
        if qubits.len() == 2 && qubits[0] == qubits[1] {
            return Err(Error::Index("two-qubit channel on a repeated qubit".into()));
        }
        kraus.check_complete()?;
        self.apply_kraus_unchecked(qubits, kraus);
        Ok(())
    }

    fn apply_kraus_unchecked(&mut self, qubits: &[usize], kraus: &KrausSet) {
        let n = self.n_qubits;
        let mut out = vec![ZERO; self.rho.len()];
        let mut work = vec![ZERO; self.rho.len()];
        for op in &kraus.ops {
            work.copy_from_slice(&self.rho);
            match kraus.arity {
                1 => {
                    let k = [[op[0], op[1]], [op[2], op[3]]];
                    conjugate_1q_raw(&mut work, n, qubits[0], &k);
                }
                _ => {
                    let mut k = [[ZERO; 4]; 4];
                    let mut kc = [[ZERO; 4]; 4];
                    for r in 0..4 {
                        for c in 0..4 {
                            k[r][c] = op[4 * r + c];
                            kc[r][c] = op[4 * r + c].conj();
                        }
                    }
                    apply_2q_raw(&mut work, 2 * n, qubits[0], qubits[1], &k);
                    apply_2q_raw(&mut work, 2 * n, n + qubits[0], n + qubits[1], &kc);
                }
            }
            for (o, w) in out.iter_mut().zip(&work) {
                *o += w;
            }
        }
        self.rho = out;
    }
}

fn conjugate_1q_raw(rho: &mut [Complex64], n: usize, qubit: usize, k: &[[Complex64; 2]; 2]) {
    let kc = [[k[0][0].conj(), k[0][1].conj()], [k[1][0].conj(), k[1][1].conj()]];
    apply_1q_raw(rho, 2 * n, qubit, k);
    apply_1q_raw(rho, 2 * n, n + qubit, &kc);
}

/// Applies a 4x4 matrix to `(q1, q2)`; basis order `|b_q1 b_q2>`.
fn apply_2q_raw(amps: &mut [Complex64], n: usize, q1: usize, q2: usize, m: &[[Complex64; 4]; 4]) {
    let m1 = qubit_mask(n, q1);
    let m2 = qubit_mask(n, q2);
    for base in 0..amps.len() {
        if base & (m1 | m2) != 0 {
            continue;
        }
        let idx = [base, base | m2, base | m1, base | m1 | m2];
        let v = idx.map(|i| amps[i]);
        for (r, &i) in idx.iter().enumerate() {
            amps[i] = m[r][0] * v[0] + m[r][1] * v[1] + m[r][2] * v[2] + m[r][3] * v[3];
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ChannelKind {
    Depol1Q,
    Depol2Q,
    AmpDamp,
    Dephase,
}

/// Kraus operators of a 1- or 2-qubit channel, each row-major `d x d`.
#[derive(Debug, Clone, PartialEq)]
pub struct KrausSet {
    pub arity: usize,
    pub ops: Vec<Vec<Complex64>>,
}

impl KrausSet {
    pub fn new(arity: usize, ops: Vec<Vec<Complex64>>) -> Result<Self> {
        if !(1..=2).contains(&arity) {
            return Err(Error::Channel(format!("unsupported channel arity {arity}")));
        }
        let d = 1 << arity;
        if ops.is_empty() || ops.iter().any(|k| k.len() != d * d) {
            return Err(Error::Channel(format!("Kraus operators must be {d}x{d}")));
        }
        let set = KrausSet { arity, ops };
        set.check_complete()?;
        Ok(set)
    }

    /// `max |sum_i K_i^dagger K_i - I|`.
    pub fn completeness_defect(&self) -> f64 {
        let d = 1 << self.arity;
        let mut worst: f64 = 0.0;
        for r in 0..d {
            for c in 0..d {
                let s: Complex64 = self
                    .ops
                    .iter()
                    .map(|k| (0..d).map(|j| k[j * d + r].conj() * k[j * d + c]).sum::<Complex64>())
                    .sum();
                let target = if r == c { ONE } else { ZERO };
                worst = worst.max((s - target).norm());
            }
        }
        worst
    }

    fn check_complete(&self) -> Result<()> {
        let defect = self.completeness_defect();
        if defect <= COMPLETENESS_TOL {
            Ok(())
        } else {
            Err(Error::Channel(format!("Kraus set is not trace preserving (defect {defect:.3e})")))
        }
    }
}

fn pauli(i: usize) -> [[Complex64; 2]; 2] {
    [Gate1Q::IDENTITY, Gate1Q::X, Gate1Q::Y, Gate1Q::Z][i].matrix
}

fn scaled_1q(m: [[Complex64; 2]; 2], s: f64) -> Vec<Complex64> {
    vec![m[0][0] * s, m[0][1] * s, m[1][0] * s, m[1][1] * s]
}

fn kron_scaled(a: [[Complex64; 2]; 2], b: [[Complex64; 2]; 2], s: f64) -> Vec<Complex64> {
    let mut out = vec![ZERO; 16];
    for r in 0..4 {
        for c in 0..4 {
            out[4 * r + c] = a[r / 2][c / 2] * b[r % 2][c % 2] * s;
        }
    }
    out
}

/// Kraus operators of a standard channel with probability `p`.
pub fn channel(kind: ChannelKind, p: f64) -> Result<KrausSet> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::Channel(format!("probability {p} outside [0, 1]")));
    }
    let ops = match kind {
        ChannelKind::Depol1Q => (0..4)
            .map(|i| scaled_1q(pauli(i), if i == 0 { (1.0 - p).sqrt() } else { (p / 3.0).sqrt() }))
            .collect(),
        ChannelKind::Depol2Q => (0..16)
            .map(|i| {
                let s = if i == 0 { (1.0 - p).sqrt() } else { (p / 15.0).sqrt() };
                kron_scaled(pauli(i / 4), pauli(i % 4), s)
            })
            .collect(),
        ChannelKind::AmpDamp => {
            let c = |x: f64| Complex64::new(x, 0.0);
            vec![
                vec![ONE, ZERO, ZERO, c((1.0 - p).sqrt())],
                vec![ZERO, c(p.sqrt()), ZERO, ZERO],
            ]
        }
        ChannelKind::Dephase => vec![scaled_1q(pauli(0), (1.0 - p).sqrt()), scaled_1q(pauli(3), p.sqrt())],
    };
    KrausSet::new(if kind == ChannelKind::Depol2Q { 2 } else { 1 }, ops)
}

/// Free-function form of [`DensityMatrix::apply_kraus`].
pub fn apply_kraus(mut rho: DensityMatrix, qubits: &[usize], kraus: &KrausSet) -> Result<DensityMatrix> {
    rho.apply_kraus(qubits, kraus)?;
    Ok(rho)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NoiseParams {
    pub p_depol_1q: f64,
    pub p_depol_2q: f64,
    pub p_amp_damp: f64,
    pub p_dephase: f64,
    pub p_readout: f64,
    /// Whether state-preparation gates are noisy as well.
    pub noisy_encoding: bool,
}

impl Default for NoiseParams {
    fn default() -> Self {
        NoiseParams {
            p_depol_1q: 0.0009,
            p_depol_2q: 0.0142,
            p_amp_damp: 0.00023,
            p_dephase: 0.00037,
            p_readout: 0.051,
            noisy_encoding: true,
        }
    }
}

impl NoiseParams {
    pub fn noiseless() -> Self {
        NoiseParams {
            p_depol_1q: 0.0,
            p_depol_2q: 0.0,
            p_amp_damp: 0.0,
            p_dephase: 0.0,
            p_readout: 0.0,
            noisy_encoding: true,
        }
    }

    /// Every probability multiplied by `s` (the encoding flag is kept).
    pub fn scaled(&self, s: f64) -> Self {
        NoiseParams {
            p_depol_1q: self.p_depol_1q * s,
            p_depol_2q: self.p_depol_2q * s,
            p_amp_damp: self.p_amp_damp * s,
            p_dephase: self.p_dephase * s,
            p_readout: self.p_readout * s,
            noisy_encoding: self.noisy_encoding,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, p) in [
            ("p_depol_1q", self.p_depol_1q),
            ("p_depol_2q", self.p_depol_2q),
            ("p_amp_damp", self.p_amp_damp),
            ("p_dephase", self.p_dephase),
            ("p_readout", self.p_readout),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::Channel(format!("{name} = {p} is outside [0, 1]")));
            }
        }
        Ok(())
    }
}

/// Pre-built channels for one noise setting.
struct NoiseModel {
    after_1q: Vec<KrausSet>,
    after_2q: Option<KrausSet>,
    readout_scale: f64,
}

impl NoiseModel {
    fn new(p: &NoiseParams) -> Result<Self> {
        p.validate()?;
        // Zero-probability channels are the identity; skipping them keeps p = 0 exact.
        let after_1q = [
            (ChannelKind::Depol1Q, p.p_depol_1q),
            (ChannelKind::AmpDamp, p.p_amp_damp),
            (ChannelKind::Dephase, p.p_dephase),
        ]
        .into_iter()
        .filter(|&(_, prob)| prob > 0.0)
        .map(|(k, prob)| channel(k, prob))
        .collect::<Result<_>>()?;
        let after_2q = (p.p_depol_2q > 0.0)
            .then(|| channel(ChannelKind::Depol2Q, p.p_depol_2q))
            .transpose()?;
        Ok(NoiseModel {
            after_1q,
            after_2q,
            readout_scale: 1.0 - 2.0 * p.p_readout,
        })
    }

    fn gate_1q(&self, rho: &mut DensityMatrix, qubit: usize, gate: &Gate1Q, noisy: bool) {
        rho.conjugate_1q(qubit, &gate.matrix);
        if noisy {
            for k in &self.after_1q {
                rho.apply_kraus_unchecked(&[qubit], k);
            }
        }
    }

    fn cnot(&self, rho: &mut DensityMatrix, control: usize, target: usize, noisy: bool) {
        rho.cnot_unchecked(control, target);
        if noisy {
            if let Some(k) = &self.after_2q {
                rho.apply_kraus_unchecked(&[control, target], k);
            }
        }
    }

    fn run_prep(&self, rho: &mut DensityMatrix, gates: &[PrepGate], noisy: bool) {
        for g in gates {
            match *g {
                PrepGate::Ry { qubit, angle } => self.gate_1q(rho, qubit, &Gate1Q::ry(angle), noisy),
                PrepGate::Rx { qubit, angle } => self.gate_1q(rho, qubit, &Gate1Q::rx(angle), noisy),
                PrepGate::Cnot { control, target } => self.cnot(rho, control, target, noisy),
            }
        }
    }

    fn run_pqc(&self, rho: &mut DensityMatrix, params: &PqcParams) {
        for step in steps(params) {
            match step {
                Step::Rot { qubit, gate } => self.gate_1q(rho, qubit, &gate, true),
                Step::Cnot { control, target } => self.cnot(rho, control, target, true),
            }
        }
    }

    fn measure(&self, rho: &DensityMatrix) -> Vec<f64> {
        (0..rho.n_qubits())
            .map(|q| self.readout_scale * rho.expval_z(q).expect("qubit in range"))
            .collect()
    }
}

fn check_params(n_qubits: usize, params: &PqcParams) -> Result<()> {
    if params.n_qubits != n_qubits || params.thetas.len() != 3 * params.n_qubits * params.n_layers {
        return Err(Error::Shape(format!(
            "state has {n_qubits} qubits, circuit expects {} with {} angles",
            params.n_qubits,
            params.thetas.len()
        )));
    }
    Ok(())
}

/// Noisy `<Z_i>` of the circuit applied to a pure input state.
pub fn noisy_pqc_expvals(input: &QuantumState, params: &PqcParams, noise: &NoiseParams) -> Result<Vec<f64>> {
    check_params(input.n_qubits(), params)?;
    let model = NoiseModel::new(noise)?;
    let mut rho = DensityMatrix::from_pure(input)?;
    model.run_pqc(&mut rho, params);
    Ok(model.measure(&rho))
}

/// Noisy `<Z_i>` when the input is prepared by `prep` from `|0...0>`. The
/// preparation gates are noisy only if `noise.noisy_encoding` is set.
pub fn noisy_prep_expvals(n_qubits: usize, prep: &[PrepGate], params: &PqcParams, noise: &NoiseParams) -> Result<Vec<f64>> {
    check_params(n_qubits, params)?;
    let model = NoiseModel::new(noise)?;
    let mut rho = DensityMatrix::zero_state(n_qubits)?;
    model.run_prep(&mut rho, prep, noise.noisy_encoding);
    model.run_pqc(&mut rho, params);
    Ok(model.measure(&rho))
}

/// Noisy `<Z_i>` for the vector that the model's encoder receives: the
/// normalized amplitudes (amplitude model) or the rotation angles (angle model).
fn encoded_expvals(kind: ModelKind, encoded: &[f64], params: &PqcParams, noise: &NoiseParams) -> Result<Vec<f64>> {
    let n = params.n_qubits;
    let prep = match kind {
        ModelKind::QmlAmplitude => prep_circuit(&amplitude_plan(encoded, n)?),
        ModelKind::QmlAngle => encoded.iter().enumerate().map(|(q, &a)| PrepGate::Rx { qubit: q, angle: a }).collect(),
        ModelKind::Fnn => return Err(Error::Spec("the FNN has no quantum circuit".into())),
    };
    noisy_prep_expvals(n, &prep, params, noise)
}

struct NoisyTrace {
    z1: Vec<f64>,
    a1: Vec<f64>,
    encoded: Vec<f64>,
    head_in: Vec<f64>,
    prediction: f64,
}

fn noisy_trace(model: &HybridModel, x: &[f64], noise: &NoiseParams) -> Result<NoisyTrace> {
    let kind = model.spec.kind;
    if !kind.is_quantum() {
        return Err(Error::Spec("noisy evaluation needs a quantum model".into()));
    }
    if x.len() != model.spec.input_dim {
        return Err(Error::Shape(format!(
            "model expects {} features, got {}",
            model.spec.input_dim,
            x.len()
        )));
    }
    let z1 = model.hidden.forward(x)?;
    let a1 = leaky_relu(&z1, model.spec.leaky_slope);
    let encoded = match kind {
        ModelKind::QmlAmplitude => normalized_padded(&a1, model.spec.n_qubits)?,
        _ => model.middle.as_ref().expect("aux layer").forward(&a1)?,
    };
    let params = model.pqc.as_ref().expect("pqc");
    let head_in = encoded_expvals(kind, &encoded, params, noise)?;
    let prediction = model.output.forward(&head_in)?[0];
    Ok(NoisyTrace {
        z1,
        a1,
        encoded,
        head_in,
        prediction,
    })
}

/// Model prediction with the circuit evaluated under `noise`.
pub fn noisy_forward(model: &HybridModel, x: &[f64], noise: &NoiseParams) -> Result<f64> {
    Ok(noisy_trace(model, x, noise)?.prediction)
}

/// Gradient of the batch MSE under noise.
///
/// Circuit angles use the shift rule on noisy expectations. The map from the
/// encoded vector to the noisy expectations is differentiated by central
/// differences, so cost grows with `2^n`; intended for small registers.
pub fn noisy_train_gradient(model: &HybridModel, inputs: &[&[f64]], targets: &[f64], noise: &NoiseParams) -> Result<Gradients> {
    if inputs.is_empty() {
        return Err(Error::EmptyBatch);
    }
    if inputs.len() != targets.len() {
        return Err(Error::Shape(format!("{} inputs vs {} targets", inputs.len(), targets.len())));
    }
    if model.spec.n_qubits > MAX_QUBITS {
        return Err(Error::Capacity(model.spec.n_qubits));
    }
    let kind = model.spec.kind;
    let params = model.pqc.as_ref().ok_or_else(|| Error::Spec("noisy training needs a quantum model".into()))?;
    let slope = model.spec.leaky_slope;
    let batch = inputs.len() as f64;
    let mut acc = LayerGrads::zeros(model);

    for (x, &y) in inputs.iter().zip(targets) {
        let t = noisy_trace(model, x, noise)?;
        let d_pred = 2.0 * (t.prediction - y) / batch;
        let d_head = model
            .output
            .backward(&t.head_in, &[d_pred], &mut acc.output, true)
            .expect("input gradient requested");
        let weighted = |e: &[f64]| e.iter().zip(&d_head).map(|(a, b)| a * b).sum::<f64>();

        let mut failure = None;
        let shift = parameter_shift_gradient(
            |p| match encoded_expvals(kind, &t.encoded, p, noise) {
                Ok(e) => weighted(&e),
                Err(err) => {
                    failure.get_or_insert(err);
                    0.0
                }
            },
            params,
        );
        if let Some(err) = failure {
            return Err(err);
        }
        for (a, g) in acc.pqc.as_mut().expect("pqc grad").iter_mut().zip(&shift) {
            *a += g;
        }

        let mut d_encoded = vec![0.0; t.encoded.len()];
        let mut probe = t.encoded.clone();
        for (j, d) in d_encoded.iter_mut().enumerate() {
            let orig = probe[j];
            probe[j] = orig + FD_STEP;
            let plus = weighted(&encoded_expvals(kind, &probe, params, noise)?);
            probe[j] = orig - FD_STEP;
            let minus = weighted(&encoded_expvals(kind, &probe, params, noise)?);
            probe[j] = orig;
            *d = (plus - minus) / (2.0 * FD_STEP);
        }

        let d_a1 = match kind {
            ModelKind::QmlAmplitude => amplitude_vjp(&t.a1, &d_encoded[..t.a1.len()]),
            _ => model
                .middle
                .as_ref()
                .expect("aux layer")
                .backward(&t.a1, &d_encoded, acc.middle.as_mut().expect("aux grad"), true)
                .expect("input gradient requested"),
        };
        let d_z1: Vec<f64> = d_a1.iter().zip(leaky_relu_grad(&t.z1, slope)).map(|(g, d)| g * d).collect();
        model.hidden.backward(x, &d_z1, &mut acc.hidden, false);
    }
    Ok(acc.into_gradients())
}
