//! Strongly entangling parameterized circuit.
//!
//! Each layer applies `R(a, b, c) = R_z(c) R_y(b) R_z(a)` to every qubit, then
//! a CNOT ring `q -> (q + 1) mod n` in ascending `q`. A single qubit has no
//! ring.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::statesim::{apply_1q_raw, apply_cnot_raw, apply_rz_raw, expval_z_raw, qubit_mask, Gate1Q, QuantumState};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PqcParams {
    pub n_qubits: usize,
    pub n_layers: usize,
    /// Shape `[n_layers, n_qubits, 3]`, row-major; the last axis is `(a, b, c)`.
    pub thetas: Vec<f64>,
}

impl PqcParams {
    pub fn zeros(n_qubits: usize, n_layers: usize) -> Self {
        PqcParams {
            n_qubits,
            n_layers,
            thetas: vec![0.0; 3 * n_qubits * n_layers],
        }
    }

    pub fn new(n_qubits: usize, n_layers: usize, thetas: Vec<f64>) -> Result<Self> {
        if n_layers == 0 || n_qubits == 0 {
            return Err(Error::Shape("circuit needs at least one qubit and one layer".into()));
        }
        if thetas.len() != 3 * n_qubits * n_layers {
            return Err(Error::Shape(format!(
                "expected {} angles for {n_layers} layer(s) x {n_qubits} qubit(s), got {}",
                3 * n_qubits * n_layers,
                thetas.len()
            )));
        }
        Ok(PqcParams {
            n_qubits,
            n_layers,
            thetas,
        })
    }

    pub fn param_count(&self) -> usize {
        self.thetas.len()
    }

    #[inline]
    pub fn index(&self, layer: usize, qubit: usize, axis: usize) -> usize {
        (layer * self.n_qubits + qubit) * 3 + axis
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Axis {
    Y,
    Z,
}

/// One elementary gate of the unrolled circuit. Rotations carry the index of
/// the angle they read from `PqcParams::thetas`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Op {
    Rot { qubit: usize, axis: Axis, param: usize },
    Cnot { control: usize, target: usize },
}

impl Op {
    pub(crate) fn gate(&self, thetas: &[f64]) -> Option<Gate1Q> {
        match *self {
            Op::Rot { axis: Axis::Y, param, .. } => Some(Gate1Q::ry(thetas[param])),
            Op::Rot { axis: Axis::Z, param, .. } => Some(Gate1Q::rz(thetas[param])),
            Op::Cnot { .. } => None,
        }
    }
}

pub(crate) fn unroll(params: &PqcParams) -> Vec<Op> {
    let n = params.n_qubits;
    let mut ops = Vec::with_capacity(params.n_layers * 4 * n);
    for layer in 0..params.n_layers {
        for q in 0..n {
            let base = params.index(layer, q, 0);
            ops.push(Op::Rot { qubit: q, axis: Axis::Z, param: base });
            ops.push(Op::Rot { qubit: q, axis: Axis::Y, param: base + 1 });
            ops.push(Op::Rot { qubit: q, axis: Axis::Z, param: base + 2 });
        }
        if n > 1 {
            for q in 0..n {
                ops.push(Op::Cnot { control: q, target: (q + 1) % n });
            }
        }
    }
    ops
}

/// A gate of the circuit with each `ROT` fused into one 2x2 matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) enum Step {
    Rot { qubit: usize, gate: Gate1Q },
    Cnot { control: usize, target: usize },
}

pub(crate) fn steps(params: &PqcParams) -> Vec<Step> {
    let n = params.n_qubits;
    let mut out = Vec::with_capacity(params.n_layers * 2 * n);
    for layer in 0..params.n_layers {
        for q in 0..n {
            let b = params.index(layer, q, 0);
            let t = &params.thetas[b..b + 3];
            out.push(Step::Rot { qubit: q, gate: Gate1Q::rot(t[0], t[1], t[2]) });
        }
        if n > 1 {
            for q in 0..n {
                out.push(Step::Cnot { control: q, target: (q + 1) % n });
            }
        }
    }
    out
}

fn check_match(state_qubits: usize, params: &PqcParams) -> Result<()> {
    if state_qubits != params.n_qubits {
        return Err(Error::Shape(format!(
            "state has {state_qubits} qubits, circuit has {}",
            params.n_qubits
        )));
    }
    if params.thetas.len() != 3 * params.n_qubits * params.n_layers {
        return Err(Error::Shape("theta tensor does not match circuit shape".into()));
    }
    Ok(())
}

fn run_steps(amps: &mut [Complex64], n: usize, steps: &[Step]) {
    for step in steps {
        match *step {
            Step::Rot { qubit, gate } => apply_1q_raw(amps, n, qubit, &gate.matrix),
            Step::Cnot { control, target } => apply_cnot_raw(amps, n, control, target),
        }
    }
}

/// Applies the circuit in place.
pub fn apply_pqc(state: &mut QuantumState, params: &PqcParams) -> Result<()> {
    check_match(state.n_qubits(), params)?;
    let n = state.n_qubits();
    run_steps(state.amplitudes_mut(), n, &steps(params));
    Ok(())
}

pub fn pqc_forward(mut state: QuantumState, params: &PqcParams) -> Result<QuantumState> {
    apply_pqc(&mut state, params)?;
    Ok(state)
}

/// `[<Z_0>, ..., <Z_{n-1}>]`.
pub fn measure_all_z(state: &QuantumState) -> Vec<f64> {
    let n = state.n_qubits();
    (0..n).map(|q| expval_z_raw(state.amplitudes(), n, q)).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdjointGrad {
    /// `d(sum_i u_i <Z_i>) / d theta`, same layout as `PqcParams::thetas`.
    pub thetas: Vec<f64>,
    /// `2 U^dagger Lambda U psi`: the real (imaginary) part is the derivative
    /// with respect to the real (imaginary) part of each input amplitude.
    pub input: Vec<Complex64>,
    /// Expectation values of the forward pass.
    pub expvals: Vec<f64>,
}

/// Reverse-mode gradient of `sum_i upstream_i <Z_i>` through the circuit.
pub fn adjoint_gradient(input: &QuantumState, params: &PqcParams, upstream: &[f64]) -> Result<AdjointGrad> {
    check_match(input.n_qubits(), params)?;
    let n = params.n_qubits;
    if upstream.len() != n {
        return Err(Error::Shape(format!(
            "upstream has {} entries, expected {n}",
            upstream.len()
        )));
    }
    let mut psi = input.amplitudes().to_vec();
    run_steps(&mut psi, n, &steps(params));
    adjoint_sweep(psi, params, upstream)
}

/// As [`adjoint_gradient`], starting from the circuit's output state
/// instead of re-running the forward pass.
pub fn adjoint_from_output(output: &QuantumState, params: &PqcParams, upstream: &[f64]) -> Result<AdjointGrad> {
    check_match(output.n_qubits(), params)?;
    let n = params.n_qubits;
    if upstream.len() != n {
        return Err(Error::Shape(format!(
            "upstream has {} entries, expected {n}",
            upstream.len()
        )));
    }
    adjoint_sweep(output.amplitudes().to_vec(), params, upstream)
}

fn adjoint_sweep(mut psi: Vec<Complex64>, params: &PqcParams, upstream: &[f64]) -> Result<AdjointGrad> {
    let n = params.n_qubits;
    let ops = unroll(params);
    let expvals: Vec<f64> = (0..n).map(|q| expval_z_raw(&psi, n, q)).collect();

    let masks: Vec<usize> = (0..n).map(|q| qubit_mask(n, q)).collect();
    let mut lambda: Vec<Complex64> = psi
        .iter()
        .enumerate()
        .map(|(i, a)| {
            let w: f64 = masks
                .iter()
                .zip(upstream)
                .map(|(&m, &u)| if i & m == 0 { u } else { -u })
                .sum();
            a * w
        })
        .collect();

    let mut grads = vec![0.0; params.thetas.len()];
    for op in ops.iter().rev() {
        match *op {
            Op::Cnot { control, target } => {
                apply_cnot_raw(&mut psi, n, control, target);
                apply_cnot_raw(&mut lambda, n, control, target);
            }
            Op::Rot { qubit, axis, param } => {
                // d/dtheta = Im <lambda| sigma |psi> with psi taken after the gate.
                grads[param] = generator_overlap(&lambda, &psi, n, qubit, axis).im;
                if axis == Axis::Z {
                    apply_rz_raw(&mut psi, n, qubit, -params.thetas[param]);
                    apply_rz_raw(&mut lambda, n, qubit, -params.thetas[param]);
                } else {
                    let inv = op.gate(&params.thetas).expect("rotation").adjoint();
                    apply_1q_raw(&mut psi, n, qubit, &inv.matrix);
                    apply_1q_raw(&mut lambda, n, qubit, &inv.matrix);
                }
            }
        }
    }
    let input_grad = lambda.into_iter().map(|l| l * 2.0).collect();
    Ok(AdjointGrad {
        thetas: grads,
        input: input_grad,
        expvals,
    })
}

/// `<lambda| sigma_axis(qubit) |psi>`.
fn generator_overlap(lambda: &[Complex64], psi: &[Complex64], n: usize, qubit: usize, axis: Axis) -> Complex64 {
    let stride = qubit_mask(n, qubit);
    let mut acc = Complex64::new(0.0, 0.0);
    for (lb, pb) in lambda.chunks_exact(2 * stride).zip(psi.chunks_exact(2 * stride)) {
        let (l0, l1) = lb.split_at(stride);
        let (p0, p1) = pb.split_at(stride);
        for i in 0..stride {
            acc += match axis {
                Axis::Z => l0[i].conj() * p0[i] - l1[i].conj() * p1[i],
                // Y = [[0, -i], [i, 0]]
                Axis::Y => l0[i].conj() * (-crate::statesim::I * p1[i]) + l1[i].conj() * (crate::statesim::I * p0[i]),
            };
        }
    }
    acc
}

/// Two-term shift rule: `(f(theta + pi/2 e_k) - f(theta - pi/2 e_k)) / 2`
/// for every angle `k`.
pub fn parameter_shift_gradient<F>(mut eval: F, params: &PqcParams) -> Vec<f64>
where
    F: FnMut(&PqcParams) -> f64,
{
    let shift = std::f64::consts::FRAC_PI_2;
    let mut work = params.clone();
    (0..params.thetas.len())
        .map(|k| {
            let orig = work.thetas[k];
            work.thetas[k] = orig + shift;
            let plus = eval(&work);
            work.thetas[k] = orig - shift;
            let minus = eval(&work);
            work.thetas[k] = orig;
            (plus - minus) / 2.0
        })
        .collect()
}
