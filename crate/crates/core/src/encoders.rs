//! Classical-to-quantum encoders.
//!
//! Amplitude encoding builds a binary tree of `R_y` angles (one uniformly
//! controlled rotation per tree level) and lowers every uniformly controlled
//! rotation into alternating `R_y` and CNOT gates with Gray-code control
//! ordering. Only real amplitudes are produced; negative entries are handled at
//! the leaf level by letting the final rotation angle range over `(-2pi, 2pi]`.

use num_complex::Complex64;

use crate::statesim::{apply_1q_raw, apply_cnot_raw, Gate1Q, QuantumState, MAX_QUBITS};
use crate::{EncodingFailure, Error, Result};

const MIN_NORM: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scheme {
    Amplitude,
    Angle,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EncodingPlan {
    pub n_qubits: usize,
    pub scheme: Scheme,
    /// Level-order angles of the uniformly controlled `R_y` tree (`2^n - 1`
    /// entries). Empty for angle encoding.
    pub ry_angle_tree: Vec<f64>,
    /// Raw rotation angles for angle encoding. Empty for amplitude encoding.
    pub rx_angles: Vec<f64>,
}

/// Elementary gate of a state-preparation circuit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PrepGate {
    Ry { qubit: usize, angle: f64 },
    Rx { qubit: usize, angle: f64 },
    Cnot { control: usize, target: usize },
}

fn check_qubits(n_qubits: usize) -> Result<()> {
    if (1..=MAX_QUBITS).contains(&n_qubits) {
        Ok(())
    } else {
        Err(Error::Capacity(n_qubits))
    }
}

fn check_features(features: &[f64], n_qubits: usize) -> Result<f64> {
    check_qubits(n_qubits)?;
    if features.len() > 1 << n_qubits {
        return Err(Error::Encoding(EncodingFailure::Overflow));
    }
    let norm = features.iter().map(|x| x * x).sum::<f64>().sqrt();
    if features.is_empty() || !(norm >= MIN_NORM) {
        return Err(Error::Encoding(EncodingFailure::ZeroNorm));
    }
    Ok(norm)
}

/// `features` zero-padded to `2^n_qubits` and divided by its L2 norm.
pub fn normalized_padded(features: &[f64], n_qubits: usize) -> Result<Vec<f64>> {
    let norm = check_features(features, n_qubits)?;
    let mut out = vec![0.0; 1 << n_qubits];
    for (o, &x) in out.iter_mut().zip(features) {
        *o = x / norm;
    }
    Ok(out)
}

/// Computes the level-order `R_y` angle tree for a real vector.
pub fn amplitude_plan(features: &[f64], n_qubits: usize) -> Result<EncodingPlan> {
    check_features(features, n_qubits)?;
    let dim = 1usize << n_qubits;
    let mut padded = vec![0.0; dim];
    padded[..features.len()].copy_from_slice(features);

    // norms[k] holds the 2^k block norms at tree level k.
    let mut levels: Vec<Vec<f64>> = vec![Vec::new(); n_qubits + 1];
    levels[n_qubits] = padded.iter().map(|x| x.abs()).collect();
    for k in (0..n_qubits).rev() {
        let below = &levels[k + 1];
        levels[k] = (0..1 << k)
            .map(|j| below[2 * j].hypot(below[2 * j + 1]))
            .collect();
    }

    let mut tree = Vec::with_capacity(dim - 1);
    for k in 0..n_qubits {
        for j in 0..1usize << k {
            let angle = if k + 1 == n_qubits {
                2.0 * padded[2 * j + 1].atan2(padded[2 * j])
            } else {
                let below = &levels[k + 1];
                2.0 * below[2 * j + 1].atan2(below[2 * j])
            };
            tree.push(angle);
        }
    }
    Ok(EncodingPlan {
        n_qubits,
        scheme: Scheme::Amplitude,
        ry_angle_tree: tree,
        rx_angles: Vec::new(),
    })
}

#[inline]
fn gray(i: usize) -> usize {
    i ^ (i >> 1)
}

/// Lowers one uniformly controlled `R_y` (controls `0..target`, control value
/// read with qubit 0 as the most significant bit) into `R_y`/CNOT pairs.
fn lower_uniformly_controlled_ry(target: usize, angles: &[f64], out: &mut Vec<PrepGate>) {
    let k = target;
    let count = 1usize << k;
    debug_assert_eq!(angles.len(), count);
    if k == 0 {
        out.push(PrepGate::Ry {
            qubit: target,
            angle: angles[0],
        });
        return;
    }
    // theta'_i = 2^-k * sum_j (-1)^{popcount(gray(i) & j)} theta_j
    let scale = 1.0 / count as f64;
    for i in 0..count {
        let g = gray(i);
        let angle = angles
            .iter()
            .enumerate()
            .map(|(j, &t)| if (g & j).count_ones() % 2 == 0 { t } else { -t })
            .sum::<f64>()
            * scale;
        out.push(PrepGate::Ry {
            qubit: target,
            angle,
        });
        let changed = g ^ gray((i + 1) % count);
        let bit = changed.trailing_zeros() as usize;
        out.push(PrepGate::Cnot {
            control: k - 1 - bit,
            target,
        });
    }
}

/// Elementary-gate circuit preparing the plan's state from `|0...0>`.
pub fn prep_circuit(plan: &EncodingPlan) -> Vec<PrepGate> {
    match plan.scheme {
        Scheme::Angle => plan
            .rx_angles
            .iter()
            .enumerate()
            .map(|(qubit, &angle)| PrepGate::Rx { qubit, angle })
            .collect(),
        Scheme::Amplitude => {
            let mut gates = Vec::with_capacity(2 << plan.n_qubits);
            let mut offset = 0;
            for k in 0..plan.n_qubits {
                let width = 1 << k;
                lower_uniformly_controlled_ry(k, &plan.ry_angle_tree[offset..offset + width], &mut gates);
                offset += width;
            }
            gates
        }
    }
}

/// Runs a preparation circuit on `|0...0>`.
pub fn run_prep(n_qubits: usize, gates: &[PrepGate]) -> Result<QuantumState> {
    let state = QuantumState::new_zero_state(n_qubits)?;
    let mut amps = state.into_amplitudes();
    for gate in gates {
        match *gate {
            PrepGate::Ry { qubit, angle } => apply_1q_raw(&mut amps, n_qubits, qubit, &Gate1Q::ry(angle).matrix),
            PrepGate::Rx { qubit, angle } => apply_1q_raw(&mut amps, n_qubits, qubit, &Gate1Q::rx(angle).matrix),
            PrepGate::Cnot { control, target } => apply_cnot_raw(&mut amps, n_qubits, control, target),
        }
    }
    QuantumState::from_amplitudes(amps)
}

/// Amplitude-encodes `features` by executing the uniformly controlled `R_y`
/// circuit on `|0...0>`.
pub fn amplitude_encode(features: &[f64], n_qubits: usize) -> Result<QuantumState> {
    let plan = amplitude_plan(features, n_qubits)?;
    run_prep(n_qubits, &prep_circuit(&plan))
}

/// Same state as [`amplitude_encode`], written down directly from the
/// normalized vector.
pub fn amplitude_encode_direct(features: &[f64], n_qubits: usize) -> Result<QuantumState> {
    QuantumState::from_real(&normalized_padded(features, n_qubits)?)
}

pub fn angle_plan(xs: &[f64]) -> Result<EncodingPlan> {
    check_qubits(xs.len())?;
    Ok(EncodingPlan {
        n_qubits: xs.len(),
        scheme: Scheme::Angle,
        ry_angle_tree: Vec::new(),
        rx_angles: xs.to_vec(),
    })
}

/// `tensor_i R_x(x_i) |0>`, built as a product state.
pub fn angle_encode(xs: &[f64]) -> Result<QuantumState> {
    check_qubits(xs.len())?;
    let factors: Vec<(Complex64, Complex64)> = xs
        .iter()
        .map(|&x| {
            let (s, c) = (x / 2.0).sin_cos();
            (Complex64::new(c, 0.0), Complex64::new(0.0, -s))
        })
        .collect();
    QuantumState::from_amplitudes(product_state(&factors))
}

/// Derivative of the angle-encoded state with respect to `xs[slot]`.
pub fn angle_state_derivative(xs: &[f64], slot: usize) -> Vec<Complex64> {
    let factors: Vec<(Complex64, Complex64)> = xs
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let (s, c) = (x / 2.0).sin_cos();
            if i == slot {
                (Complex64::new(-s / 2.0, 0.0), Complex64::new(0.0, -c / 2.0))
            } else {
                (Complex64::new(c, 0.0), Complex64::new(0.0, -s))
            }
        })
        .collect();
    product_state(&factors)
}

fn product_state(factors: &[(Complex64, Complex64)]) -> Vec<Complex64> {
    let mut amps = vec![Complex64::new(1.0, 0.0)];
    for &(a0, a1) in factors {
        let mut next = Vec::with_capacity(amps.len() * 2);
        for &a in &amps {
            next.push(a * a0);
            next.push(a * a1);
        }
        amps = next;
    }
    amps
}

/// Jacobian `d alpha_i / d x_j` of the pad-then-normalize map,
/// `2^n_qubits` rows by `features.len()` columns.
pub fn amplitude_state_jacobian(features: &[f64], n_qubits: usize) -> Result<Vec<Vec<f64>>> {
    let norm = check_features(features, n_qubits)?;
    let n3 = norm * norm * norm;
    let mut jac = vec![vec![0.0; features.len()]; 1 << n_qubits];
    for (i, row) in jac.iter_mut().enumerate().take(features.len()) {
        for (j, cell) in row.iter_mut().enumerate() {
            let delta = if i == j { norm * norm } else { 0.0 };
            *cell = (delta - features[i] * features[j]) / n3;
        }
    }
    Ok(jac)
}

/// `J^T g` for the pad-then-normalize map without materialising `J`.
/// `upstream` has `2^n_qubits` entries; rows past `features.len()` are padding.
pub fn amplitude_vjp(features: &[f64], upstream: &[f64]) -> Vec<f64> {
    let norm = features.iter().map(|x| x * x).sum::<f64>().sqrt();
    let dot: f64 = features.iter().zip(upstream).map(|(x, g)| x * g).sum();
    let n3 = norm * norm * norm;
    features
        .iter()
        .zip(upstream)
        .map(|(x, g)| g / norm - x * dot / n3)
        .collect()
}
