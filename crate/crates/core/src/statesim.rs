//! Dense state-vector simulation.
//!
//! Basis index `i` encodes `|b_0 b_1 ... b_{n-1}>` with qubit 0 as the most
//! significant bit.

use num_complex::Complex64;

use crate::{Error, Result};

pub const MAX_QUBITS: usize = 24;

pub(crate) const ZERO: Complex64 = Complex64::new(0.0, 0.0);
pub(crate) const ONE: Complex64 = Complex64::new(1.0, 0.0);
pub(crate) const I: Complex64 = Complex64::new(0.0, 1.0);

/// A 2x2 unitary, row-major.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Gate1Q {
    pub matrix: [[Complex64; 2]; 2],
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RotationKind {
    Rx,
    Ry,
    Rz,
    /// `R(a, b, c) = R_z(c) R_y(b) R_z(a)`; `R_z(a)` acts first.
    Rot,
}

impl Gate1Q {
    pub const IDENTITY: Gate1Q = Gate1Q {
        matrix: [[ONE, ZERO], [ZERO, ONE]],
    };
    pub const X: Gate1Q = Gate1Q {
        matrix: [[ZERO, ONE], [ONE, ZERO]],
    };
    pub const Y: Gate1Q = Gate1Q {
        matrix: [[ZERO, Complex64::new(0.0, -1.0)], [I, ZERO]],
    };
    pub const Z: Gate1Q = Gate1Q {
        matrix: [[ONE, ZERO], [ZERO, Complex64::new(-1.0, 0.0)]],
    };

    pub fn rx(theta: f64) -> Self {
        let (s, c) = (theta / 2.0).sin_cos();
        let c = Complex64::new(c, 0.0);
        let mis = Complex64::new(0.0, -s);
        Gate1Q {
            matrix: [[c, mis], [mis, c]],
        }
    }

    pub fn ry(theta: f64) -> Self {
        let (s, c) = (theta / 2.0).sin_cos();
        Gate1Q {
            matrix: [
                [Complex64::new(c, 0.0), Complex64::new(-s, 0.0)],
                [Complex64::new(s, 0.0), Complex64::new(c, 0.0)],
            ],
        }
    }

    pub fn rz(theta: f64) -> Self {
        let half = theta / 2.0;
        Gate1Q {
            matrix: [
                [Complex64::from_polar(1.0, -half), ZERO],
                [ZERO, Complex64::from_polar(1.0, half)],
            ],
        }
    }

    pub fn rot(alpha: f64, beta: f64, gamma: f64) -> Self {
        Gate1Q::rz(gamma)
            .matmul(&Gate1Q::ry(beta))
            .matmul(&Gate1Q::rz(alpha))
    }

    /// `self * other`.
    pub fn matmul(&self, other: &Gate1Q) -> Gate1Q {
        let a = &self.matrix;
        let b = &other.matrix;
        let mut out = [[ZERO; 2]; 2];
        for (r, row) in out.iter_mut().enumerate() {
            for (c, cell) in row.iter_mut().enumerate() {
                *cell = a[r][0] * b[0][c] + a[r][1] * b[1][c];
            }
        }
        Gate1Q { matrix: out }
    }

    pub fn adjoint(&self) -> Gate1Q {
        let m = &self.matrix;
        Gate1Q {
            matrix: [[m[0][0].conj(), m[1][0].conj()], [m[0][1].conj(), m[1][1].conj()]],
        }
    }

    /// Elementwise complex conjugate (not the adjoint).
    pub fn conj(&self) -> Gate1Q {
        let m = &self.matrix;
        Gate1Q {
            matrix: [[m[0][0].conj(), m[0][1].conj()], [m[1][0].conj(), m[1][1].conj()]],
        }
    }

    /// `max |(M^dagger M - I)_ij|`.
    pub fn unitarity_defect(&self) -> f64 {
        let p = self.adjoint().matmul(self);
        let mut worst: f64 = 0.0;
        for r in 0..2 {
            for c in 0..2 {
                let id = if r == c { ONE } else { ZERO };
                worst = worst.max((p.matrix[r][c] - id).norm());
            }
        }
        worst
    }
}

/// Builds a rotation gate; `Rot` takes `[alpha, beta, gamma]`, the others one angle.
pub fn make_rotation(kind: RotationKind, angles: &[f64]) -> Result<Gate1Q> {
    let expect = |gate: &'static str, n: usize| -> Result<()> {
        if angles.len() == n {
            Ok(())
        } else {
            Err(Error::Arity {
                gate,
                expected: n,
                got: angles.len(),
            })
        }
    };
    match kind {
        RotationKind::Rx => expect("RX", 1).map(|_| Gate1Q::rx(angles[0])),
        RotationKind::Ry => expect("RY", 1).map(|_| Gate1Q::ry(angles[0])),
        RotationKind::Rz => expect("RZ", 1).map(|_| Gate1Q::rz(angles[0])),
        RotationKind::Rot => expect("ROT", 3).map(|_| Gate1Q::rot(angles[0], angles[1], angles[2])),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuantumState {
    n_qubits: usize,
    amplitudes: Vec<Complex64>,
}

fn check_capacity(n_qubits: usize) -> Result<()> {
    if (1..=MAX_QUBITS).contains(&n_qubits) {
        Ok(())
    } else {
        Err(Error::Capacity(n_qubits))
    }
}

impl QuantumState {
    /// `|0...0>` on `n_qubits` qubits.
    pub fn new_zero_state(n_qubits: usize) -> Result<Self> {
        check_capacity(n_qubits)?;
        let mut amplitudes = vec![ZERO; 1 << n_qubits];
        amplitudes[0] = ONE;
        Ok(QuantumState {
            n_qubits,
            amplitudes,
        })
    }

    /// Wraps an amplitude vector. Its length must be a power of two and its
    /// norm within `1e-9` of one.
    pub fn from_amplitudes(amplitudes: Vec<Complex64>) -> Result<Self> {
        let len = amplitudes.len();
        if len < 2 || !len.is_power_of_two() {
            return Err(Error::Shape(format!(
                "amplitude vector length {len} is not a power of two >= 2"
            )));
        }
        let n_qubits = len.trailing_zeros() as usize;
        check_capacity(n_qubits)?;
        let norm = amplitudes.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        if (norm - 1.0).abs() > 1e-9 {
            return Err(Error::Shape(format!("state norm {norm} is not 1")));
        }
        Ok(QuantumState {
            n_qubits,
            amplitudes,
        })
    }

    /// Real amplitudes, already normalized.
    pub fn from_real(amplitudes: &[f64]) -> Result<Self> {
        Self::from_amplitudes(amplitudes.iter().map(|&a| Complex64::new(a, 0.0)).collect())
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    pub(crate) fn amplitudes_mut(&mut self) -> &mut [Complex64] {
        &mut self.amplitudes
    }

    pub fn into_amplitudes(self) -> Vec<Complex64> {
        self.amplitudes
    }

    pub fn norm(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
    }

    fn check_qubit(&self, qubit: usize) -> Result<()> {
        if qubit < self.n_qubits {
            Ok(())
        } else {
            Err(Error::Index(format!(
                "qubit {qubit} out of range for {} qubits",
                self.n_qubits
            )))
        }
    }

    pub fn apply_1q(&mut self, qubit: usize, gate: &Gate1Q) -> Result<&mut Self> {
        self.check_qubit(qubit)?;
        apply_1q_raw(&mut self.amplitudes, self.n_qubits, qubit, &gate.matrix);
        Ok(self)
    }

    pub fn apply_cnot(&mut self, control: usize, target: usize) -> Result<&mut Self> {
        self.check_qubit(control)?;
        self.check_qubit(target)?;
        if control == target {
            return Err(Error::Index(format!(
                "CNOT control and target are both {control}"
            )));
        }
        apply_cnot_raw(&mut self.amplitudes, self.n_qubits, control, target);
        Ok(self)
    }

    /// `<psi| Z_qubit |psi>`.
    pub fn expval_z(&self, qubit: usize) -> Result<f64> {
        self.check_qubit(qubit)?;
        Ok(expval_z_raw(&self.amplitudes, self.n_qubits, qubit))
    }
}

#[inline]
pub(crate) fn qubit_mask(n_qubits: usize, qubit: usize) -> usize {
    1 << (n_qubits - 1 - qubit)
}

/// Applies `m` to `qubit` of an `n_qubits` register stored in `amps`.
/// No normalization is assumed.
pub(crate) fn apply_1q_raw(
    amps: &mut [Complex64],
    n_qubits: usize,
    qubit: usize,
    m: &[[Complex64; 2]; 2],
) {
    let stride = qubit_mask(n_qubits, qubit);
    let [[m00, m01], [m10, m11]] = *m;
    for block in amps.chunks_exact_mut(2 * stride) {
        let (lo, hi) = block.split_at_mut(stride);
        for (a, b) in lo.iter_mut().zip(hi.iter_mut()) {
            let (x, y) = (*a, *b);
            *a = m00 * x + m01 * y;
            *b = m10 * x + m11 * y;
        }
    }
}

/// `R_z(theta)` on `qubit`: a phase on each half of every block.
pub(crate) fn apply_rz_raw(amps: &mut [Complex64], n_qubits: usize, qubit: usize, theta: f64) {
    let stride = qubit_mask(n_qubits, qubit);
    let (lo_phase, hi_phase) = (Complex64::from_polar(1.0, -theta / 2.0), Complex64::from_polar(1.0, theta / 2.0));
    for block in amps.chunks_exact_mut(2 * stride) {
        let (lo, hi) = block.split_at_mut(stride);
        lo.iter_mut().for_each(|a| *a *= lo_phase);
        hi.iter_mut().for_each(|a| *a *= hi_phase);
    }
}

pub(crate) fn apply_cnot_raw(amps: &mut [Complex64], n_qubits: usize, control: usize, target: usize) {
    let cm = qubit_mask(n_qubits, control);
    let tm = qubit_mask(n_qubits, target);
    for i in 0..amps.len() {
        if i & cm != 0 && i & tm == 0 {
            amps.swap(i, i | tm);
        }
    }
}

pub(crate) fn expval_z_raw(amps: &[Complex64], n_qubits: usize, qubit: usize) -> f64 {
    let mask = qubit_mask(n_qubits, qubit);
    amps.iter()
        .enumerate()
        .map(|(i, a)| if i & mask == 0 { a.norm_sqr() } else { -a.norm_sqr() })
        .sum()
}
