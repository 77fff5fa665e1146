//! Dense reference implementations used as test oracles. Nothing here calls
//! the library's kernels: gates are full `2^n x 2^n` matrices built from
//! Kronecker products, channels are superoperators on `vec(rho)`.

#![allow(dead_code)]

use num_complex::Complex64 as C;
use rand::Rng;
use rand_distr::StandardNormal;

pub type Mat = Vec<Vec<C>>;

pub fn c(re: f64, im: f64) -> C {
    C::new(re, im)
}

pub fn zeros(r: usize, k: usize) -> Mat {
    vec![vec![c(0.0, 0.0); k]; r]
}

pub fn identity(d: usize) -> Mat {
    let mut m = zeros(d, d);
    for (i, row) in m.iter_mut().enumerate() {
        row[i] = c(1.0, 0.0);
    }
    m
}

pub fn matmul(a: &Mat, b: &Mat) -> Mat {
    let (r, inner, k) = (a.len(), b.len(), b[0].len());
    let mut out = zeros(r, k);
    for i in 0..r {
        for j in 0..k {
            let mut s = c(0.0, 0.0);
            for t in 0..inner {
                s += a[i][t] * b[t][j];
            }
            out[i][j] = s;
        }
    }
    out
}

pub fn kron(a: &Mat, b: &Mat) -> Mat {
    let (ar, ac, br, bc) = (a.len(), a[0].len(), b.len(), b[0].len());
    let mut out = zeros(ar * br, ac * bc);
    for i in 0..ar {
        for j in 0..ac {
            for k in 0..br {
                for l in 0..bc {
                    out[i * br + k][j * bc + l] = a[i][j] * b[k][l];
                }
            }
        }
    }
    out
}

pub fn dagger(a: &Mat) -> Mat {
    let mut out = zeros(a[0].len(), a.len());
    for (i, row) in a.iter().enumerate() {
        for (j, v) in row.iter().enumerate() {
            out[j][i] = v.conj();
        }
    }
    out
}

pub fn conj(a: &Mat) -> Mat {
    a.iter().map(|r| r.iter().map(|v| v.conj()).collect()).collect()
}

pub fn add(a: &Mat, b: &Mat) -> Mat {
    a.iter().zip(b).map(|(x, y)| x.iter().zip(y).map(|(p, q)| p + q).collect()).collect()
}

pub fn scale(a: &Mat, s: f64) -> Mat {
    a.iter().map(|r| r.iter().map(|v| v * s).collect()).collect()
}

pub fn mat_vec(a: &Mat, v: &[C]) -> Vec<C> {
    a.iter().map(|row| row.iter().zip(v).map(|(x, y)| x * y).sum()).collect()
}

pub fn max_abs_diff(a: &[C], b: &[C]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

// Single-qubit matrices written out from their definitions.

pub fn pauli_x() -> Mat {
    vec![vec![c(0.0, 0.0), c(1.0, 0.0)], vec![c(1.0, 0.0), c(0.0, 0.0)]]
}

pub fn pauli_y() -> Mat {
    vec![vec![c(0.0, 0.0), c(0.0, -1.0)], vec![c(0.0, 1.0), c(0.0, 0.0)]]
}

pub fn pauli_z() -> Mat {
    vec![vec![c(1.0, 0.0), c(0.0, 0.0)], vec![c(0.0, 0.0), c(-1.0, 0.0)]]
}

/// `exp(-i theta P / 2) = cos(theta/2) I - i sin(theta/2) P`.
fn pauli_rotation(p: &Mat, theta: f64) -> Mat {
    let (co, si) = ((theta / 2.0).cos(), (theta / 2.0).sin());
    add(&scale(&identity(2), co), &p.iter().map(|r| r.iter().map(|v| v * c(0.0, -si)).collect()).collect())
}

pub fn rx(t: f64) -> Mat {
    pauli_rotation(&pauli_x(), t)
}

pub fn ry(t: f64) -> Mat {
    pauli_rotation(&pauli_y(), t)
}

pub fn rz(t: f64) -> Mat {
    pauli_rotation(&pauli_z(), t)
}

/// `R_z(g) R_y(b) R_z(a)`.
pub fn rot(a: f64, b: f64, g: f64) -> Mat {
    matmul(&rz(g), &matmul(&ry(b), &rz(a)))
}

/// `g` on qubit `q` of `n` (qubit 0 is the leftmost Kronecker factor).
pub fn embed_1q(n: usize, q: usize, g: &Mat) -> Mat {
    let id = identity(2);
    let mut out = identity(1);
    for k in 0..n {
        out = kron(&out, if k == q { g } else { &id });
    }
    out
}

fn bit(x: usize, n: usize, q: usize) -> usize {
    (x >> (n - 1 - q)) & 1
}

/// Two-qubit `m` (basis `|b_q1 b_q2>`) on qubits `(q1, q2)` of `n`.
pub fn embed_2q(n: usize, q1: usize, q2: usize, m: &Mat) -> Mat {
    let d = 1 << n;
    let mut out = zeros(d, d);
    let others = |x: usize| x & !((1 << (n - 1 - q1)) | (1 << (n - 1 - q2)));
    for y in 0..d {
        for x in 0..d {
            if others(x) == others(y) {
                let r = 2 * bit(y, n, q1) + bit(y, n, q2);
                let k = 2 * bit(x, n, q1) + bit(x, n, q2);
                out[y][x] = m[r][k];
            }
        }
    }
    out
}

pub fn cnot_4x4() -> Mat {
    let mut m = zeros(4, 4);
    for (r, k) in [(0, 0), (1, 1), (2, 3), (3, 2)] {
        m[r][k] = c(1.0, 0.0);
    }
    m
}

pub fn cnot(n: usize, control: usize, target: usize) -> Mat {
    embed_2q(n, control, target, &cnot_4x4())
}

/// Full unitary of the layered ROT + CNOT-ring circuit.
pub fn pqc_unitary(n: usize, layers: usize, thetas: &[f64]) -> Mat {
    let mut u = identity(1 << n);
    for l in 0..layers {
        for q in 0..n {
            let b = (l * n + q) * 3;
            u = matmul(&embed_1q(n, q, &rot(thetas[b], thetas[b + 1], thetas[b + 2])), &u);
        }
        if n > 1 {
            for q in 0..n {
                u = matmul(&cnot(n, q, (q + 1) % n), &u);
            }
        }
    }
    u
}

pub fn expval_z(n: usize, q: usize, psi: &[C]) -> f64 {
    let z = embed_1q(n, q, &pauli_z());
    psi.iter().zip(mat_vec(&z, psi)).map(|(a, b)| (a.conj() * b).re).sum()
}

pub fn random_complex_state<R: Rng>(n: usize, rng: &mut R) -> Vec<C> {
    let v: Vec<C> = (0..1 << n).map(|_| c(rng.sample(StandardNormal), rng.sample(StandardNormal))).collect();
    let norm = v.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
    v.into_iter().map(|x| x / norm).collect()
}

pub fn random_real_state<R: Rng>(n: usize, rng: &mut R) -> Vec<f64> {
    let v: Vec<f64> = (0..1 << n).map(|_| rng.sample(StandardNormal)).collect();
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.into_iter().map(|x| x / norm).collect()
}

// Density matrices and superoperators. `vec` is row-major, so
// `vec(A rho B) = (A kron B^T) vec(rho)` and `K rho K^dagger` maps to
// `K kron conj(K)`.

pub fn outer(psi: &[C]) -> Mat {
    psi.iter().map(|a| psi.iter().map(|b| a * b.conj()).collect()).collect()
}

pub fn vec_of(rho: &Mat) -> Vec<C> {
    rho.iter().flatten().copied().collect()
}

pub fn unvec(v: &[C], d: usize) -> Mat {
    v.chunks(d).map(|r| r.to_vec()).collect()
}

pub fn superop(kraus: &[Mat]) -> Mat {
    let d = kraus[0].len();
    let mut s = zeros(d * d, d * d);
    for k in kraus {
        s = add(&s, &kron(k, &conj(k)));
    }
    s
}

pub fn depol_1q(p: f64) -> Vec<Mat> {
    vec![
        scale(&identity(2), (1.0 - p).sqrt()),
        scale(&pauli_x(), (p / 3.0).sqrt()),
        scale(&pauli_y(), (p / 3.0).sqrt()),
        scale(&pauli_z(), (p / 3.0).sqrt()),
    ]
}

pub fn depol_2q(p: f64) -> Vec<Mat> {
    let paulis = [identity(2), pauli_x(), pauli_y(), pauli_z()];
    let mut out = Vec::new();
    for (i, a) in paulis.iter().enumerate() {
        for (j, b) in paulis.iter().enumerate() {
            let w = if i == 0 && j == 0 { 1.0 - p } else { p / 15.0 };
            out.push(scale(&kron(a, b), w.sqrt()));
        }
    }
    out
}

pub fn amp_damp(p: f64) -> Vec<Mat> {
    vec![
        vec![vec![c(1.0, 0.0), c(0.0, 0.0)], vec![c(0.0, 0.0), c((1.0 - p).sqrt(), 0.0)]],
        vec![vec![c(0.0, 0.0), c(p.sqrt(), 0.0)], vec![c(0.0, 0.0), c(0.0, 0.0)]],
    ]
}

pub fn dephase(p: f64) -> Vec<Mat> {
    vec![scale(&identity(2), (1.0 - p).sqrt()), scale(&pauli_z(), p.sqrt())]
}

pub struct OracleNoise {
    pub p1: f64,
    pub p2: f64,
    pub amp: f64,
    pub deph: f64,
    pub readout: f64,
}

/// Superoperator of the noisy circuit: each ROT is followed by 1q
/// depolarizing, amplitude damping and dephasing; each CNOT by 2q
/// depolarizing. Returns `(1 - 2 p_readout) <Z_q>` for every qubit.
pub fn noisy_pqc_oracle(n: usize, layers: usize, thetas: &[f64], psi: &[C], noise: &OracleNoise) -> Vec<f64> {
    let d = 1 << n;
    let mut s = identity(d * d);
    let after_1q = |q: usize| {
        let mut t = identity(d * d);
        for ch in [depol_1q(noise.p1), amp_damp(noise.amp), dephase(noise.deph)] {
            let full: Vec<Mat> = ch.iter().map(|k| embed_1q(n, q, k)).collect();
            t = matmul(&superop(&full), &t);
        }
        t
    };
    for l in 0..layers {
        for q in 0..n {
            let b = (l * n + q) * 3;
            let u = embed_1q(n, q, &rot(thetas[b], thetas[b + 1], thetas[b + 2]));
            s = matmul(&superop(&[u]), &s);
            s = matmul(&after_1q(q), &s);
        }
        if n > 1 {
            for q in 0..n {
                let t = (q + 1) % n;
                s = matmul(&superop(&[cnot(n, q, t)]), &s);
                let full: Vec<Mat> = depol_2q(noise.p2).iter().map(|k| embed_2q(n, q, t, k)).collect();
                s = matmul(&superop(&full), &s);
            }
        }
    }
    let rho = unvec(&mat_vec(&s, &vec_of(&outer(psi))), d);
    (0..n)
        .map(|q| {
            let z = embed_1q(n, q, &pauli_z());
            let tr: C = (0..d).map(|i| matmul(&rho, &z)[i][i]).sum();
            (1.0 - 2.0 * noise.readout) * tr.re
        })
        .collect()
}

/// Eigenvalues of a Hermitian matrix via cyclic Jacobi on the real
/// symmetric embedding `[[A, -B], [B, A]]`; each eigenvalue appears twice.
pub fn hermitian_eigenvalues(h: &Mat) -> Vec<f64> {
    let d = h.len();
    let m = 2 * d;
    let mut a = vec![vec![0.0; m]; m];
    for i in 0..d {
        for j in 0..d {
            let (re, im) = (h[i][j].re, h[i][j].im);
            a[i][j] = re;
            a[i + d][j + d] = re;
            a[i][j + d] = -im;
            a[i + d][j] = im;
        }
    }
    for _sweep in 0..100 {
        let off: f64 = (0..m).flat_map(|i| (0..m).filter(move |&j| j != i).map(move |j| (i, j))).map(|(i, j)| a[i][j] * a[i][j]).sum();
        if off < 1e-30 {
            break;
        }
        for p in 0..m {
            for q in p + 1..m {
                if a[p][q].abs() < 1e-300 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let cs = 1.0 / (t * t + 1.0).sqrt();
                let sn = t * cs;
                for k in 0..m {
                    let (akp, akq) = (a[k][p], a[k][q]);
                    a[k][p] = cs * akp - sn * akq;
                    a[k][q] = sn * akp + cs * akq;
                }
                for k in 0..m {
                    let (apk, aqk) = (a[p][k], a[q][k]);
                    a[p][k] = cs * apk - sn * aqk;
                    a[q][k] = sn * apk + cs * aqk;
                }
            }
        }
    }
    (0..m).map(|i| a[i][i]).collect()
}

/// Mixed absolute/relative closeness `|a - b| <= atol + rtol |b|`.
pub fn close(a: f64, b: f64, atol: f64, rtol: f64) -> bool {
    (a - b).abs() <= atol + rtol * b.abs()
}
