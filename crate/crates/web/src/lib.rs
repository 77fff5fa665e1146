//! Browser bindings for three interactive views of the engine: the amplitude
//! encoder, a noise-strength sweep through an encoded circuit, and the
//! synthetic recovery-rate distribution. Each export returns JSON.

use qrecover::data::{histogram, local_modes, synth_recovery, target_moments, TargetMoments, SYNTH_MAX};
use qrecover::encoders::{amplitude_encode, amplitude_plan, prep_circuit, PrepGate};
use qrecover::noise::{noisy_prep_expvals, NoiseParams};
use qrecover::pqc::{measure_all_z, pqc_forward, PqcParams};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use wasm_bindgen::prelude::*;

/// Largest register the page will simulate; the noise sweep works on a
/// `4^n`-entry density matrix.
pub const MAX_DEMO_QUBITS: usize = 5;

#[derive(Debug, Serialize)]
pub struct EncodingView {
    pub n_qubits: usize,
    pub amplitudes: Vec<f64>,
    pub probabilities: Vec<f64>,
    pub ry_angles: Vec<f64>,
    pub n_ry: usize,
    pub n_cnot: usize,
    /// Gate list as display strings, e.g. `RY(1.2340) q0`.
    pub gates: Vec<String>,
}

#[derive(Debug, Serialize)]
pub struct NoiseSweep {
    pub n_qubits: usize,
    pub scales: Vec<f64>,
    pub noiseless: Vec<f64>,
    /// `[scale][qubit]` expectations of Pauli-Z.
    pub expvals: Vec<Vec<f64>>,
    /// Mean absolute deviation from the noiseless expectations per scale.
    pub deviation: Vec<f64>,
}

#[derive(Debug, Serialize)]
pub struct Histogram {
    pub edges: Vec<f64>,
    pub counts: Vec<usize>,
    pub moments: TargetMoments,
    pub modes: Vec<f64>,
}

fn qubits_for(len: usize) -> Result<usize, String> {
    let n = (len.max(2) as f64).log2().ceil() as usize;
    if n > MAX_DEMO_QUBITS {
        return Err(format!("at most {} values are supported", 1 << MAX_DEMO_QUBITS));
    }
    Ok(n)
}

fn gate_label(g: &PrepGate) -> String {
    match *g {
        PrepGate::Ry { qubit, angle } => format!("RY({angle:.4}) q{qubit}"),
        PrepGate::Rx { qubit, angle } => format!("RX({angle:.4}) q{qubit}"),
        PrepGate::Cnot { control, target } => format!("CNOT q{control} -> q{target}"),
    }
}

pub fn encoding_view(values: &[f64]) -> Result<EncodingView, String> {
    let n = qubits_for(values.len())?;
    let plan = amplitude_plan(values, n).map_err(|e| e.to_string())?;
    let gates = prep_circuit(&plan);
    let state = amplitude_encode(values, n).map_err(|e| e.to_string())?;
    Ok(EncodingView {
        n_qubits: n,
        amplitudes: state.amplitudes().iter().map(|a| a.re).collect(),
        probabilities: state.amplitudes().iter().map(|a| a.norm_sqr()).collect(),
        n_ry: gates.iter().filter(|g| matches!(g, PrepGate::Ry { .. })).count(),
        n_cnot: gates.iter().filter(|g| matches!(g, PrepGate::Cnot { .. })).count(),
        gates: gates.iter().map(gate_label).collect(),
        ry_angles: plan.ry_angle_tree,
    })
}

pub fn noise_sweep_view(values: &[f64], layers: usize, seed: u64, max_scale: f64, steps: usize) -> Result<NoiseSweep, String> {
    if !(max_scale >= 0.0) || steps < 2 {
        return Err("need max_scale >= 0 and at least two steps".into());
    }
    let n = qubits_for(values.len())?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let thetas = (0..3 * n * layers.max(1)).map(|_| rng.random_range(0.0..std::f64::consts::TAU)).collect();
    let params = PqcParams::new(n, layers.max(1), thetas).map_err(|e| e.to_string())?;
    let plan = amplitude_plan(values, n).map_err(|e| e.to_string())?;
    let prep = prep_circuit(&plan);
    let state = amplitude_encode(values, n).map_err(|e| e.to_string())?;
    let noiseless = measure_all_z(&pqc_forward(state, &params).map_err(|e| e.to_string())?);
    let scales: Vec<f64> = (0..steps).map(|i| max_scale * i as f64 / (steps - 1) as f64).collect();
    let base = NoiseParams::default();
    let mut expvals = Vec::with_capacity(steps);
    let mut deviation = Vec::with_capacity(steps);
    for &s in &scales {
        let noise = base.scaled(s);
        noise.validate().map_err(|e| e.to_string())?;
        let e = noisy_prep_expvals(n, &prep, &params, &noise).map_err(|e| e.to_string())?;
        deviation.push(e.iter().zip(&noiseless).map(|(a, b)| (a - b).abs()).sum::<f64>() / n as f64);
        expvals.push(e);
    }
    Ok(NoiseSweep {
        n_qubits: n,
        scales,
        noiseless,
        expvals,
        deviation,
    })
}

pub fn histogram_view(n_obs: usize, n_features: usize, seed: u64, bins: usize) -> Result<Histogram, String> {
    if !(2..=200).contains(&bins) {
        return Err("bins must be between 2 and 200".into());
    }
    let ds = synth_recovery(n_obs, n_features, seed).map_err(|e| e.to_string())?;
    let counts = histogram(&ds.targets, bins, 0.0, SYNTH_MAX);
    let width = SYNTH_MAX / bins as f64;
    let radius = (3 * bins / 20).max(1);
    Ok(Histogram {
        edges: (0..=bins).map(|i| i as f64 * width).collect(),
        modes: local_modes(&counts, radius).into_iter().map(|b| (b as f64 + 0.5) * width).collect(),
        moments: target_moments(&ds.targets),
        counts,
    })
}

fn to_json<T: Serialize>(r: Result<T, String>) -> Result<String, JsError> {
    let v = r.map_err(|e| JsError::new(&e))?;
    serde_json::to_string(&v).map_err(|e| JsError::new(&e.to_string()))
}

/// Amplitude-encodes `values` and describes the preparation circuit.
#[wasm_bindgen(js_name = encodeAmplitudes)]
pub fn encode_amplitudes(values: &[f64]) -> Result<String, JsError> {
    to_json(encoding_view(values))
}

/// Pauli-Z expectations of the encoded state after a random circuit, with
/// every noise probability scaled from 0 to `max_scale`.
#[wasm_bindgen(js_name = noiseSweep)]
pub fn noise_sweep(values: &[f64], layers: usize, seed: u32, max_scale: f64, steps: usize) -> Result<String, JsError> {
    to_json(noise_sweep_view(values, layers, seed as u64, max_scale, steps))
}

/// Histogram of synthetic recovery rates over `[0, 1.1]`.
#[wasm_bindgen(js_name = synthHistogram)]
pub fn synth_histogram(n_obs: usize, n_features: usize, seed: u32, bins: usize) -> Result<String, JsError> {
    to_json(histogram_view(n_obs, n_features, seed as u64, bins))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn encoding_is_normalized() {
        let v = encoding_view(&[3.0, -4.0, 0.0]).unwrap();
        assert_eq!(v.n_qubits, 2);
        assert!((v.amplitudes[0] - 0.6).abs() < 1e-12 && (v.amplitudes[1] + 0.8).abs() < 1e-12);
        assert!((v.probabilities.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert_eq!((v.n_ry, v.n_cnot), (3, 2));
        assert!(encoding_view(&[0.0, 0.0]).is_err());
        assert!(encoding_view(&[1.0; 33]).is_err());
    }

    #[test]
    fn sweep_starts_noiseless() {
        let s = noise_sweep_view(&[0.2, 0.5, -0.1, 0.7], 2, 3, 10.0, 5).unwrap();
        assert_eq!(s.expvals.len(), 5);
        assert!(s.deviation[0] < 1e-12);
        assert!(s.deviation[4] > s.deviation[1]);
    }

    #[test]
    fn histogram_counts_every_row() {
        let h = histogram_view(300, 16, 1, 20).unwrap();
        assert_eq!(h.counts.iter().sum::<usize>(), 300);
        assert_eq!(h.edges.len(), 21);
        assert!(histogram_view(300, 16, 1, 1).is_err());
    }
}
