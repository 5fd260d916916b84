use serde::{Deserialize, Serialize};
use statrs::distribution::{Continuous, Normal};

use super::{Dimension, DistributionCircuit};
use crate::error::{QmciError, Result};
use crate::qcore::{Gate, QuantumCircuit};

/// The printed six-qubit hardware-efficient loaders.
#[allow(non_camel_case_types)]
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum StandardCircuit {
    gaussian_unit_6q,
    lognormal_1_800_6q,
    lognormal_1_400_6q,
}

impl std::str::FromStr for StandardCircuit {
    type Err = QmciError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gaussian_unit_6q" => Ok(StandardCircuit::gaussian_unit_6q),
            "lognormal_1_800_6q" => Ok(StandardCircuit::lognormal_1_800_6q),
            "lognormal_1_400_6q" => Ok(StandardCircuit::lognormal_1_400_6q),
            other => Err(QmciError::invalid(format!("unknown standard circuit {other:?}"))),
        }
    }
}

// Ry angles, one row per rotation layer, one entry per qubit (qubit 0 first).
const GAUSSIAN_UNIT: [[f64; 6]; 7] = [
    [0.31, 1.26, 4.37, 0.0, 1.66, 4.8],
    [2.58, 0.56, 4.71, 1.57, 5.93, 3.19],
    [5.39, 0.35, 1.57, 0.2, 6.02, 6.25],
    [1.51, 3.14, 3.14, 1.61, 6.07, 4.76],
    [0.0, 4.85, 0.0, 0.88, 3.54, 4.34],
    [0.0, 1.57, 0.0, 6.03, 5.9, 6.03],
    [4.71, 3.06, 0.02, 0.0, 0.0, 0.0],
];

const LOGNORMAL_800: [[f64; 6]; 7] = [
    [3.09, 3.0, 3.65, 2.48, 3.92, 0.74],
    [1.47, 3.67, 3.26, 2.41, 1.51, 5.01],
    [3.09, 6.19, 0.27, 6.28, 0.1, 0.56],
    [0.93, 0.2, 3.97, 0.8, 4.42, 0.3],
    [3.21, 6.06, 0.43, 5.6, 5.77, 5.62],
    [5.05, 0.18, 1.63, 5.8, 4.98, 0.7],
    [0.1, 0.43, 2.14, 4.28, 5.18, 0.26],
];

const LOGNORMAL_400: [[f64; 6]; 7] = [
    [3.17, 0.51, 2.09, 3.28, 5.92, 0.77],
    [0.51, 0.04, 4.12, 2.58, 1.7, 1.3],
    [6.21, 3.06, 6.21, 5.92, 5.32, 0.45],
    [6.25, 0.23, 1.76, 4.95, 4.98, 2.89],
    [0.14, 1.88, 0.94, 5.32, 0.35, 4.72],
    [1.16, 5.36, 0.77, 0.35, 6.25, 0.07],
    [6.28, 6.2, 6.22, 0.09, 0.07, 6.23],
];

/// Ry layers separated by linear CNOT ladders (q -> q+1).
pub fn hwe_circuit(n_qubits: usize, layers: &[Vec<f64>]) -> QuantumCircuit {
    let mut c = QuantumCircuit::named(n_qubits, "hwe");
    for (l, angles) in layers.iter().enumerate() {
        for (q, &a) in angles.iter().enumerate() {
            c.push(Gate::ry(a, q));
        }
        if l + 1 < layers.len() {
            for q in 0..n_qubits.saturating_sub(1) {
                c.push(Gate::cnot(q, q + 1));
            }
        }
    }
    c
}

pub fn standard_circuit(kind: StandardCircuit) -> DistributionCircuit {
    let (table, x_l, delta, name) = match kind {
        StandardCircuit::gaussian_unit_6q => (&GAUSSIAN_UNIT, -5.0, 10.0 / 63.0, "gaussian_unit_6q"),
        StandardCircuit::lognormal_1_800_6q => (&LOGNORMAL_800, 0.83, 0.01, "lognormal_1_800_6q"),
        StandardCircuit::lognormal_1_400_6q => (&LOGNORMAL_400, 0.77, 0.01, "lognormal_1_400_6q"),
    };
    let layers: Vec<Vec<f64>> = table.iter().map(|r| r.to_vec()).collect();
    let mut circuit = hwe_circuit(6, &layers);
    circuit.name = name.to_string();
    DistributionCircuit {
        circuit,
        dims: vec![Dimension {
            qubits: (0..6).collect(),
            x_l,
            delta,
        }],
        indicators: vec![],
    }
}

/// Uniformly controlled Ry: target rotated by `thetas[j]` when the controls
/// (first listed = MSB) read `j`. Gray-code form with 2^k Ry and 2^k CNOTs
/// (k >= 1), no ancillas.
pub fn uniformly_controlled_ry(controls: &[usize], target: usize, thetas: &[f64]) -> Vec<Gate> {
    let k = controls.len();
    assert_eq!(thetas.len(), 1usize << k);
    if k == 0 {
        return vec![Gate::ry(thetas[0], target)];
    }
    let n = 1usize << k;
    let gray = |i: usize| i ^ (i >> 1);
    let mut out = Vec::with_capacity(2 * n);
    for i in 0..n {
        let g = gray(i);
        let alpha: f64 = thetas
            .iter()
            .enumerate()
            .map(|(j, t)| if (j & g).count_ones() % 2 == 0 { *t } else { -*t })
            .sum::<f64>()
            / n as f64;
        out.push(Gate::ry(alpha, target));
        let flip = g ^ gray((i + 1) % n);
        let bit = flip.trailing_zeros() as usize;
        out.push(Gate::cnot(controls[k - 1 - bit], target));
    }
    out
}

/// Binary-tree loader of an arbitrary pmf on n = log2(len) qubits.
pub fn exact_pmf_loader(pmf: &[f64]) -> Result<DistributionCircuit> {
    let len = pmf.len();
    if len == 0 || !len.is_power_of_two() {
        return Err(QmciError::invalid("pmf length must be a power of two"));
    }
    if pmf.iter().any(|&p| p < 0.0 || !p.is_finite()) {
        return Err(QmciError::invalid("pmf has a negative or non-finite entry"));
    }
    let total: f64 = pmf.iter().sum();
    if (total - 1.0).abs() > 1e-9 {
        return Err(QmciError::invalid(format!("pmf sums to {total}, not 1")));
    }
    let n = len.trailing_zeros() as usize;
    let mut circuit = QuantumCircuit::named(n.max(1), "exact_pmf");
    // prefix masses per level: level k has 2^k buckets
    let mut levels: Vec<Vec<f64>> = vec![pmf.to_vec()];
    while levels.last().unwrap().len() > 1 {
        let prev = levels.last().unwrap();
        levels.push(prev.chunks(2).map(|c| c[0] + c[1]).collect());
    }
    levels.reverse();
    for k in 0..n {
        let parent = &levels[k];
        let child = &levels[k + 1];
        let thetas: Vec<f64> = (0..parent.len())
            .map(|j| 2.0 * child[2 * j + 1].max(0.0).sqrt().atan2(child[2 * j].max(0.0).sqrt()))
            .collect();
        let controls: Vec<usize> = (0..k).collect();
        circuit.extend(uniformly_controlled_ry(&controls, k, &thetas));
    }
    Ok(DistributionCircuit {
        circuit,
        dims: vec![Dimension {
            qubits: (0..n.max(1)).collect(),
            x_l: 0.0,
            delta: 1.0,
        }],
        indicators: vec![],
    })
}

/// pmf_i proportional to the normal density at x_l + i * delta.
pub fn discretized_normal(n_points: usize, mean: f64, sd: f64, x_l: f64, delta: f64) -> Vec<f64> {
    let nd = Normal::new(mean, sd).expect("valid normal parameters");
    let w: Vec<f64> = (0..n_points)
        .map(|i| nd.pdf(x_l + i as f64 * delta) * delta)
        .collect();
    let s: f64 = w.iter().sum();
    w.into_iter().map(|v| v / s).collect()
}
