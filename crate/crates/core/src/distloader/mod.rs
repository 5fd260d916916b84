//! Distribution-loading circuits: the canned six-qubit loaders, an exact
//! PMF loader, a hardware-efficient-ansatz trainer, the quantum-walk binomial
//! reference and divergence metrics.

mod circuits;
mod metrics;
mod train;
mod walk;

use serde::{Deserialize, Serialize};

use crate::error::{QmciError, Result};
use crate::qcore::{marginal_pmf, simulate, QuantumCircuit};

pub use circuits::{
    discretized_normal, exact_pmf_loader, hwe_circuit, standard_circuit, uniformly_controlled_ry,
    StandardCircuit,
};
pub use metrics::{divergence_metrics, DivergenceReport};
pub use train::{train_hwe, train_hwe_with, Norm, TrainOptions, TrainResult};
pub use walk::{walk_binomial_pmf, walk_vertex_class_pmf};

/// A register holding a fixed-point grid value `x_l + k * delta`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Dimension {
    /// MSB first.
    pub qubits: Vec<usize>,
    pub x_l: f64,
    pub delta: f64,
}

impl Dimension {
    pub fn width(&self) -> usize {
        self.qubits.len()
    }

    pub fn n_points(&self) -> usize {
        1usize << self.qubits.len()
    }

    pub fn value(&self, code: u128) -> f64 {
        self.x_l + code as f64 * self.delta
    }

    pub fn x_u(&self) -> f64 {
        self.value((1u128 << self.width()) - 1)
    }

    pub fn grid(&self) -> Vec<f64> {
        (0..self.n_points() as u128).map(|k| self.value(k)).collect()
    }
}

/// A loading circuit plus the classical metadata describing its registers.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DistributionCircuit {
    pub circuit: QuantumCircuit,
    pub dims: Vec<Dimension>,
    #[serde(default)]
    pub indicators: Vec<usize>,
}

impl DistributionCircuit {
    pub fn validate(&self) -> Result<()> {
        self.circuit.validate()?;
        let mut seen = vec![false; self.circuit.n_qubits];
        let data = self
            .dims
            .iter()
            .flat_map(|d| d.qubits.iter())
            .chain(self.indicators.iter());
        for &q in data {
            if q >= self.circuit.n_qubits {
                return Err(QmciError::invalid(format!("qubit {q} outside the circuit")));
            }
            if seen[q] {
                return Err(QmciError::invalid(format!("qubit {q} used by two registers")));
            }
            seen[q] = true;
        }
        for (i, d) in self.dims.iter().enumerate() {
            if d.qubits.is_empty() {
                return Err(QmciError::invalid(format!("dimension {i} has no qubits")));
            }
            if !(d.delta > 0.0 && d.delta.is_finite() && d.x_l.is_finite()) {
                return Err(QmciError::invalid(format!("dimension {i} has bad grid metadata")));
            }
        }
        Ok(())
    }

    pub fn n_qubits(&self) -> usize {
        self.circuit.n_qubits
    }

    pub fn dim(&self, i: usize) -> Result<&Dimension> {
        self.dims
            .get(i)
            .ok_or_else(|| QmciError::invalid(format!("no dimension {i}")))
    }

    pub fn indicator(&self, i: usize) -> Result<usize> {
        self.indicators
            .get(i)
            .copied()
            .ok_or_else(|| QmciError::invalid(format!("no indicator {i}")))
    }

    /// Wires belonging to a dimension or indicator.
    pub fn data_qubits(&self) -> Vec<usize> {
        let mut v: Vec<usize> = self
            .dims
            .iter()
            .flat_map(|d| d.qubits.iter().copied())
            .chain(self.indicators.iter().copied())
            .collect();
        v.sort_unstable();
        v
    }

    /// Wires owned by no register: clean scratch space between operations.
    pub fn scratch_qubits(&self) -> Vec<usize> {
        let data = self.data_qubits();
        (0..self.n_qubits())
            .filter(|q| data.binary_search(q).is_err())
            .collect()
    }

    /// Simulated marginal pmf of one dimension.
    pub fn marginal(&self, dim: usize) -> Result<Vec<f64>> {
        let d = self.dim(dim)?;
        let s = simulate(&self.circuit, None)?;
        marginal_pmf(&s, &d.qubits)
    }

    /// Independent product: `other` is placed on fresh wires after ours.
    pub fn tensor(&self, other: &DistributionCircuit) -> Result<DistributionCircuit> {
        let off = self.n_qubits();
        let mut circuit =
            QuantumCircuit::named(off + other.n_qubits(), self.circuit.name.clone());
        circuit.append(&self.circuit)?;
        let map: Vec<usize> = (0..other.n_qubits()).map(|q| q + off).collect();
        circuit.append_mapped(&other.circuit, &map)?;
        let mut dims = self.dims.clone();
        dims.extend(other.dims.iter().map(|d| Dimension {
            qubits: d.qubits.iter().map(|q| q + off).collect(),
            ..d.clone()
        }));
        let mut indicators = self.indicators.clone();
        indicators.extend(other.indicators.iter().map(|q| q + off));
        Ok(DistributionCircuit {
            circuit,
            dims,
            indicators,
        })
    }

    /// `n` independent copies.
    pub fn replicate(&self, n: usize) -> Result<DistributionCircuit> {
        if n == 0 {
            return Err(QmciError::invalid("need at least one copy"));
        }
        let mut out = self.clone();
        for _ in 1..n {
            out = out.tensor(self)?;
        }
        Ok(out)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("serializable")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let dc: DistributionCircuit =
            serde_json::from_str(s).map_err(|e| QmciError::Schema(e.to_string()))?;
        dc.validate()?;
        Ok(dc)
    }
}

/// Replace the grid metadata of one dimension; the circuit is untouched.
pub fn rescale(
    dc: &DistributionCircuit,
    dim: usize,
    new_x_l: f64,
    new_delta: f64,
) -> Result<DistributionCircuit> {
    dc.dim(dim)?;
    if !(new_delta > 0.0 && new_delta.is_finite()) {
        return Err(QmciError::invalid(format!("delta must be positive, got {new_delta}")));
    }
    let mut out = dc.clone();
    out.dims[dim].x_l = new_x_l;
    out.dims[dim].delta = new_delta;
    Ok(out)
}
