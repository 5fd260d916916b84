use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

use super::gate::{Gate, GateKind};
use crate::error::{QmciError, Result};

/// Placeholder for a sub-circuit known only by its resource footprint.
///
/// A box contributes `gates` (counted per kind) to every resource report but
/// cannot be simulated.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ResourceBox {
    pub n_qubits: usize,
    #[serde(default)]
    pub gates: BTreeMap<GateKind, u64>,
    /// Number of circuit gates preceding the box.
    #[serde(default)]
    pub placement: usize,
    /// Optional depth of the boxed operation; defaults to its gate total.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub depth: Option<u64>,
}

impl ResourceBox {
    pub fn total_gates(&self) -> u64 {
        self.gates.values().sum()
    }
}

/// Ordered gate list on `n_qubits` wires. Qubit 0 of any register is its MSB.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuantumCircuit {
    pub n_qubits: usize,
    pub gates: Vec<Gate>,
    #[serde(default)]
    pub name: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub boxes: Vec<ResourceBox>,
}

impl QuantumCircuit {
    pub fn new(n_qubits: usize) -> Self {
        QuantumCircuit {
            n_qubits,
            ..Default::default()
        }
    }

    pub fn named(n_qubits: usize, name: impl Into<String>) -> Self {
        QuantumCircuit {
            n_qubits,
            name: name.into(),
            ..Default::default()
        }
    }

    /// Append without validation; call [`validate`](Self::validate) when the
    /// gate source is untrusted.
    pub fn push(&mut self, gate: Gate) {
        self.gates.push(gate);
    }

    pub fn extend<I: IntoIterator<Item = Gate>>(&mut self, gates: I) {
        self.gates.extend(gates);
    }

    pub fn len(&self) -> usize {
        self.gates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gates.is_empty() && self.boxes.is_empty()
    }

    pub fn has_boxes(&self) -> bool {
        !self.boxes.is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        for g in &self.gates {
            g.validate(self.n_qubits)?;
        }
        for b in &self.boxes {
            if b.placement > self.gates.len() {
                return Err(QmciError::invalid("resource box placed past the end of the circuit"));
            }
        }
        Ok(())
    }

    /// Append `other` acting on the same wire indices.
    pub fn append(&mut self, other: &QuantumCircuit) -> Result<()> {
        if other.n_qubits > self.n_qubits {
            return Err(QmciError::Dimension(format!(
                "cannot append a {}-qubit circuit to a {}-qubit circuit",
                other.n_qubits, self.n_qubits
            )));
        }
        let offset = self.gates.len();
        self.gates.extend(other.gates.iter().cloned());
        self.boxes.extend(other.boxes.iter().map(|b| ResourceBox {
            placement: b.placement + offset,
            ..b.clone()
        }));
        Ok(())
    }

    /// Append `other` with its qubit `i` relabelled to `map[i]`.
    pub fn append_mapped(&mut self, other: &QuantumCircuit, map: &[usize]) -> Result<()> {
        if map.len() < other.n_qubits {
            return Err(QmciError::Dimension("qubit map shorter than circuit width".into()));
        }
        if let Some(&m) = map[..other.n_qubits].iter().find(|&&m| m >= self.n_qubits) {
            return Err(QmciError::Dimension(format!("mapped qubit {m} out of range")));
        }
        let offset = self.gates.len();
        for g in &other.gates {
            self.gates.push(Gate::new(
                g.kind,
                g.params.clone(),
                g.qubits.iter().map(|&q| map[q]).collect(),
            ));
        }
        self.boxes.extend(other.boxes.iter().map(|b| ResourceBox {
            placement: b.placement + offset,
            ..b.clone()
        }));
        Ok(())
    }

    pub fn inverse(&self) -> QuantumCircuit {
        let mut out = QuantumCircuit::named(self.n_qubits, format!("{}_dg", self.name));
        // inv_from[p] = number of inverse gates emitted for gates[p..]
        let mut inv_from = vec![0usize; self.gates.len() + 1];
        for (i, g) in self.gates.iter().enumerate().rev() {
            let inv = g.inverse();
            inv_from[i] = inv_from[i + 1] + inv.len();
            out.gates.extend(inv);
        }
        for b in self.boxes.iter().rev() {
            out.boxes.push(ResourceBox {
                placement: inv_from[b.placement.min(self.gates.len())],
                ..b.clone()
            });
        }
        out
    }

    /// Exact controlled version on control wire `c` (which must be unused by
    /// the circuit). Resource boxes are carried over unchanged.
    pub fn controlled(&self, c: usize) -> Result<QuantumCircuit> {
        let n = self.n_qubits.max(c + 1);
        let mut out = QuantumCircuit::named(n, format!("c_{}", self.name));
        let mut pos = Vec::with_capacity(self.gates.len() + 1);
        for g in &self.gates {
            pos.push(out.gates.len());
            out.gates.extend(g.controlled(c)?);
        }
        pos.push(out.gates.len());
        out.boxes = self
            .boxes
            .iter()
            .map(|b| ResourceBox {
                placement: pos[b.placement.min(self.gates.len())],
                ..b.clone()
            })
            .collect();
        Ok(out)
    }

    /// Gate tally by kind.
    pub fn kind_counts(&self) -> BTreeMap<GateKind, u64> {
        let mut m = BTreeMap::new();
        for g in &self.gates {
            *m.entry(g.kind).or_insert(0) += 1;
        }
        m
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("circuit serialization cannot fail")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let c: QuantumCircuit =
            serde_json::from_str(s).map_err(|e| QmciError::Schema(e.to_string()))?;
        c.validate()?;
        Ok(c)
    }
}

/// Z on `q`, written exactly as H X H.
pub fn z_gates(q: usize) -> [Gate; 3] {
    [Gate::h(q), Gate::x(q), Gate::h(q)]
}
