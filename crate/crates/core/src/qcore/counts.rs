use serde::{Deserialize, Serialize};

use super::circuit::{QuantumCircuit, ResourceBox};
use super::gate::GateKind;
use super::rebase;
use crate::error::Result;

/// Gate and depth tallies of a circuit rebased to {TK1, CNOT}.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct NisqCounts {
    pub n_qubits: u64,
    pub total_gates: u64,
    pub cnot_count: u64,
    pub tk1_count: u64,
    pub total_depth: u64,
    pub cnot_depth: u64,
    pub tk1_depth: u64,
}

impl NisqCounts {
    /// Field-wise sum; qubits take the maximum.
    pub fn add(&self, o: &NisqCounts) -> NisqCounts {
        NisqCounts {
            n_qubits: self.n_qubits.max(o.n_qubits),
            total_gates: self.total_gates + o.total_gates,
            cnot_count: self.cnot_count + o.cnot_count,
            tk1_count: self.tk1_count + o.tk1_count,
            total_depth: self.total_depth + o.total_depth,
            cnot_depth: self.cnot_depth + o.cnot_depth,
            tk1_depth: self.tk1_depth + o.tk1_depth,
        }
    }

    pub fn scaled(&self, k: u64) -> NisqCounts {
        NisqCounts {
            n_qubits: self.n_qubits,
            total_gates: self.total_gates * k,
            cnot_count: self.cnot_count * k,
            tk1_count: self.tk1_count * k,
            total_depth: self.total_depth * k,
            cnot_depth: self.cnot_depth * k,
            tk1_depth: self.tk1_depth * k,
        }
    }
}

/// (CNOT, TK1) footprint of one gate of `kind` after rebasing.
fn rebased_footprint(kind: GateKind) -> (u64, u64) {
    match kind {
        GateKind::CNOT => (1, 0),
        GateKind::Toffoli => (6, 8),
        GateKind::CRy | GateKind::CRz | GateKind::CRx => (2, 2),
        GateKind::MultiControlledX => (6, 8),
        _ => (0, 1),
    }
}

/// Incremental depth tracker so long products like Q^m A can be counted
/// without materialising them.
#[derive(Clone, Debug)]
pub struct NisqTracker {
    front: Vec<u64>,
    front_cx: Vec<u64>,
    front_tk1: Vec<u64>,
    counts: NisqCounts,
    box_depth: u64,
}

impl NisqTracker {
    pub fn new(n_qubits: usize) -> Self {
        NisqTracker {
            front: vec![0; n_qubits],
            front_cx: vec![0; n_qubits],
            front_tk1: vec![0; n_qubits],
            counts: NisqCounts {
                n_qubits: n_qubits as u64,
                ..Default::default()
            },
            box_depth: 0,
        }
    }

    fn feed_box(&mut self, b: &ResourceBox) {
        let mut cx = 0;
        let mut tk = 0;
        for (&k, &n) in &b.gates {
            let (c, t) = rebased_footprint(k);
            cx += c * n;
            tk += t * n;
        }
        self.counts.cnot_count += cx;
        self.counts.tk1_count += tk;
        self.counts.total_gates += cx + tk;
        self.counts.n_qubits = self.counts.n_qubits.max(b.n_qubits as u64);
        // boxes are placed on no particular wires: they serialise everything
        self.box_depth += b.depth.unwrap_or(cx + tk);
    }

    /// Feed a circuit already rebased to {TK1, CNOT}.
    pub fn feed(&mut self, circuit: &QuantumCircuit) -> Result<()> {
        rebase::check_rebased(circuit)?;
        if circuit.n_qubits > self.front.len() {
            let n = circuit.n_qubits;
            self.front.resize(n, 0);
            self.front_cx.resize(n, 0);
            self.front_tk1.resize(n, 0);
            self.counts.n_qubits = self.counts.n_qubits.max(n as u64);
        }
        let mut boxes = circuit.boxes.iter().peekable();
        for (i, g) in circuit.gates.iter().enumerate() {
            while let Some(b) = boxes.next_if(|b| b.placement == i) {
                self.feed_box(b);
            }
            let is_cx = g.kind == GateKind::CNOT;
            let mut d = 0;
            let mut dc = 0;
            let mut dt = 0;
            for &q in &g.qubits {
                d = d.max(self.front[q]);
                dc = dc.max(self.front_cx[q]);
                dt = dt.max(self.front_tk1[q]);
            }
            d += 1;
            if is_cx {
                dc += 1;
                self.counts.cnot_count += 1;
            } else {
                dt += 1;
                self.counts.tk1_count += 1;
            }
            self.counts.total_gates += 1;
            for &q in &g.qubits {
                self.front[q] = d;
                self.front_cx[q] = dc;
                self.front_tk1[q] = dt;
            }
        }
        for b in boxes {
            self.feed_box(b);
        }
        Ok(())
    }

    pub fn counts(&self) -> NisqCounts {
        let mx = |v: &[u64]| v.iter().copied().max().unwrap_or(0);
        NisqCounts {
            total_depth: mx(&self.front) + self.box_depth,
            cnot_depth: mx(&self.front_cx),
            tk1_depth: mx(&self.front_tk1),
            ..self.counts
        }
    }
}

/// Exact counts of a rebased circuit; errors on any other gate kind.
pub fn count_nisq(circuit: &QuantumCircuit) -> Result<NisqCounts> {
    let mut t = NisqTracker::new(circuit.n_qubits);
    t.feed(circuit)?;
    Ok(t.counts())
}

/// Fault-tolerant tallies of a circuit lowered to Clifford+T and rotations.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct FtCounts {
    pub n_qubits: u64,
    /// T and Tdg gates present explicitly.
    pub t_exact: u64,
    /// Single-axis rotations, each synthesised at `rotation_cost` T gates.
    pub rotations: u64,
    pub t_count: f64,
    pub t_depth: f64,
}

/// T-depth tracker with a per-rotation T cost.
#[derive(Clone, Debug)]
pub struct FtTracker {
    rotation_cost: f64,
    front: Vec<f64>,
    counts: FtCounts,
    box_depth: f64,
}

fn t_footprint(kind: GateKind) -> (u64, u64) {
    // (exact T, rotations) of one lowered gate
    match kind {
        GateKind::T | GateKind::Tdg => (1, 0),
        GateKind::Toffoli | GateKind::MultiControlledX => (7, 0),
        GateKind::Rx | GateKind::Ry | GateKind::Rz => (0, 1),
        GateKind::TK1 => (0, 3),
        GateKind::CRx | GateKind::CRy | GateKind::CRz => (0, 6),
        _ => (0, 0),
    }
}

impl FtTracker {
    pub fn new(n_qubits: usize, rotation_cost: f64) -> Self {
        FtTracker {
            rotation_cost,
            front: vec![0.0; n_qubits],
            counts: FtCounts {
                n_qubits: n_qubits as u64,
                ..Default::default()
            },
            box_depth: 0.0,
        }
    }

    fn feed_box(&mut self, b: &ResourceBox) {
        let mut t = 0;
        let mut r = 0;
        for (&k, &n) in &b.gates {
            let (a, c) = t_footprint(k);
            t += a * n;
            r += c * n;
        }
        self.counts.t_exact += t;
        self.counts.rotations += r;
        self.counts.n_qubits = self.counts.n_qubits.max(b.n_qubits as u64);
        self.box_depth += t as f64 + r as f64 * self.rotation_cost;
    }

    /// Feed a lowered circuit (output of `lower_to_rotations_clifford_t`).
    pub fn feed(&mut self, circuit: &QuantumCircuit) {
        if circuit.n_qubits > self.front.len() {
            self.front.resize(circuit.n_qubits, 0.0);
            self.counts.n_qubits = self.counts.n_qubits.max(circuit.n_qubits as u64);
        }
        let mut boxes = circuit.boxes.iter().peekable();
        for (i, g) in circuit.gates.iter().enumerate() {
            while let Some(b) = boxes.next_if(|b| b.placement == i) {
                self.feed_box(b);
            }
            let cost = match g.kind {
                GateKind::T | GateKind::Tdg => {
                    self.counts.t_exact += 1;
                    1.0
                }
                GateKind::Rx | GateKind::Ry | GateKind::Rz => {
                    self.counts.rotations += 1;
                    self.rotation_cost
                }
                _ => 0.0,
            };
            let mut d: f64 = 0.0;
            for &q in &g.qubits {
                d = d.max(self.front[q]);
            }
            d += cost;
            for &q in &g.qubits {
                self.front[q] = d;
            }
        }
        for b in boxes {
            self.feed_box(b);
        }
    }

    pub fn counts(&self) -> FtCounts {
        FtCounts {
            t_count: self.counts.t_exact as f64 + self.counts.rotations as f64 * self.rotation_cost,
            t_depth: self.front.iter().copied().fold(0.0, f64::max) + self.box_depth,
            ..self.counts
        }
    }
}

/// T cost of synthesising one rotation to accuracy `epsilon`.
pub fn rotation_t_cost(epsilon: f64) -> f64 {
    3.0 * (1.0 / epsilon).log2()
}
