//! Compilation passes: rebase to {TK1, CNOT} and lowering to Clifford+T plus
//! single-axis rotations.
//!
//! Multi-controlled X gates use a v-chain of Toffolis over clean ancillas that
//! are appended after the existing wires. A gate with k >= 3 controls borrows
//! k - 2 of them, computes the partial conjunctions, fires the final Toffoli
//! on the target and uncomputes, for 2(k - 2) + 1 Toffolis in total.

use std::f64::consts::PI;

use super::circuit::QuantumCircuit;
use super::gate::{Gate, GateKind};
use super::matrix::{self, M2};
use crate::error::{QmciError, Result};

/// Ancillas needed by the v-chain expansion of a gate.
pub fn vchain_ancillas(g: &Gate) -> usize {
    match g.kind {
        GateKind::MultiControlledX => g.qubits.len().saturating_sub(3),
        _ => 0,
    }
}

/// Toffoli sequence realising a multi-controlled X with ancillas starting at
/// wire `anc0`.
pub fn vchain_toffolis(controls: &[usize], target: usize, anc0: usize) -> Vec<Gate> {
    let k = controls.len();
    match k {
        0 => return vec![Gate::x(target)],
        1 => return vec![Gate::cnot(controls[0], target)],
        2 => return vec![Gate::toffoli(controls[0], controls[1], target)],
        _ => {}
    }
    let anc: Vec<usize> = (0..k - 2).map(|i| anc0 + i).collect();
    let mut up = vec![Gate::toffoli(controls[0], controls[1], anc[0])];
    for i in 2..k - 1 {
        up.push(Gate::toffoli(controls[i], anc[i - 2], anc[i - 1]));
    }
    let mut out = up.clone();
    out.push(Gate::toffoli(controls[k - 1], anc[k - 3], target));
    out.extend(up.into_iter().rev());
    out
}

/// Exact Clifford+T Toffoli: 6 CNOT, 7 T/Tdg, 2 H.
pub fn toffoli_clifford_t(a: usize, b: usize, t: usize) -> Vec<Gate> {
    vec![
        Gate::h(t),
        Gate::cnot(b, t),
        Gate::tdg(t),
        Gate::cnot(a, t),
        Gate::t(t),
        Gate::cnot(b, t),
        Gate::tdg(t),
        Gate::cnot(a, t),
        Gate::t(b),
        Gate::t(t),
        Gate::h(t),
        Gate::cnot(a, b),
        Gate::t(a),
        Gate::tdg(b),
        Gate::cnot(a, b),
    ]
}

fn total_ancillas(circuit: &QuantumCircuit) -> usize {
    circuit.gates.iter().map(vchain_ancillas).max().unwrap_or(0)
}

/// Expand one gate into single-qubit gates and CNOTs.
fn expand_cnot_basis(g: &Gate, anc0: usize, out: &mut Vec<Gate>) {
    let q = &g.qubits;
    match g.kind {
        GateKind::CNOT => out.push(g.clone()),
        GateKind::Toffoli => out.extend(toffoli_clifford_t(q[0], q[1], q[2])),
        GateKind::MultiControlledX => {
            for t in vchain_toffolis(g.controls(), g.target(), anc0) {
                expand_cnot_basis(&t, anc0, out);
            }
        }
        GateKind::CRy => {
            let phi = g.params[0];
            out.extend([
                Gate::ry(phi / 2.0, q[1]),
                Gate::cnot(q[0], q[1]),
                Gate::ry(-phi / 2.0, q[1]),
                Gate::cnot(q[0], q[1]),
            ]);
        }
        GateKind::CRz => {
            let phi = g.params[0];
            out.extend([
                Gate::rz(phi / 2.0, q[1]),
                Gate::cnot(q[0], q[1]),
                Gate::rz(-phi / 2.0, q[1]),
                Gate::cnot(q[0], q[1]),
            ]);
        }
        GateKind::CRx => {
            let phi = g.params[0];
            out.extend([
                Gate::h(q[1]),
                Gate::rz(phi / 2.0, q[1]),
                Gate::cnot(q[0], q[1]),
                Gate::rz(-phi / 2.0, q[1]),
                Gate::cnot(q[0], q[1]),
                Gate::h(q[1]),
            ]);
        }
        _ => out.push(g.clone()),
    }
}

/// Streams gates into {TK1, CNOT}, fusing each maximal run of single-qubit
/// gates on a wire into one TK1.
struct Fuser {
    pending: Vec<Option<M2>>,
    out: Vec<Gate>,
}

impl Fuser {
    fn new(n: usize) -> Self {
        Fuser {
            pending: vec![None; n],
            out: Vec::new(),
        }
    }

    fn flush(&mut self, q: usize) {
        if let Some(m) = self.pending[q].take() {
            let (a, b, c) = matrix::zxz_angles(&m);
            self.out.push(Gate::tk1(a, b, c, q));
        }
    }

    fn feed(&mut self, g: Gate) {
        if g.kind == GateKind::CNOT {
            self.flush(g.qubits[0]);
            self.flush(g.qubits[1]);
            self.out.push(g);
        } else {
            let m = matrix::single_qubit(g.kind, &g.params).expect("single-qubit gate");
            let q = g.qubits[0];
            self.pending[q] = Some(match self.pending[q] {
                Some(p) => matrix::mul(&m, &p),
                None => m,
            });
        }
    }

    fn finish(mut self) -> Vec<Gate> {
        for q in 0..self.pending.len() {
            self.flush(q);
        }
        self.out
    }
}

/// Rebase to {TK1, CNOT}. Extra wires (v-chain ancillas) are appended after
/// the input's wires and return to |0>. Resource boxes pass through with
/// their placement mapped onto the output.
pub fn rebase_tk1_cnot(circuit: &QuantumCircuit) -> Result<QuantumCircuit> {
    circuit.validate()?;
    let anc0 = circuit.n_qubits;
    let n = circuit.n_qubits + total_ancillas(circuit);
    let mut fuser = Fuser::new(n);
    let mut box_iter = circuit.boxes.iter().peekable();
    let mut boxes = Vec::new();
    let mut scratch = Vec::new();
    for (i, g) in circuit.gates.iter().enumerate() {
        while let Some(b) = box_iter.next_if(|b| b.placement == i) {
            // a box is a barrier: settle every pending wire first
            for q in 0..n {
                fuser.flush(q);
            }
            boxes.push(super::circuit::ResourceBox {
                placement: fuser.out.len(),
                ..b.clone()
            });
        }
        scratch.clear();
        expand_cnot_basis(g, anc0, &mut scratch);
        for e in scratch.drain(..) {
            fuser.feed(e);
        }
    }
    let mut gates = fuser.finish();
    for b in box_iter {
        boxes.push(super::circuit::ResourceBox {
            placement: gates.len(),
            ..b.clone()
        });
    }
    gates.shrink_to_fit();
    Ok(QuantumCircuit {
        n_qubits: n,
        gates,
        name: circuit.name.clone(),
        boxes,
    })
}

/// Generic controlled-U for U = Rz(a) Ry(b) Rz(c) in SU(2):
/// C, CNOT, B, CNOT, A on the target plus the phase rotation on the control,
/// with A = Rz(a) Ry(b/2), B = Ry(-b/2) Rz(-(a+c)/2), C = Rz((c-a)/2).
/// Always six rotations, even when some angles vanish.
fn controlled_zyz(ctrl: usize, t: usize, a: f64, b: f64, c: f64, out: &mut Vec<Gate>) {
    out.push(Gate::rz((c - a) / 2.0, t));
    out.push(Gate::cnot(ctrl, t));
    out.push(Gate::rz(-(a + c) / 2.0, t));
    out.push(Gate::ry(-b / 2.0, t));
    out.push(Gate::cnot(ctrl, t));
    out.push(Gate::ry(b / 2.0, t));
    out.push(Gate::rz(a, t));
    out.push(Gate::rz(0.0, ctrl));
}

fn lower_gate(g: &Gate, anc0: usize, out: &mut Vec<Gate>) {
    let q = &g.qubits;
    match g.kind {
        GateKind::X => out.extend([Gate::h(q[0]), Gate::s(q[0]), Gate::s(q[0]), Gate::h(q[0])]),
        GateKind::TK1 => out.extend([
            Gate::rz(g.params[2], q[0]),
            Gate::rx(g.params[1], q[0]),
            Gate::rz(g.params[0], q[0]),
        ]),
        GateKind::Toffoli => out.extend(toffoli_clifford_t(q[0], q[1], q[2])),
        GateKind::MultiControlledX => {
            for t in vchain_toffolis(g.controls(), g.target(), anc0) {
                lower_gate(&t, anc0, out);
            }
        }
        GateKind::CRy => controlled_zyz(q[0], q[1], 0.0, g.params[0], 0.0, out),
        GateKind::CRz => controlled_zyz(q[0], q[1], g.params[0], 0.0, 0.0, out),
        // Rx(phi) = Rz(-pi/2) Ry(phi) Rz(pi/2)
        GateKind::CRx => controlled_zyz(q[0], q[1], -PI / 2.0, g.params[0], PI / 2.0, out),
        _ => out.push(g.clone()),
    }
}

/// Lower to {CNOT, H, S, T, Tdg, Rx, Ry, Rz}.
pub fn lower_to_rotations_clifford_t(circuit: &QuantumCircuit) -> Result<QuantumCircuit> {
    circuit.validate()?;
    let anc0 = circuit.n_qubits;
    let n = circuit.n_qubits + total_ancillas(circuit);
    let mut gates = Vec::with_capacity(circuit.gates.len() * 2);
    let mut boxes = Vec::new();
    let mut box_iter = circuit.boxes.iter().peekable();
    for (i, g) in circuit.gates.iter().enumerate() {
        while let Some(b) = box_iter.next_if(|b| b.placement == i) {
            boxes.push(super::circuit::ResourceBox {
                placement: gates.len(),
                ..b.clone()
            });
        }
        lower_gate(g, anc0, &mut gates);
    }
    for b in box_iter {
        boxes.push(super::circuit::ResourceBox {
            placement: gates.len(),
            ..b.clone()
        });
    }
    Ok(QuantumCircuit {
        n_qubits: n,
        gates,
        name: circuit.name.clone(),
        boxes,
    })
}

/// Reject anything outside {TK1, CNOT}.
pub fn check_rebased(circuit: &QuantumCircuit) -> Result<()> {
    match circuit
        .gates
        .iter()
        .find(|g| !matches!(g.kind, GateKind::TK1 | GateKind::CNOT))
    {
        Some(g) => Err(QmciError::invalid(format!(
            "{:?} present in a circuit expected to be rebased",
            g.kind
        ))),
        None => Ok(()),
    }
}
