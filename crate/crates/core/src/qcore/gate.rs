use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{QmciError, Result};

/// The full gate alphabet understood by the engine.
#[allow(clippy::upper_case_acronyms)]
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum GateKind {
    X,
    H,
    S,
    T,
    Tdg,
    CNOT,
    Toffoli,
    Ry,
    Rx,
    Rz,
    CRy,
    CRx,
    CRz,
    TK1,
    MultiControlledX,
}

impl GateKind {
    pub fn n_params(self) -> usize {
        match self {
            GateKind::Ry
            | GateKind::Rx
            | GateKind::Rz
            | GateKind::CRy
            | GateKind::CRx
            | GateKind::CRz => 1,
            GateKind::TK1 => 3,
            _ => 0,
        }
    }

    /// Number of qubits, or `None` for the variadic multi-controlled X.
    pub fn arity(self) -> Option<usize> {
        match self {
            GateKind::X
            | GateKind::H
            | GateKind::S
            | GateKind::T
            | GateKind::Tdg
            | GateKind::Ry
            | GateKind::Rx
            | GateKind::Rz
            | GateKind::TK1 => Some(1),
            GateKind::CNOT | GateKind::CRy | GateKind::CRx | GateKind::CRz => Some(2),
            GateKind::Toffoli => Some(3),
            GateKind::MultiControlledX => None,
        }
    }

    pub fn is_single_qubit(self) -> bool {
        self.arity() == Some(1)
    }

    /// Gates that permute computational basis states.
    pub fn is_permutation(self) -> bool {
        matches!(
            self,
            GateKind::X | GateKind::CNOT | GateKind::Toffoli | GateKind::MultiControlledX
        )
    }

    pub fn is_controlled_rotation(self) -> bool {
        matches!(self, GateKind::CRy | GateKind::CRx | GateKind::CRz)
    }

    pub fn is_rotation(self) -> bool {
        matches!(self, GateKind::Ry | GateKind::Rx | GateKind::Rz)
    }
}

/// One gate: controls first, target last.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Gate {
    pub kind: GateKind,
    #[serde(default)]
    pub params: Vec<f64>,
    pub qubits: Vec<usize>,
}

impl Gate {
    pub fn new(kind: GateKind, params: Vec<f64>, qubits: Vec<usize>) -> Self {
        Gate {
            kind,
            params,
            qubits,
        }
    }

    pub fn x(q: usize) -> Self {
        Gate::new(GateKind::X, vec![], vec![q])
    }
    pub fn h(q: usize) -> Self {
        Gate::new(GateKind::H, vec![], vec![q])
    }
    pub fn s(q: usize) -> Self {
        Gate::new(GateKind::S, vec![], vec![q])
    }
    pub fn t(q: usize) -> Self {
        Gate::new(GateKind::T, vec![], vec![q])
    }
    pub fn tdg(q: usize) -> Self {
        Gate::new(GateKind::Tdg, vec![], vec![q])
    }
    pub fn cnot(c: usize, t: usize) -> Self {
        Gate::new(GateKind::CNOT, vec![], vec![c, t])
    }
    pub fn toffoli(a: usize, b: usize, t: usize) -> Self {
        Gate::new(GateKind::Toffoli, vec![], vec![a, b, t])
    }
    pub fn ry(theta: f64, q: usize) -> Self {
        Gate::new(GateKind::Ry, vec![theta], vec![q])
    }
    pub fn rx(theta: f64, q: usize) -> Self {
        Gate::new(GateKind::Rx, vec![theta], vec![q])
    }
    pub fn rz(theta: f64, q: usize) -> Self {
        Gate::new(GateKind::Rz, vec![theta], vec![q])
    }
    pub fn cry(theta: f64, c: usize, t: usize) -> Self {
        Gate::new(GateKind::CRy, vec![theta], vec![c, t])
    }
    pub fn crx(theta: f64, c: usize, t: usize) -> Self {
        Gate::new(GateKind::CRx, vec![theta], vec![c, t])
    }
    pub fn crz(theta: f64, c: usize, t: usize) -> Self {
        Gate::new(GateKind::CRz, vec![theta], vec![c, t])
    }
    pub fn tk1(alpha: f64, beta: f64, gamma: f64, q: usize) -> Self {
        Gate::new(GateKind::TK1, vec![alpha, beta, gamma], vec![q])
    }

    /// X on `target` controlled on every qubit of `controls`, choosing the
    /// narrowest kind (X, CNOT, Toffoli or MultiControlledX).
    pub fn mcx(controls: &[usize], target: usize) -> Self {
        let mut qubits = controls.to_vec();
        qubits.push(target);
        let kind = match controls.len() {
            0 => GateKind::X,
            1 => GateKind::CNOT,
            2 => GateKind::Toffoli,
            _ => GateKind::MultiControlledX,
        };
        Gate::new(kind, vec![], qubits)
    }

    pub fn target(&self) -> usize {
        *self.qubits.last().expect("gate without qubits")
    }

    pub fn controls(&self) -> &[usize] {
        &self.qubits[..self.qubits.len() - 1]
    }

    pub fn validate(&self, n_qubits: usize) -> Result<()> {
        if self.params.len() != self.kind.n_params() {
            return Err(QmciError::invalid(format!(
                "{:?} expects {} params, got {}",
                self.kind,
                self.kind.n_params(),
                self.params.len()
            )));
        }
        match self.kind.arity() {
            Some(k) if k != self.qubits.len() => {
                return Err(QmciError::invalid(format!(
                    "{:?} expects {} qubits, got {}",
                    self.kind,
                    k,
                    self.qubits.len()
                )))
            }
            None if self.qubits.is_empty() => {
                return Err(QmciError::invalid("MultiControlledX without qubits"));
            }
            _ => {}
        }
        for (i, &q) in self.qubits.iter().enumerate() {
            if q >= n_qubits {
                return Err(QmciError::invalid(format!(
                    "qubit {q} out of range for {n_qubits}-qubit circuit"
                )));
            }
            if self.qubits[..i].contains(&q) {
                return Err(QmciError::invalid(format!("repeated qubit {q} in {:?}", self.kind)));
            }
        }
        if self.params.iter().any(|p| !p.is_finite()) {
            return Err(QmciError::invalid("non-finite gate parameter"));
        }
        Ok(())
    }

    /// Exact inverse as a gate sequence (S needs three copies of itself).
    pub fn inverse(&self) -> Vec<Gate> {
        match self.kind {
            GateKind::X
            | GateKind::H
            | GateKind::CNOT
            | GateKind::Toffoli
            | GateKind::MultiControlledX => vec![self.clone()],
            GateKind::S => vec![self.clone(), self.clone(), self.clone()],
            GateKind::T => vec![Gate::new(GateKind::Tdg, vec![], self.qubits.clone())],
            GateKind::Tdg => vec![Gate::new(GateKind::T, vec![], self.qubits.clone())],
            GateKind::Ry
            | GateKind::Rx
            | GateKind::Rz
            | GateKind::CRy
            | GateKind::CRx
            | GateKind::CRz => vec![Gate::new(self.kind, vec![-self.params[0]], self.qubits.clone())],
            GateKind::TK1 => vec![Gate::tk1(
                -self.params[2],
                -self.params[1],
                -self.params[0],
                self.qubits[0],
            )],
        }
    }

    /// Exact controlled version of this gate on control qubit `c`.
    ///
    /// T and Tdg are refused: their only cheap controlled forms are exact up
    /// to a phase that would become relative under a further control.
    pub fn controlled(&self, c: usize) -> Result<Vec<Gate>> {
        if self.qubits.contains(&c) {
            return Err(QmciError::invalid(format!(
                "control qubit {c} already used by {:?}",
                self.kind
            )));
        }
        let q = &self.qubits;
        let out = match self.kind {
            GateKind::X => vec![Gate::cnot(c, q[0])],
            GateKind::CNOT => vec![Gate::toffoli(c, q[0], q[1])],
            GateKind::Toffoli | GateKind::MultiControlledX => {
                let mut ctrls = vec![c];
                ctrls.extend_from_slice(self.controls());
                vec![Gate::mcx(&ctrls, self.target())]
            }
            GateKind::Ry => vec![Gate::cry(self.params[0], c, q[0])],
            GateKind::Rx => vec![Gate::crx(self.params[0], c, q[0])],
            GateKind::Rz => vec![Gate::crz(self.params[0], c, q[0])],
            GateKind::CRy | GateKind::CRx | GateKind::CRz => {
                // Rotations about one axis commute, so the doubly controlled
                // rotation splits into three singly controlled halves.
                let phi = self.params[0];
                let (a, t) = (q[0], q[1]);
                let k = self.kind;
                vec![
                    Gate::new(k, vec![phi / 2.0], vec![a, t]),
                    Gate::cnot(c, a),
                    Gate::new(k, vec![-phi / 2.0], vec![a, t]),
                    Gate::cnot(c, a),
                    Gate::new(k, vec![phi / 2.0], vec![c, t]),
                ]
            }
            // H = Ry(pi/2) Z exactly
            GateKind::H => vec![
                Gate::h(q[0]),
                Gate::cnot(c, q[0]),
                Gate::h(q[0]),
                Gate::cry(PI / 2.0, c, q[0]),
            ],
            // S = T^2 phase times Rz(pi/2): the phase lands on the control
            GateKind::S => vec![Gate::t(c), Gate::crz(PI / 2.0, c, q[0])],
            GateKind::TK1 => vec![
                Gate::crz(self.params[2], c, q[0]),
                Gate::crx(self.params[1], c, q[0]),
                Gate::crz(self.params[0], c, q[0]),
            ],
            GateKind::T | GateKind::Tdg => {
                return Err(QmciError::Unsupported(format!(
                    "controlled {:?} is not exact in this gate set",
                    self.kind
                )))
            }
        };
        Ok(out)
    }
}
