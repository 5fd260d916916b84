use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::circuit::QuantumCircuit;
use super::gate::{Gate, GateKind};
use super::matrix::{self, M2};
use crate::error::{QmciError, Result};

/// Widest register the dense simulator accepts unless told otherwise.
pub const DEFAULT_MAX_QUBITS: usize = 30;

/// Dense amplitude vector; basis index bit `n-1-q` holds qubit `q`.
#[derive(Clone, Debug, PartialEq)]
pub struct StateVector {
    n_qubits: usize,
    amplitudes: Vec<Complex64>,
}

impl StateVector {
    pub fn zero(n_qubits: usize) -> Self {
        StateVector::basis(n_qubits, 0)
    }

    pub fn basis(n_qubits: usize, index: usize) -> Self {
        let mut amplitudes = vec![Complex64::new(0.0, 0.0); 1usize << n_qubits];
        amplitudes[index] = Complex64::new(1.0, 0.0);
        StateVector {
            n_qubits,
            amplitudes,
        }
    }

    pub fn from_amplitudes(amplitudes: Vec<Complex64>) -> Result<Self> {
        let len = amplitudes.len();
        if len == 0 || !len.is_power_of_two() {
            return Err(QmciError::Dimension(format!(
                "amplitude vector length {len} is not a power of two"
            )));
        }
        let norm: f64 = amplitudes.iter().map(|a| a.norm_sqr()).sum();
        if (norm - 1.0).abs() > 1e-9 {
            return Err(QmciError::invalid(format!("state norm {norm} is not 1")));
        }
        Ok(StateVector {
            n_qubits: len.trailing_zeros() as usize,
            amplitudes,
        })
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    pub fn into_amplitudes(self) -> Vec<Complex64> {
        self.amplitudes
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum()
    }

    pub fn probabilities(&self) -> Vec<f64> {
        self.amplitudes.iter().map(|a| a.norm_sqr()).collect()
    }

    /// Probability that qubit `q` reads 1.
    pub fn prob_one(&self, q: usize) -> f64 {
        let bit = self.bit(q);
        self.amplitudes
            .iter()
            .enumerate()
            .filter(|(i, _)| i & bit != 0)
            .map(|(_, a)| a.norm_sqr())
            .sum()
    }

    /// |<self|other>|^2.
    pub fn fidelity(&self, other: &StateVector) -> f64 {
        let ov: Complex64 = self
            .amplitudes
            .iter()
            .zip(&other.amplitudes)
            .map(|(a, b)| a.conj() * b)
            .sum();
        ov.norm_sqr()
    }

    /// Tensor with `extra` fresh |0> qubits appended after the existing ones.
    pub fn extended(&self, extra: usize) -> StateVector {
        let mut amplitudes = vec![Complex64::new(0.0, 0.0); 1usize << (self.n_qubits + extra)];
        for (i, a) in self.amplitudes.iter().enumerate() {
            amplitudes[i << extra] = *a;
        }
        StateVector {
            n_qubits: self.n_qubits + extra,
            amplitudes,
        }
    }

    fn bit(&self, q: usize) -> usize {
        1usize << (self.n_qubits - 1 - q)
    }

    fn mask(&self, qubits: &[usize]) -> usize {
        qubits.iter().fold(0, |m, &q| m | self.bit(q))
    }

    pub fn apply(&mut self, gate: &Gate) -> Result<()> {
        gate.validate(self.n_qubits)?;
        match gate.kind {
            GateKind::X | GateKind::CNOT | GateKind::Toffoli | GateKind::MultiControlledX => {
                let cm = self.mask(gate.controls());
                self.apply_x(gate.target(), cm);
            }
            GateKind::Rz => self.apply_diag(gate.target(), 0, &matrix::rz(gate.params[0])),
            GateKind::CRz => {
                let cm = self.mask(gate.controls());
                self.apply_diag(gate.target(), cm, &matrix::rz(gate.params[0]));
            }
            GateKind::S | GateKind::T | GateKind::Tdg => {
                let m = matrix::single_qubit(gate.kind, &[]).expect("single-qubit kind");
                self.apply_diag(gate.target(), 0, &m);
            }
            GateKind::CRy | GateKind::CRx => {
                let cm = self.mask(gate.controls());
                let m = matrix::controlled_target(gate.kind, gate.params[0]).expect("rotation");
                self.apply_1q(gate.target(), cm, &m);
            }
            _ => {
                let m = matrix::single_qubit(gate.kind, &gate.params)
                    .ok_or_else(|| QmciError::Unsupported(format!("{:?}", gate.kind)))?;
                self.apply_1q(gate.target(), 0, &m);
            }
        }
        Ok(())
    }

    fn apply_x(&mut self, target: usize, cm: usize) {
        let tb = self.bit(target);
        let len = self.amplitudes.len();
        let mut base = 0;
        while base < len {
            for i in base..base + tb {
                if i & cm == cm {
                    self.amplitudes.swap(i, i | tb);
                }
            }
            base += 2 * tb;
        }
    }

    fn apply_diag(&mut self, target: usize, cm: usize, m: &M2) {
        let tb = self.bit(target);
        let (d0, d1) = (m[0][0], m[1][1]);
        for (i, a) in self.amplitudes.iter_mut().enumerate() {
            if i & cm == cm {
                *a *= if i & tb == 0 { d0 } else { d1 };
            }
        }
    }

    fn apply_1q(&mut self, target: usize, cm: usize, m: &M2) {
        let tb = self.bit(target);
        let len = self.amplitudes.len();
        let mut base = 0;
        while base < len {
            for i in base..base + tb {
                if i & cm == cm {
                    let j = i | tb;
                    let (a0, a1) = (self.amplitudes[i], self.amplitudes[j]);
                    self.amplitudes[i] = m[0][0] * a0 + m[0][1] * a1;
                    self.amplitudes[j] = m[1][0] * a0 + m[1][1] * a1;
                }
            }
            base += 2 * tb;
        }
    }
}

/// Exact simulation from `initial` (or |0...0>) with the default width cap.
pub fn simulate(circuit: &QuantumCircuit, initial: Option<&StateVector>) -> Result<StateVector> {
    simulate_with_limit(circuit, initial, DEFAULT_MAX_QUBITS)
}

pub fn simulate_with_limit(
    circuit: &QuantumCircuit,
    initial: Option<&StateVector>,
    max_qubits: usize,
) -> Result<StateVector> {
    if circuit.has_boxes() {
        return Err(QmciError::Unsupported(
            "circuits containing resource boxes cannot be simulated".into(),
        ));
    }
    if circuit.n_qubits > max_qubits {
        return Err(QmciError::Dimension(format!(
            "{} qubits exceeds the simulator limit of {max_qubits}",
            circuit.n_qubits
        )));
    }
    let mut state = match initial {
        Some(s) => {
            if s.n_qubits != circuit.n_qubits {
                return Err(QmciError::Dimension(format!(
                    "state has {} qubits, circuit has {}",
                    s.n_qubits, circuit.n_qubits
                )));
            }
            s.clone()
        }
        None => StateVector::zero(circuit.n_qubits),
    };
    for g in &circuit.gates {
        state.apply(g)?;
    }
    Ok(state)
}

fn check_qubits(n: usize, qubits: &[usize]) -> Result<()> {
    for (i, &q) in qubits.iter().enumerate() {
        if q >= n {
            return Err(QmciError::invalid(format!("qubit {q} out of range")));
        }
        if qubits[..i].contains(&q) {
            return Err(QmciError::invalid(format!("duplicate qubit {q}")));
        }
    }
    Ok(())
}

/// Marginal distribution over `qubits`; the first listed qubit is the MSB of
/// the outcome index.
pub fn marginal_pmf(state: &StateVector, qubits: &[usize]) -> Result<Vec<f64>> {
    let n = state.n_qubits;
    check_qubits(n, qubits)?;
    let k = qubits.len();
    let mut pmf = vec![0.0; 1usize << k];
    for (i, a) in state.amplitudes.iter().enumerate() {
        let p = a.norm_sqr();
        if p == 0.0 {
            continue;
        }
        let mut j = 0usize;
        for &q in qubits {
            j = (j << 1) | ((i >> (n - 1 - q)) & 1);
        }
        pmf[j] += p;
    }
    Ok(pmf)
}

/// Marginal pmf over `qubits` of `circuit` applied to |0...0>, without a
/// state vector over every wire when the circuit allows it.
///
/// Everything after the last non-permutation gate is reversible classical
/// logic, so only the wires touched before that point are simulated; each
/// basis state in the support is then pushed through the rest as a bit
/// string. Falls back to full simulation for narrow circuits.
pub fn outcome_pmf(circuit: &QuantumCircuit, qubits: &[usize]) -> Result<Vec<f64>> {
    check_qubits(circuit.n_qubits, qubits)?;
    if circuit.n_qubits <= 20 {
        return marginal_pmf(&simulate(circuit, None)?, qubits);
    }
    if circuit.has_boxes() {
        return Err(QmciError::Unsupported(
            "circuits containing resource boxes cannot be simulated".into(),
        ));
    }
    let split = circuit
        .gates
        .iter()
        .rposition(|g| !g.kind.is_permutation())
        .map_or(0, |i| i + 1);
    let mut active: Vec<usize> = circuit.gates[..split]
        .iter()
        .flat_map(|g| g.qubits.iter().copied())
        .collect();
    active.sort_unstable();
    active.dedup();
    let mut local = vec![usize::MAX; circuit.n_qubits];
    for (i, &q) in active.iter().enumerate() {
        local[q] = i;
    }
    let mut head = QuantumCircuit::new(active.len());
    for g in &circuit.gates[..split] {
        head.gates.push(Gate::new(g.kind, g.params.clone(), g.qubits.iter().map(|&q| local[q]).collect()));
    }
    let mut tail = QuantumCircuit::new(circuit.n_qubits);
    tail.gates.extend_from_slice(&circuit.gates[split..]);
    let head_state = simulate(&head, None)?;
    let k = active.len();
    let mut pmf = vec![0.0; 1usize << qubits.len()];
    let mut bits = vec![false; circuit.n_qubits];
    for (i, a) in head_state.amplitudes.iter().enumerate() {
        let p = a.norm_sqr();
        if p == 0.0 {
            continue;
        }
        bits.fill(false);
        for (j, &q) in active.iter().enumerate() {
            bits[q] = (i >> (k - 1 - j)) & 1 == 1;
        }
        classical_eval(&tail, &mut bits)?;
        let j = qubits.iter().fold(0usize, |acc, &q| (acc << 1) | bits[q] as usize);
        pmf[j] += p;
    }
    Ok(pmf)
}

/// `n` independent measurement outcomes of `qubits`, reproducible per seed.
pub fn sample(state: &StateVector, qubits: &[usize], n: usize, seed: u64) -> Result<Vec<usize>> {
    if n == 0 {
        return Err(QmciError::invalid("sample count must be positive"));
    }
    let pmf = marginal_pmf(state, qubits)?;
    Ok(sample_pmf(&pmf, n, seed))
}

pub(crate) fn sample_pmf(pmf: &[f64], n: usize, seed: u64) -> Vec<usize> {
    let mut cdf = Vec::with_capacity(pmf.len());
    let mut acc = 0.0;
    for p in pmf {
        acc += p;
        cdf.push(acc);
    }
    let total = acc;
    let last_nonzero = pmf.iter().rposition(|&p| p > 0.0).unwrap_or(0);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let u: f64 = rng.random::<f64>() * total;
            cdf.partition_point(|&c| c <= u).min(last_nonzero)
        })
        .collect()
}

/// Run a permutation circuit (X, CNOT, Toffoli, MultiControlledX) on a
/// classical bit string indexed by qubit.
pub fn classical_eval(circuit: &QuantumCircuit, bits: &mut [bool]) -> Result<()> {
    if bits.len() != circuit.n_qubits {
        return Err(QmciError::Dimension("bit string width differs from circuit".into()));
    }
    for g in &circuit.gates {
        if !g.kind.is_permutation() {
            return Err(QmciError::Unsupported(format!(
                "{:?} is not a classical reversible gate",
                g.kind
            )));
        }
        if g.controls().iter().all(|&c| bits[c]) {
            let t = g.target();
            bits[t] = !bits[t];
        }
    }
    Ok(())
}
