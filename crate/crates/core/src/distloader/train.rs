use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use super::circuits::hwe_circuit;
use super::{Dimension, DistributionCircuit};
use crate::error::{QmciError, Result};
use crate::qcore::{Gate, StateVector};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Norm {
    L1,
    L2,
    Linf,
}

impl std::str::FromStr for Norm {
    type Err = QmciError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "L1" | "l1" => Ok(Norm::L1),
            "L2" | "l2" => Ok(Norm::L2),
            "Linf" | "linf" | "LINF" => Ok(Norm::Linf),
            other => Err(QmciError::invalid(format!("unknown norm {other:?}"))),
        }
    }
}

impl Norm {
    fn eval(self, target: &[f64], psi: &[f64]) -> f64 {
        let d = target.iter().zip(psi).map(|(t, p)| (t - p).abs());
        match self {
            Norm::L1 => d.sum(),
            Norm::L2 => d.map(|x| x * x).sum::<f64>().sqrt(),
            Norm::Linf => d.fold(0.0, f64::max),
        }
    }
}

#[derive(Clone, Debug)]
pub struct TrainOptions {
    pub max_sweeps: usize,
    /// Stop once a full sweep improves the cost by less than this.
    pub tol: f64,
}

impl Default for TrainOptions {
    fn default() -> Self {
        TrainOptions {
            max_sweeps: 300,
            tol: 1e-12,
        }
    }
}

#[derive(Clone, Debug)]
pub struct TrainResult {
    pub circuit: DistributionCircuit,
    pub final_cost: f64,
    /// (layer, qubit) angles.
    pub angles: Vec<Vec<f64>>,
    /// Cost after each sweep.
    pub trace: Vec<f64>,
}

/// Real parts of the state prepared by the ansatz.
fn prepare(n: usize, layers: &[Vec<f64>]) -> Vec<f64> {
    let mut s = StateVector::zero(n);
    for g in &hwe_circuit(n, layers).gates {
        s.apply(g).expect("valid ansatz gate");
    }
    s.amplitudes().iter().map(|a| a.re).collect()
}

/// Split the ansatz at parameter (l, q): the state just before its Ry and
/// the gates after it.
fn split_at(n: usize, layers: &[Vec<f64>], l: usize, q: usize) -> (StateVector, Vec<Gate>) {
    let gates = hwe_circuit(n, layers).gates;
    // layer l starts after l * (n + n - 1) gates
    let idx = l * (2 * n - 1) + q;
    let mut s = StateVector::zero(n);
    for g in &gates[..idx] {
        s.apply(g).expect("valid ansatz gate");
    }
    (s, gates[idx + 1..].to_vec())
}

fn run(mut s: StateVector, gates: &[Gate]) -> Vec<f64> {
    for g in gates {
        s.apply(g).expect("valid ansatz gate");
    }
    s.amplitudes().iter().map(|a| a.re).collect()
}

/// Coordinate-wise exact minimisation (Rotosolve). Each amplitude is
/// cos(t/2) A + sin(t/2) B in a single angle, so the L2 optimum is closed
/// form; L1 and Linf use a grid followed by golden-section refinement.
pub fn train_hwe_with(
    target_pmf: &[f64],
    n_layers: usize,
    norm: Norm,
    seed: u64,
    opts: &TrainOptions,
) -> Result<TrainResult> {
    let len = target_pmf.len();
    if len < 2 || !len.is_power_of_two() {
        return Err(QmciError::invalid("target length must be a power of two >= 2"));
    }
    if target_pmf.iter().any(|&p| p < 0.0 || !p.is_finite()) {
        return Err(QmciError::invalid("target has a negative or non-finite entry"));
    }
    let total: f64 = target_pmf.iter().sum();
    if (total - 1.0).abs() > 1e-9 {
        return Err(QmciError::invalid(format!("target sums to {total}, not 1")));
    }
    let n = len.trailing_zeros() as usize;
    let target: Vec<f64> = target_pmf.iter().map(|p| p.sqrt()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut layers: Vec<Vec<f64>> = (0..=n_layers)
        .map(|_| (0..n).map(|_| rng.random_range(0.0..2.0 * PI)).collect())
        .collect();
    let mut cost = norm.eval(&target, &prepare(n, &layers));
    let mut trace = Vec::new();
    for _ in 0..opts.max_sweeps {
        let before = cost;
        for l in 0..=n_layers {
            for q in 0..n {
                let (pre, suffix) = split_at(n, &layers, l, q);
                let mut pa = pre.clone();
                pa.apply(&Gate::ry(0.0, q))?;
                let a = run(pa, &suffix);
                let mut pb = pre;
                pb.apply(&Gate::ry(PI, q))?;
                let b = run(pb, &suffix);
                let at = |t: f64| -> Vec<f64> {
                    let (c, s) = ((t / 2.0).cos(), (t / 2.0).sin());
                    a.iter().zip(&b).map(|(x, y)| c * x + s * y).collect()
                };
                let f = |t: f64| norm.eval(&target, &at(t));
                let cand = match norm {
                    Norm::L2 => {
                        let ta: f64 = target.iter().zip(&a).map(|(t, x)| t * x).sum();
                        let tb: f64 = target.iter().zip(&b).map(|(t, x)| t * x).sum();
                        2.0 * tb.atan2(ta)
                    }
                    _ => grid_golden(&f, 0.0, 4.0 * PI, 256),
                };
                let fc = f(cand);
                if fc < cost {
                    cost = fc;
                    layers[l][q] = cand;
                }
            }
        }
        // recompute from scratch so the trace never drifts
        cost = norm.eval(&target, &prepare(n, &layers));
        trace.push(cost);
        if before - cost < opts.tol {
            break;
        }
    }
    let mut circuit = hwe_circuit(n, &layers);
    circuit.name = "hwe_trained".into();
    Ok(TrainResult {
        circuit: DistributionCircuit {
            circuit,
            dims: vec![Dimension {
                qubits: (0..n).collect(),
                x_l: 0.0,
                delta: 1.0,
            }],
            indicators: vec![],
        },
        final_cost: cost,
        angles: layers,
        trace,
    })
}

pub fn train_hwe(
    target_pmf: &[f64],
    n_layers: usize,
    norm: Norm,
    seed: u64,
) -> Result<(DistributionCircuit, f64)> {
    let r = train_hwe_with(target_pmf, n_layers, norm, seed, &TrainOptions::default())?;
    Ok((r.circuit, r.final_cost))
}

fn grid_golden(f: &dyn Fn(f64) -> f64, lo: f64, hi: f64, n: usize) -> f64 {
    let h = (hi - lo) / n as f64;
    let (mut best, mut fb) = (lo, f(lo));
    for i in 1..n {
        let t = lo + i as f64 * h;
        let v = f(t);
        if v < fb {
            best = t;
            fb = v;
        }
    }
    let (mut a, mut b) = (best - h, best + h);
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..60 {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = f(d);
        }
    }
    let m = 0.5 * (a + b);
    if f(m) < fb {
        m
    } else {
        best
    }
}
