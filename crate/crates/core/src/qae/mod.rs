//! Amplitude estimation: Grover operator construction plus the PAM, MLQAE,
//! IQAE and LCU estimators.
//!
//! Estimators draw measurement outcomes from the exact outcome probabilities
//! of the circuits they would run. For plain Grover powers that probability is
//! sin^2((2m+1)theta), for LCU-prepared starts it is [`lcu_likelihood`]; both
//! are checked against full state-vector simulation of the circuits in the
//! test suite, so sampling from them is equivalent to simulating every shot.

mod iqae;
mod lcu;
mod posterior;

use std::f64::consts::FRAC_PI_2;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Serialize};

use crate::error::{QmciError, Result};
use crate::qcore::{simulate, z_gates, Gate, QuantumCircuit};

pub use iqae::{find_next_k, iqae_risk, iqae_use_bound, opt_ae};
pub use lcu::{
    lcu_angle, lcu_fail_probability, lcu_grover_operator, lcu_likelihood, lcu_prepare,
    lcu_simulated_likelihood, max_beta, LcuCategory,
};
pub use posterior::GridPosterior;
pub(crate) use posterior::golden_max;

/// A state preparation A whose `good_qubit` reads 1 with probability a.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QaeProblem {
    pub a_circuit: QuantumCircuit,
    pub good_qubit: usize,
    /// Wires reflected by S_0. Defaults to every wire; wires that A always
    /// returns to |0> may be left out.
    #[serde(default)]
    pub reflect_qubits: Option<Vec<usize>>,
}

impl QaeProblem {
    pub fn new(a_circuit: QuantumCircuit, good_qubit: usize) -> Result<Self> {
        if good_qubit >= a_circuit.n_qubits {
            return Err(QmciError::invalid(format!(
                "good qubit {good_qubit} outside a {}-qubit circuit",
                a_circuit.n_qubits
            )));
        }
        Ok(QaeProblem { a_circuit, good_qubit, reflect_qubits: None })
    }

    /// The two-qubit benchmark preparation: Ry(2 theta) then CNOT, good wire 1.
    pub fn benchmark(theta: f64) -> Self {
        let mut c = QuantumCircuit::named(2, "qae_benchmark");
        c.push(Gate::ry(2.0 * theta, 0));
        c.push(Gate::cnot(0, 1));
        QaeProblem { a_circuit: c, good_qubit: 1, reflect_qubits: None }
    }

    pub fn with_reflect_qubits(mut self, qubits: Vec<usize>) -> Self {
        self.reflect_qubits = Some(qubits);
        self
    }

    fn reflect_set(&self) -> Vec<usize> {
        match &self.reflect_qubits {
            Some(q) => q.clone(),
            None => (0..self.a_circuit.n_qubits).collect(),
        }
    }

    /// Exact a = P(good = 1) by simulating A once.
    pub fn amplitude(&self) -> Result<f64> {
        let s = simulate(&self.a_circuit, None)?;
        Ok(s.prob_one(self.good_qubit).clamp(0.0, 1.0))
    }
}

/// theta in [0, pi/2] with sin^2(theta) = a.
pub fn theta_of(a: f64) -> f64 {
    a.clamp(0.0, 1.0).sqrt().asin()
}

/// S_0 = I - 2|0><0| on `wires`, as X-conjugated multi-controlled Z.
pub fn zero_reflection(wires: &[usize]) -> Vec<Gate> {
    let mut g = Vec::new();
    let (&t, ctrls) = match wires.split_last() {
        Some(x) => x,
        None => return g,
    };
    g.extend(wires.iter().map(|&q| Gate::x(q)));
    g.push(Gate::h(t));
    g.push(Gate::mcx(ctrls, t));
    g.push(Gate::h(t));
    g.extend(wires.iter().map(|&q| Gate::x(q)));
    g
}

/// Q = -A S_0 A^dagger S_chi (up to global phase), acting on A's wires.
pub fn grover_operator(problem: &QaeProblem) -> QuantumCircuit {
    let a = &problem.a_circuit;
    let mut q = QuantumCircuit::named(a.n_qubits, format!("Q_{}", a.name));
    q.extend(z_gates(problem.good_qubit));
    q.append(&a.inverse()).expect("same width");
    q.extend(zero_reflection(&problem.reflect_set()));
    q.append(a).expect("same width");
    q
}

/// Q^m A as one circuit.
pub fn grover_power_circuit(problem: &QaeProblem, m: usize) -> QuantumCircuit {
    let mut c = problem.a_circuit.clone();
    let q = grover_operator(problem);
    for _ in 0..m {
        c.append(&q).expect("same width");
    }
    c.name = format!("Q{m}_{}", problem.a_circuit.name);
    c
}

/// P(good = 1) after Q^m A, by simulation.
pub fn grover_simulated_probability(problem: &QaeProblem, m: usize) -> Result<f64> {
    let s = simulate(&grover_power_circuit(problem, m), None)?;
    Ok(s.prob_one(problem.good_qubit))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum QaeKind {
    #[serde(rename = "PAM")]
    Pam,
    #[serde(rename = "MLQAE")]
    Mlqae,
    #[serde(rename = "IQAE")]
    Iqae,
    #[serde(rename = "LCU")]
    Lcu,
}

impl std::str::FromStr for QaeKind {
    type Err = QmciError;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "PAM" => Ok(QaeKind::Pam),
            "MLQAE" => Ok(QaeKind::Mlqae),
            "IQAE" => Ok(QaeKind::Iqae),
            "LCU" => Ok(QaeKind::Lcu),
            _ => Err(QmciError::invalid(format!("unknown QAE kind {s:?}"))),
        }
    }
}

impl QaeKind {
    /// Exponent in RMSE <= c q^(-lambda/2).
    pub fn lambda(self) -> u8 {
        match self {
            QaeKind::Pam => 1,
            _ => 2,
        }
    }

    /// Published worst-case convergence constants, used for a priori bounds.
    pub fn c_qae_reference(self) -> f64 {
        match self {
            QaeKind::Pam => 0.5,
            QaeKind::Mlqae => 8.02,
            QaeKind::Iqae => 14.4,
            QaeKind::Lcu => 7.82,
        }
    }
}

fn default_p_max_fail() -> f64 {
    0.5
}
fn default_shots_m0() -> u64 {
    66
}
fn default_shots_other() -> u64 {
    44
}
fn default_grid() -> usize {
    100_000
}
fn default_iqae_shots() -> u64 {
    100
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QaeConfig {
    pub kind: QaeKind,
    /// Use budget; successful uses for LCU.
    pub q: u64,
    pub seed: u64,
    #[serde(default = "default_p_max_fail")]
    pub p_max_fail: f64,
    #[serde(default = "default_shots_m0")]
    pub shots_m0: u64,
    #[serde(default = "default_shots_other")]
    pub shots_other: u64,
    #[serde(default = "default_grid")]
    pub posterior_grid: usize,
    /// Shots per IQAE round.
    #[serde(default = "default_iqae_shots")]
    pub iqae_shots: u64,
}

impl QaeConfig {
    pub fn new(kind: QaeKind, q: u64, seed: u64) -> Self {
        QaeConfig {
            kind,
            q,
            seed,
            p_max_fail: default_p_max_fail(),
            shots_m0: default_shots_m0(),
            shots_other: default_shots_other(),
            posterior_grid: default_grid(),
            iqae_shots: default_iqae_shots(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.q == 0 {
            return Err(QmciError::Budget("q must be at least 1".into()));
        }
        if !(self.p_max_fail > 0.0 && self.p_max_fail < 1.0) {
            return Err(QmciError::invalid("p_max_fail must lie in (0, 1)"));
        }
        if self.shots_m0 == 0 || self.shots_other == 0 || self.iqae_shots == 0 {
            return Err(QmciError::invalid("shot counts must be positive"));
        }
        if self.posterior_grid < 16 {
            return Err(QmciError::invalid("posterior grid needs at least 16 points"));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QaeResult {
    pub a_hat: f64,
    /// Uses of A consumed (successful preparations only, for LCU).
    pub uses_successful: u64,
    /// LCU only: successful uses plus the expected cost of failed preparations.
    pub uses_expected_total: Option<f64>,
    /// LCU only: failed preparations drawn for this run.
    pub failed_preparations: Option<u64>,
    pub lambda: u8,
    pub c_qae_reference: f64,
    /// (m, shots) actually run.
    pub schedule: Vec<(u64, u64)>,
    /// Set when the requested algorithm could not run and PAM was used.
    pub fallback: Option<String>,
}

/// Shots per Grover power for an exponentially increasing sequence that
/// spends exactly `q` uses (a shot at power m costs 2m + 1).
///
/// Levels 0, 1, 2, 4, ... are filled while affordable; then one extra full
/// level at the largest affordable power, or failing that a partial round of
/// at least a quarter of `shots_other` at the next power; then leftover uses
/// become single shots, highest powers first.
pub fn eis_schedule(q: u64, shots_m0: u64, shots_other: u64) -> Vec<(u64, u64)> {
    let mut sched = Vec::new();
    let mut rem = q;
    let s0 = rem.min(shots_m0);
    if s0 == 0 {
        return sched;
    }
    sched.push((0, s0));
    rem -= s0;
    if s0 < shots_m0 {
        return sched;
    }
    let mut top = 0;
    let mut m = 1;
    loop {
        let cost = shots_other * (2 * m + 1);
        if cost > rem {
            break;
        }
        sched.push((m, shots_other));
        rem -= cost;
        top = m;
        m *= 2;
    }
    // greatest m' > top with a full round still affordable
    let per = rem / shots_other;
    if per >= 1 {
        let mp = (per - 1) / 2;
        if mp > top {
            sched.push((mp, shots_other));
            rem -= shots_other * (2 * mp + 1);
        }
    }
    // No full round above the EIS: a partial round at the next EIS power
    // breaks the aliasing that piling shots onto the top level leaves.
    if sched.last().map(|e| e.0) == Some(top) {
        let next = if top == 0 { 1 } else { 2 * top };
        let k = rem / (2 * next + 1);
        if k >= (shots_other / 4).max(1) {
            sched.push((next, k));
            rem -= k * (2 * next + 1);
        }
    }
    for entry in sched.iter_mut().rev() {
        let cost = 2 * entry.0 + 1;
        let k = rem / cost;
        entry.1 += k;
        rem -= k * cost;
    }
    sched
}

fn rng_for(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn binomial(rng: &mut ChaCha8Rng, n: u64, p: f64) -> u64 {
    if n == 0 {
        return 0;
    }
    let p = p.clamp(0.0, 1.0);
    Binomial::new(n, p).expect("p in [0,1]").sample(rng)
}

/// Prepare-and-measure: the fraction of ones over q shots of A.
pub fn pam_amplitude(a: f64, q: u64, seed: u64) -> Result<QaeResult> {
    if q == 0 {
        return Err(QmciError::Budget("q must be at least 1".into()));
    }
    let mut rng = rng_for(seed);
    let ones = binomial(&mut rng, q, a);
    Ok(QaeResult {
        a_hat: ones as f64 / q as f64,
        uses_successful: q,
        uses_expected_total: None,
        failed_preparations: None,
        lambda: 1,
        c_qae_reference: QaeKind::Pam.c_qae_reference(),
        schedule: vec![(0, q)],
        fallback: None,
    })
}

/// Log-likelihood of aggregated Grover-power data at angle theta.
fn grover_loglik(data: &[(u64, u64, u64)], theta: f64) -> f64 {
    data.iter()
        .map(|&(m, ones, n)| {
            let p = ((2 * m + 1) as f64 * theta).sin().powi(2);
            let mut l = 0.0;
            if ones > 0 {
                l += ones as f64 * p.max(1e-300).ln();
            }
            if n > ones {
                l += (n - ones) as f64 * (1.0 - p).max(1e-300).ln();
            }
            l
        })
        .sum()
}

/// Maximum-likelihood QAE on the exponentially increasing sequence.
pub fn mlqae_amplitude(a: f64, cfg: &QaeConfig) -> Result<QaeResult> {
    cfg.validate()?;
    let theta = theta_of(a);
    let sched = eis_schedule(cfg.q, cfg.shots_m0, cfg.shots_other);
    let mut rng = rng_for(cfg.seed);
    if sched.len() == 1 {
        // m = 0 only: the likelihood peaks at the observed frequency
        let n = sched[0].1;
        let ones = binomial(&mut rng, n, a);
        return Ok(QaeResult {
            a_hat: ones as f64 / n as f64,
            uses_successful: n,
            uses_expected_total: None,
            failed_preparations: None,
            lambda: 2,
            c_qae_reference: QaeKind::Mlqae.c_qae_reference(),
            schedule: sched,
            fallback: None,
        });
    }
    let mut post = GridPosterior::uniform(cfg.posterior_grid);
    let mut data = Vec::with_capacity(sched.len());
    for &(m, n) in &sched {
        let k = (2 * m + 1) as f64;
        let ones = binomial(&mut rng, n, (k * theta).sin().powi(2));
        post.update(ones, n - ones, |t| (k * t).sin().powi(2));
        data.push((m, ones, n));
    }
    let t0 = post.argmax();
    let h = post.spacing();
    let lo = (t0 - h).max(0.0);
    let hi = (t0 + h).min(FRAC_PI_2);
    let t_ref = posterior::golden_max(|t| grover_loglik(&data, t), lo, hi, 40);
    let t_hat = if grover_loglik(&data, t_ref) >= grover_loglik(&data, t0) { t_ref } else { t0 };
    Ok(QaeResult {
        a_hat: t_hat.sin().powi(2).clamp(0.0, 1.0),
        uses_successful: sched.iter().map(|&(m, n)| n * (2 * m + 1)).sum(),
        uses_expected_total: None,
        failed_preparations: None,
        lambda: 2,
        c_qae_reference: QaeKind::Mlqae.c_qae_reference(),
        schedule: sched,
        fallback: None,
    })
}

/// Run the configured estimator against a known true amplitude.
pub fn estimate_amplitude(a: f64, cfg: &QaeConfig) -> Result<QaeResult> {
    cfg.validate()?;
    if !(0.0..=1.0).contains(&a) || a.is_nan() {
        return Err(QmciError::invalid(format!("amplitude {a} outside [0, 1]")));
    }
    match cfg.kind {
        QaeKind::Pam => pam_amplitude(a, cfg.q, cfg.seed),
        QaeKind::Mlqae => mlqae_amplitude(a, cfg),
        QaeKind::Iqae => iqae::iqae_amplitude(a, cfg),
        QaeKind::Lcu => lcu::lcu_amplitude(a, cfg),
    }
}

/// Run the configured estimator on a problem (A is simulated once).
pub fn run_qae(problem: &QaeProblem, cfg: &QaeConfig) -> Result<QaeResult> {
    estimate_amplitude(problem.amplitude()?, cfg)
}

pub fn pam(problem: &QaeProblem, q: u64, seed: u64) -> Result<QaeResult> {
    run_qae(problem, &QaeConfig::new(QaeKind::Pam, q, seed))
}

pub fn mlqae(problem: &QaeProblem, q: u64, seed: u64) -> Result<QaeResult> {
    run_qae(problem, &QaeConfig::new(QaeKind::Mlqae, q, seed))
}

pub fn iqae(problem: &QaeProblem, q: u64, seed: u64) -> Result<QaeResult> {
    run_qae(problem, &QaeConfig::new(QaeKind::Iqae, q, seed))
}

pub fn lcu_qae(problem: &QaeProblem, q: u64, p_max_fail: f64, seed: u64) -> Result<QaeResult> {
    let mut cfg = QaeConfig::new(QaeKind::Lcu, q, seed);
    cfg.p_max_fail = p_max_fail;
    run_qae(problem, &cfg)
}
