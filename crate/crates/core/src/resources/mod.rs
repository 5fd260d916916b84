//! Resource mode: gate, depth and T counts of every circuit a QMCI run would
//! execute, without executing anything.
//!
//! A plan is a list of circuit blocks (a state preparation `A` and its
//! Grover iterate `Q`) plus, for each circuit run, the block, the number of
//! `Q` applications and the shot count. Harmonics of one Fourier estimate
//! share a single gate structure (only rotation angles differ, and neither
//! rebasing nor lowering looks at angle values), so one representative block
//! per structure counts all of them exactly.
//!
//! A circuit Q^m A is counted as rebase(A) followed by m copies of
//! rebase(Q); single-qubit runs are not fused across block boundaries.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::distloader::{standard_circuit, DistributionCircuit, StandardCircuit};
use crate::error::{QmciError, Result};
use crate::fouriermc::{quantity_for_dim, Budget, FourierPlan, QuantityKind};
use crate::pbuilder::{build_instrument, BarrierKind, CallPut, InstrumentKind, InstrumentSpec, PayoffKind, Space};
use crate::qae::{
    eis_schedule, grover_operator, lcu_grover_operator, lcu_prepare, max_beta, LcuCategory, QaeConfig,
    QaeKind,
};
use crate::qcore::{
    lower_to_rotations_clifford_t, rebase_tk1_cnot, rotation_t_cost, FtCounts, FtTracker, NisqCounts,
    NisqTracker, QuantumCircuit, ResourceBox,
};

/// A state preparation and the Grover iterate applied after it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CircuitBlock {
    pub label: String,
    pub a: QuantumCircuit,
    /// Empty when the block is only ever run without amplification.
    pub q: QuantumCircuit,
}

/// One circuit of a run: Q^grover_power A of `block`, executed `shots` times.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlanCircuit {
    pub label: String,
    pub block: usize,
    pub grover_power: u64,
    pub shots: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QmciPlan {
    pub resource_only: bool,
    pub qae: Option<QaeKind>,
    pub q_total: u64,
    /// max g - min g of the estimated quantity.
    pub quantity_range: f64,
    pub c_f: f64,
    pub c_qae: f64,
    pub lambda: u8,
    pub blocks: Vec<CircuitBlock>,
    pub circuits: Vec<PlanCircuit>,
}

impl QmciPlan {
    /// Each circuit run once, with no amplification.
    pub fn from_circuits(circuits: Vec<QuantumCircuit>) -> Self {
        let blocks: Vec<CircuitBlock> = circuits
            .into_iter()
            .enumerate()
            .map(|(i, a)| CircuitBlock {
                label: if a.name.is_empty() { format!("circuit_{i}") } else { a.name.clone() },
                q: QuantumCircuit::new(a.n_qubits),
                a,
            })
            .collect();
        let circuits = blocks
            .iter()
            .enumerate()
            .map(|(i, b)| PlanCircuit { label: b.label.clone(), block: i, grover_power: 0, shots: 1 })
            .collect();
        QmciPlan {
            resource_only: true,
            qae: None,
            q_total: 0,
            quantity_range: 1.0,
            c_f: 1.0,
            c_qae: 1.0,
            lambda: 2,
            blocks,
            circuits,
        }
    }

    /// The circuits `plan.run` would execute on `dc`.
    pub fn from_fourier(plan: &FourierPlan, dc: &DistributionCircuit, cfg: &QaeConfig) -> Result<Self> {
        let amp = plan.circuits_for_terms(dc, 1)?;
        let problem = amp
            .first()
            .map(|c| c.qae_problem())
            .ok_or_else(|| QmciError::invalid("plan has no terms"))?;
        let mut out = QmciPlan {
            resource_only: true,
            qae: Some(plan.qae),
            q_total: plan.q_total,
            quantity_range: plan.spec.g_range(),
            c_f: plan.spec.c_f,
            c_qae: plan.c_qae,
            lambda: plan.lambda,
            blocks: Vec::new(),
            circuits: Vec::new(),
        };
        let budgets: Vec<(String, u64)> = if plan.spec.series.is_some() {
            plan.terms.iter().map(|t| (format!("m{}_{:?}", t.m, t.trig).to_lowercase(), t.q)).collect()
        } else {
            vec![("bernoulli".to_string(), plan.q_total)]
        };
        let plain = out.add_block("A", problem.a_circuit.clone(), grover_operator(&problem));
        match plan.qae {
            QaeKind::Iqae => {
                return Err(QmciError::Unsupported(
                    "IQAE chooses its Grover powers adaptively; no static plan exists".into(),
                ))
            }
            QaeKind::Pam => {
                for (label, q) in budgets {
                    out.push(label, plain, 0, q);
                }
            }
            QaeKind::Mlqae => {
                for (label, q) in budgets {
                    for (m, n) in eis_schedule(q, cfg.shots_m0, cfg.shots_other) {
                        out.push(format!("{label}_q{m}"), plain, m, n);
                    }
                }
            }
            QaeKind::Lcu => {
                let beta = max_beta(cfg.p_max_fail);
                let n = problem.a_circuit.n_qubits;
                let map: Vec<usize> = (0..n).collect();
                let mut cats = Vec::new();
                for cat in LcuCategory::ALL {
                    let prep = lcu_prepare(&problem, cat, beta, cfg.p_max_fail)?;
                    let mut q = QuantumCircuit::new(n + 1);
                    q.append_mapped(&lcu_grover_operator(&problem, cat), &map)?;
                    cats.push(out.add_block(&format!("lcu{}", u8::from(cat)), prep, q));
                }
                for (label, q) in budgets {
                    if q < cfg.shots_m0 {
                        // run as prepare-and-measure
                        out.push(label, plain, 0, q);
                        continue;
                    }
                    for (m, shots) in eis_schedule(q, cfg.shots_m0, cfg.shots_other) {
                        if m == 0 {
                            out.push(format!("{label}_q0"), plain, 0, shots);
                            continue;
                        }
                        // shot s goes to category s mod 4
                        for (k, &b) in cats.iter().enumerate() {
                            let n_k = shots / 4 + u64::from((k as u64) < shots % 4);
                            if n_k > 0 {
                                out.push(format!("{label}_q{m}_lcu{}", k + 1), b, m, n_k);
                            }
                        }
                    }
                }
            }
        }
        Ok(out)
    }

    fn add_block(&mut self, label: &str, a: QuantumCircuit, q: QuantumCircuit) -> usize {
        self.blocks.push(CircuitBlock { label: label.into(), a, q });
        self.blocks.len() - 1
    }

    fn push(&mut self, label: String, block: usize, grover_power: u64, shots: u64) {
        self.circuits.push(PlanCircuit { label, block, grover_power, shots });
    }

    pub fn validate(&self) -> Result<()> {
        for b in &self.blocks {
            b.a.validate()?;
            b.q.validate()?;
        }
        for c in &self.circuits {
            let b = self
                .blocks
                .get(c.block)
                .ok_or_else(|| QmciError::invalid(format!("circuit {} names missing block {}", c.label, c.block)))?;
            if c.grover_power > 0 && b.q.is_empty() {
                return Err(QmciError::invalid(format!("circuit {} amplifies a block without Q", c.label)));
            }
        }
        Ok(())
    }

    /// Rotation and exact-T counts of one Q after lowering, for the block
    /// that dominates the run (the largest Q; twice A if nothing amplifies).
    pub fn q_gate_counts(&self) -> Result<(u64, u64)> {
        let mut best: Option<(u64, u64)> = None;
        for b in &self.blocks {
            let c = if b.q.is_empty() {
                let f = lowered_counts(&b.a)?;
                (2 * f.rotations, 2 * f.t_exact)
            } else {
                let f = lowered_counts(&b.q)?;
                (f.rotations, f.t_exact)
            };
            if best.is_none_or(|x| c.0 * 1000 + c.1 > x.0 * 1000 + x.1) {
                best = Some(c);
            }
        }
        best.ok_or_else(|| QmciError::invalid("plan has no circuits"))
    }
}

fn lowered_counts(c: &QuantumCircuit) -> Result<FtCounts> {
    let l = lower_to_rotations_clifford_t(c)?;
    let mut t = FtTracker::new(l.n_qubits, 1.0);
    t.feed(&l);
    Ok(t.counts())
}

impl FourierPlan {
    /// Amplitude circuits of the first `k` terms (all terms share one gate
    /// structure).
    fn circuits_for_terms(&self, dc: &DistributionCircuit, k: usize) -> Result<Vec<crate::fouriermc::AmplitudeCircuit>> {
        if self.spec.series.is_none() {
            return self.circuits(dc);
        }
        let mut head = self.clone();
        head.terms.truncate(k);
        head.circuits(dc)
    }
}

/// Per-circuit counts; `counts` are for one execution.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CircuitResources<C> {
    pub label: String,
    pub grover_power: u64,
    pub shots: u64,
    pub counts: C,
}

/// Totals over every execution (sequential: depths add) and the single
/// largest circuit.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResourceReport<C> {
    pub mode: String,
    pub q_total: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
    pub total: C,
    pub largest: Option<CircuitResources<C>>,
    pub per_circuit: Vec<CircuitResources<C>>,
}

pub type NisqReport = ResourceReport<NisqCounts>;
pub type FtReport = ResourceReport<FtCounts>;

/// Counts of Q^m A for every requested m, in one pass over the powers.
fn block_counts<C: Copy, T>(
    a: &QuantumCircuit,
    q: &QuantumCircuit,
    powers: &BTreeSet<u64>,
    mut tracker: T,
    feed: impl Fn(&mut T, &QuantumCircuit) -> Result<()>,
    counts: impl Fn(&T) -> C,
) -> Result<Vec<(u64, C)>> {
    let mut out = Vec::with_capacity(powers.len());
    feed(&mut tracker, a)?;
    let mut done = 0;
    for &m in powers {
        while done < m {
            feed(&mut tracker, q)?;
            done += 1;
        }
        out.push((m, counts(&tracker)));
    }
    Ok(out)
}

fn powers_by_block(plan: &QmciPlan) -> Vec<BTreeSet<u64>> {
    let mut p = vec![BTreeSet::new(); plan.blocks.len()];
    for c in &plan.circuits {
        p[c.block].insert(c.grover_power);
    }
    p
}

fn assemble<C: Copy>(
    plan: &QmciPlan,
    mode: &str,
    epsilon: Option<f64>,
    table: &[Vec<(u64, C)>],
    total: impl Fn(&[(C, u64)]) -> C,
    size: impl Fn(&C) -> f64,
) -> ResourceReport<C> {
    let per_circuit: Vec<CircuitResources<C>> = plan
        .circuits
        .iter()
        .map(|c| {
            let counts = table[c.block].iter().find(|(m, _)| *m == c.grover_power).expect("counted").1;
            CircuitResources { label: c.label.clone(), grover_power: c.grover_power, shots: c.shots, counts }
        })
        .collect();
    let weighted: Vec<(C, u64)> = per_circuit.iter().map(|c| (c.counts, c.shots)).collect();
    let largest = per_circuit
        .iter()
        .filter(|c| c.shots > 0)
        .fold(None::<&CircuitResources<C>>, |best, c| match best {
            Some(b) if size(&b.counts) >= size(&c.counts) => Some(b),
            _ => Some(c),
        })
        .cloned();
    ResourceReport { mode: mode.into(), q_total: plan.q_total, epsilon, total: total(&weighted), largest, per_circuit }
}

/// Rebase every circuit to {TK1, CNOT} and count.
pub fn nisq_report(plan: &QmciPlan) -> Result<NisqReport> {
    plan.validate()?;
    let powers = powers_by_block(plan);
    let mut table = Vec::with_capacity(plan.blocks.len());
    for (b, p) in plan.blocks.iter().zip(&powers) {
        if p.is_empty() {
            table.push(Vec::new());
            continue;
        }
        let ra = rebase_tk1_cnot(&b.a)?;
        let rq = if p.iter().any(|&m| m > 0) { rebase_tk1_cnot(&b.q)? } else { QuantumCircuit::new(0) };
        let tracker = NisqTracker::new(ra.n_qubits);
        table.push(block_counts(&ra, &rq, p, tracker, |t, c| t.feed(c), |t| t.counts())?);
    }
    Ok(assemble(
        plan,
        "nisq",
        None,
        &table,
        |w| {
            w.iter().fold(NisqCounts::default(), |acc, (c, k)| {
                let s = c.scaled(*k);
                // a circuit never run still needs no qubits
                if *k == 0 {
                    acc
                } else {
                    acc.add(&s)
                }
            })
        },
        |c| c.total_gates as f64,
    ))
}

fn ft_scaled(c: &FtCounts, k: u64) -> FtCounts {
    let kf = k as f64;
    FtCounts {
        n_qubits: c.n_qubits,
        t_exact: c.t_exact * k,
        rotations: c.rotations * k,
        t_count: c.t_count * kf,
        t_depth: c.t_depth * kf,
    }
}

fn ft_add(a: &FtCounts, b: &FtCounts) -> FtCounts {
    FtCounts {
        n_qubits: a.n_qubits.max(b.n_qubits),
        t_exact: a.t_exact + b.t_exact,
        rotations: a.rotations + b.rotations,
        t_count: a.t_count + b.t_count,
        t_depth: a.t_depth + b.t_depth,
    }
}

/// Lower to Clifford+T plus rotations; each rotation costs 3 log2(1/epsilon)
/// T gates.
pub fn ft_report(plan: &QmciPlan, epsilon: f64) -> Result<FtReport> {
    plan.validate()?;
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(QmciError::invalid(format!("epsilon {epsilon} outside (0, 1)")));
    }
    let cost = rotation_t_cost(epsilon);
    let powers = powers_by_block(plan);
    let mut table = Vec::with_capacity(plan.blocks.len());
    for (b, p) in plan.blocks.iter().zip(&powers) {
        if p.is_empty() {
            table.push(Vec::new());
            continue;
        }
        let la = lower_to_rotations_clifford_t(&b.a)?;
        let lq = if p.iter().any(|&m| m > 0) {
            lower_to_rotations_clifford_t(&b.q)?
        } else {
            QuantumCircuit::new(0)
        };
        let tracker = FtTracker::new(la.n_qubits, cost);
        table.push(block_counts(
            &la,
            &lq,
            p,
            tracker,
            |t, c| {
                t.feed(c);
                Ok(())
            },
            |t| t.counts(),
        )?);
    }
    Ok(assemble(
        plan,
        "ft",
        Some(epsilon),
        &table,
        |w| {
            w.iter()
                .filter(|(_, k)| *k > 0)
                .fold(FtCounts::default(), |acc, (c, k)| ft_add(&acc, &ft_scaled(c, *k)))
        },
        |c| c.t_count,
    ))
}

/// Place `rbox` after the first `rbox.placement` gates of `circuit`.
pub fn insert_resource_box(circuit: &QuantumCircuit, rbox: ResourceBox) -> Result<QuantumCircuit> {
    if rbox.placement > circuit.gates.len() {
        return Err(QmciError::invalid(format!(
            "box placement {} past the end of a {}-gate circuit",
            rbox.placement,
            circuit.gates.len()
        )));
    }
    let mut out = circuit.clone();
    let at = out.boxes.partition_point(|b| b.placement <= rbox.placement);
    out.boxes.insert(at, rbox);
    Ok(out)
}

impl<C: Serialize> ResourceReport<C> {
    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| QmciError::Numeric(e.to_string()))
    }
}

fn csv_string(header: &[&str], rows: Vec<Vec<String>>) -> Result<String> {
    let io = |e: csv::Error| QmciError::Io(e.to_string());
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).map_err(io)?;
    for r in rows {
        w.write_record(r).map_err(io)?;
    }
    let bytes = w.into_inner().map_err(|e| QmciError::Io(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| QmciError::Io(e.to_string()))
}

impl NisqReport {
    /// Table A (totals) and table B (largest circuit) as rows.
    pub fn to_csv(&self) -> Result<String> {
        let row = |t: &str, c: &NisqCounts| {
            vec![
                t.to_string(),
                c.n_qubits.to_string(),
                c.total_gates.to_string(),
                c.cnot_count.to_string(),
                c.total_depth.to_string(),
                c.cnot_depth.to_string(),
            ]
        };
        let mut rows = vec![row("A_total", &self.total)];
        if let Some(l) = &self.largest {
            rows.push(row("B_largest", &l.counts));
        }
        csv_string(&["table", "qubits", "gate_count", "cnot_count", "gate_depth", "cnot_depth"], rows)
    }
}

impl FtReport {
    pub fn to_csv(&self) -> Result<String> {
        let row = |t: &str, c: &FtCounts| {
            vec![t.to_string(), c.n_qubits.to_string(), format!("{:e}", c.t_count), format!("{:e}", c.t_depth)]
        };
        let mut rows = vec![row("A_total", &self.total)];
        if let Some(l) = &self.largest {
            rows.push(row("B_largest", &l.counts));
        }
        csv_string(&["table", "qubits", "t_count", "t_depth"], rows)
    }
}

/// Inputs of the T-count optimisation.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FtProblem {
    /// Rotations in one Q after lowering.
    pub n_r: u64,
    /// Exact T gates in one Q after lowering.
    pub n_t: u64,
    pub range: f64,
    pub c_f: f64,
    pub c_qae: f64,
    pub lambda: u8,
}

impl FtProblem {
    pub fn from_plan(plan: &QmciPlan) -> Result<Self> {
        let (n_r, n_t) = plan.q_gate_counts()?;
        Ok(FtProblem { n_r, n_t, range: plan.quantity_range, c_f: plan.c_f, c_qae: plan.c_qae, lambda: plan.lambda })
    }

    /// q/2 (3 n_R log2(1/eps) + n_T)
    pub fn objective(&self, q: f64, eps: f64) -> f64 {
        0.5 * q * (self.n_r as f64 * rotation_t_cost(eps) + self.n_t as f64)
    }

    fn sampling_term(&self) -> f64 {
        (self.c_f * self.c_qae * self.range).powi(2)
    }

    /// Synthesis term coefficient and its power of q: the total error is
    /// q n_R eps (conservative) or 2 sqrt(n_R q / 2) eps (tight), scaled by
    /// range^3 / 3.
    fn synthesis(&self, eps: f64, tight: bool) -> (f64, f64) {
        let r3 = self.range.powi(3) / 3.0;
        let n = self.n_r as f64;
        if tight {
            (2.0 * (0.5 * n).sqrt() * eps * r3, 0.5)
        } else {
            (n * eps * r3, 1.0)
        }
    }

    /// MSE bound at (q, eps).
    pub fn mse(&self, q: f64, eps: f64, tight: bool) -> f64 {
        let (b, g) = self.synthesis(eps, tight);
        self.sampling_term() * q.powf(-(self.lambda as f64)) + b * q.powf(g)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FtSolution {
    pub q: u64,
    pub epsilon: f64,
    /// Value of the objective at (q, epsilon).
    pub t_count_bound: f64,
    pub mse: f64,
    pub tight: bool,
}

/// epsilon at which the synthesis term still fits exactly, for integer q.
fn eps_for_q(p: &FtProblem, q: f64, target: f64, tight: bool) -> Option<f64> {
    let rest = target - p.sampling_term() * q.powf(-(p.lambda as f64));
    let (b1, g) = p.synthesis(1.0, tight);
    (rest > 0.0 && b1 > 0.0).then(|| (rest / (b1 * q.powf(g))).min(0.5))
}

/// Smallest q meeting the MSE target at this epsilon.
fn q_for_eps(p: &FtProblem, eps: f64, target: f64, tight: bool) -> Option<f64> {
    let a = p.sampling_term();
    let lam = p.lambda as f64;
    let (b, g) = p.synthesis(eps, tight);
    let q0 = (a / target).powf(1.0 / lam);
    if b == 0.0 {
        return Some(q0);
    }
    // the bound dips to its minimum at q_m and rises after
    let qm = (lam * a / (g * b)).powf(1.0 / (lam + g));
    if qm <= q0 || p.mse(qm, eps, tight) > target {
        return None;
    }
    let (mut lo, mut hi) = (q0.ln(), qm.ln());
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if p.mse(mid.exp(), eps, tight) > target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Some(hi.exp())
}

/// Minimise the T count subject to the MSE target. The continuous problem
/// is solved by substituting the constraint and minimising over log eps;
/// q is then rounded up and eps re-solved so the constraint stays an
/// equality.
pub fn ft_optimize(problem: &FtProblem, target_mse: f64, tight: bool) -> Result<FtSolution> {
    if !(target_mse > 0.0 && target_mse.is_finite()) {
        return Err(QmciError::invalid(format!("target MSE {target_mse} must be positive")));
    }
    if !(problem.range > 0.0 && problem.c_f > 0.0 && problem.c_qae > 0.0) {
        return Err(QmciError::invalid("range, c_f and c_qae must be positive"));
    }
    let p = problem;
    let finish = |q: f64, eps: f64| -> FtSolution {
        let q = q.ceil().max(1.0);
        let eps = eps_for_q(p, q, target_mse, tight).unwrap_or(eps);
        FtSolution { q: q as u64, epsilon: eps, t_count_bound: p.objective(q, eps), mse: p.mse(q, eps, tight), tight }
    };
    if p.n_r == 0 {
        let q = q_for_eps(p, 0.5, target_mse, tight).expect("no synthesis error");
        return Ok(finish(q, 0.5));
    }
    // feasible eps form an interval (0, eps_max]
    let feasible = |le: f64| q_for_eps(p, le.exp(), target_mse, tight).is_some();
    let hi0 = 0.5f64.ln();
    let lo0 = -700.0;
    if !feasible(lo0) {
        return Err(QmciError::Infeasible(format!("no (q, eps) reaches MSE {target_mse}")));
    }
    let le_max = if feasible(hi0) {
        hi0
    } else {
        let (mut a, mut b) = (lo0, hi0);
        for _ in 0..200 {
            let m = 0.5 * (a + b);
            if feasible(m) {
                a = m;
            } else {
                b = m;
            }
        }
        a
    };
    let cost = |le: f64| match q_for_eps(p, le.exp(), target_mse, tight) {
        Some(q) => p.objective(q, le.exp()),
        None => f64::INFINITY,
    };
    // coarse scan, then golden section around the best point
    let n = 400;
    let lo_scan = le_max - 80.0;
    let step = (le_max - lo_scan) / n as f64;
    let best = (0..=n)
        .map(|i| lo_scan + i as f64 * step)
        .min_by(|a, b| cost(*a).total_cmp(&cost(*b)))
        .unwrap();
    let le = crate::qae::golden_max(|x| -cost(x), (best - step).max(lo_scan), (best + step).min(le_max), 100);
    let eps = le.exp();
    let q = q_for_eps(p, eps, target_mse, tight).expect("feasible by construction");
    Ok(finish(q, eps))
}

/// Fault-tolerant flow: optimise (q, eps) from the plan's Q, rebuild the
/// plan at the optimal q and count it at that eps.
pub fn ft_resources(
    build: impl Fn(Budget) -> Result<QmciPlan>,
    target_rmse: f64,
    tight: bool,
) -> Result<(FtSolution, FtReport)> {
    let probe = build(Budget::TargetRmse(target_rmse))?;
    let sol = ft_optimize(&FtProblem::from_plan(&probe)?, target_rmse * target_rmse, tight)?;
    let plan = build(Budget::Uses(sol.q))?;
    let mut rep = ft_report(&plan, sol.epsilon)?;
    if tight {
        rep.mode = "ft_tight".into();
    }
    Ok((sol, rep))
}

/// Plan for one of the benchmark instruments on the unit-Gaussian loader:
/// 10% total volatility in return space, strike 1.05, knock-out barrier at
/// 1.1; target RMSE 1% of the payoff range.
pub fn benchmark_plan(
    instrument: InstrumentKind,
    n_slices: usize,
    payoff: PayoffKind,
    qae: QaeKind,
    budget: Option<Budget>,
) -> Result<QmciPlan> {
    let spec = InstrumentSpec {
        instrument,
        space: Space::Return,
        n_slices,
        total_volatility: 0.1,
        call_or_put: CallPut::Call,
        strike_ratio: 1.05,
        barrier_ratio: Some(1.1),
        barrier_kind: Some(BarrierKind::KnockOut),
        autocall_schedule: None,
        payoff_kind: payoff,
        target_rmse: None,
        q_budget: None,
    };
    let budget = budget.unwrap_or(Budget::TargetRmse(match payoff {
        PayoffKind::Value => 1e-2 * (0.5f64.exp() - (-0.5f64).exp()),
        PayoffKind::Binary => 1e-2,
    }));
    let base = standard_circuit(StandardCircuit::gaussian_unit_6q);
    instrument_plan(&base, &spec, &QaeConfig::new(qae, 1, 0), budget)
}

/// Plan for a single-payoff instrument built on `base`.
pub fn instrument_plan(
    base: &DistributionCircuit,
    spec: &InstrumentSpec,
    qae: &QaeConfig,
    budget: Budget,
) -> Result<QmciPlan> {
    let (dc, cfgs) = build_instrument(base, spec)?;
    let cfg = cfgs
        .first()
        .ok_or_else(|| QmciError::invalid("instrument produced no payoff"))?;
    if cfgs.len() > 1 {
        return Err(QmciError::Unsupported("multi-leg instruments need one plan per leg".into()));
    }
    let cond = cfg.condition.map(|i| dc.indicators[i]);
    payoff_plan(&dc, cfg.quantity, cfg.integration_dim, cond, cfg.support_window, cfg.x_star, qae, budget)
}

/// Resource plan for one quantity on a distribution circuit; `qae` supplies
/// the kind and shot layout.
#[allow(clippy::too_many_arguments)]
pub fn payoff_plan(
    dc: &DistributionCircuit,
    quantity: QuantityKind,
    dim: usize,
    condition: Option<usize>,
    window: Option<(f64, f64)>,
    x_star: Option<f64>,
    qae: &QaeConfig,
    budget: Budget,
) -> Result<QmciPlan> {
    let spec = quantity_for_dim(dc, quantity, dim, window, x_star)?;
    let plan = FourierPlan::new(&spec, dim, condition, qae.kind, budget)?;
    QmciPlan::from_fourier(&plan, dc, qae)
}
