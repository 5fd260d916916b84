//! LCU-prepared starting states for amplitude estimation.
//!
//! An ancilla rotated by Ry(beta) selects between U_a and U_b = S_chi U_a (or
//! the reverse); post-selecting the ancilla on 0 leaves the data register at
//! angle +-atan(cos(beta) tan(theta)) inside the usual two-dimensional Grover
//! plane. Categories 3 and 4 do the same with the good outcome flipped, so the
//! Grover plane angle becomes pi/2 - theta.

use std::f64::consts::FRAC_PI_2;

use rand_distr::{Distribution, Geometric};
use serde::{Deserialize, Serialize};

use super::{
    binomial, eis_schedule, grover_operator, rng_for, theta_of, GridPosterior, QaeConfig, QaeKind,
    QaeProblem, QaeResult,
};
use crate::error::{QmciError, Result};
use crate::qcore::{marginal_pmf, simulate, Gate, QuantumCircuit};

/// The four LCU variants: 1 and 2 mix A with S_chi A in either order,
/// 3 and 4 do the same for A followed by X on the good wire.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub enum LcuCategory {
    One,
    Two,
    Three,
    Four,
}

impl LcuCategory {
    pub const ALL: [LcuCategory; 4] =
        [LcuCategory::One, LcuCategory::Two, LcuCategory::Three, LcuCategory::Four];

    fn flipped(self) -> bool {
        matches!(self, LcuCategory::Three | LcuCategory::Four)
    }

    fn sign(self) -> f64 {
        match self {
            LcuCategory::One | LcuCategory::Three => 1.0,
            _ => -1.0,
        }
    }
}

impl TryFrom<u8> for LcuCategory {
    type Error = QmciError;
    fn try_from(v: u8) -> Result<Self> {
        match v {
            1 => Ok(LcuCategory::One),
            2 => Ok(LcuCategory::Two),
            3 => Ok(LcuCategory::Three),
            4 => Ok(LcuCategory::Four),
            _ => Err(QmciError::invalid(format!("LCU category {v} not in 1..=4"))),
        }
    }
}

impl From<LcuCategory> for u8 {
    fn from(c: LcuCategory) -> u8 {
        LcuCategory::ALL.iter().position(|&x| x == c).unwrap() as u8 + 1
    }
}

fn plane_theta(theta: f64, cat: LcuCategory) -> f64 {
    if cat.flipped() {
        FRAC_PI_2 - theta
    } else {
        theta
    }
}

/// Signed starting angle of the post-selected state in its Grover plane.
pub fn lcu_angle(cat: LcuCategory, beta: f64, theta: f64) -> f64 {
    let t = plane_theta(theta, cat);
    cat.sign() * (beta.cos() * t.sin()).atan2(t.cos())
}

/// Probability that the preparation fails (ancilla reads 1).
pub fn lcu_fail_probability(cat: LcuCategory, beta: f64, theta: f64) -> f64 {
    (beta.sin() * plane_theta(theta, cat).sin()).powi(2)
}

/// P(good wire reads 1 | ancilla 0) after m Grover iterates.
pub fn lcu_likelihood(cat: LcuCategory, beta: f64, m: u64, theta: f64) -> f64 {
    let t = plane_theta(theta, cat);
    (2.0 * m as f64 * t + lcu_angle(cat, beta, theta)).sin().powi(2)
}

/// A followed by X on the good wire.
fn flipped_problem(problem: &QaeProblem) -> QaeProblem {
    let mut p = problem.clone();
    p.a_circuit.push(Gate::x(problem.good_qubit));
    p.a_circuit.name = format!("{}_flip", problem.a_circuit.name);
    p
}

pub fn max_beta(p_max_fail: f64) -> f64 {
    p_max_fail.clamp(0.0, 1.0).sqrt().asin()
}

/// Preparation circuit on A's wires plus one ancilla (the last wire), which
/// must read 0 for the preparation to count.
pub fn lcu_prepare(
    problem: &QaeProblem,
    cat: LcuCategory,
    beta: f64,
    p_max_fail: f64,
) -> Result<QuantumCircuit> {
    if !(0.0..=max_beta(p_max_fail) + 1e-12).contains(&beta) {
        return Err(QmciError::invalid(format!(
            "beta {beta} outside [0, asin(sqrt({p_max_fail}))]"
        )));
    }
    let n = problem.a_circuit.n_qubits;
    let anc = n;
    let g = problem.good_qubit;
    let base = if cat.flipped() { flipped_problem(problem) } else { problem.clone() };
    let mut c = QuantumCircuit::named(n + 1, format!("lcu{}_{}", u8::from(cat), problem.a_circuit.name));
    c.push(Gate::ry(beta, anc));
    let map: Vec<usize> = (0..n).collect();
    c.append_mapped(&base.a_circuit, &map)?;
    let negate = cat.sign() < 0.0;
    if negate {
        c.push(Gate::x(anc));
    }
    c.extend([Gate::h(g), Gate::cnot(anc, g), Gate::h(g)]);
    if negate {
        c.push(Gate::x(anc));
    }
    c.push(Gate::ry(-beta, anc));
    Ok(c)
}

/// The Grover iterate matching a category (built from the flipped
/// preparation for categories 3 and 4).
pub fn lcu_grover_operator(problem: &QaeProblem, cat: LcuCategory) -> QuantumCircuit {
    if cat.flipped() {
        grover_operator(&flipped_problem(problem))
    } else {
        grover_operator(problem)
    }
}

/// The likelihood (and failure probability) by state-vector simulation of Q^m after the preparation,
/// conditioned on the ancilla reading 0.
pub fn lcu_simulated_likelihood(
    problem: &QaeProblem,
    cat: LcuCategory,
    beta: f64,
    m: u64,
    p_max_fail: f64,
) -> Result<(f64, f64)> {
    let mut c = lcu_prepare(problem, cat, beta, p_max_fail)?;
    let q = lcu_grover_operator(problem, cat);
    let map: Vec<usize> = (0..problem.a_circuit.n_qubits).collect();
    for _ in 0..m {
        c.append_mapped(&q, &map)?;
    }
    let anc = problem.a_circuit.n_qubits;
    let s = simulate(&c, None)?;
    let pmf = marginal_pmf(&s, &[anc, problem.good_qubit])?;
    let ok = pmf[0] + pmf[1];
    Ok((pmf[1] / ok, pmf[2] + pmf[3]))
}

const N_BETA: usize = 11;

/// Number of failures before `n` successes at failure probability `p`.
fn failures(rng: &mut rand_chacha::ChaCha8Rng, n: u64, p: f64) -> u64 {
    if p <= 0.0 || n == 0 {
        return 0;
    }
    let geo = Geometric::new(1.0 - p).expect("p < 1");
    (0..n).map(|_| geo.sample(rng)).sum()
}

pub(super) fn lcu_amplitude(a: f64, cfg: &QaeConfig) -> Result<QaeResult> {
    if cfg.q < cfg.shots_m0 {
        return Err(QmciError::Budget(format!(
            "LCU needs at least {} uses for the m = 0 round, got {}",
            cfg.shots_m0, cfg.q
        )));
    }
    let theta = theta_of(a);
    let b_max = max_beta(cfg.p_max_fail);
    let betas: Vec<f64> = (0..N_BETA).map(|j| j as f64 * b_max / (N_BETA - 1) as f64).collect();
    let (cb, sb): (Vec<f64>, Vec<f64>) = betas.iter().map(|b| (b.cos(), b.sin())).unzip();
    let sched = eis_schedule(cfg.q, cfg.shots_m0, cfg.shots_other);
    let mut rng = rng_for(cfg.seed);
    let mut post = GridPosterior::uniform(cfg.posterior_grid);
    let mut failed = 0u64;
    let mut expected_fail = 0.0;

    for &(m, n) in &sched {
        if m == 0 {
            let ones = binomial(&mut rng, n, a);
            post.update(ones, n - ones, |t| t.sin().powi(2));
            continue;
        }
        // shot s goes to category s mod 4 and beta index (s / 4) mod 11;
        // tallies are keyed by (plane, beta) with one (ones, zeros) pair per sign
        let mut tally = vec![[[0u64; 2]; 2]; 2 * N_BETA];
        for (ci, &cat) in LcuCategory::ALL.iter().enumerate() {
            for (bi, &beta) in betas.iter().enumerate() {
                let s0 = (ci + 4 * bi) as u64;
                if s0 >= n {
                    continue;
                }
                let cnt = (n - s0 - 1) / (4 * N_BETA as u64) + 1;
                failed += failures(&mut rng, cnt, lcu_fail_probability(cat, beta, theta));
                let pf = sb[bi] * sb[bi];
                expected_fail += cnt as f64 * pf / (1.0 - pf);
                let ones = binomial(&mut rng, cnt, lcu_likelihood(cat, beta, m, theta));
                let slot = &mut tally[usize::from(cat.flipped()) * N_BETA + bi][usize::from(cat.sign() < 0.0)];
                slot[0] += ones;
                slot[1] += cnt - ones;
            }
        }
        let active: Vec<(usize, [[u64; 2]; 2])> =
            tally.into_iter().enumerate().filter(|(_, t)| t.iter().flatten().any(|&x| x > 0)).collect();
        let mf = 2.0 * m as f64;
        let par = if m % 2 == 0 { 1.0 } else { -1.0 };
        post.update_batch(|ts, out| {
            let n = ts.len();
            // per point: sin, cos of theta and of 2 m theta
            let mut trig = vec![[0.0f64; 4]; n];
            for (tr, &t) in trig.iter_mut().zip(ts) {
                let (s, c) = t.sin_cos();
                let (s2, c2) = (mf * t).sin_cos();
                *tr = [s, c, s2, c2];
            }
            let mut mant = vec![1.0f64; n];
            let mut exp2 = vec![0i64; n];
            let mut pending = 0;
            for &(key, counts) in &active {
                let flip = key >= N_BETA;
                let fb = cb[key % N_BETA];
                for (sign, &[ones, zeros]) in [1.0, -1.0].iter().zip(&counts) {
                    if ones + zeros == 0 {
                        continue;
                    }
                    for (mi, tr) in mant.iter_mut().zip(&trig) {
                        // plane angle pi/2 - t: sin/cos swap, 2m(pi/2 - t) = m pi - 2mt
                        let (ts, tc, ss, cc) = if flip {
                            (tr[1], tr[0], -par * tr[2], par * tr[3])
                        } else {
                            (tr[0], tr[1], tr[2], tr[3])
                        };
                        let y = fb * ts;
                        let inv = 1.0 / (tc * tc + y * y).sqrt();
                        let amp = (ss * tc + sign * cc * y) * inv;
                        let p = (amp * amp).min(1.0);
                        *mi *= pow_floor(p, ones) * pow_floor(1.0 - p, zeros);
                    }
                    pending += 1;
                    if pending == 4 {
                        renorm(&mut mant, &mut exp2);
                        pending = 0;
                    }
                }
            }
            renorm(&mut mant, &mut exp2);
            for ((o, m), e) in out.iter_mut().zip(&mant).zip(&exp2) {
                *o = m.ln() + *e as f64 * std::f64::consts::LN_2;
            }
        });
    }
    let uses: u64 = sched.iter().map(|&(m, n)| n * (2 * m + 1)).sum();
    Ok(QaeResult {
        a_hat: post.mmse_amplitude(),
        uses_successful: uses,
        uses_expected_total: Some(uses as f64 + expected_fail),
        failed_preparations: Some(failed),
        lambda: 2,
        c_qae_reference: QaeKind::Lcu.c_qae_reference(),
        schedule: sched,
        fallback: None,
    })
}

/// Fold the binary exponents of `mant` into `exp2`, leaving mantissas in
/// [1, 2). Called every four factors, each at least 1e-60, so nothing
/// underflows in between.
fn renorm(mant: &mut [f64], exp2: &mut [i64]) {
    for (m, e) in mant.iter_mut().zip(exp2.iter_mut()) {
        let bits = m.to_bits();
        *e += ((bits >> 52) & 0x7ff) as i64 - 1023;
        *m = f64::from_bits((bits & !(0x7ffu64 << 52)) | (1023u64 << 52));
    }
}

/// p^k floored at 1e-30 so products stay in the normal range.
#[inline]
fn pow_floor(p: f64, k: u64) -> f64 {
    match k {
        0 => 1.0,
        1 => p.max(1e-30),
        _ => p.powi(k.min(i32::MAX as u64) as i32).max(1e-30),
    }
}
