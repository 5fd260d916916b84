//! Fourier-series QMCI: a quantity E[g(X)] is written as a0 plus a sum of
//! harmonic terms, each harmonic's expectation is encoded in the amplitude of
//! one rotation qubit, and amplitude estimation on those circuits is combined
//! classically.
//!
//! X is mapped to a normalised variable t = (x - shift) / scale purely in
//! register metadata, so the rotation angles absorb the transform and the
//! same cached series serves every support.

mod series;

use std::f64::consts::{FRAC_PI_2, PI};

use serde::{Deserialize, Serialize};

use crate::distloader::{rescale, DistributionCircuit};
use crate::error::{QmciError, Result};
use crate::qae::{estimate_amplitude, QaeConfig, QaeKind, QaeProblem, QaeResult};
use crate::qcore::{outcome_pmf, Gate, QuantumCircuit};
use crate::util::derive_seed;

pub use series::{exp_series, mean_series, s_two_thirds, square_series, FourierSeries, MAX_HARMONICS};

/// The statistical quantities QMCI can estimate.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum QuantityKind {
    Mean,
    ConditionalExpectation,
    SecondMoment,
    Exponential,
    ConditionalExponential,
    BernoulliQubit,
}

impl QuantityKind {
    pub fn is_conditional(self) -> bool {
        matches!(self, QuantityKind::ConditionalExpectation | QuantityKind::ConditionalExponential)
    }

    pub const ALL: [QuantityKind; 6] = [
        QuantityKind::Mean,
        QuantityKind::ConditionalExpectation,
        QuantityKind::SecondMoment,
        QuantityKind::Exponential,
        QuantityKind::ConditionalExponential,
        QuantityKind::BernoulliQubit,
    ];
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Trig {
    Cos,
    Sin,
}

impl Trig {
    pub fn beta(self) -> f64 {
        match self {
            Trig::Cos => 0.0,
            Trig::Sin => FRAC_PI_2,
        }
    }

    pub fn eval(self, x: f64) -> f64 {
        match self {
            Trig::Cos => x.cos(),
            Trig::Sin => x.sin(),
        }
    }
}

/// x = shift + scale * t on the way in; result = offset + out_scale * E[g(t)].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Normalization {
    pub shift: f64,
    pub scale: f64,
    pub out_offset: f64,
    pub out_scale: f64,
}

impl Normalization {
    pub fn to_t(&self, x: f64) -> f64 {
        (x - self.shift) / self.scale
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuantitySpec {
    pub kind: QuantityKind,
    /// Absent for BernoulliQubit.
    pub series: Option<FourierSeries>,
    /// RMSE <= c_f * c_qae * range / q with all harmonics kept.
    pub c_f: f64,
    pub x_star: Option<f64>,
    pub support_window: Option<(f64, f64)>,
    /// The range the series is built on (the window if one is set).
    pub range: (f64, f64),
    pub norm: Normalization,
}

fn default_x_star(kind: QuantityKind, lo: f64, hi: f64) -> Option<f64> {
    match kind {
        QuantityKind::ConditionalExpectation => Some(if lo <= 0.0 && 0.0 <= hi { 0.0 } else { lo }),
        QuantityKind::ConditionalExponential => Some(lo),
        _ => None,
    }
}

/// Series and constants for `kind` over `support`, with the default x*.
pub fn quantity_series(kind: QuantityKind, support: (f64, f64)) -> Result<QuantitySpec> {
    QuantitySpec::new(kind, support, None, None)
}

impl QuantitySpec {
    pub fn new(
        kind: QuantityKind,
        support: (f64, f64),
        window: Option<(f64, f64)>,
        x_star: Option<f64>,
    ) -> Result<Self> {
        let (xl, xu) = support;
        if !(xl < xu) || !xl.is_finite() || !xu.is_finite() {
            return Err(QmciError::invalid(format!("inverted support [{xl}, {xu}]")));
        }
        let (lo, hi) = match window {
            Some((a, b)) => {
                let tol = 1e-12 * (xu - xl);
                if !(a < b) || a < xl - tol || b > xu + tol {
                    return Err(QmciError::invalid(format!(
                        "window [{a}, {b}] not inside support [{xl}, {xu}]"
                    )));
                }
                (a, b)
            }
            None => (xl, xu),
        };
        let x_star = if kind.is_conditional() {
            let x = x_star.or(default_x_star(kind, lo, hi)).unwrap();
            if !(lo - 1e-12..=hi + 1e-12).contains(&x) {
                return Err(QmciError::invalid(format!("x* = {x} outside [{lo}, {hi}]")));
            }
            Some(x)
        } else {
            None
        };
        let (series, norm, range) = match kind {
            QuantityKind::Mean | QuantityKind::ConditionalExpectation => {
                let (c, h) = (0.5 * (lo + hi), 0.5 * (hi - lo));
                let norm = Normalization { shift: c, scale: h, out_offset: c, out_scale: h };
                (Some((*mean_series()).clone()), norm, hi - lo)
            }
            QuantityKind::SecondMoment => {
                let xb = hi.abs().max(lo.abs());
                let norm = Normalization { shift: 0.0, scale: xb, out_offset: 0.0, out_scale: xb * xb };
                (Some((*square_series()).clone()), norm, xb * xb)
            }
            QuantityKind::Exponential | QuantityKind::ConditionalExponential => {
                let norm = Normalization { shift: lo, scale: 1.0, out_offset: 0.0, out_scale: lo.exp() };
                (Some((*exp_series(hi - lo)).clone()), norm, hi.exp() - lo.exp())
            }
            QuantityKind::BernoulliQubit => {
                let norm = Normalization { shift: 0.0, scale: 1.0, out_offset: 0.0, out_scale: 1.0 };
                (None, norm, 1.0)
            }
        };
        let c_f = match &series {
            Some(s) => 2.0 * s_two_thirds(s).powf(1.5) * norm.out_scale / range,
            None => 1.0,
        };
        Ok(QuantitySpec { kind, series, c_f, x_star, support_window: window, range: (lo, hi), norm })
    }

    /// max g - min g over the range.
    pub fn g_range(&self) -> f64 {
        let (lo, hi) = self.range;
        match self.kind {
            QuantityKind::Mean | QuantityKind::ConditionalExpectation => hi - lo,
            QuantityKind::SecondMoment => hi.abs().max(lo.abs()).powi(2),
            QuantityKind::Exponential | QuantityKind::ConditionalExponential => hi.exp() - lo.exp(),
            QuantityKind::BernoulliQubit => 1.0,
        }
    }

    /// The truncated series evaluated at x, undoing the normalisation.
    pub fn reconstruct(&self, x: f64) -> Option<f64> {
        let s = self.series.as_ref()?;
        Some(self.norm.out_offset + self.norm.out_scale * s.eval(self.norm.to_t(x)))
    }

    /// Exact g(x) (x* is not applied).
    pub fn g(&self, x: f64) -> f64 {
        match self.kind {
            QuantityKind::Mean | QuantityKind::ConditionalExpectation => x,
            QuantityKind::SecondMoment => x * x,
            QuantityKind::Exponential | QuantityKind::ConditionalExponential => x.exp(),
            QuantityKind::BernoulliQubit => f64::NAN,
        }
    }
}

/// A priori bound c_f * c_qae * range * q^(-lambda/2).
pub fn rmse_bound(spec: &QuantitySpec, c_qae: f64, lambda: u8, q: u64) -> f64 {
    spec.c_f * c_qae * spec.g_range() * (q.max(1) as f64).powf(-(lambda as f64) / 2.0)
}

/// One harmonic term whose expectation sits in a rotation qubit.
#[derive(Clone, Debug)]
pub struct AmplitudeCircuit {
    pub circuit: QuantumCircuit,
    pub rotation_qubit: usize,
    /// Wires S_0 must reflect (those not guaranteed back at |0>).
    pub reflect_qubits: Vec<usize>,
}

impl AmplitudeCircuit {
    pub fn qae_problem(&self) -> QaeProblem {
        QaeProblem {
            a_circuit: self.circuit.clone(),
            good_qubit: self.rotation_qubit,
            reflect_qubits: Some(self.reflect_qubits.clone()),
        }
    }
}

fn wrap(angle: f64) -> f64 {
    angle.rem_euclid(4.0 * PI)
}

/// P followed by Ry(m omega x_l - beta) on a fresh qubit and Ry(2^k m omega
/// delta) controlled by bit k of the dimension register, so that
/// 1 - 2 P(1) = E[cos(m omega x - beta)]. With an indicator, the bank only
/// fires when it reads 1; otherwise the qubit is left at `x_star_angle`.
pub fn build_a_circuit(
    dc: &DistributionCircuit,
    dim: usize,
    trig: Trig,
    m: usize,
    omega: f64,
    condition: Option<usize>,
    x_star_angle: Option<f64>,
) -> Result<AmplitudeCircuit> {
    if m == 0 {
        return Err(QmciError::invalid("harmonic index must be at least 1"));
    }
    let d = dc.dim(dim)?;
    let mw = m as f64 * omega;
    let alpha = mw * d.x_l - trig.beta();
    let theta = mw * d.delta;
    let mut c = dc.circuit.clone();
    let r = c.n_qubits;
    c.n_qubits += 1;
    let w = d.width();
    let mut reflect = dc.data_qubits();
    reflect.push(r);
    match condition {
        None => {
            c.push(Gate::ry(wrap(alpha), r));
            for k in 0..w {
                let ang = wrap(theta * 2f64.powi(k as i32));
                c.push(Gate::cry(ang, d.qubits[w - 1 - k], r));
            }
        }
        Some(ind) => {
            if !dc.indicators.contains(&ind) {
                return Err(QmciError::invalid(format!("qubit {ind} is not a registered indicator")));
            }
            let star = x_star_angle
                .ok_or_else(|| QmciError::invalid("conditional circuit needs an x* angle"))?;
            let and = c.n_qubits;
            c.n_qubits += 1;
            c.push(Gate::ry(wrap(star), r));
            c.push(Gate::cry(wrap(alpha - star), ind, r));
            for k in 0..w {
                let bit = d.qubits[w - 1 - k];
                let ang = wrap(theta * 2f64.powi(k as i32));
                c.push(Gate::toffoli(ind, bit, and));
                c.push(Gate::cry(ang, and, r));
                c.push(Gate::toffoli(ind, bit, and));
            }
        }
    }
    c.name = format!("A_{}_{m}_{:?}", dc.circuit.name, trig).to_lowercase();
    Ok(AmplitudeCircuit { circuit: c, rotation_qubit: r, reflect_qubits: reflect })
}

/// Integer split of `q_total` minimising sum c^2 / q^2 (zero coefficients get
/// nothing): the continuous optimum q ~ |c|^(2/3), largest-remainder
/// rounding, then single-use exchanges until none helps.
pub fn allocate_uses(coeffs: &[f64], q_total: u64) -> Result<Vec<u64>> {
    let nz: Vec<usize> = (0..coeffs.len()).filter(|&i| coeffs[i] != 0.0).collect();
    if nz.is_empty() {
        return Ok(vec![0; coeffs.len()]);
    }
    if q_total < nz.len() as u64 {
        return Err(QmciError::Budget(format!(
            "{q_total} uses cannot cover {} nonzero coefficients",
            nz.len()
        )));
    }
    let w: Vec<f64> = nz.iter().map(|&i| coeffs[i].abs().powf(2.0 / 3.0)).collect();
    let wsum: f64 = w.iter().sum();
    // reserve one use each, share the rest
    let spare = q_total - nz.len() as u64;
    let ideal: Vec<f64> = w.iter().map(|x| q_total as f64 * x / wsum - 1.0).collect();
    let mut q: Vec<u64> = ideal.iter().map(|x| x.max(0.0).floor() as u64).collect();
    let mut used: u64 = q.iter().sum();
    if used > spare {
        q = vec![0; nz.len()];
        used = 0;
    }
    let mut order: Vec<usize> = (0..nz.len()).collect();
    order.sort_by(|&i, &j| {
        let ri = ideal[i] - q[i] as f64;
        let rj = ideal[j] - q[j] as f64;
        rj.total_cmp(&ri).then(i.cmp(&j))
    });
    let mut k = 0;
    while used < spare {
        q[order[k % order.len()]] += 1;
        used += 1;
        k += 1;
    }
    let mut q: Vec<u64> = q.into_iter().map(|x| x + 1).collect();
    let c2: Vec<f64> = nz.iter().map(|&i| coeffs[i] * coeffs[i]).collect();
    let cost = |c: f64, n: u64| c / (n as f64 * n as f64);
    loop {
        let mut best_gain = (0.0, usize::MAX);
        let mut best_loss = (f64::INFINITY, usize::MAX);
        for i in 0..q.len() {
            let gain = cost(c2[i], q[i]) - cost(c2[i], q[i] + 1);
            if gain > best_gain.0 {
                best_gain = (gain, i);
            }
            if q[i] > 1 {
                let loss = cost(c2[i], q[i] - 1) - cost(c2[i], q[i]);
                if loss < best_loss.0 {
                    best_loss = (loss, i);
                }
            }
        }
        let (g, i) = best_gain;
        let (l, j) = best_loss;
        if i == usize::MAX || j == usize::MAX || i == j || g <= l * (1.0 + 1e-12) {
            break;
        }
        q[i] += 1;
        q[j] -= 1;
    }
    let mut out = vec![0; coeffs.len()];
    for (k, &i) in nz.iter().enumerate() {
        out[i] = q[k];
    }
    Ok(out)
}

/// How much to spend: a use count or a target RMSE.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Budget {
    Uses(u64),
    TargetRmse(f64),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlannedTerm {
    pub m: usize,
    pub trig: Trig,
    pub coeff: f64,
    pub q: u64,
}

/// Everything about an estimate that does not depend on the seed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FourierPlan {
    pub spec: QuantitySpec,
    pub dim: usize,
    pub condition: Option<usize>,
    pub qae: QaeKind,
    pub c_qae: f64,
    pub lambda: u8,
    pub terms: Vec<PlannedTerm>,
    /// Sum of |coefficients| left out, including the uncomputed remainder.
    pub tail: f64,
    pub q_total: u64,
    pub rmse_bound: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HarmonicResult {
    pub m: usize,
    pub trig: Trig,
    pub coeff: f64,
    pub q: u64,
    pub amplitude_estimate: f64,
    pub uses: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fallback: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QmciResult {
    pub quantity: QuantityKind,
    pub qae: QaeKind,
    pub estimate: f64,
    pub rmse_bound: f64,
    pub uses_total: u64,
    /// LCU only: successful uses plus expected failed-preparation cost.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub uses_expected_total: Option<f64>,
    pub per_harmonic: Vec<HarmonicResult>,
}

/// Nonzero terms, largest |coefficient| first.
fn ranked_terms(s: &FourierSeries) -> Vec<(usize, Trig, f64)> {
    let mut t: Vec<(usize, Trig, f64)> = Vec::new();
    for m in 1..=s.len() {
        for (trig, c) in [(Trig::Cos, s.a[m - 1]), (Trig::Sin, s.b[m - 1])] {
            if c != 0.0 {
                t.push((m, trig, c));
            }
        }
    }
    t.sort_by(|x, y| y.2.abs().total_cmp(&x.2.abs()).then(x.0.cmp(&y.0)).then(x.1.cmp(&y.1)));
    t
}

/// 2 c_qae sqrt(sum c^2 q^-lambda), in normalised units.
fn qae_error(coeffs: &[f64], q: &[u64], c_qae: f64, lambda: u8) -> f64 {
    let s: f64 = coeffs
        .iter()
        .zip(q)
        .map(|(c, &n)| c * c * (n as f64).powf(-(lambda as f64)))
        .sum();
    2.0 * c_qae * s.sqrt()
}

impl FourierPlan {
    pub fn new(
        spec: &QuantitySpec,
        dim: usize,
        condition: Option<usize>,
        qae: QaeKind,
        budget: Budget,
    ) -> Result<Self> {
        let c_qae = qae.c_qae_reference();
        let lambda = qae.lambda();
        if spec.kind.is_conditional() && condition.is_none() {
            return Err(QmciError::invalid("conditional quantity needs an indicator"));
        }
        let mk = |terms, tail, q_total, rmse_bound| FourierPlan {
            spec: spec.clone(),
            dim,
            condition,
            qae,
            c_qae,
            lambda,
            terms,
            tail,
            q_total,
            rmse_bound,
        };
        let Some(series) = &spec.series else {
            // one QAE straight on the indicator
            let q = match budget {
                Budget::Uses(q) => q,
                Budget::TargetRmse(r) => uses_for_rmse(c_qae, lambda, r)?,
            };
            if q == 0 {
                return Err(QmciError::Budget("q must be at least 1".into()));
            }
            return Ok(mk(Vec::new(), 0.0, q, c_qae * (q as f64).powf(-(lambda as f64) / 2.0)));
        };
        let ranked = ranked_terms(series);
        let beyond = series.tail_estimate();
        // suffix sums of |c|: tail[k] is what dropping terms k.. leaves out
        let mut tail = vec![beyond; ranked.len() + 1];
        for k in (0..ranked.len()).rev() {
            tail[k] = tail[k + 1] + ranked[k].2.abs();
        }
        // continuous bound for the top-k terms at q uses:
        // 2 c q^(-l/2) sqrt(S^l sum |c|^(2 - 2l/3)) + tail
        let lf = lambda as f64;
        let mut s23 = 0.0;
        let mut sp = 0.0;
        let mut kfac = vec![0.0; ranked.len() + 1];
        for (k, t) in ranked.iter().enumerate() {
            s23 += t.2.abs().powf(2.0 / 3.0);
            sp += t.2.abs().powf(2.0 - 2.0 * lf / 3.0);
            kfac[k + 1] = 2.0 * c_qae * (s23.powf(lf) * sp).sqrt();
        }
        let scale = spec.norm.out_scale;
        let (k_best, q_total) = match budget {
            Budget::Uses(q) => {
                if q == 0 {
                    return Err(QmciError::Budget("q must be at least 1".into()));
                }
                let qf = q as f64;
                let kmax = ranked.len().min(q as usize);
                let k_best = (1..=kmax)
                    .map(|k| (k, kfac[k] * qf.powf(-lf / 2.0) + tail[k]))
                    .min_by(|a, b| a.1.total_cmp(&b.1))
                    .map(|x| x.0)
                    .unwrap_or(1);
                (k_best, q)
            }
            Budget::TargetRmse(r) => {
                if !(r > 0.0 && r.is_finite()) {
                    return Err(QmciError::invalid(format!("target RMSE must be positive, got {r}")));
                }
                let rn = r / scale;
                let mut best: Option<(usize, f64)> = None;
                for k in 1..=ranked.len() {
                    if tail[k] >= rn {
                        continue;
                    }
                    let q = (kfac[k] / (rn - tail[k])).powf(2.0 / lf).max(k as f64);
                    if best.is_none_or(|b| q < b.1) {
                        best = Some((k, q));
                    }
                }
                let (k, q) = best.ok_or_else(|| {
                    QmciError::Infeasible(format!("target RMSE {r} below the series truncation floor"))
                })?;
                (k, q.ceil() as u64)
            }
        };
        let build = |q_total: u64| -> Result<(Vec<PlannedTerm>, f64)> {
            let coeffs: Vec<f64> = ranked[..k_best].iter().map(|t| t.2).collect();
            let q = allocate_uses(&coeffs, q_total)?;
            let terms: Vec<PlannedTerm> = ranked[..k_best]
                .iter()
                .zip(&q)
                .map(|(&(m, trig, coeff), &q)| PlannedTerm { m, trig, coeff, q })
                .collect();
            let bound = scale * (qae_error(&coeffs, &q, c_qae, lambda) + tail[k_best]);
            Ok((terms, bound))
        };
        let mut q_total = q_total;
        let (mut terms, mut bound) = build(q_total)?;
        if let Budget::TargetRmse(r) = budget {
            // integer rounding can nudge the bound over the target
            while bound > r {
                q_total += (q_total / 100).max(1);
                (terms, bound) = build(q_total)?;
            }
        }
        Ok(mk(terms, tail[k_best], q_total, bound))
    }

    /// The register metadata the angles are computed from.
    pub fn normalized_dc(&self, dc: &DistributionCircuit) -> Result<DistributionCircuit> {
        let d = dc.dim(self.dim)?;
        let n = &self.spec.norm;
        rescale(dc, self.dim, n.to_t(d.x_l), d.delta / n.scale)
    }

    fn x_star_t(&self) -> Option<f64> {
        self.spec.x_star.map(|x| self.spec.norm.to_t(x))
    }

    /// The amplitude circuit of every planned term (or the indicator problem
    /// for BernoulliQubit).
    pub fn circuits(&self, dc: &DistributionCircuit) -> Result<Vec<AmplitudeCircuit>> {
        let Some(series) = &self.spec.series else {
            let ind = self.bernoulli_qubit(dc)?;
            let mut reflect = dc.data_qubits();
            reflect.dedup();
            return Ok(vec![AmplitudeCircuit {
                circuit: dc.circuit.clone(),
                rotation_qubit: ind,
                reflect_qubits: reflect,
            }]);
        };
        let ndc = self.normalized_dc(dc)?;
        let xs = self.x_star_t();
        self.terms
            .iter()
            .map(|t| {
                let star = xs.map(|x| t.m as f64 * series.omega * x - t.trig.beta());
                build_a_circuit(&ndc, self.dim, t.trig, t.m, series.omega, self.condition, star)
            })
            .collect()
    }

    fn bernoulli_qubit(&self, dc: &DistributionCircuit) -> Result<usize> {
        let q = self
            .condition
            .ok_or_else(|| QmciError::invalid("BernoulliQubit needs an indicator qubit"))?;
        if !dc.indicators.contains(&q) {
            return Err(QmciError::invalid(format!("qubit {q} is not a registered indicator")));
        }
        Ok(q)
    }

    /// Exact P(1) of every amplitude circuit, from the pmf P prepares: the
    /// rotation qubit reads 1 with probability sum_x p(x) sin^2(phi(x) / 2).
    pub fn exact_amplitudes(&self, dc: &DistributionCircuit) -> Result<Vec<f64>> {
        let Some(series) = &self.spec.series else {
            let q = self.bernoulli_qubit(dc)?;
            return Ok(vec![outcome_pmf(&dc.circuit, &[q])?[1]]);
        };
        let ndc = self.normalized_dc(dc)?;
        let d = ndc.dim(self.dim)?;
        let mut wires = d.qubits.clone();
        if let Some(ind) = self.condition {
            if !dc.indicators.contains(&ind) {
                return Err(QmciError::invalid(format!("qubit {ind} is not a registered indicator")));
            }
            wires.push(ind);
        }
        let pmf = outcome_pmf(&dc.circuit, &wires)?;
        let xs = self.x_star_t();
        Ok(self
            .terms
            .iter()
            .map(|t| {
                let mw = t.m as f64 * series.omega;
                let beta = t.trig.beta();
                let p1: f64 = pmf
                    .iter()
                    .enumerate()
                    .filter(|(_, &p)| p > 0.0)
                    .map(|(j, &p)| {
                        let (code, on) = match self.condition {
                            Some(_) => (j >> 1, j & 1 == 1),
                            None => (j, true),
                        };
                        let phi = if on {
                            mw * d.value(code as u128) - beta
                        } else {
                            mw * xs.unwrap() - beta
                        };
                        p * (0.5 * phi).sin().powi(2)
                    })
                    .sum();
                p1.clamp(0.0, 1.0)
            })
            .collect())
    }

    /// Run amplitude estimation on every term; `template` supplies the
    /// non-budget QAE settings.
    pub fn run(&self, amplitudes: &[f64], template: &QaeConfig, seed: u64) -> Result<QmciResult> {
        let n_expected = if self.spec.series.is_some() { self.terms.len() } else { 1 };
        if amplitudes.len() != n_expected {
            return Err(QmciError::invalid(format!(
                "{} amplitudes for {n_expected} circuits",
                amplitudes.len()
            )));
        }
        let qae_at = |a: f64, q: u64, s: u64| -> Result<QaeResult> {
            let mut cfg = template.clone();
            cfg.kind = self.qae;
            cfg.q = q;
            cfg.seed = s;
            if self.qae == QaeKind::Lcu && q < cfg.shots_m0 {
                // too small for an LCU round: prepare-and-measure instead
                cfg.kind = QaeKind::Pam;
                let mut r = estimate_amplitude(a, &cfg)?;
                r.fallback = Some(format!("{q} uses below one LCU round; used PAM"));
                return Ok(r);
            }
            estimate_amplitude(a, &cfg)
        };
        let Some(series) = &self.spec.series else {
            let r = qae_at(amplitudes[0], self.q_total, derive_seed(seed, &[0, 0]))?;
            return Ok(QmciResult {
                quantity: self.spec.kind,
                qae: self.qae,
                estimate: r.a_hat,
                rmse_bound: self.rmse_bound,
                uses_total: r.uses_successful,
                uses_expected_total: r.uses_expected_total,
                per_harmonic: Vec::new(),
            });
        };
        let mut acc = series.a0;
        let mut uses = 0;
        let mut expected = 0.0;
        let mut any_expected = false;
        let mut per = Vec::with_capacity(self.terms.len());
        for (t, &a) in self.terms.iter().zip(amplitudes) {
            let s = derive_seed(seed, &[t.m as u64, t.trig as u64]);
            let r = qae_at(a, t.q, s)?;
            acc += t.coeff * (1.0 - 2.0 * r.a_hat);
            uses += r.uses_successful;
            match r.uses_expected_total {
                Some(x) => {
                    expected += x;
                    any_expected = true;
                }
                None => expected += r.uses_successful as f64,
            }
            per.push(HarmonicResult {
                m: t.m,
                trig: t.trig,
                coeff: t.coeff,
                q: t.q,
                amplitude_estimate: r.a_hat,
                uses: r.uses_successful,
                fallback: r.fallback,
            });
        }
        Ok(QmciResult {
            quantity: self.spec.kind,
            qae: self.qae,
            estimate: self.spec.norm.out_offset + self.spec.norm.out_scale * acc,
            rmse_bound: self.rmse_bound,
            uses_total: uses,
            uses_expected_total: any_expected.then_some(expected),
            per_harmonic: per,
        })
    }

    /// The value the estimator converges to as q grows without bound (no
    /// QAE noise, truncation included).
    pub fn noiseless_estimate(&self, amplitudes: &[f64]) -> f64 {
        match &self.spec.series {
            None => amplitudes[0],
            Some(s) => {
                let acc: f64 = s.a0
                    + self
                        .terms
                        .iter()
                        .zip(amplitudes)
                        .map(|(t, a)| t.coeff * (1.0 - 2.0 * a))
                        .sum::<f64>();
                self.spec.norm.out_offset + self.spec.norm.out_scale * acc
            }
        }
    }
}

fn uses_for_rmse(c_qae: f64, lambda: u8, r: f64) -> Result<u64> {
    if !(r > 0.0 && r.is_finite()) {
        return Err(QmciError::invalid(format!("target RMSE must be positive, got {r}")));
    }
    Ok((c_qae / r).powf(2.0 / lambda as f64).ceil() as u64)
}

/// Plan, compute exact amplitudes, and run once.
pub fn qmci_estimate(
    dc: &DistributionCircuit,
    spec: &QuantitySpec,
    dim: usize,
    condition: Option<usize>,
    qae: &QaeConfig,
    budget: Budget,
) -> Result<QmciResult> {
    let plan = FourierPlan::new(spec, dim, condition, qae.kind, budget)?;
    let amps = plan.exact_amplitudes(dc)?;
    plan.run(&amps, qae, qae.seed)
}

/// Spec for a quantity over a register's own grid range.
pub fn quantity_for_dim(
    dc: &DistributionCircuit,
    kind: QuantityKind,
    dim: usize,
    window: Option<(f64, f64)>,
    x_star: Option<f64>,
) -> Result<QuantitySpec> {
    if kind == QuantityKind::BernoulliQubit {
        return QuantitySpec::new(kind, (0.0, 1.0), None, None);
    }
    let d = dc.dim(dim)?;
    QuantitySpec::new(kind, (d.x_l, d.x_u()), window, x_star)
}
