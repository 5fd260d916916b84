//! First-class constructors for the barrier, look-back and autocallable
//! benchmark instruments.

use serde::{Deserialize, Serialize};

use super::{add_esop, add_indicator_snapped, apply_binary_op, BinaryOp, BinaryOpSpec, IndicatorSpec, Literal};
use crate::distloader::{rescale, DistributionCircuit};
use crate::error::{QmciError, Result};
use crate::fouriermc::QuantityKind;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum InstrumentKind {
    Barrier,
    Lookback,
    Autocallable,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Space {
    Price,
    Return,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CallPut {
    Call,
    Put,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BarrierKind {
    KnockIn,
    KnockOut,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PayoffKind {
    Value,
    Binary,
}

/// Early-redemption date: slice index (0-based), call level as a ratio of
/// the initial price, and the payout if this is the first call reached.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AutocallEntry {
    pub slice: usize,
    pub level: f64,
    pub payout: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstrumentSpec {
    pub instrument: InstrumentKind,
    pub space: Space,
    pub n_slices: usize,
    pub total_volatility: f64,
    pub call_or_put: CallPut,
    /// Strike as a ratio of the initial price (the put strike for autocallables).
    pub strike_ratio: f64,
    #[serde(default)]
    pub barrier_ratio: Option<f64>,
    #[serde(default)]
    pub barrier_kind: Option<BarrierKind>,
    #[serde(default)]
    pub autocall_schedule: Option<Vec<AutocallEntry>>,
    pub payoff_kind: PayoffKind,
    #[serde(default)]
    pub target_rmse: Option<f64>,
    #[serde(default)]
    pub q_budget: Option<u64>,
}

/// A threshold as requested and as snapped onto its register's grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SnappedThreshold {
    pub dimension: usize,
    pub requested: f64,
    pub snapped: f64,
}

/// One QMCI run derived from an instrument. Its contribution to the price is
/// `weight * (estimate - offset)`, where `offset` removes the x* fill-in of
/// conditional quantities.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PayoffConfig {
    pub label: String,
    pub integration_dim: usize,
    /// Indicator index (into `indicators`) conditioning the quantity.
    pub condition: Option<usize>,
    pub quantity: QuantityKind,
    /// Fill-in value (in register units) used where the condition is false.
    pub x_star: Option<f64>,
    pub weight: f64,
    pub support_window: Option<(f64, f64)>,
    pub thresholds: Vec<SnappedThreshold>,
}

impl PayoffConfig {
    /// Value of g(x*) that the conditional estimate carries on the false branch.
    pub fn offset(&self) -> f64 {
        match (self.quantity, self.x_star) {
            (QuantityKind::ConditionalExpectation, Some(x)) => x,
            (QuantityKind::ConditionalExponential, Some(x)) => x.exp(),
            _ => 0.0,
        }
    }

    pub fn contribution(&self, estimate: f64) -> f64 {
        self.weight * (estimate - self.offset())
    }
}

/// Classical combination of the runs of an instrument.
pub fn autocall_combine(configs: &[PayoffConfig], estimates: &[f64]) -> Result<f64> {
    if configs.len() != estimates.len() {
        return Err(QmciError::Dimension(format!(
            "{} configs but {} estimates",
            configs.len(),
            estimates.len()
        )));
    }
    Ok(configs.iter().zip(estimates).map(|(c, e)| c.contribution(*e)).sum())
}

struct Builder {
    dc: DistributionCircuit,
    space: Space,
    thresholds: Vec<SnappedThreshold>,
}

impl Builder {
    fn level(&self, ratio: f64) -> f64 {
        match self.space {
            Space::Return => ratio.ln(),
            Space::Price => ratio,
        }
    }

    fn threshold(&mut self, dim: usize, ratio: f64, lower: bool) -> Result<usize> {
        let c = self.level(ratio);
        let spec = if lower { IndicatorSpec::lower(dim, c) } else { IndicatorSpec::upper(dim, c) };
        let (dc, snapped) = add_indicator_snapped(&self.dc, &spec)?;
        self.dc = dc;
        self.thresholds.push(SnappedThreshold {
            dimension: dim,
            requested: c,
            snapped: snapped.expect("threshold snaps"),
        });
        Ok(self.dc.indicators.len() - 1)
    }

    fn esop(&mut self, products: Vec<Vec<Literal>>) -> Result<usize> {
        self.dc = add_esop(&self.dc, &products)?;
        Ok(self.dc.indicators.len() - 1)
    }

    fn op(&mut self, op: BinaryOp, l: usize, r: usize) -> Result<usize> {
        self.dc = apply_binary_op(&self.dc, &BinaryOpSpec::dims(op, l, r))?;
        Ok(self.dc.dims.len() - 1)
    }
}

fn validate(spec: &InstrumentSpec) -> Result<()> {
    if spec.n_slices == 0 {
        return Err(QmciError::invalid("n_slices must be at least 1"));
    }
    if !(spec.total_volatility > 0.0 && spec.total_volatility.is_finite()) {
        return Err(QmciError::invalid("total_volatility must be positive"));
    }
    if !(spec.strike_ratio > 0.0) {
        return Err(QmciError::invalid("strike_ratio must be positive"));
    }
    if let Some(b) = spec.barrier_ratio {
        if !(b > 0.0) {
            return Err(QmciError::invalid("barrier_ratio must be positive"));
        }
    }
    if let Some(s) = &spec.autocall_schedule {
        if s.is_empty() {
            return Err(QmciError::invalid("autocall schedule is empty"));
        }
        for w in s.windows(2) {
            if w[1].slice <= w[0].slice {
                return Err(QmciError::invalid("autocall slices must be strictly increasing"));
            }
        }
        if s.iter().any(|e| e.slice >= spec.n_slices || !(e.level > 0.0)) {
            return Err(QmciError::invalid("autocall entry outside the time grid or with a bad level"));
        }
    }
    Ok(())
}

/// Calls on every other slice (1, 3, ...) with rising levels and coupons.
pub fn default_autocall_schedule(n_slices: usize) -> Vec<AutocallEntry> {
    (1..n_slices)
        .step_by(2)
        .enumerate()
        .map(|(j, slice)| AutocallEntry {
            slice,
            level: 1.0 + 0.025 * (j + 1) as f64,
            payout: 0.05 * (j + 1) as f64,
        })
        .collect()
}

/// Build the enhanced circuit for an instrument on i.i.d. copies of `base`
/// (a univariate unit Gaussian in return space, scaled here to the per-slice
/// volatility; a per-slice lognormal used as-is in price space).
pub fn build_instrument(
    base: &DistributionCircuit,
    spec: &InstrumentSpec,
) -> Result<(DistributionCircuit, Vec<PayoffConfig>)> {
    validate(spec)?;
    base.validate()?;
    if base.dims.len() != 1 {
        return Err(QmciError::invalid("instrument base must have exactly one dimension"));
    }
    let n = spec.n_slices;
    let slice = match spec.space {
        Space::Return => {
            let s = spec.total_volatility / (n as f64).sqrt();
            let d = &base.dims[0];
            rescale(base, 0, d.x_l * s, d.delta * s)?
        }
        Space::Price => base.clone(),
    };
    let mut b = Builder {
        dc: slice.replicate(n)?,
        space: spec.space,
        thresholds: Vec::new(),
    };
    let step = match spec.space {
        Space::Return => BinaryOp::Sum,
        Space::Price => BinaryOp::Product,
    };
    // path[0] is the last base dimension, then running combinations with
    // dimensions 0, 1, ... as in Sum(4, 1), Sum(5, 2), Sum(6, 3)
    let mut path = vec![n - 1];
    for k in 1..n {
        let prev = *path.last().unwrap();
        path.push(b.op(step, prev, k - 1)?);
    }
    let last = *path.last().unwrap();
    let (value_q, window) = match spec.space {
        Space::Return => {
            let v = 5.0 * spec.total_volatility;
            (QuantityKind::ConditionalExponential, Some((-v, v)))
        }
        Space::Price => (QuantityKind::ConditionalExpectation, None),
    };
    let strike = b.level(spec.strike_ratio);
    let call = spec.call_or_put == CallPut::Call;
    let sign = if call { 1.0 } else { -1.0 };
    let mut configs = Vec::new();
    let payoff = |b: &Builder, label: String, dim: usize, cond: usize, weight_value: f64, binary_weight: f64, x_star: f64| {
        let thresholds = b.thresholds.clone();
        // a running max or min has a narrower support than the window
        let window = window.map(|(lo, hi)| match b.dc.dim(dim) {
            Ok(d) => (lo.max(d.x_l), hi.min(d.x_u())),
            Err(_) => (lo, hi),
        });
        match spec.payoff_kind {
            PayoffKind::Value => PayoffConfig {
                label,
                integration_dim: dim,
                condition: Some(cond),
                quantity: value_q,
                x_star: Some(x_star),
                weight: weight_value,
                support_window: window,
                thresholds,
            },
            PayoffKind::Binary => PayoffConfig {
                label,
                integration_dim: dim,
                condition: Some(cond),
                quantity: QuantityKind::BernoulliQubit,
                x_star: None,
                weight: binary_weight,
                support_window: None,
                thresholds,
            },
        }
    };
    match spec.instrument {
        InstrumentKind::Barrier => {
            let barrier = spec
                .barrier_ratio
                .ok_or_else(|| QmciError::invalid("barrier instrument needs barrier_ratio"))?;
            // "alive" means the barrier has not been touched at that slice
            let up = barrier >= 1.0;
            let alive: Vec<usize> = path
                .iter()
                .map(|&d| b.threshold(d, barrier, !up))
                .collect::<Result<_>>()?;
            let strike_ind = b.threshold(last, spec.strike_ratio, call)?;
            let mut all: Vec<Literal> = alive.iter().map(|&i| (i, true)).collect();
            all.push((strike_ind, true));
            let products = match spec.barrier_kind.unwrap_or(BarrierKind::KnockOut) {
                BarrierKind::KnockOut => vec![all],
                // strike AND touched = strike XOR (strike AND never touched)
                BarrierKind::KnockIn => vec![vec![(strike_ind, true)], all],
            };
            let cond = b.esop(products)?;
            let c = payoff(&b, "barrier".into(), last, cond, sign, 1.0, strike);
            configs.push(c);
        }
        InstrumentKind::Lookback => {
            let op = if call { BinaryOp::Max } else { BinaryOp::Min };
            let mut level = path.clone();
            while level.len() > 1 {
                let mut next = Vec::with_capacity(level.len().div_ceil(2));
                for pair in level.chunks(2) {
                    next.push(if pair.len() == 2 { b.op(op, pair[0], pair[1])? } else { pair[0] });
                }
                level = next;
            }
            let ext = level[0];
            let t = b.threshold(ext, spec.strike_ratio, call)?;
            let cond = b.esop(vec![vec![(t, true)]])?;
            let c = payoff(&b, "lookback".into(), ext, cond, sign, 1.0, strike);
            configs.push(c);
        }
        InstrumentKind::Autocallable => {
            let schedule = spec
                .autocall_schedule
                .clone()
                .unwrap_or_else(|| default_autocall_schedule(n));
            let barrier = spec.barrier_ratio.unwrap_or(0.9);
            let calls: Vec<usize> = schedule
                .iter()
                .map(|e| b.threshold(path[e.slice], e.level, true))
                .collect::<Result<_>>()?;
            let above: Vec<usize> = path
                .iter()
                .map(|&d| b.threshold(d, barrier, true))
                .collect::<Result<_>>()?;
            let below_strike = b.threshold(last, spec.strike_ratio, false)?;
            let mut legs = Vec::new();
            for (i, e) in schedule.iter().enumerate() {
                let mut term: Vec<Literal> = calls[..i].iter().map(|&c| (c, false)).collect();
                term.push((calls[i], true));
                legs.push((b.esop(vec![term])?, e.payout, i));
            }
            // no call, barrier breached, below strike
            let no_call: Vec<Literal> = calls.iter().map(|&c| (c, false)).collect();
            let mut t1 = no_call.clone();
            t1.push((below_strike, true));
            let mut t2 = t1.clone();
            t2.extend(above.iter().map(|&a| (a, true)));
            let put = b.esop(vec![t1, t2])?;
            for (ind, payout, i) in legs {
                let mut c = payoff(&b, format!("autocall_{i}"), path[schedule[i].slice], ind, 0.0, payout, strike);
                // coupons are fixed amounts in both payoff kinds
                c.quantity = QuantityKind::BernoulliQubit;
                c.x_star = None;
                c.weight = payout;
                c.support_window = None;
                configs.push(c);
            }
            configs.push(payoff(&b, "knock_in_put".into(), last, put, 1.0, -1.0, strike));
        }
    }
    Ok((b.dc, configs))
}
