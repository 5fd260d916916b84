//! Enhanced P-builder: reversible arithmetic and logic appended to a
//! distribution circuit.
//!
//! Each operation adds a new dimension register or indicator qubit and leaves
//! every existing register untouched, so marginals of the original dimensions
//! are preserved. Scratch wires (those owned by no register) are assumed
//! clean on entry and are returned clean.

mod arith;
mod instruments;
mod pseudocode;

use serde::{Deserialize, Serialize};

use crate::distloader::{Dimension, DistributionCircuit};
use crate::error::{QmciError, Result};
use crate::qcore::Gate;
use crate::util::bits_for;
use arith::{add_into, ge_const, ge_regs, load_const, mask, undo, Shifted, Work};

pub use instruments::{
    autocall_combine, build_instrument, default_autocall_schedule, AutocallEntry, BarrierKind,
    CallPut, InstrumentKind, InstrumentSpec, PayoffConfig, PayoffKind, SnappedThreshold, Space,
};
pub use pseudocode::{apply_pseudocode, BoundType, EsopSpec, PseudoOp, Threshold};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum BinaryOp {
    Sum,
    Product,
    Max,
    Min,
}

/// `left op right` or `left op constant`; dimension indices are 0-based.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BinaryOpSpec {
    pub op: BinaryOp,
    pub left: usize,
    #[serde(default)]
    pub right: Option<usize>,
    #[serde(default)]
    pub constant: Option<f64>,
}

impl BinaryOpSpec {
    pub fn dims(op: BinaryOp, left: usize, right: usize) -> Self {
        BinaryOpSpec { op, left, right: Some(right), constant: None }
    }

    pub fn constant(op: BinaryOp, left: usize, c: f64) -> Self {
        BinaryOpSpec { op, left, right: None, constant: Some(c) }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum IndicatorKind {
    /// x_i >= x_j on decoded values.
    Compare,
    /// x_i >= c.
    ThresholdLower,
    /// x_i < c.
    ThresholdUpper,
    Esop,
}

/// One literal of an ESOP term: (indicator index, polarity). Polarity false
/// means the negated indicator.
pub type Literal = (usize, bool);

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IndicatorSpec {
    pub kind: IndicatorKind,
    #[serde(default)]
    pub dims: Vec<usize>,
    #[serde(default)]
    pub value: Option<f64>,
    #[serde(default)]
    pub products: Vec<Vec<Literal>>,
}

impl IndicatorSpec {
    pub fn lower(dim: usize, c: f64) -> Self {
        IndicatorSpec { kind: IndicatorKind::ThresholdLower, dims: vec![dim], value: Some(c), products: vec![] }
    }

    pub fn upper(dim: usize, c: f64) -> Self {
        IndicatorSpec { kind: IndicatorKind::ThresholdUpper, dims: vec![dim], value: Some(c), products: vec![] }
    }

    pub fn compare(i: usize, j: usize) -> Self {
        IndicatorSpec { kind: IndicatorKind::Compare, dims: vec![i, j], value: None, products: vec![] }
    }

    pub fn esop(products: Vec<Vec<Literal>>) -> Self {
        IndicatorSpec { kind: IndicatorKind::Esop, dims: vec![], value: None, products }
    }
}

fn lsb(d: &Dimension) -> Vec<usize> {
    d.qubits.iter().rev().copied().collect()
}

fn as_int(x: f64) -> Option<i128> {
    let r = x.round();
    if (x - r).abs() <= 1e-9 * r.abs().max(1.0) && r.abs() < 1e30 {
        Some(r as i128)
    } else {
        None
    }
}

/// log2(big / small) when it is a non-negative integer.
fn pow2_shift(big: f64, small: f64) -> Result<usize> {
    let k = (big / small).log2();
    match as_int(k) {
        Some(s) if s >= 0 => Ok(s as usize),
        _ => Err(QmciError::invalid(format!(
            "grid spacings {big} and {small} are not related by a power of two"
        ))),
    }
}

/// Grid code of the nearest grid point to c, ties toward +infinity.
fn snap_code(d: &Dimension, c: f64) -> i128 {
    let u = (c - d.x_l) / d.delta;
    // guard against representation noise at exact half-steps
    (u + 0.5 + 1e-9).floor() as i128
}

/// The grid value a threshold constant is snapped to.
pub fn snap_threshold(d: &Dimension, c: f64) -> f64 {
    d.x_l + snap_code(d, c) as f64 * d.delta
}

fn new_dim(w: &mut Work, width: usize) -> Vec<usize> {
    w.take(width.max(1))
}

fn push_dim(w: &mut Work, reg_lsb: &[usize], x_l: f64, delta: f64) {
    w.dc.dims.push(Dimension {
        qubits: reg_lsb.iter().rev().copied().collect(),
        x_l,
        delta,
    });
}

fn check_width(width: usize) -> Result<()> {
    if width > 120 {
        return Err(QmciError::invalid(format!("result register of {width} qubits is too wide")));
    }
    Ok(())
}

/// Append a dimension holding `left op right` (or `left op constant`).
pub fn apply_binary_op(dc: &DistributionCircuit, spec: &BinaryOpSpec) -> Result<DistributionCircuit> {
    dc.validate()?;
    let mut out = dc.clone();
    let a = dc.dim(spec.left)?.clone();
    match (spec.right, spec.constant) {
        (Some(r), None) => {
            let b = dc.dim(r)?.clone();
            let mut w = Work::new(&mut out);
            match spec.op {
                BinaryOp::Sum => sum_dims(&mut w, &a, &b)?,
                BinaryOp::Max => extremum_dims(&mut w, &a, &b, true)?,
                BinaryOp::Min => extremum_dims(&mut w, &a, &b, false)?,
                BinaryOp::Product => product_dims(&mut w, &a, &b)?,
            }
        }
        (None, Some(c)) => {
            if !c.is_finite() {
                return Err(QmciError::invalid("constant operand must be finite"));
            }
            let mut w = Work::new(&mut out);
            match spec.op {
                BinaryOp::Sum => {
                    let reg = copy_dim(&mut w, &a, false);
                    push_dim(&mut w, &reg, a.x_l + c, a.delta);
                }
                BinaryOp::Product => scale_dim(&mut w, &a, c),
                BinaryOp::Max => extremum_const(&mut w, &a, c, true)?,
                BinaryOp::Min => extremum_const(&mut w, &a, c, false)?,
            }
        }
        _ => {
            return Err(QmciError::invalid(
                "binary op needs exactly one of a right dimension or a constant",
            ))
        }
    }
    Ok(out)
}

fn copy_dim(w: &mut Work, a: &Dimension, invert: bool) -> Vec<usize> {
    let src = lsb(a);
    let reg = new_dim(w, src.len());
    let mut g = Vec::new();
    for (s, t) in src.iter().zip(&reg) {
        g.push(Gate::cnot(*s, *t));
        if invert {
            g.push(Gate::x(*t));
        }
    }
    w.emit(g);
    reg
}

fn scale_dim(w: &mut Work, a: &Dimension, c: f64) {
    if c > 0.0 {
        let reg = copy_dim(w, a, false);
        push_dim(w, &reg, a.x_l * c, a.delta * c);
    } else if c < 0.0 {
        // reflect the code so the spacing stays positive
        let reg = copy_dim(w, a, true);
        push_dim(w, &reg, a.x_u() * c, a.delta * -c);
    } else {
        let reg = new_dim(w, 1);
        push_dim(w, &reg, 0.0, 1.0);
    }
}

fn sum_dims(w: &mut Work, a: &Dimension, b: &Dimension) -> Result<()> {
    let delta = a.delta.min(b.delta);
    let sa = pow2_shift(a.delta, delta)?;
    let sb = pow2_shift(b.delta, delta)?;
    let max = (mask(a.width()) << sa) + (mask(b.width()) << sb);
    let width = bits_for(max);
    check_width(width)?;
    let (la, lb) = (lsb(a), lsb(b));
    let reg = new_dim(w, width);
    let mut g = Vec::new();
    for (i, &q) in la.iter().enumerate() {
        g.push(Gate::cnot(q, reg[i + sa]));
    }
    add_into(w, &reg[sb..], &lb, &mut g);
    w.emit(g);
    push_dim(w, &reg, a.x_l + b.x_l, delta);
    Ok(())
}

/// Refine a common spacing until both offsets sit on one grid.
fn common_grid(a: &Dimension, b: &Dimension) -> Result<(f64, usize, usize)> {
    let mut delta = a.delta.min(b.delta);
    let mut sa = pow2_shift(a.delta, delta)?;
    let mut sb = pow2_shift(b.delta, delta)?;
    for _ in 0..40 {
        if as_int((a.x_l - b.x_l) / delta).is_some() {
            return Ok((delta, sa, sb));
        }
        delta /= 2.0;
        sa += 1;
        sb += 1;
    }
    Err(QmciError::invalid(format!(
        "grids starting at {} and {} cannot be aligned",
        a.x_l, b.x_l
    )))
}

fn extremum_dims(w: &mut Work, a: &Dimension, b: &Dimension, is_max: bool) -> Result<()> {
    let (delta, sa, sb) = common_grid(a, b)?;
    let pick = |u: f64, v: f64| if is_max { u.max(v) } else { u.min(v) };
    let x_l = pick(a.x_l, b.x_l);
    let x_u = pick(a.x_u(), b.x_u());
    let span = as_int((x_u - x_l) / delta).expect("aligned grid");
    let width = bits_for(span.max(0) as u128);
    check_width(width)?;
    let oa = as_int((a.x_l - x_l) / delta).expect("aligned grid");
    let ob = as_int((b.x_l - x_l) / delta).expect("aligned grid");
    let (la, lb) = (lsb(a), lsb(b));
    let ra = Shifted { bits: &la, shift: sa };
    let rb = Shifted { bits: &lb, shift: sb };
    let t = as_int((b.x_l - a.x_l) / delta).expect("aligned grid");
    // persistent wires first, so the comparator's borrowed scratch is
    // still free when its uncompute runs
    let reg = new_dim(w, width);
    let creg = w.take(width);
    let sel = w.take(1)[0];
    // sel = [a >= b] for max, [b >= a] for min
    let mut cmp = Vec::new();
    if is_max {
        ge_regs(w, &ra, &rb, t, sel, &mut cmp);
    } else {
        ge_regs(w, &rb, &ra, -t, sel, &mut cmp);
    }
    let md = mask(width);
    let modw = |v: i128| (v.rem_euclid(1i128 << width)) as u128 & md;
    let mut g = cmp.clone();
    let mut loads = Vec::new();
    // sel = 1 selects a, sel = 0 selects b
    load_const(&creg, modw(oa), Some(sel), &mut loads);
    loads.push(Gate::x(sel));
    load_const(&creg, modw(ob), Some(sel), &mut loads);
    loads.push(Gate::x(sel));
    for (i, &q) in la.iter().enumerate() {
        if i + sa < width {
            g.push(Gate::toffoli(sel, q, reg[i + sa]));
        }
    }
    g.push(Gate::x(sel));
    for (i, &q) in lb.iter().enumerate() {
        if i + sb < width {
            g.push(Gate::toffoli(sel, q, reg[i + sb]));
        }
    }
    g.push(Gate::x(sel));
    g.extend(loads.iter().cloned());
    add_into(w, &reg, &creg, &mut g);
    g.extend(loads);
    g.extend(undo(&cmp));
    w.give(&creg);
    w.give(&[sel]);
    w.emit(g);
    push_dim(w, &reg, x_l, delta);
    Ok(())
}

fn extremum_const(w: &mut Work, a: &Dimension, c: f64, is_max: bool) -> Result<()> {
    let kc = snap_code(a, c);
    let top = mask(a.width()) as i128;
    let (lo, hi) = if is_max { (kc.max(0), top.max(kc)) } else { (kc.min(0), top.min(kc)) };
    let width = bits_for((hi - lo) as u128);
    check_width(width)?;
    let la = lsb(a);
    let reg = new_dim(w, width);
    let creg = w.take(width);
    let sel = w.take(1)[0];
    // sel = 1 selects the register
    let mut cmp = Vec::new();
    if is_max {
        ge_const(w, &la, kc, sel, &mut cmp);
    } else {
        // a <= c  <=>  not (a >= c + 1)
        ge_const(w, &la, kc + 1, sel, &mut cmp);
        cmp.push(Gate::x(sel));
    }
    let md = mask(width);
    let modw = |v: i128| (v.rem_euclid(1i128 << width)) as u128 & md;
    let mut g = cmp.clone();
    for (i, &q) in la.iter().enumerate() {
        if i < width {
            g.push(Gate::toffoli(sel, q, reg[i]));
        }
    }
    let mut loads = Vec::new();
    load_const(&creg, modw(-lo), Some(sel), &mut loads);
    loads.push(Gate::x(sel));
    load_const(&reg, modw(kc - lo), Some(sel), &mut loads);
    loads.push(Gate::x(sel));
    // the constant branch writes its code straight into the output, so only
    // the register branch's offset lives in creg and needs unloading
    let mut unload = Vec::new();
    load_const(&creg, modw(-lo), Some(sel), &mut unload);
    g.extend(loads);
    add_into(w, &reg, &creg, &mut g);
    g.extend(unload);
    g.extend(undo(&cmp));
    w.give(&creg);
    w.give(&[sel]);
    w.emit(g);
    push_dim(w, &reg, a.x_l + lo as f64 * a.delta, a.delta);
    Ok(())
}

fn product_dims(w: &mut Work, a: &Dimension, b: &Dimension) -> Result<()> {
    let offset = |d: &Dimension| -> Result<i128> {
        match as_int(d.x_l / d.delta) {
            Some(u) if u >= 0 => Ok(u),
            _ => Err(QmciError::invalid(format!(
                "product needs x_l to be a non-negative multiple of delta (x_l = {}, delta = {})",
                d.x_l, d.delta
            ))),
        }
    };
    let (ua, ub) = (offset(a)?, offset(b)?);
    let max_a = ua as u128 + mask(a.width());
    let max_b = ub as u128 + mask(b.width());
    let width = bits_for(max_a.checked_mul(max_b).ok_or_else(|| QmciError::invalid("product too wide"))?);
    check_width(width)?;
    let reg = new_dim(w, width);
    let la_len = bits_for(max_a);
    let and = w.take(if ua == 0 { a.width() } else { la_len });
    // registers holding the absolute multiples u + k
    let mut prep = Vec::new();
    let mut temps = Vec::new();
    let mut absolute = |w: &mut Work, d: &Dimension, u: i128, max: u128, prep: &mut Vec<Gate>| -> Vec<usize> {
        let bits = lsb(d);
        if u == 0 {
            return bits;
        }
        let t = w.take(bits_for(max));
        for (s, q) in bits.iter().zip(&t) {
            prep.push(Gate::cnot(*s, *q));
        }
        arith::add_const(w, &t, u as u128, prep);
        temps.push(t.clone());
        t
    };
    let pa = absolute(w, a, ua, max_a, &mut prep);
    let pb = absolute(w, b, ub, max_b, &mut prep);
    let mut g = prep.clone();
    for (j, &bj) in pb.iter().enumerate() {
        if j >= width {
            break;
        }
        let mut part = Vec::new();
        for (i, &ai) in pa.iter().enumerate() {
            part.push(Gate::toffoli(bj, ai, and[i]));
        }
        g.extend(part.iter().cloned());
        add_into(w, &reg[j..], &and, &mut g);
        g.extend(part);
    }
    g.extend(undo(&prep));
    w.give(&and);
    for t in &temps {
        w.give(t);
    }
    w.emit(g);
    push_dim(w, &reg, 0.0, a.delta * b.delta);
    Ok(())
}

/// Append an indicator qubit; returns the circuit and, for thresholds, the
/// grid value the constant was snapped to.
pub fn add_indicator_snapped(
    dc: &DistributionCircuit,
    spec: &IndicatorSpec,
) -> Result<(DistributionCircuit, Option<f64>)> {
    dc.validate()?;
    if spec.kind == IndicatorKind::Esop {
        return Ok((add_esop(dc, &spec.products)?, None));
    }
    let mut out = dc.clone();
    let mut snapped = None;
    {
        let mut w = Work::new(&mut out);
        let flag = w.take(1)[0];
        let mut g = Vec::new();
        match spec.kind {
            IndicatorKind::ThresholdLower | IndicatorKind::ThresholdUpper => {
                if spec.dims.len() != 1 {
                    return Err(QmciError::invalid("threshold needs exactly one dimension"));
                }
                let c = spec
                    .value
                    .filter(|c| c.is_finite())
                    .ok_or_else(|| QmciError::invalid("threshold needs a finite value"))?;
                let d = dc.dim(spec.dims[0])?.clone();
                let k = snap_code(&d, c);
                snapped = Some(d.x_l + k as f64 * d.delta);
                ge_const(&mut w, &lsb(&d), k, flag, &mut g);
                if spec.kind == IndicatorKind::ThresholdUpper {
                    g.push(Gate::x(flag));
                }
            }
            IndicatorKind::Compare => {
                if spec.dims.len() != 2 {
                    return Err(QmciError::invalid("compare needs exactly two dimensions"));
                }
                let a = dc.dim(spec.dims[0])?.clone();
                let b = dc.dim(spec.dims[1])?.clone();
                let delta = a.delta.min(b.delta);
                let sa = pow2_shift(a.delta, delta)?;
                let sb = pow2_shift(b.delta, delta)?;
                // a >= b  <=>  ka 2^sa - kb 2^sb >= (x_lb - x_la) / delta
                let u = (b.x_l - a.x_l) / delta;
                let t = as_int(u).unwrap_or_else(|| u.ceil() as i128);
                let (la, lb) = (lsb(&a), lsb(&b));
                ge_regs(
                    &mut w,
                    &Shifted { bits: &la, shift: sa },
                    &Shifted { bits: &lb, shift: sb },
                    t,
                    flag,
                    &mut g,
                );
            }
            IndicatorKind::Esop => unreachable!(),
        }
        w.emit(g);
        w.dc.indicators.push(flag);
    }
    Ok((out, snapped))
}

pub fn add_indicator(dc: &DistributionCircuit, spec: &IndicatorSpec) -> Result<DistributionCircuit> {
    add_indicator_snapped(dc, spec).map(|r| r.0)
}

/// New indicator = XOR over terms of the AND of their literals.
pub fn add_esop(dc: &DistributionCircuit, products: &[Vec<Literal>]) -> Result<DistributionCircuit> {
    dc.validate()?;
    if products.is_empty() {
        return Err(QmciError::invalid("ESOP needs at least one product term"));
    }
    let mut out = dc.clone();
    let mut w = Work::new(&mut out);
    let flag = w.take(1)[0];
    let mut g = Vec::new();
    for term in products {
        if term.is_empty() {
            return Err(QmciError::invalid("ESOP product term is empty"));
        }
        let mut ctrls = Vec::with_capacity(term.len());
        let mut flips = Vec::new();
        for &(i, pol) in term {
            let q = dc.indicator(i)?;
            if ctrls.contains(&q) {
                return Err(QmciError::invalid(format!("indicator {i} repeated in one ESOP term")));
            }
            ctrls.push(q);
            if !pol {
                flips.push(Gate::x(q));
            }
        }
        g.extend(flips.iter().cloned());
        g.push(Gate::mcx(&ctrls, flag));
        g.extend(flips);
    }
    w.emit(g);
    w.dc.indicators.push(flag);
    Ok(out)
}

/// Running sums (or products) of the d base dimensions, appended as d new
/// dimensions: dimension d + k holds the path after k + 1 steps.
pub fn build_brownian(base: &DistributionCircuit, geometric: bool) -> Result<DistributionCircuit> {
    base.validate()?;
    let d = base.dims.len();
    if d == 0 {
        return Err(QmciError::invalid("base has no dimensions"));
    }
    let (op, unit) = if geometric { (BinaryOp::Product, 1.0) } else { (BinaryOp::Sum, 0.0) };
    let mut dc = apply_binary_op(base, &BinaryOpSpec::constant(op, 0, unit))?;
    for k in 1..d {
        dc = apply_binary_op(&dc, &BinaryOpSpec::dims(op, d + k - 1, k))?;
    }
    Ok(dc)
}

/// Classical value of register `dim` in a basis state given as wire bits.
pub fn decode(dc: &DistributionCircuit, dim: usize, bits: &[bool]) -> Result<f64> {
    let d = dc.dim(dim)?;
    let code = d.qubits.iter().fold(0u128, |acc, &q| (acc << 1) | bits[q] as u128);
    Ok(d.value(code))
}
