//! The instruction style of the P-builder front end: dimensions are 1-based
//! as printed, indicators 0-based in creation order.

use serde::{Deserialize, Serialize};

use super::{add_esop, add_indicator_snapped, apply_binary_op, BinaryOp, BinaryOpSpec, IndicatorSpec, Literal};
use crate::distloader::DistributionCircuit;
use crate::error::{QmciError, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum PseudoOp {
    Sum(usize, usize),
    Product(usize, usize),
    Max(usize, usize),
    Min(usize, usize),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum BoundType {
    Lower,
    Upper,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Threshold {
    pub dimension: usize,
    pub value: f64,
    #[serde(rename = "type")]
    pub bound: BoundType,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EsopSpec {
    pub products: Vec<Vec<Literal>>,
}

fn zero_based(d: usize) -> Result<usize> {
    d.checked_sub(1)
        .ok_or_else(|| QmciError::invalid("dimensions are numbered from 1"))
}

/// Apply operations, then thresholds, then the ESOP. Returns the enhanced
/// circuit and the snapped threshold values in order.
pub fn apply_pseudocode(
    dc: &DistributionCircuit,
    operations: &[PseudoOp],
    thresholds: &[Threshold],
    esop: Option<&EsopSpec>,
) -> Result<(DistributionCircuit, Vec<f64>)> {
    let mut out = dc.clone();
    for op in operations {
        let (kind, l, r) = match *op {
            PseudoOp::Sum(l, r) => (BinaryOp::Sum, l, r),
            PseudoOp::Product(l, r) => (BinaryOp::Product, l, r),
            PseudoOp::Max(l, r) => (BinaryOp::Max, l, r),
            PseudoOp::Min(l, r) => (BinaryOp::Min, l, r),
        };
        out = apply_binary_op(&out, &BinaryOpSpec::dims(kind, zero_based(l)?, zero_based(r)?))?;
    }
    let mut snapped = Vec::with_capacity(thresholds.len());
    for t in thresholds {
        let d = zero_based(t.dimension)?;
        let spec = match t.bound {
            BoundType::Lower => IndicatorSpec::lower(d, t.value),
            BoundType::Upper => IndicatorSpec::upper(d, t.value),
        };
        let (next, s) = add_indicator_snapped(&out, &spec)?;
        out = next;
        snapped.push(s.expect("thresholds snap"));
    }
    if let Some(e) = esop {
        out = add_esop(&out, &e.products)?;
    }
    Ok((out, snapped))
}
