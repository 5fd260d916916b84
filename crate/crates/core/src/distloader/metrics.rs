use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{QmciError, Result};

/// Distances between two pmfs. KL uses the natural log and may be infinite.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DivergenceReport {
    #[serde(serialize_with = "ser_maybe_inf", deserialize_with = "de_maybe_inf")]
    pub kl_pq: f64,
    #[serde(serialize_with = "ser_maybe_inf", deserialize_with = "de_maybe_inf")]
    pub kl_qp: f64,
    pub js: f64,
    pub tv: f64,
    pub infidelity: f64,
    pub l1: f64,
    pub l2: f64,
    pub linf: f64,
}

// JSON has no infinity literal
fn ser_maybe_inf<S: Serializer>(v: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
    if v.is_infinite() {
        s.serialize_str("inf")
    } else {
        s.serialize_f64(*v)
    }
}

fn de_maybe_inf<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<f64, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Num {
        F(f64),
        S(String),
    }
    match Num::deserialize(d)? {
        Num::F(v) => Ok(v),
        Num::S(s) if s == "inf" => Ok(f64::INFINITY),
        Num::S(s) => Err(serde::de::Error::custom(format!("expected a number or \"inf\", got {s:?}"))),
    }
}

fn kl(p: &[f64], q: &[f64]) -> f64 {
    let mut s = 0.0;
    for (&a, &b) in p.iter().zip(q) {
        if a > 0.0 {
            if b <= 0.0 {
                return f64::INFINITY;
            }
            s += a * (a / b).ln();
        }
    }
    s.max(0.0)
}

fn check_pmf(p: &[f64], name: &str) -> Result<()> {
    if p.iter().any(|&v| v < 0.0 || !v.is_finite()) {
        return Err(QmciError::invalid(format!("{name} has a negative or non-finite entry")));
    }
    let s: f64 = p.iter().sum();
    if (s - 1.0).abs() > 1e-9 {
        return Err(QmciError::invalid(format!("{name} sums to {s}, not 1")));
    }
    Ok(())
}

pub fn divergence_metrics(p: &[f64], q: &[f64]) -> Result<DivergenceReport> {
    if p.len() != q.len() {
        return Err(QmciError::Dimension(format!(
            "pmf lengths differ: {} vs {}",
            p.len(),
            q.len()
        )));
    }
    check_pmf(p, "p")?;
    check_pmf(q, "q")?;
    let m: Vec<f64> = p.iter().zip(q).map(|(a, b)| 0.5 * (a + b)).collect();
    let js = (0.5 * kl(p, &m) + 0.5 * kl(q, &m)).max(0.0);
    let mut l1 = 0.0;
    let mut l2 = 0.0;
    let mut linf: f64 = 0.0;
    let mut bc = 0.0;
    for (&a, &b) in p.iter().zip(q) {
        let d = (a - b).abs();
        l1 += d;
        l2 += d * d;
        linf = linf.max(d);
        bc += (a * b).sqrt();
    }
    Ok(DivergenceReport {
        kl_pq: kl(p, q),
        kl_qp: kl(q, p),
        js,
        tv: (0.5 * l1).min(1.0),
        infidelity: (1.0 - bc * bc).clamp(0.0, 1.0),
        l1,
        l2: l2.sqrt(),
        linf,
    })
}
