//! Iterative QAE with Chernoff-Hoeffding confidence intervals, wrapped by a
//! budget-to-(alpha, epsilon) optimiser.

use std::f64::consts::{FRAC_PI_2, PI};

use super::{binomial, pam_amplitude, rng_for, theta_of, QaeConfig, QaeKind, QaeResult};
use crate::error::{QmciError, Result};

/// Worst-case uses of A needed to reach half-width `eps` with failure
/// probability `alpha`.
pub fn iqae_use_bound(alpha: f64, eps: f64) -> f64 {
    let r = 1.0 - 2.0 * (PI / 14.0).sin();
    (100.0 / eps + 32.0 / (r * r)) * ((2.0 / alpha) * (PI / (4.0 * eps)).log2()).ln()
}

/// Worst-case mean squared error proxy for a run at (alpha, eps).
pub fn iqae_risk(alpha: f64, eps: f64) -> f64 {
    (1.0 - alpha) * eps * eps + alpha * FRAC_PI_2 * FRAC_PI_2
}

/// Smallest eps in (0, pi/8) with iqae_use_bound(alpha, eps) <= q, if any.
fn eps_for_budget(alpha: f64, q: f64) -> Option<f64> {
    let hi0 = PI / 8.0;
    if iqae_use_bound(alpha, hi0 * (1.0 - 1e-12)) > q {
        return None;
    }
    let (mut lo, mut hi) = (1e-12, hi0 * (1.0 - 1e-12));
    for _ in 0..200 {
        let mid = (lo * hi).sqrt();
        if iqae_use_bound(alpha, mid) > q {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi / lo - 1.0 < 1e-14 {
            break;
        }
    }
    Some(hi)
}

/// The (alpha, eps) pair minimising the risk subject to using at most `q`.
/// Returns `None` when no eps below pi/8 is affordable.
pub fn opt_ae(q: f64) -> Option<(f64, f64)> {
    let risk = |la: f64| {
        let a = 10f64.powf(la);
        eps_for_budget(a, q).map_or(f64::INFINITY, |e| iqae_risk(a, e))
    };
    // coarse scan over log10(alpha) in [-12, log10(0.5)]
    let n = 241;
    let (lmin, lmax) = (-12.0, 0.5f64.log10());
    let step = (lmax - lmin) / (n - 1) as f64;
    let mut best = (f64::INFINITY, lmin);
    for i in 0..n {
        let la = lmin + i as f64 * step;
        let r = risk(la);
        if r < best.0 {
            best = (r, la);
        }
    }
    if !best.0.is_finite() {
        return None;
    }
    let lo = (best.1 - step).max(lmin);
    let hi = (best.1 + step).min(lmax);
    let la = super::posterior::golden_max(|x| -risk(x), lo, hi, 60);
    let la = if risk(la) <= best.0 { la } else { best.1 };
    let alpha = 10f64.powf(la);
    eps_for_budget(alpha, q).map(|e| (alpha, e))
}

/// Next K = 4k + 2 for an interval [lo, hi] of theta: the largest K not
/// exceeding pi / width, at least twice `k_prev`'s, whose scaled interval
/// lies inside one half-plane. Returns (k, up) and keeps `(k_prev, up_prev)`
/// when no such K exists. `k_cap` bounds the returned power.
pub fn find_next_k(k_prev: u64, lo: f64, hi: f64, up_prev: bool, k_cap: u64) -> (u64, bool) {
    let k_i = 4 * k_prev + 2;
    let w = hi - lo;
    if w <= 0.0 {
        return (k_prev, up_prev);
    }
    let k_max = (PI / w).floor().min((4 * k_cap + 2) as f64);
    if k_max < 2.0 {
        return (k_prev, up_prev);
    }
    let k_max = k_max as u64;
    let mut k = k_max - (k_max - 2) % 4;
    while k >= 2 * k_i {
        let kl = k as f64 * lo;
        let ku = k as f64 * hi;
        let same_period = (kl / (2.0 * PI)).floor() == (ku / (2.0 * PI)).floor();
        let (ql, qu) = (kl.rem_euclid(2.0 * PI), ku.rem_euclid(2.0 * PI));
        if same_period && qu <= PI && ql <= PI {
            return ((k - 2) / 4, true);
        }
        if same_period && ql >= PI && qu >= PI {
            return ((k - 2) / 4, false);
        }
        if k < 4 {
            break;
        }
        k -= 4;
    }
    (k_prev, up_prev)
}

pub(super) fn iqae_amplitude(a: f64, cfg: &QaeConfig) -> Result<QaeResult> {
    let fallback = |why: String| -> Result<QaeResult> {
        let mut r = pam_amplitude(a, cfg.q, cfg.seed)?;
        r.fallback = Some(why);
        Ok(r)
    };
    if cfg.q < cfg.iqae_shots {
        return fallback(format!("budget {} below one IQAE round", cfg.q));
    }
    let Some((alpha, eps)) = opt_ae(cfg.q as f64) else {
        return fallback(format!("no feasible (alpha, eps) for budget {}", cfg.q));
    };
    if eps >= PI / 8.0 {
        return fallback(format!("eps {eps} too large for budget {}", cfg.q));
    }
    let theta = theta_of(a);
    let t_max = (PI / (8.0 * eps)).log2().ceil().max(1.0);
    let ln_term = (2.0 * t_max / alpha).ln();
    let mut rng = rng_for(cfg.seed);
    let (mut lo, mut hi) = (0.0f64, FRAC_PI_2);
    let (mut k, mut up) = (0u64, true);
    let (mut ones_acc, mut n_acc) = (0u64, 0u64);
    let mut rem = cfg.q;
    let mut sched: Vec<(u64, u64)> = Vec::new();
    loop {
        let cap = (rem.saturating_sub(1)) / 2;
        let (nk, nup) = find_next_k(k, lo, hi, up, cap);
        if nk != k {
            ones_acc = 0;
            n_acc = 0;
        }
        k = nk;
        up = nup;
        let cost = 2 * k + 1;
        let shots = cfg.iqae_shots.min(rem / cost);
        if shots == 0 {
            break;
        }
        rem -= shots * cost;
        let kk = (4 * k + 2) as f64;
        let p = (0.5 * kk * theta).sin().powi(2);
        let ones = binomial(&mut rng, shots, p);
        match sched.last_mut() {
            Some(last) if last.0 == k => last.1 += shots,
            _ => sched.push((k, shots)),
        }
        ones_acc += ones;
        n_acc += shots;
        let a_i = ones_acc as f64 / n_acc as f64;
        let e_a = (ln_term / (2.0 * n_acc as f64)).sqrt();
        let a_min = (a_i - e_a).max(0.0);
        let a_max = (a_i + e_a).min(1.0);
        let r = (kk * lo / (2.0 * PI)).floor();
        let (p_min, p_max) = if up {
            ((1.0 - 2.0 * a_min).acos(), (1.0 - 2.0 * a_max).acos())
        } else {
            (2.0 * PI - (1.0 - 2.0 * a_max).acos(), 2.0 * PI - (1.0 - 2.0 * a_min).acos())
        };
        let nlo = ((2.0 * PI * r + p_min) / kk).clamp(0.0, FRAC_PI_2);
        let nhi = ((2.0 * PI * r + p_max) / kk).clamp(0.0, FRAC_PI_2);
        // a failed confidence interval can leave the old one; keep the new
        // one unless it is inconsistent
        if nlo <= nhi {
            let (ilo, ihi) = (lo.max(nlo), hi.min(nhi));
            if ilo <= ihi {
                lo = ilo;
                hi = ihi;
            } else {
                lo = nlo;
                hi = nhi;
            }
        }
        if rem == 0 {
            break;
        }
    }
    let used = cfg.q - rem;
    if used == 0 {
        return Err(QmciError::Budget("IQAE consumed no uses".into()));
    }
    Ok(QaeResult {
        a_hat: 0.5 * (lo.sin().powi(2) + hi.sin().powi(2)),
        uses_successful: used,
        uses_expected_total: None,
        failed_preparations: None,
        lambda: 2,
        c_qae_reference: QaeKind::Iqae.c_qae_reference(),
        schedule: sched,
        fallback: None,
    })
}
