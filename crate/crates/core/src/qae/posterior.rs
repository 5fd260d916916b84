//! Point-mass posterior over theta in [0, pi/2] with log-likelihood
//! accumulation. Grid points that fall far below the running maximum carry no
//! mass worth tracking and are dropped, which keeps late, sharply peaked
//! updates cheap.

use std::f64::consts::FRAC_PI_2;

/// Points more than this many nats below the maximum are discarded.
const PRUNE_NATS: f64 = 40.0;
const LN_FLOOR: f64 = -700.0;

#[derive(Clone, Debug)]
pub struct GridPosterior {
    theta: Vec<f64>,
    logp: Vec<f64>,
    spacing: f64,
}

fn ln_clamped(p: f64) -> f64 {
    if p > 0.0 {
        p.ln().max(LN_FLOOR)
    } else {
        LN_FLOOR
    }
}

impl GridPosterior {
    /// Uniform prior on `n` equally spaced points including both ends.
    pub fn uniform(n: usize) -> Self {
        let n = n.max(2);
        let spacing = FRAC_PI_2 / (n - 1) as f64;
        GridPosterior {
            theta: (0..n).map(|i| i as f64 * spacing).collect(),
            logp: vec![0.0; n],
            spacing,
        }
    }

    pub fn len(&self) -> usize {
        self.theta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.theta.is_empty()
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    /// Fold in `ones` successes and `zeros` failures of an outcome whose
    /// success probability at angle theta is `p1(theta)`.
    pub fn update(&mut self, ones: u64, zeros: u64, p1: impl Fn(f64) -> f64) {
        if ones == 0 && zeros == 0 {
            return;
        }
        let (h, z) = (ones as f64, zeros as f64);
        for (t, lp) in self.theta.iter().zip(self.logp.iter_mut()) {
            let p = p1(*t).clamp(0.0, 1.0);
            if ones > 0 {
                *lp += h * ln_clamped(p);
            }
            if zeros > 0 {
                *lp += z * ln_clamped(1.0 - p);
            }
        }
        self.prune();
    }

    /// Add an arbitrary log-likelihood evaluated at each surviving point.
    pub fn update_loglik(&mut self, loglik: impl Fn(f64) -> f64) {
        for (t, lp) in self.theta.iter().zip(self.logp.iter_mut()) {
            *lp += loglik(*t).max(LN_FLOOR * 4.0);
        }
        self.prune();
    }

    /// Add log-likelihoods computed for all surviving points at once;
    /// `loglik(thetas, out)` fills `out[i]` for `thetas[i]`.
    pub fn update_batch(&mut self, loglik: impl FnOnce(&[f64], &mut [f64])) {
        let mut out = vec![0.0; self.theta.len()];
        loglik(&self.theta, &mut out);
        for (lp, l) in self.logp.iter_mut().zip(&out) {
            *lp += l.max(LN_FLOOR * 4.0);
        }
        self.prune();
    }

    fn prune(&mut self) {
        let max = self.logp.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let cut = max - PRUNE_NATS;
        if self.logp.iter().all(|&l| l >= cut) {
            return;
        }
        let mut k = 0;
        for i in 0..self.theta.len() {
            if self.logp[i] >= cut {
                self.theta[k] = self.theta[i];
                self.logp[k] = self.logp[i] - max;
                k += 1;
            }
        }
        self.theta.truncate(k);
        self.logp.truncate(k);
    }

    /// Grid point of highest posterior (ties to the smallest theta).
    pub fn argmax(&self) -> f64 {
        let mut best = 0;
        for i in 1..self.logp.len() {
            if self.logp[i] > self.logp[best] {
                best = i;
            }
        }
        self.theta[best]
    }

    /// Posterior mean of sin^2(theta).
    pub fn mmse_amplitude(&self) -> f64 {
        let max = self.logp.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let (mut num, mut den) = (0.0, 0.0);
        for (t, lp) in self.theta.iter().zip(&self.logp) {
            let w = (lp - max).exp();
            num += w * t.sin().powi(2);
            den += w;
        }
        (num / den).clamp(0.0, 1.0)
    }
}

/// Golden-section maximisation of `f` on [lo, hi].
pub fn golden_max(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64, iters: usize) -> f64 {
    let r = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = hi - r * (hi - lo);
    let mut x2 = lo + r * (hi - lo);
    let (mut f1, mut f2) = (f(x1), f(x2));
    for _ in 0..iters {
        if f1 < f2 {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + r * (hi - lo);
            f2 = f(x2);
        } else {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - r * (hi - lo);
            f1 = f(x1);
        }
    }
    if f1 >= f2 {
        x1
    } else {
        x2
    }
}
