//! Estimator statistics, BCa bootstrap intervals and the amplitude-sweep
//! benchmark harness.
//!
//! Moments are population moments (divide by n) about the sample mean, while
//! bias and MSE are taken about the true value.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{QmciError, Result};
use crate::qae::{estimate_amplitude, QaeConfig, QaeKind, QaeProblem};
use crate::util::derive_seed;

/// Bias, spread and shape of a set of estimates of a known value.
///
/// Skewness and kurtosis are `None` when the samples have zero spread.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EstimatorStats {
    pub mean: f64,
    pub bias: f64,
    pub mse: f64,
    pub rmse: f64,
    pub skewness: Option<f64>,
    pub kurtosis: Option<f64>,
    pub excess_kurtosis: Option<f64>,
    pub n_samples: usize,
}

/// Shifted power sums; everything here is a function of these.
#[derive(Clone, Copy, Debug, Default)]
struct Sums {
    n: f64,
    s1: f64,
    s2: f64,
    s3: f64,
    s4: f64,
}

impl Sums {
    fn add(&mut self, d: f64, w: f64) {
        let d2 = d * d;
        self.n += w;
        self.s1 += w * d;
        self.s2 += w * d2;
        self.s3 += w * d2 * d;
        self.s4 += w * d2 * d2;
    }

    fn of(samples: &[f64], shift: f64) -> Self {
        let mut s = Sums::default();
        samples.iter().for_each(|&x| s.add(x - shift, 1.0));
        s
    }

    /// Mean offset and central moments mu2..mu4.
    fn central(&self) -> (f64, f64, f64, f64) {
        let m = self.s1 / self.n;
        let e2 = self.s2 / self.n;
        let e3 = self.s3 / self.n;
        let e4 = self.s4 / self.n;
        let mu2 = (e2 - m * m).max(0.0);
        let mu3 = e3 - 3.0 * m * e2 + 2.0 * m * m * m;
        let mu4 = e4 - 4.0 * m * e3 + 6.0 * m * m * e2 - 3.0 * m.powi(4);
        (m, mu2, mu3, mu4.max(0.0))
    }
}

/// Scale below which the spread counts as zero, relative to the data.
fn degenerate(mu2: f64, scale: f64) -> bool {
    mu2 <= (1e-14 * scale.max(f64::MIN_POSITIVE)).powi(2)
}

pub fn estimator_stats(samples: &[f64], true_value: f64) -> Result<EstimatorStats> {
    if samples.len() < 4 {
        return Err(QmciError::invalid(format!(
            "estimator statistics need at least 4 samples, got {}",
            samples.len()
        )));
    }
    if samples.iter().any(|x| !x.is_finite()) || !true_value.is_finite() {
        return Err(QmciError::invalid("non-finite sample"));
    }
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    // two-pass central moments for accuracy
    let (mut m2, mut m3, mut m4) = (0.0, 0.0, 0.0);
    for &x in samples {
        let d = x - mean;
        let d2 = d * d;
        m2 += d2;
        m3 += d2 * d;
        m4 += d2 * d2;
    }
    let (mu2, mu3, mu4) = (m2 / n, m3 / n, m4 / n);
    let mse = samples.iter().map(|x| (x - true_value).powi(2)).sum::<f64>() / n;
    let scale = samples.iter().fold(0.0f64, |a, x| a.max(x.abs()));
    let (skewness, kurtosis) = if degenerate(mu2, scale) {
        (None, None)
    } else {
        (Some(mu3 / mu2.powf(1.5)), Some(mu4 / (mu2 * mu2)))
    };
    Ok(EstimatorStats {
        mean,
        bias: mean - true_value,
        mse,
        rmse: mse.sqrt(),
        skewness,
        kurtosis,
        excess_kurtosis: kurtosis.map(|k| k - 3.0),
        n_samples: samples.len(),
    })
}

/// Statistic evaluated by [`bootstrap_ci`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Statistic {
    Mean,
    /// Mean minus the true value.
    Bias(f64),
    /// Root mean square deviation from the true value.
    Rmse(f64),
    Skewness,
    ExcessKurtosis,
}

impl Statistic {
    fn shift(&self, samples: &[f64]) -> f64 {
        match self {
            Statistic::Bias(t) | Statistic::Rmse(t) => *t,
            _ => samples.iter().sum::<f64>() / samples.len() as f64,
        }
    }

    /// Value from power sums about `shift`; None for shape statistics of
    /// degenerate data.
    fn from_sums(&self, s: &Sums, shift: f64, scale: f64) -> Option<f64> {
        let (m, mu2, mu3, mu4) = s.central();
        match self {
            Statistic::Mean => Some(shift + m),
            Statistic::Bias(_) => Some(m),
            Statistic::Rmse(_) => Some((s.s2 / s.n).max(0.0).sqrt()),
            Statistic::Skewness => (!degenerate(mu2, scale)).then(|| mu3 / mu2.powf(1.5)),
            Statistic::ExcessKurtosis => (!degenerate(mu2, scale)).then(|| mu4 / (mu2 * mu2) - 3.0),
        }
    }
}

fn std_normal() -> Normal {
    Normal::new(0.0, 1.0).expect("unit normal")
}

/// Type-7 quantile of sorted data.
fn quantile(sorted: &[f64], p: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * p.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// BCa interval from the point estimate, bootstrap replicates and
/// jackknife values.
fn bca(theta: f64, mut boot: Vec<f64>, jack: &[f64], level: f64) -> (f64, f64) {
    boot.sort_by(f64::total_cmp);
    let b = boot.len() as f64;
    if boot[0] == boot[boot.len() - 1] {
        return (theta.min(boot[0]), theta.max(boot[0]));
    }
    let norm = std_normal();
    let below = boot.iter().filter(|&&x| x < theta).count() as f64;
    let ties = boot.iter().filter(|&&x| x == theta).count() as f64;
    let p0 = ((below + 0.5 * ties) / b).clamp(0.5 / b, 1.0 - 0.5 / b);
    let z0 = norm.inverse_cdf(p0);
    let jm = jack.iter().sum::<f64>() / jack.len() as f64;
    let (mut num, mut den) = (0.0, 0.0);
    for &j in jack {
        let d = jm - j;
        num += d * d * d;
        den += d * d;
    }
    let acc = if den > 0.0 { num / (6.0 * den.powf(1.5)) } else { 0.0 };
    let adj = |z: f64| {
        let w = z0 + z;
        let t = z0 + w / (1.0 - acc * w);
        norm.cdf(if t.is_finite() { t } else { w })
    };
    let za = norm.inverse_cdf(0.5 * (1.0 - level));
    let lo = quantile(&boot, adj(za));
    let hi = quantile(&boot, adj(-za));
    // keep the point estimate inside (BCa can exclude it for tiny B)
    (lo.min(theta), hi.max(theta))
}

fn check_bootstrap_args(samples: &[f64], level: f64, n_resamples: usize) -> Result<()> {
    if !(level > 0.0 && level < 1.0) {
        return Err(QmciError::invalid(format!("confidence level {level} outside (0, 1)")));
    }
    if n_resamples < 100 {
        return Err(QmciError::invalid(format!("{n_resamples} resamples; need at least 100")));
    }
    if samples.len() < 4 {
        return Err(QmciError::invalid("bootstrap needs at least 4 samples"));
    }
    if samples.iter().any(|x| !x.is_finite()) {
        return Err(QmciError::invalid("non-finite sample"));
    }
    Ok(())
}

/// Bias-corrected and accelerated bootstrap interval.
///
/// Returns `Ok(None)` only for shape statistics of data with zero spread;
/// constant samples give a zero-width interval for the location ones.
pub fn bootstrap_ci(
    samples: &[f64],
    statistic: Statistic,
    level: f64,
    n_resamples: usize,
    seed: u64,
) -> Result<Option<(f64, f64)>> {
    check_bootstrap_args(samples, level, n_resamples)?;
    let shift = statistic.shift(samples);
    let scale = samples.iter().fold(0.0f64, |a, x| a.max(x.abs()));
    let full = Sums::of(samples, shift);
    let Some(theta) = statistic.from_sums(&full, shift, scale) else {
        return Ok(None);
    };
    if samples.iter().all(|&x| x == samples[0]) {
        return Ok(Some((theta, theta)));
    }
    let n = samples.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut boot = Vec::with_capacity(n_resamples);
    let mut counts = vec![0u32; n];
    for _ in 0..n_resamples {
        counts.iter_mut().for_each(|c| *c = 0);
        for _ in 0..n {
            counts[rng.random_range(0..n)] += 1;
        }
        let mut s = Sums::default();
        for (x, &c) in samples.iter().zip(&counts) {
            if c > 0 {
                s.add(x - shift, c as f64);
            }
        }
        // a degenerate resample has no shape; skip it
        if let Some(v) = statistic.from_sums(&s, shift, scale) {
            boot.push(v);
        }
    }
    if boot.len() < n_resamples / 2 {
        return Ok(Some((theta, theta)));
    }
    // leave-one-out values straight from the power sums
    let jack: Vec<f64> = samples
        .iter()
        .filter_map(|x| {
            let mut s = full;
            s.add(x - shift, -1.0);
            statistic.from_sums(&s, shift, scale)
        })
        .collect();
    Ok(Some(bca(theta, boot, &jack, level)))
}

/// [`bootstrap_ci`] for an arbitrary statistic. The jackknife costs
/// O(n) evaluations of `statistic`.
pub fn bootstrap_ci_with<F>(
    samples: &[f64],
    statistic: F,
    level: f64,
    n_resamples: usize,
    seed: u64,
) -> Result<(f64, f64)>
where
    F: Fn(&[f64]) -> f64,
{
    check_bootstrap_args(samples, level, n_resamples)?;
    let theta = statistic(samples);
    if samples.iter().all(|&x| x == samples[0]) {
        return Ok((theta, theta));
    }
    let n = samples.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut buf = vec![0.0; n];
    let boot: Vec<f64> = (0..n_resamples)
        .map(|_| {
            buf.iter_mut().for_each(|b| *b = samples[rng.random_range(0..n)]);
            statistic(&buf)
        })
        .collect();
    let mut jack = Vec::with_capacity(n);
    let mut loo = Vec::with_capacity(n - 1);
    for i in 0..n {
        loo.clear();
        loo.extend(samples.iter().enumerate().filter(|(j, _)| *j != i).map(|(_, x)| *x));
        jack.push(statistic(&loo));
    }
    Ok(bca(theta, boot, &jack, level))
}

fn default_level() -> f64 {
    0.68
}
fn default_resamples() -> usize {
    1000
}
fn default_p_max_fail() -> f64 {
    0.5
}
fn default_grid() -> usize {
    100_000
}

/// Everything an amplitude sweep depends on.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub qae: QaeKind,
    pub amplitudes: Vec<f64>,
    pub q_list: Vec<u64>,
    pub repeats: usize,
    pub seed: u64,
    #[serde(default = "default_level")]
    pub ci_level: f64,
    #[serde(default = "default_resamples")]
    pub n_resamples: usize,
    #[serde(default = "default_p_max_fail")]
    pub p_max_fail: f64,
    #[serde(default = "default_grid")]
    pub posterior_grid: usize,
}

impl SweepConfig {
    pub fn new(qae: QaeKind, amplitudes: Vec<f64>, q_list: Vec<u64>, repeats: usize, seed: u64) -> Self {
        SweepConfig {
            qae,
            amplitudes,
            q_list,
            repeats,
            seed,
            ci_level: default_level(),
            n_resamples: default_resamples(),
            p_max_fail: default_p_max_fail(),
            posterior_grid: default_grid(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.amplitudes.is_empty() || self.q_list.is_empty() {
            return Err(QmciError::invalid("empty amplitude grid or q list"));
        }
        if self.amplitudes.iter().any(|a| !(*a > 0.0 && *a < 1.0)) {
            return Err(QmciError::invalid("amplitudes must lie in (0, 1)"));
        }
        if self.repeats < 100 {
            return Err(QmciError::invalid(format!("{} repeats; need at least 100", self.repeats)));
        }
        if self.q_list.contains(&0) {
            return Err(QmciError::invalid("q must be positive"));
        }
        self.qae_config(1, 0).validate()?;
        check_bootstrap_args(&[0.0; 4], self.ci_level, self.n_resamples)
    }

    fn qae_config(&self, q: u64, seed: u64) -> QaeConfig {
        let mut c = QaeConfig::new(self.qae, q, seed);
        c.p_max_fail = self.p_max_fail;
        c.posterior_grid = self.posterior_grid;
        c
    }
}

/// Statistics and intervals at one (amplitude, q).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub amplitude: f64,
    pub q: u64,
    pub stats: EstimatorStats,
    pub bias_ci: (f64, f64),
    pub rmse_ci: (f64, f64),
    pub skewness_ci: Option<(f64, f64)>,
    pub excess_kurtosis_ci: Option<(f64, f64)>,
    /// rmse * q^(lambda/2)
    pub c: f64,
    /// Mean total uses including failed LCU preparations.
    pub mean_uses_expected: Option<f64>,
    pub fallbacks: usize,
}

/// Fitted constants at one amplitude.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AmplitudeFit {
    pub amplitude: f64,
    /// max over q of rmse * q^(lambda/2): the smallest upper-bounding line.
    pub c_conservative: f64,
    /// Least-squares intercept in log-log space with the slope fixed at
    /// -lambda/2.
    pub c_fit: f64,
    /// Free-slope least-squares exponent (needs two or more q values).
    pub slope: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub config: SweepConfig,
    pub lambda: u32,
    pub points: Vec<SweepPoint>,
    pub fits: Vec<AmplitudeFit>,
    pub c_max: f64,
    pub c_median: f64,
    pub c_min: f64,
}

pub fn amplitude_sweep(
    kind: QaeKind,
    grid: &[f64],
    q_list: &[u64],
    repeats: usize,
    seed: u64,
) -> Result<SweepReport> {
    amplitude_sweep_with(&SweepConfig::new(kind, grid.to_vec(), q_list.to_vec(), repeats, seed))
}

/// Runs the estimator on the two-qubit benchmark circuit at each amplitude.
pub fn amplitude_sweep_with(cfg: &SweepConfig) -> Result<SweepReport> {
    cfg.validate()?;
    let mut amplitudes = cfg.amplitudes.clone();
    amplitudes.sort_by(f64::total_cmp);
    amplitudes.dedup();
    let mut q_list = cfg.q_list.clone();
    q_list.sort_unstable();
    q_list.dedup();
    let cfg = SweepConfig { amplitudes, q_list, ..cfg.clone() };
    let lambda = cfg.qae.lambda() as u32;
    let exact: Vec<f64> = cfg
        .amplitudes
        .iter()
        .map(|&a| QaeProblem::benchmark(a.sqrt().asin()).amplitude())
        .collect::<Result<_>>()?;
    let jobs: Vec<(usize, usize)> = (0..cfg.amplitudes.len())
        .flat_map(|i| (0..cfg.q_list.len()).map(move |j| (i, j)))
        .collect();
    let points = jobs
        .par_iter()
        .map(|&(i, j)| sweep_point(&cfg, i, j, exact[i], lambda))
        .collect::<Result<Vec<_>>>()?;
    let fits: Vec<AmplitudeFit> = cfg
        .amplitudes
        .iter()
        .enumerate()
        .map(|(i, &a)| fit(a, &points[i * cfg.q_list.len()..(i + 1) * cfg.q_list.len()], lambda))
        .collect();
    let mut cs: Vec<f64> = fits.iter().map(|f| f.c_conservative).collect();
    cs.sort_by(f64::total_cmp);
    let c_median = if cs.len() % 2 == 1 {
        cs[cs.len() / 2]
    } else {
        0.5 * (cs[cs.len() / 2 - 1] + cs[cs.len() / 2])
    };
    Ok(SweepReport {
        lambda,
        c_max: cs[cs.len() - 1],
        c_min: cs[0],
        c_median,
        points,
        fits,
        config: cfg,
    })
}

fn sweep_point(cfg: &SweepConfig, i: usize, j: usize, truth: f64, lambda: u32) -> Result<SweepPoint> {
    let q = cfg.q_list[j];
    let job_seed = derive_seed(cfg.seed, &[i as u64, q]);
    let mut est = Vec::with_capacity(cfg.repeats);
    let mut expected = 0.0;
    let mut any_expected = false;
    let mut fallbacks = 0;
    for r in 0..cfg.repeats {
        let res = estimate_amplitude(truth, &cfg.qae_config(q, derive_seed(job_seed, &[r as u64])))?;
        est.push(res.a_hat);
        if let Some(x) = res.uses_expected_total {
            expected += x;
            any_expected = true;
        }
        fallbacks += res.fallback.is_some() as usize;
    }
    let stats = estimator_stats(&est, truth)?;
    let ci = |s: Statistic, k: u64| {
        bootstrap_ci(&est, s, cfg.ci_level, cfg.n_resamples, derive_seed(job_seed, &[u64::MAX, k]))
    };
    let bias_ci = ci(Statistic::Bias(truth), 0)?.expect("location statistic");
    let rmse_ci = ci(Statistic::Rmse(truth), 1)?.expect("location statistic");
    Ok(SweepPoint {
        amplitude: cfg.amplitudes[i],
        q,
        c: stats.rmse * (q as f64).powf(lambda as f64 / 2.0),
        skewness_ci: ci(Statistic::Skewness, 2)?,
        excess_kurtosis_ci: ci(Statistic::ExcessKurtosis, 3)?,
        stats,
        bias_ci,
        rmse_ci,
        mean_uses_expected: any_expected.then(|| expected / cfg.repeats as f64),
        fallbacks,
    })
}

fn fit(amplitude: f64, pts: &[SweepPoint], lambda: u32) -> AmplitudeFit {
    let half = lambda as f64 / 2.0;
    let c_conservative = pts.iter().map(|p| p.c).fold(0.0, f64::max);
    let usable: Vec<(f64, f64)> = pts
        .iter()
        .filter(|p| p.stats.rmse > 0.0)
        .map(|p| ((p.q as f64).ln(), p.stats.rmse.ln()))
        .collect();
    let c_fit = if usable.is_empty() {
        0.0
    } else {
        (usable.iter().map(|(x, y)| y + half * x).sum::<f64>() / usable.len() as f64).exp()
    };
    let slope = (usable.len() >= 2).then(|| {
        let n = usable.len() as f64;
        let mx = usable.iter().map(|p| p.0).sum::<f64>() / n;
        let my = usable.iter().map(|p| p.1).sum::<f64>() / n;
        let sxy: f64 = usable.iter().map(|(x, y)| (x - mx) * (y - my)).sum();
        let sxx: f64 = usable.iter().map(|(x, _)| (x - mx).powi(2)).sum();
        sxy / sxx
    });
    AmplitudeFit { amplitude, c_conservative, c_fit, slope }
}

impl SweepReport {
    /// One row per amplitude, q and metric.
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let io = |e: csv::Error| QmciError::Io(e.to_string());
        w.write_record(["amplitude", "q", "metric", "value", "ci_lo", "ci_hi"]).map_err(io)?;
        let fmt = |x: f64| format!("{x:e}");
        let opt = |x: Option<f64>| x.map(fmt).unwrap_or_default();
        for p in &self.points {
            let s = &p.stats;
            let ci = |c: Option<(f64, f64)>| (opt(c.map(|c| c.0)), opt(c.map(|c| c.1)));
            let rows: [(&str, String, (String, String)); 6] = [
                ("bias", fmt(s.bias), ci(Some(p.bias_ci))),
                ("mse", fmt(s.mse), (String::new(), String::new())),
                ("rmse", fmt(s.rmse), ci(Some(p.rmse_ci))),
                ("skewness", opt(s.skewness), ci(p.skewness_ci)),
                ("excess_kurtosis", opt(s.excess_kurtosis), ci(p.excess_kurtosis_ci)),
                ("c", fmt(p.c), (String::new(), String::new())),
            ];
            for (name, value, (lo, hi)) in rows {
                w.write_record([fmt(p.amplitude), p.q.to_string(), name.into(), value, lo, hi])
                    .map_err(io)?;
            }
        }
        let bytes = w.into_inner().map_err(|e| QmciError::Io(e.to_string()))?;
        String::from_utf8(bytes).map_err(|e| QmciError::Io(e.to_string()))
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| QmciError::Numeric(e.to_string()))
    }
}
