use proptest::prelude::*;
use qmci::qae::QaeKind;
use qmci::robustness::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

fn normals(n: usize, mean: f64, sd: f64, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d = Normal::new(mean, sd).unwrap();
    (0..n).map(|_| d.sample(&mut rng)).collect()
}

#[test]
fn stats_examples() {
    let s = estimator_stats(&[0.3; 6], 0.3).unwrap();
    assert_eq!((s.bias, s.mse), (0.0, 0.0));
    assert!(s.skewness.is_none() && s.kurtosis.is_none() && s.excess_kurtosis.is_none());

    let (t, d) = (0.4, 0.05);
    let s = estimator_stats(&[t - d, t + d, t - d, t + d], t).unwrap();
    assert!(s.bias.abs() < 1e-15);
    assert!((s.rmse - d).abs() < 1e-15);
    assert!(s.skewness.unwrap().abs() < 1e-12);
    // a two-point distribution has kurtosis exactly 1
    assert!((s.kurtosis.unwrap() - 1.0).abs() < 1e-12);

    let g = normals(1_000_000, 0.0, 1.0, 3);
    let s = estimator_stats(&g, 0.0).unwrap();
    assert!(s.excess_kurtosis.unwrap().abs() < 0.02);
    assert!(s.skewness.unwrap().abs() < 0.01);
    assert!((s.rmse - 1.0).abs() < 0.01);

    assert!(estimator_stats(&[1.0, 2.0, 3.0], 0.0).is_err());
    assert!(estimator_stats(&[1.0, 2.0, f64::NAN, 3.0], 0.0).is_err());
}

#[test]
fn stats_against_direct_formulas() {
    let x = [0.1, 0.4, 0.35, 0.9, 0.2, 0.25];
    let t = 0.3;
    let n = x.len() as f64;
    let m = x.iter().sum::<f64>() / n;
    let mu = |k: i32| x.iter().map(|v| (v - m).powi(k)).sum::<f64>() / n;
    let s = estimator_stats(&x, t).unwrap();
    assert!((s.bias - (m - t)).abs() < 1e-15);
    assert!((s.mse - x.iter().map(|v| (v - t).powi(2)).sum::<f64>() / n).abs() < 1e-15);
    assert!((s.skewness.unwrap() - mu(3) / mu(2).powf(1.5)).abs() < 1e-12);
    assert!((s.excess_kurtosis.unwrap() - (mu(4) / mu(2).powi(2) - 3.0)).abs() < 1e-12);
    assert!(s.mse >= s.bias * s.bias);
}

proptest! {
    #[test]
    fn stats_permutation_and_affine(
        xs in prop::collection::vec(-5.0f64..5.0, 4..40),
        t in -2.0f64..2.0,
        alpha in 0.1f64..10.0,
        beta in -3.0f64..3.0,
        rot in 0usize..40,
    ) {
        let s = estimator_stats(&xs, t).unwrap();
        let mut p = xs.clone();
        p.rotate_left(rot % xs.len());
        p.reverse();
        let sp = estimator_stats(&p, t).unwrap();
        prop_assert!((s.bias - sp.bias).abs() < 1e-12);
        prop_assert!((s.mse - sp.mse).abs() < 1e-10);

        let ys: Vec<f64> = xs.iter().map(|x| alpha * x + beta).collect();
        let sy = estimator_stats(&ys, alpha * t + beta).unwrap();
        prop_assert!((sy.bias - alpha * s.bias).abs() < 1e-9);
        prop_assert!((sy.mse - alpha * alpha * s.mse).abs() < 1e-8 * (1.0 + sy.mse));
        if let (Some(a), Some(b)) = (s.skewness, sy.skewness) {
            prop_assert!((a - b).abs() < 1e-8, "{} {}", a, b);
        }
        if let (Some(a), Some(b)) = (s.excess_kurtosis, sy.excess_kurtosis) {
            prop_assert!((a - b).abs() < 1e-8);
        }
    }
}

#[test]
fn bootstrap_examples() {
    let c = bootstrap_ci(&[2.5; 30], Statistic::Mean, 0.68, 200, 1).unwrap();
    assert_eq!(c, Some((2.5, 2.5)));
    assert_eq!(bootstrap_ci(&[2.5; 30], Statistic::Skewness, 0.68, 200, 1).unwrap(), None);
    assert!(bootstrap_ci(&[1.0, 2.0, 3.0, 4.0], Statistic::Mean, 0.68, 99, 1).is_err());
    assert!(bootstrap_ci(&[1.0, 2.0, 3.0, 4.0], Statistic::Mean, 1.0, 200, 1).is_err());

    // symmetric data, location statistic
    let g = normals(10_000, 1.0, 2.0, 11);
    let m = g.iter().sum::<f64>() / g.len() as f64;
    let (lo, hi) = bootstrap_ci(&g, Statistic::Mean, 0.68, 2000, 5).unwrap().unwrap();
    assert!(lo < m && m < hi);
    let asym = ((hi - m) - (m - lo)).abs();
    assert!(asym <= 0.1 * (hi - lo), "asymmetry {asym} width {}", hi - lo);
    // width ~ 2 sd / sqrt(n)
    assert!(((hi - lo) / (2.0 * 2.0 / 100.0) - 1.0).abs() < 0.1);

    assert_eq!(
        bootstrap_ci(&g, Statistic::Mean, 0.68, 500, 9).unwrap(),
        bootstrap_ci(&g, Statistic::Mean, 0.68, 500, 9).unwrap()
    );
}

#[test]
fn bootstrap_closure_matches_builtin() {
    let g = normals(200, 0.0, 1.0, 21);
    let a = bootstrap_ci(&g, Statistic::Mean, 0.9, 400, 2).unwrap().unwrap();
    let b = bootstrap_ci_with(&g, |x| x.iter().sum::<f64>() / x.len() as f64, 0.9, 400, 2).unwrap();
    // different resampling streams, same target
    assert!((a.0 - b.0).abs() < 0.03 && (a.1 - b.1).abs() < 0.03, "{a:?} {b:?}");
    let skew = |x: &[f64]| estimator_stats(x, 0.0).unwrap().skewness.unwrap_or(0.0);
    let s = bootstrap_ci_with(&g, skew, 0.68, 300, 4).unwrap();
    let t = skew(&g);
    assert!(s.0 <= t && t <= s.1);
}

#[test]
fn bootstrap_coverage() {
    let mut covered = 0;
    for d in 0..1000u64 {
        let g = normals(50, 0.0, 1.0, 100 + d);
        let (lo, hi) = bootstrap_ci(&g, Statistic::Mean, 0.68, 200, d).unwrap().unwrap();
        covered += (lo <= 0.0 && 0.0 <= hi) as u32;
    }
    let rate = covered as f64 / 1000.0;
    assert!((rate - 0.68).abs() <= 0.04, "coverage {rate}");
}

#[test]
fn bootstrap_shape_intervals_contain_estimate() {
    let g: Vec<f64> = normals(500, 0.0, 1.0, 8).iter().map(|x| x.exp()).collect();
    let s = estimator_stats(&g, 0.0).unwrap();
    let sk = bootstrap_ci(&g, Statistic::Skewness, 0.68, 500, 1).unwrap().unwrap();
    let ku = bootstrap_ci(&g, Statistic::ExcessKurtosis, 0.68, 500, 1).unwrap().unwrap();
    assert!(sk.0 <= s.skewness.unwrap() && s.skewness.unwrap() <= sk.1);
    assert!(ku.0 <= s.excess_kurtosis.unwrap() && s.excess_kurtosis.unwrap() <= ku.1);
    assert!(sk.0 > 0.0, "lognormal skew interval {sk:?}");
    let r = bootstrap_ci(&g, Statistic::Rmse(1.0), 0.68, 500, 1).unwrap().unwrap();
    let rmse1 = estimator_stats(&g, 1.0).unwrap().rmse;
    assert!(r.0 > 0.0 && r.0 <= rmse1 && rmse1 <= r.1);
}

#[test]
fn pam_sweep() {
    let grid: Vec<f64> = (0..9).map(|k| 0.02 + 0.12 * k as f64).collect();
    let rep = amplitude_sweep(QaeKind::Pam, &grid, &[100, 400], 200, 7).unwrap();
    assert_eq!(rep.points.len(), 18);
    assert_eq!(rep.lambda, 1);
    for f in &rep.fits {
        assert!(f.c_conservative <= 0.55, "{f:?}");
        let s = f.slope.unwrap();
        assert!((-0.9..=-0.1).contains(&s), "slope {s}");
    }
    let best = rep.fits.iter().max_by(|a, b| a.c_conservative.total_cmp(&b.c_conservative)).unwrap();
    assert!((best.amplitude - 0.5).abs() < 0.25);
    assert!(rep.c_min <= rep.c_median && rep.c_median <= rep.c_max);
    for p in &rep.points {
        assert!(p.bias_ci.0 <= p.stats.bias && p.stats.bias <= p.bias_ci.1);
        assert!(p.rmse_ci.0 <= p.stats.rmse && p.stats.rmse <= p.rmse_ci.1);
        if (p.amplitude - 0.5).abs() < 1e-12 {
            let se = (p.stats.mse - p.stats.bias.powi(2)).sqrt() / (200f64).sqrt();
            assert!(p.stats.bias.abs() <= 3.0 * se);
        }
    }
    let csv = rep.to_csv().unwrap();
    assert_eq!(csv.lines().count(), 1 + 18 * 6);
    assert!(csv.starts_with("amplitude,q,metric,value,ci_lo,ci_hi"));
    let back: SweepReport = serde_json::from_str(&rep.to_json().unwrap()).unwrap();
    assert_eq!(back, rep);
}

#[test]
fn sweep_determinism_and_validation() {
    let grid = [0.74, 0.26];
    let a = amplitude_sweep(QaeKind::Mlqae, &grid, &[300], 100, 3).unwrap();
    let b = amplitude_sweep(QaeKind::Mlqae, &grid, &[300], 100, 3).unwrap();
    assert_eq!(a.to_json().unwrap(), b.to_json().unwrap());
    assert_eq!(a.to_csv().unwrap(), b.to_csv().unwrap());
    // grid comes back sorted
    assert_eq!(a.config.amplitudes, vec![0.26, 0.74]);
    assert!(a.fits.iter().all(|f| f.slope.is_none()));
    assert!(amplitude_sweep(QaeKind::Pam, &grid, &[300], 99, 3).is_err());
    assert!(amplitude_sweep(QaeKind::Pam, &[0.0], &[300], 100, 3).is_err());
    assert!(amplitude_sweep(QaeKind::Pam, &grid, &[], 100, 3).is_err());
    let bad = r#"{"qae":"PAM","amplitudes":[0.5],"q_list":[10],"repeats":100,"seed":1,"extra":1}"#;
    assert!(serde_json::from_str::<SweepConfig>(bad).is_err());
}

#[test]
fn lcu_sweep_reports_expected_uses() {
    let rep = amplitude_sweep(QaeKind::Lcu, &[0.3], &[200], 100, 5).unwrap();
    let p = &rep.points[0];
    let e = p.mean_uses_expected.unwrap();
    assert!(e > 200.0 && e < 400.0, "{e}");
}
