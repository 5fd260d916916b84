use proptest::prelude::*;
use qmci::distloader::{discretized_normal, exact_pmf_loader, rescale, DistributionCircuit};
use qmci::fouriermc::*;
use qmci::pbuilder::{add_indicator, IndicatorSpec};
use qmci::qae::{QaeConfig, QaeKind};
use qmci::qcore::{marginal_pmf, simulate};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn loader(pmf: &[f64], x_l: f64, delta: f64) -> DistributionCircuit {
    rescale(&exact_pmf_loader(pmf).unwrap(), 0, x_l, delta).unwrap()
}

fn random_pmf(n: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let w: Vec<f64> = (0..1 << n).map(|_| rng.random::<f64>().powi(2)).collect();
    let s: f64 = w.iter().sum();
    w.into_iter().map(|x| x / s).collect()
}

fn gaussian_5q() -> DistributionCircuit {
    let delta = 1.0 / 31.0;
    loader(&discretized_normal(32, 0.0, 0.1, -0.5, delta), -0.5, delta)
}

fn exact_value(dc: &DistributionCircuit, spec: &QuantitySpec, ind: Option<usize>) -> f64 {
    let d = &dc.dims[0];
    let s = simulate(&dc.circuit, None).unwrap();
    let mut wires = d.qubits.clone();
    wires.extend(ind);
    let pmf = marginal_pmf(&s, &wires).unwrap();
    pmf.iter()
        .enumerate()
        .map(|(j, p)| {
            let (code, on) = if ind.is_some() { (j >> 1, j & 1 == 1) } else { (j, true) };
            let x = if on { d.value(code as u128) } else { spec.x_star.unwrap() };
            p * spec.g(x)
        })
        .sum()
}

#[test]
fn mean_series_reconstructs_identity() {
    let spec = quantity_series(QuantityKind::Mean, (-1.0, 1.0)).unwrap();
    for i in 0..=100 {
        let x = -1.0 + i as f64 * 0.02;
        assert!((spec.reconstruct(x).unwrap() - x).abs() < 5e-6, "x {x}");
    }
    let s = spec.series.as_ref().unwrap();
    assert!(s.a0 == 0.0 && s.a.iter().all(|&a| a == 0.0));
    assert!((s.omega - std::f64::consts::FRAC_PI_2).abs() < 1e-15);
    // leading sine coefficients are m^-3 with alternating sign pattern
    assert!(s.b[0] > 0.5 && s.b[2].abs() < s.b[0].abs());
}

#[test]
fn series_coefficients_match_independent_quadrature() {
    let s = quantity_series(QuantityKind::SecondMoment, (-1.0, 1.0)).unwrap();
    let s = s.series.unwrap();
    // composite Simpson over one period with 200k panels
    let f = |t: f64| if t <= 1.0 { t * t } else { 2.0 - (t - 2.0) * (t - 2.0) };
    let n = 200_000;
    let h = 4.0 / n as f64;
    for m in [1usize, 2, 7, 40] {
        let mut acc = 0.0;
        for i in 0..=n {
            let t = -1.0 + i as f64 * h;
            let w = if i == 0 || i == n { 1.0 } else if i % 2 == 1 { 4.0 } else { 2.0 };
            acc += w * f(t) * (m as f64 * s.omega * t).cos();
        }
        let am = acc * h / 3.0 * 2.0 / 4.0;
        assert!((am - s.a[m - 1]).abs() < 1e-10, "m {m}: {am} vs {}", s.a[m - 1]);
    }
}

#[test]
fn second_moment_is_even_and_exp_matches() {
    let spec = quantity_series(QuantityKind::SecondMoment, (-2.0, 1.5)).unwrap();
    for i in 0..=40 {
        let x = -2.0 + i as f64 * 0.1;
        let (a, b) = (spec.reconstruct(x).unwrap(), spec.reconstruct(-x).unwrap());
        assert!((a - b).abs() < 1e-12);
        assert!((a - x * x).abs() < 4e-5 * 4.0, "x {x}: {a}");
    }
    let e = quantity_series(QuantityKind::Exponential, (-0.5, 0.5)).unwrap();
    for i in 0..=50 {
        let x = -0.5 + i as f64 * 0.02;
        assert!((e.reconstruct(x).unwrap() - x.exp()).abs() < 2e-5);
    }
    assert!(e.c_f <= 2.0 * 2.59, "c_exp {}", e.c_f);
    let m = quantity_series(QuantityKind::Mean, (0.0, 3.0)).unwrap();
    assert!(m.c_f <= 2.0 * 1.68 && spec.c_f <= 2.0 * 2.82);
    assert_eq!(quantity_series(QuantityKind::BernoulliQubit, (0.0, 1.0)).unwrap().c_f, 1.0);
    assert!(quantity_series(QuantityKind::Mean, (1.0, 1.0)).is_err());
}

#[test]
fn x_star_defaults_and_window() {
    let c = quantity_series(QuantityKind::ConditionalExpectation, (-1.0, 2.0)).unwrap();
    assert_eq!(c.x_star, Some(0.0));
    let c = quantity_series(QuantityKind::ConditionalExpectation, (0.5, 2.0)).unwrap();
    assert_eq!(c.x_star, Some(0.5));
    let c = quantity_series(QuantityKind::ConditionalExponential, (-1.0, 2.0)).unwrap();
    assert_eq!(c.x_star, Some(-1.0));
    assert!(QuantitySpec::new(QuantityKind::ConditionalExpectation, (0.0, 1.0), None, Some(2.0)).is_err());
    let w = QuantitySpec::new(QuantityKind::Mean, (-5.0, 5.0), Some((-1.0, 1.0)), None).unwrap();
    assert_eq!(w.g_range(), 2.0);
    assert!(QuantitySpec::new(QuantityKind::Mean, (0.0, 1.0), Some((-1.0, 0.5)), None).is_err());
}

/// 1 - 2 P(1) of the simulated circuit against the classical trig sum.
fn check_circuit(dc: &DistributionCircuit, trig: Trig, m: usize, omega: f64, cond: Option<(usize, f64)>) {
    let a = build_a_circuit(dc, 0, trig, m, omega, cond.map(|c| c.0), cond.map(|c| c.1)).unwrap();
    let s = simulate(&a.circuit, None).unwrap();
    let lhs = 1.0 - 2.0 * s.prob_one(a.rotation_qubit);
    let d = &dc.dims[0];
    let mut wires = d.qubits.clone();
    if let Some((ind, _)) = cond {
        wires.push(ind);
    }
    let pmf = marginal_pmf(&simulate(&dc.circuit, None).unwrap(), &wires).unwrap();
    let rhs: f64 = pmf
        .iter()
        .enumerate()
        .map(|(j, p)| {
            let phi = match cond {
                Some((_, star)) if j & 1 == 0 => star,
                Some(_) => m as f64 * omega * d.value((j >> 1) as u128) - trig.beta(),
                None => m as f64 * omega * d.value(j as u128) - trig.beta(),
            };
            p * phi.cos()
        })
        .sum();
    assert!((lhs - rhs).abs() < 1e-10, "{trig:?} m {m}: {lhs} vs {rhs}");
}

#[test]
fn amplitude_encoding_exact_on_random_loaders() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for trial in 0..6 {
        let n = 2 + trial % 3;
        let dc = loader(&random_pmf(n, &mut rng), rng.random_range(-2.0..1.0), rng.random_range(0.05..0.7));
        let withind = add_indicator(&dc, &IndicatorSpec::lower(0, dc.dims[0].value(1))).unwrap();
        let ind = withind.indicators[0];
        for m in 1..=8 {
            for trig in [Trig::Cos, Trig::Sin] {
                let omega = rng.random_range(0.3..2.0);
                check_circuit(&dc, trig, m, omega, None);
                check_circuit(&withind, trig, m, omega, Some((ind, rng.random_range(-3.0..3.0))));
            }
        }
    }
}

#[test]
fn point_mass_examples() {
    // all mass on code 2 of a 2-qubit register: x0 = 0 with x_l = -1, delta 0.5
    let dc = loader(&[0.0, 0.0, 1.0, 0.0], -1.0, 0.5);
    let a = build_a_circuit(&dc, 0, Trig::Cos, 3, 1.7, None, None).unwrap();
    let p = simulate(&a.circuit, None).unwrap().prob_one(a.rotation_qubit);
    assert!(p.abs() < 1e-12);
    let a = build_a_circuit(&dc, 0, Trig::Sin, 3, 1.7, None, None).unwrap();
    let p = simulate(&a.circuit, None).unwrap().prob_one(a.rotation_qubit);
    assert!((1.0 - 2.0 * p).abs() < 1e-12);
    assert!(build_a_circuit(&dc, 0, Trig::Cos, 0, 1.0, None, None).is_err());
    assert!(build_a_circuit(&dc, 0, Trig::Cos, 1, 1.0, Some(0), Some(0.0)).is_err());
}

#[test]
fn plan_amplitudes_match_circuits() {
    let dc = gaussian_5q();
    let withind = add_indicator(&dc, &IndicatorSpec::lower(0, 0.0)).unwrap();
    let ind = withind.indicators[0];
    for kind in QuantityKind::ALL {
        let cond = (kind.is_conditional() || kind == QuantityKind::BernoulliQubit).then_some(ind);
        let spec = quantity_for_dim(&withind, kind, 0, None, None).unwrap();
        let plan = FourierPlan::new(&spec, 0, cond, QaeKind::Mlqae, Budget::Uses(2000)).unwrap();
        let amps = plan.exact_amplitudes(&withind).unwrap();
        let circs = plan.circuits(&withind).unwrap();
        assert_eq!(amps.len(), circs.len());
        for (a, c) in amps.iter().zip(&circs).take(6) {
            let p = simulate(&c.circuit, None).unwrap().prob_one(c.rotation_qubit);
            assert!((a - p).abs() < 1e-10, "{kind:?}");
        }
        // noiseless estimate is the truth up to the truncation tail
        let truth = if kind == QuantityKind::BernoulliQubit {
            simulate(&withind.circuit, None).unwrap().prob_one(ind)
        } else {
            exact_value(&withind, &spec, cond)
        };
        let err = (plan.noiseless_estimate(&amps) - truth).abs();
        assert!(err <= plan.tail * spec.norm.out_scale + 1e-12, "{kind:?}: {err}");
    }
}

#[test]
fn allocation_examples() {
    assert_eq!(allocate_uses(&[0.0, 0.3, 0.0], 50).unwrap(), vec![0, 50, 0]);
    assert_eq!(allocate_uses(&[0.2, -0.2], 100).unwrap(), vec![50, 50]);
    let q = allocate_uses(&[0.8, 0.1], 352).unwrap();
    let cost = |a: u64, b: u64| 0.64 / (a * a) as f64 + 0.01 / (b * b) as f64;
    let best = (1..352).map(|a| (a, cost(a, 352 - a))).min_by(|x, y| x.1.total_cmp(&y.1)).unwrap();
    assert_eq!(q, vec![best.0, 352 - best.0]);
    assert_eq!(q, vec![282, 70]);
    assert!(allocate_uses(&[0.1, 0.2, 0.3], 2).is_err());
    assert_eq!(allocate_uses(&[0.1, 0.2, 0.3], 3).unwrap(), vec![1, 1, 1]);
}

proptest! {
    #[test]
    fn allocation_is_optimal(c in prop::collection::vec(-1.0f64..1.0, 3), q in 3u64..120) {
        prop_assume!(c.iter().all(|x| x.abs() > 1e-3));
        let got = allocate_uses(&c, q).unwrap();
        prop_assert_eq!(got.iter().sum::<u64>(), q);
        let cost = |v: &[u64]| -> f64 { v.iter().zip(&c).map(|(&n, x)| x * x / (n * n) as f64).sum() };
        let mut best = f64::INFINITY;
        for a in 1..q {
            for b in 1..q - a {
                best = best.min(cost(&[a, b, q - a - b]));
            }
        }
        prop_assert!(cost(&got) <= best * (1.0 + 1e-12));
    }
}

#[test]
fn bound_formula() {
    let b = quantity_series(QuantityKind::BernoulliQubit, (0.0, 1.0)).unwrap();
    assert!((rmse_bound(&b, 0.5, 2, 100) - 0.005).abs() < 1e-15);
    assert!((rmse_bound(&b, 0.5, 1, 100) - 0.05).abs() < 1e-15);
    let m = quantity_series(QuantityKind::Mean, (0.0, 1.0)).unwrap();
    let r1 = rmse_bound(&m, 8.02, 2, 10_000);
    assert!((r1 - m.c_f * 8.02 / 1e4).abs() < 1e-15);
    assert!((rmse_bound(&m, 8.02, 2, 20_000) - r1 / 2.0).abs() < 1e-15);
    let s = quantity_series(QuantityKind::SecondMoment, (-3.0, 1.0)).unwrap();
    assert_eq!(s.g_range(), 9.0);
}

#[test]
fn target_rmse_budgets() {
    let dc = gaussian_5q();
    let spec = quantity_for_dim(&dc, QuantityKind::Mean, 0, None, None).unwrap();
    for r in [1e-2, 1e-3, 1e-4] {
        let plan = FourierPlan::new(&spec, 0, None, QaeKind::Mlqae, Budget::TargetRmse(r)).unwrap();
        assert!(plan.rmse_bound <= r);
        assert_eq!(plan.terms.iter().map(|t| t.q).sum::<u64>(), plan.q_total);
        // a few percent fewer uses would break the target
        let less = FourierPlan::new(&spec, 0, None, QaeKind::Mlqae, Budget::Uses(plan.q_total * 9 / 10)).unwrap();
        assert!(less.rmse_bound > r * 0.99, "r {r}");
        // the truncated-and-allocated bound never beats the all-harmonics formula by much
        assert!(plan.rmse_bound >= 0.5 * rmse_bound(&spec, 8.02, 2, plan.q_total));
    }
    assert!(FourierPlan::new(&spec, 0, None, QaeKind::Mlqae, Budget::TargetRmse(1e-12)).is_err());
}

#[test]
fn point_mass_estimate_within_bound() {
    let dc = loader(&[0.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0], -1.0, 0.25);
    let spec = quantity_for_dim(&dc, QuantityKind::Mean, 0, None, None).unwrap();
    for kind in [QaeKind::Pam, QaeKind::Mlqae, QaeKind::Iqae, QaeKind::Lcu] {
        let cfg = QaeConfig { posterior_grid: 20_000, ..QaeConfig::new(kind, 0, 9) };
        let r = qmci_estimate(&dc, &spec, 0, None, &cfg, Budget::Uses(3000)).unwrap();
        assert!((r.estimate - 0.25).abs() <= r.rmse_bound, "{kind:?}: {} +- {}", r.estimate, r.rmse_bound);
        assert!(r.uses_total <= 3000);
    }
}

#[test]
fn bernoulli_is_plain_qae() {
    // indicator with P(1) = sin^2(pi/8): two-point pmf on a 1-qubit register
    let p1 = (std::f64::consts::PI / 8.0).sin().powi(2);
    let dc = loader(&[1.0 - p1, p1], 0.0, 1.0);
    let dc = add_indicator(&dc, &IndicatorSpec::lower(0, 1.0)).unwrap();
    let ind = dc.indicators[0];
    let spec = quantity_for_dim(&dc, QuantityKind::BernoulliQubit, 0, None, None).unwrap();
    let q = 2000;
    let plan = FourierPlan::new(&spec, 0, Some(ind), QaeKind::Mlqae, Budget::Uses(q)).unwrap();
    let amps = plan.exact_amplitudes(&dc).unwrap();
    assert!((amps[0] - p1).abs() < 1e-12);
    let tmpl = QaeConfig { posterior_grid: 20_000, ..QaeConfig::new(QaeKind::Mlqae, 0, 0) };
    let se: f64 = (0..200)
        .map(|s| (plan.run(&amps, &tmpl, s).unwrap().estimate - p1).powi(2))
        .sum::<f64>()
        / 200.0;
    assert!(se.sqrt() <= 8.02 / q as f64);
}

#[test]
fn conditional_consistency() {
    let dc = gaussian_5q();
    let all = add_indicator(&dc, &IndicatorSpec::lower(0, -1.0)).unwrap();
    let none = add_indicator(&dc, &IndicatorSpec::lower(0, 9.0)).unwrap();
    for (cond, mean) in [
        (QuantityKind::ConditionalExpectation, QuantityKind::Mean),
        (QuantityKind::ConditionalExponential, QuantityKind::Exponential),
    ] {
        let cs = quantity_for_dim(&all, cond, 0, None, Some(0.1)).unwrap();
        let ms = quantity_for_dim(&all, mean, 0, None, None).unwrap();
        let cp = FourierPlan::new(&cs, 0, Some(all.indicators[0]), QaeKind::Mlqae, Budget::Uses(5000)).unwrap();
        let mp = FourierPlan::new(&ms, 0, None, QaeKind::Mlqae, Budget::Uses(5000)).unwrap();
        let a = cp.noiseless_estimate(&cp.exact_amplitudes(&all).unwrap());
        let b = mp.noiseless_estimate(&mp.exact_amplitudes(&all).unwrap());
        assert!((a - b).abs() < 1e-12);
        let np = FourierPlan::new(&cs, 0, Some(none.indicators[0]), QaeKind::Mlqae, Budget::Uses(5000)).unwrap();
        let v = np.noiseless_estimate(&np.exact_amplitudes(&none).unwrap());
        assert!((v - cs.g(0.1)).abs() <= np.tail * cs.norm.out_scale + 1e-12);
    }
    let spec = quantity_for_dim(&all, QuantityKind::ConditionalExpectation, 0, None, None).unwrap();
    assert!(FourierPlan::new(&spec, 0, None, QaeKind::Mlqae, Budget::Uses(100)).is_err());
}

#[test]
fn estimates_are_deterministic() {
    let dc = gaussian_5q();
    let spec = quantity_for_dim(&dc, QuantityKind::SecondMoment, 0, None, None).unwrap();
    let cfg = QaeConfig { posterior_grid: 10_000, ..QaeConfig::new(QaeKind::Lcu, 0, 4) };
    let a = qmci_estimate(&dc, &spec, 0, None, &cfg, Budget::Uses(4000)).unwrap();
    let b = qmci_estimate(&dc, &spec, 0, None, &cfg, Budget::Uses(4000)).unwrap();
    assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
    assert!(a.uses_expected_total.unwrap() >= a.uses_total as f64);
}
