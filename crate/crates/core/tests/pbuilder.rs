use proptest::prelude::*;
use qmci::distloader::{exact_pmf_loader, Dimension, DistributionCircuit};
use qmci::pbuilder::*;
use qmci::qcore::{classical_eval, marginal_pmf, simulate, QuantumCircuit};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Registers with no loading gates, so every basis state can be fed in.
fn blank(dims: &[(usize, f64, f64)]) -> DistributionCircuit {
    let mut q = 0;
    let mut ds = Vec::new();
    for &(w, x_l, delta) in dims {
        ds.push(Dimension { qubits: (q..q + w).collect(), x_l, delta });
        q += w;
    }
    DistributionCircuit { circuit: QuantumCircuit::new(q), dims: ds, indicators: vec![] }
}

fn set_code(bits: &mut [bool], d: &Dimension, code: u64) {
    let w = d.qubits.len();
    for (i, &q) in d.qubits.iter().enumerate() {
        bits[q] = (code >> (w - 1 - i)) & 1 == 1;
    }
}

/// Run every input assignment through the enhanced circuit and hand the
/// resulting bits to `check`. Also verifies inputs are preserved and every
/// non-register wire returns to zero.
fn exhaust(base: &DistributionCircuit, out: &DistributionCircuit, mut check: impl FnMut(&[f64], &[bool])) {
    assert!(out.n_qubits() <= 40);
    let widths: Vec<usize> = base.dims.iter().map(|d| d.width()).collect();
    let total: usize = widths.iter().sum();
    assert!(total <= 12);
    let data = out.data_qubits();
    for x in 0..(1u64 << total) {
        let mut bits = vec![false; out.n_qubits()];
        let mut rest = x;
        let mut vals = Vec::new();
        for (d, &w) in base.dims.iter().zip(&widths) {
            let code = rest & ((1 << w) - 1);
            rest >>= w;
            set_code(&mut bits, d, code);
            vals.push(d.value(code as u128));
        }
        let before = bits.clone();
        classical_eval(&out.circuit, &mut bits).unwrap();
        for d in &base.dims {
            for &q in &d.qubits {
                assert_eq!(bits[q], before[q], "input register modified");
            }
        }
        for q in 0..out.n_qubits() {
            if data.binary_search(&q).is_err() {
                assert!(!bits[q], "scratch wire {q} left dirty");
            }
        }
        check(&vals, &bits);
    }
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-9 * (1.0 + a.abs().max(b.abs()))
}

#[test]
fn sum_exhaustive() {
    for dims in [
        vec![(3, 0.0, 1.0), (3, 0.0, 1.0)],
        vec![(4, -2.0, 0.5), (3, 1.0, 1.0)],
        vec![(2, 0.25, 0.25), (5, -3.0, 0.125)],
        vec![(1, 0.0, 1.0), (1, 0.0, 1.0)],
        vec![(6, 0.0, 1.0), (6, 0.0, 1.0)],
    ] {
        let base = blank(&dims);
        let out = apply_binary_op(&base, &BinaryOpSpec::dims(BinaryOp::Sum, 0, 1)).unwrap();
        exhaust(&base, &out, |v, bits| {
            let got = decode(&out, 2, bits).unwrap();
            assert!(close(got, v[0] + v[1]), "{} + {} gave {got}", v[0], v[1]);
        });
    }
}

#[test]
fn sum_support_of_two_single_qubits() {
    let base = blank(&[(1, 0.0, 1.0), (1, 0.0, 1.0)]);
    let out = apply_binary_op(&base, &BinaryOpSpec::dims(BinaryOp::Sum, 0, 1)).unwrap();
    assert_eq!(out.dims[2].width(), 2);
    assert_eq!((out.dims[2].x_l, out.dims[2].delta), (0.0, 1.0));
}

#[test]
fn max_min_exhaustive() {
    for dims in [
        vec![(3, 0.0, 1.0), (3, 0.0, 1.0)],
        vec![(3, -1.0, 0.5), (4, 0.0, 0.25)],
        vec![(4, 2.0, 1.0), (3, -3.0, 2.0)],
        vec![(2, 0.5, 1.0), (3, 0.0, 1.0)],
    ] {
        let base = blank(&dims);
        let mx = apply_binary_op(&base, &BinaryOpSpec::dims(BinaryOp::Max, 0, 1)).unwrap();
        exhaust(&base, &mx, |v, bits| {
            assert!(close(decode(&mx, 2, bits).unwrap(), v[0].max(v[1])), "max {v:?}");
        });
        let mn = apply_binary_op(&base, &BinaryOpSpec::dims(BinaryOp::Min, 0, 1)).unwrap();
        exhaust(&base, &mn, |v, bits| {
            assert!(close(decode(&mn, 2, bits).unwrap(), v[0].min(v[1])), "min {v:?}");
        });
    }
}

#[test]
fn product_exhaustive() {
    for dims in [
        vec![(3, 0.0, 1.0), (3, 0.0, 1.0)],
        vec![(3, 2.0, 1.0), (2, 0.5, 0.5)],
        vec![(4, 0.75, 0.25), (3, 3.0, 1.0)],
    ] {
        let base = blank(&dims);
        let out = apply_binary_op(&base, &BinaryOpSpec::dims(BinaryOp::Product, 0, 1)).unwrap();
        exhaust(&base, &out, |v, bits| {
            assert!(close(decode(&out, 2, bits).unwrap(), v[0] * v[1]), "prod {v:?}");
        });
    }
    let bad = blank(&[(2, -1.0, 1.0), (2, 0.0, 1.0)]);
    assert!(apply_binary_op(&bad, &BinaryOpSpec::dims(BinaryOp::Product, 0, 1)).is_err());
}

#[test]
fn constant_operands_exhaustive() {
    let base = blank(&[(4, -1.0, 0.5)]);
    for (op, c) in [
        (BinaryOp::Sum, 0.3),
        (BinaryOp::Product, 2.5),
        (BinaryOp::Product, -1.5),
        (BinaryOp::Product, 0.0),
        (BinaryOp::Max, 1.0),
        (BinaryOp::Max, -7.0),
        (BinaryOp::Max, 9.0),
        (BinaryOp::Min, 1.0),
        (BinaryOp::Min, 0.24),
        (BinaryOp::Min, -7.0),
    ] {
        let out = apply_binary_op(&base, &BinaryOpSpec::constant(op, 0, c)).unwrap();
        let snapped = snap_threshold(&base.dims[0], c);
        exhaust(&base, &out, |v, bits| {
            let want = match op {
                BinaryOp::Sum => v[0] + c,
                BinaryOp::Product => v[0] * c,
                BinaryOp::Max => v[0].max(snapped),
                BinaryOp::Min => v[0].min(snapped),
            };
            assert!(close(decode(&out, 1, bits).unwrap(), want), "{op:?} {c} on {}", v[0]);
        });
    }
}

#[test]
fn sum_with_misaligned_deltas_fails() {
    let base = blank(&[(2, 0.0, 1.0), (2, 0.0, 0.3)]);
    assert!(apply_binary_op(&base, &BinaryOpSpec::dims(BinaryOp::Sum, 0, 1)).is_err());
    assert!(apply_binary_op(&base, &BinaryOpSpec { op: BinaryOp::Sum, left: 0, right: Some(1), constant: Some(1.0) }).is_err());
}

#[test]
fn thresholds_exhaustive() {
    let base = blank(&[(4, -2.0, 0.25)]);
    for c in [-3.0, -2.0, -1.9, -1.125, -0.5, 0.0, 1.7, 1.75, 1.8, 5.0] {
        let s = snap_threshold(&base.dims[0], c);
        let lo = add_indicator(&base, &IndicatorSpec::lower(0, c)).unwrap();
        exhaust(&base, &lo, |v, bits| assert_eq!(bits[lo.indicators[0]], v[0] >= s, "x={} c={c}", v[0]));
        let up = add_indicator(&base, &IndicatorSpec::upper(0, c)).unwrap();
        exhaust(&base, &up, |v, bits| assert_eq!(bits[up.indicators[0]], v[0] < s, "x={} c={c}", v[0]));
    }
    // half-grid tie rounds up: -1.125 sits between -1.25 and -1.0
    assert_eq!(snap_threshold(&base.dims[0], -1.125), -1.0);
}

#[test]
fn compare_exhaustive() {
    for dims in [
        vec![(3, 0.0, 1.0), (3, 0.0, 1.0)],
        vec![(3, 0.3, 0.5), (4, 0.0, 0.25)],
        vec![(2, 5.0, 2.0), (4, 0.0, 1.0)],
        vec![(4, -1.0, 1.0), (2, 0.1, 4.0)],
    ] {
        let base = blank(&dims);
        let out = add_indicator(&base, &IndicatorSpec::compare(0, 1)).unwrap();
        exhaust(&base, &out, |v, bits| {
            assert_eq!(bits[out.indicators[0]], v[0] >= v[1] - 1e-12, "{v:?}");
        });
    }
}

#[test]
fn esop_exhaustive() {
    let base = blank(&[(3, 0.0, 1.0)]);
    let mut dc = base.clone();
    for c in [1.0, 3.0, 5.0, 7.0] {
        dc = add_indicator(&dc, &IndicatorSpec::lower(0, c)).unwrap();
    }
    let terms = vec![vec![(0, true), (1, false)], vec![(2, true), (3, true), (0, true)], vec![(3, false)]];
    let out = add_esop(&dc, &terms).unwrap();
    exhaust(&base, &out, |v, bits| {
        let ind: Vec<bool> = (0..4).map(|i| bits[out.indicators[i]]).collect();
        let want = (ind[0] && !ind[1]) ^ (ind[2] && ind[3] && ind[0]) ^ !ind[3];
        assert_eq!(bits[out.indicators[4]], want, "x={}", v[0]);
    });
    let taut = add_esop(&dc, &[vec![(0, true)], vec![(0, false)]]).unwrap();
    exhaust(&base, &taut, |_, bits| assert!(bits[taut.indicators[4]]));
    assert!(add_esop(&dc, &[]).is_err());
    assert!(add_esop(&dc, &[vec![]]).is_err());
    assert!(add_esop(&dc, &[vec![(9, true)]]).is_err());
}

#[test]
fn brownian_paths_exhaustive() {
    let base = blank(&[(3, -1.0, 0.5), (3, -1.0, 0.5), (3, -1.0, 0.5)]);
    let bm = build_brownian(&base, false).unwrap();
    assert_eq!(bm.dims.len(), 6);
    exhaust(&base, &bm, |v, bits| {
        let mut s = 0.0;
        for k in 0..3 {
            s += v[k];
            assert!(close(decode(&bm, 3 + k, bits).unwrap(), s));
        }
    });
    let pos = blank(&[(2, 1.0, 1.0), (2, 1.0, 1.0)]);
    let gbm = build_brownian(&pos, true).unwrap();
    exhaust(&pos, &gbm, |v, bits| {
        assert!(close(decode(&gbm, 2, bits).unwrap(), v[0]));
        assert!(close(decode(&gbm, 3, bits).unwrap(), v[0] * v[1]));
    });
}

#[test]
fn pseudocode_lookback_and_barrier() {
    // four 2-qubit slices; dims are 1-based in the instruction lists
    let base = blank(&[(2, 0.0, 1.0), (2, 0.0, 1.0), (2, 0.0, 1.0), (2, 0.0, 1.0)]);
    let (lb, snapped) = apply_pseudocode(
        &base,
        &[PseudoOp::Max(1, 2), PseudoOp::Max(3, 4), PseudoOp::Max(5, 6)],
        &[Threshold { dimension: 7, value: 1.0, bound: BoundType::Lower }],
        None,
    )
    .unwrap();
    assert_eq!(snapped, vec![1.0]);
    exhaust(&base, &lb, |v, bits| {
        let m = v.iter().cloned().fold(f64::MIN, f64::max);
        assert!(close(decode(&lb, 6, bits).unwrap(), m));
        assert_eq!(bits[lb.indicators[0]], m >= 1.0);
    });
    let json = r#"{"operations": [{"Sum": [4, 1]}, {"Sum": [5, 2]}, {"Sum": [6, 3]}],
                   "thresholds": [{"dimension": 4, "value": 2.5, "type": "Upper"},
                                  {"dimension": 7, "value": 3.0, "type": "Lower"}],
                   "esop": {"products": [[[0, true], [1, true]]]}}"#;
    #[derive(serde::Deserialize)]
    struct Prog {
        operations: Vec<PseudoOp>,
        thresholds: Vec<Threshold>,
        esop: EsopSpec,
    }
    let p: Prog = serde_json::from_str(json).unwrap();
    let (bar, _) = apply_pseudocode(&base, &p.operations, &p.thresholds, Some(&p.esop)).unwrap();
    exhaust(&base, &bar, |v, bits| {
        let path = [v[3], v[3] + v[0], v[3] + v[0] + v[1], v[3] + v[0] + v[1] + v[2]];
        for k in 0..4 {
            assert!(close(decode(&bar, 3 + k, bits).unwrap(), path[k]));
        }
        assert_eq!(bits[bar.indicators[2]], path[0] < 3.0 && path[3] >= 3.0);
    });
    assert!(apply_pseudocode(&base, &[PseudoOp::Sum(0, 1)], &[], None).is_err());
}

fn random_pmf(len: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let w: Vec<f64> = (0..len).map(|_| rng.random::<f64>() + 0.01).collect();
    let s: f64 = w.iter().sum();
    w.into_iter().map(|v| v / s).collect()
}

#[test]
fn distributional_laws_and_marginals() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let pa = random_pmf(8, &mut rng);
    let pb = random_pmf(4, &mut rng);
    let dc = exact_pmf_loader(&pa).unwrap().tensor(&exact_pmf_loader(&pb).unwrap()).unwrap();
    let sum = apply_binary_op(&dc, &BinaryOpSpec::dims(BinaryOp::Sum, 0, 1)).unwrap();
    let mx = apply_binary_op(&sum, &BinaryOpSpec::dims(BinaryOp::Max, 0, 1)).unwrap();
    let s = simulate(&mx.circuit, None).unwrap();
    for (d, p) in [(0, &pa), (1, &pb)] {
        let m = marginal_pmf(&s, &mx.dims[d].qubits).unwrap();
        for (x, y) in m.iter().zip(p.iter()) {
            assert!((x - y).abs() < 1e-10);
        }
    }
    let conv = marginal_pmf(&s, &mx.dims[2].qubits).unwrap();
    for (k, c) in conv.iter().enumerate() {
        let want: f64 = (0..8).filter(|i| k >= *i && k - i < 4).map(|i| pa[i] * pb[k - i]).sum();
        assert!((c - want).abs() < 1e-10, "k={k}");
    }
    let law = marginal_pmf(&s, &mx.dims[3].qubits).unwrap();
    for (k, c) in law.iter().enumerate() {
        let want: f64 = (0..8).flat_map(|i| (0..4).map(move |j| (i, j)))
            .filter(|&(i, j)| i.max(j) == k)
            .map(|(i, j)| pa[i] * pb[j])
            .sum();
        assert!((c - want).abs() < 1e-10, "k={k}");
    }
    // compare on i.i.d. dims: P = (1 + P(x_i = x_j)) / 2
    let iid = exact_pmf_loader(&pb).unwrap().replicate(2).unwrap();
    let cmp = add_indicator(&iid, &IndicatorSpec::compare(0, 1)).unwrap();
    let st = simulate(&cmp.circuit, None).unwrap();
    let tie: f64 = pb.iter().map(|p| p * p).sum();
    assert!((st.prob_one(cmp.indicators[0]) - (1.0 + tie) / 2.0).abs() < 1e-10);
}

#[test]
fn threshold_at_lower_edge_is_certain() {
    let dc = exact_pmf_loader(&[0.1, 0.2, 0.3, 0.4]).unwrap();
    let d = rescale_dim(&dc, -1.0, 0.5);
    let ind = add_indicator(&d, &IndicatorSpec::lower(0, -1.0)).unwrap();
    let s = simulate(&ind.circuit, None).unwrap();
    assert!((s.prob_one(ind.indicators[0]) - 1.0).abs() < 1e-12);
}

fn rescale_dim(dc: &DistributionCircuit, x_l: f64, delta: f64) -> DistributionCircuit {
    qmci::distloader::rescale(dc, 0, x_l, delta).unwrap()
}

fn instrument(kind: InstrumentKind, payoff: PayoffKind, n: usize) -> InstrumentSpec {
    InstrumentSpec {
        instrument: kind,
        space: Space::Return,
        n_slices: n,
        total_volatility: 0.1,
        call_or_put: CallPut::Call,
        strike_ratio: 1.05,
        barrier_ratio: Some(1.1),
        barrier_kind: Some(BarrierKind::KnockOut),
        autocall_schedule: None,
        payoff_kind: payoff,
        target_rmse: Some(1e-2),
        q_budget: None,
    }
}

#[test]
fn barrier_instrument_end_to_end() {
    // reduced: 2 slices of 2-qubit Gaussians, exact probabilities checked
    // against brute force over the joint pmf
    let pmf = qmci::distloader::discretized_normal(8, 0.0, 1.0, -1.75, 0.5);
    let base = rescale_dim(&exact_pmf_loader(&pmf).unwrap(), -1.75, 0.5);
    let spec = instrument(InstrumentKind::Barrier, PayoffKind::Binary, 2);
    let (dc, cfgs) = build_instrument(&base, &spec).unwrap();
    assert_eq!(cfgs.len(), 1);
    let cfg = &cfgs[0];
    assert_eq!(cfg.quantity, qmci::fouriermc::QuantityKind::BernoulliQubit);
    assert_eq!(cfg.thresholds.len(), 3);
    let s = simulate(&dc.circuit, None).unwrap();
    let p = s.prob_one(dc.indicators[cfg.condition.unwrap()]);
    let sd = 0.1 / 2f64.sqrt();
    let grid: Vec<f64> = (0..8).map(|k| (-1.75 + 0.5 * k as f64) * sd).collect();
    // each path register has its own grid, hence its own snapped barrier
    let (bar1, bar2, k) = (cfg.thresholds[0].snapped, cfg.thresholds[1].snapped, cfg.thresholds[2].snapped);
    let mut want = 0.0;
    for i in 0..8 {
        for j in 0..8 {
            // path: x1 then x1 + x0 (dimension 1 first, as in Sum(2, 1))
            let p1 = grid[j];
            let p2 = grid[j] + grid[i];
            if p1 < bar1 && p2 < bar2 && p2 >= k {
                want += pmf[i] * pmf[j];
            }
        }
    }
    assert!(want > 0.01);
    assert!((p - want).abs() < 1e-10, "{p} vs {want}");
    let v = build_instrument(&base, &instrument(InstrumentKind::Barrier, PayoffKind::Value, 2)).unwrap().1;
    assert_eq!(v[0].quantity, qmci::fouriermc::QuantityKind::ConditionalExponential);
    assert!((v[0].x_star.unwrap() - 1.05f64.ln()).abs() < 1e-15);
}

#[test]
fn instruments_build_at_benchmark_scale() {
    let g = qmci::distloader::standard_circuit(qmci::distloader::StandardCircuit::gaussian_unit_6q);
    for kind in [InstrumentKind::Barrier, InstrumentKind::Lookback, InstrumentKind::Autocallable] {
        let (v, cv) = build_instrument(&g, &instrument(kind, PayoffKind::Value, 4)).unwrap();
        let (b, cb) = build_instrument(&g, &instrument(kind, PayoffKind::Binary, 4)).unwrap();
        assert_eq!(v.n_qubits(), b.n_qubits());
        assert_eq!(cv.len(), cb.len());
        v.validate().unwrap();
    }
    let (ac, cfg) = build_instrument(&g, &instrument(InstrumentKind::Autocallable, PayoffKind::Binary, 4)).unwrap();
    // calls at slices 1 and 3, then the put leg
    assert_eq!(cfg.len(), 3);
    assert_eq!(cfg[0].weight, 0.05);
    assert_eq!(cfg[2].weight, -1.0);
    assert!(ac.indicators.len() >= 8);
    let total = autocall_combine(&cfg, &[0.5, 0.2, 0.1]).unwrap();
    assert!((total - (0.025 + 0.02 - 0.1)).abs() < 1e-12);
}

#[test]
fn vacuous_barrier_reduces_to_european() {
    let pmf = qmci::distloader::discretized_normal(8, 0.0, 1.0, -2.0, 4.0 / 7.0);
    let base = rescale_dim(&exact_pmf_loader(&pmf).unwrap(), -2.0, 4.0 / 7.0);
    let mut spec = instrument(InstrumentKind::Barrier, PayoffKind::Binary, 1);
    spec.barrier_ratio = Some(100.0);
    let (dc, cfg) = build_instrument(&base, &spec).unwrap();
    let s = simulate(&dc.circuit, None).unwrap();
    let p = s.prob_one(dc.indicators[cfg[0].condition.unwrap()]);
    let kk = cfg[0].thresholds[1].snapped;
    let grid = dc.dims[0].grid();
    let want: f64 = pmf.iter().zip(&grid).filter(|(_, x)| **x >= kk).map(|(p, _)| p).sum();
    assert!((p - want).abs() < 1e-10);
}

#[test]
fn invalid_specs() {
    let g = qmci::distloader::standard_circuit(qmci::distloader::StandardCircuit::gaussian_unit_6q);
    let mut s = instrument(InstrumentKind::Barrier, PayoffKind::Value, 0);
    assert!(build_instrument(&g, &s).is_err());
    s.n_slices = 4;
    s.total_volatility = -1.0;
    assert!(build_instrument(&g, &s).is_err());
    let mut a = instrument(InstrumentKind::Autocallable, PayoffKind::Value, 4);
    a.autocall_schedule = Some(vec![
        AutocallEntry { slice: 2, level: 1.0, payout: 0.1 },
        AutocallEntry { slice: 1, level: 1.0, payout: 0.1 },
    ]);
    assert!(build_instrument(&g, &a).is_err());
    let bad_json = r#"{"instrument": "Barrier", "space": "return", "n_slices": 4, "total_volatility": 0.1,
        "call_or_put": "call", "strike_ratio": 1.05, "payoff_kind": "value", "colour": 3}"#;
    assert!(serde_json::from_str::<InstrumentSpec>(bad_json).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 48, ..ProptestConfig::default() })]
    #[test]
    fn random_op_chains_are_exact(seed in 0u64..10_000) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let dims: Vec<(usize, f64, f64)> = (0..2)
            .map(|_| {
                let w = rng.random_range(1..4);
                let delta = [0.5, 1.0, 2.0][rng.random_range(0..3)];
                let x_l = delta * rng.random_range(0..3) as f64;
                (w, x_l, delta)
            })
            .collect();
        let base = blank(&dims);
        let op = [BinaryOp::Sum, BinaryOp::Product, BinaryOp::Max, BinaryOp::Min][rng.random_range(0..4)];
        let mut dc = apply_binary_op(&base, &BinaryOpSpec::dims(op, 0, 1)).unwrap();
        let c = rng.random_range(-1.0..6.0);
        dc = add_indicator(&dc, &IndicatorSpec::lower(2, c)).unwrap();
        let snapped = snap_threshold(&dc.dims[2], c);
        let f = |a: f64, b: f64| match op {
            BinaryOp::Sum => a + b,
            BinaryOp::Product => a * b,
            BinaryOp::Max => a.max(b),
            BinaryOp::Min => a.min(b),
        };
        exhaust(&base, &dc, |v, bits| {
            let r = f(v[0], v[1]);
            assert!(close(decode(&dc, 2, bits).unwrap(), r));
            assert_eq!(bits[dc.indicators[0]], r >= snapped - 1e-12);
        });
    }
}
