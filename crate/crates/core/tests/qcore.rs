use proptest::prelude::*;
use qmci::qcore::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;

fn random_full_circuit(n: usize, len: usize, seed: u64) -> QuantumCircuit {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut c = QuantumCircuit::new(n);
    for _ in 0..len {
        let mut qs: Vec<usize> = (0..n).collect();
        for i in (1..n).rev() {
            let j = rng.random_range(0..=i);
            qs.swap(i, j);
        }
        let a: f64 = rng.random_range(-PI..PI);
        let g = match rng.random_range(0..15) {
            0 => Gate::x(qs[0]),
            1 => Gate::h(qs[0]),
            2 => Gate::s(qs[0]),
            3 => Gate::t(qs[0]),
            4 => Gate::tdg(qs[0]),
            5 => Gate::cnot(qs[0], qs[1]),
            6 => Gate::toffoli(qs[0], qs[1], qs[2]),
            7 => Gate::ry(a, qs[0]),
            8 => Gate::rx(a, qs[0]),
            9 => Gate::rz(a, qs[0]),
            10 => Gate::cry(a, qs[0], qs[1]),
            11 => Gate::crx(a, qs[0], qs[1]),
            12 => Gate::crz(a, qs[0], qs[1]),
            13 => Gate::tk1(a, 0.7 * a + 0.3, -a, qs[0]),
            _ => Gate::mcx(&qs[..n - 1], qs[n - 1]),
        };
        c.push(g);
    }
    c
}

fn random_state(n: usize, seed: u64) -> StateVector {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let v: Vec<num_complex::Complex64> = (0..1usize << n)
        .map(|_| num_complex::Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
        .collect();
    let norm: f64 = v.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
    StateVector::from_amplitudes(v.into_iter().map(|a| a / norm).collect()).unwrap()
}

/// Compare a compiled circuit (possibly with extra clean ancillas appended)
/// against the original on a random input state.
fn assert_equivalent(orig: &QuantumCircuit, compiled: &QuantumCircuit, seed: u64) {
    let init = random_state(orig.n_qubits, seed);
    let a = simulate(orig, Some(&init)).unwrap();
    let extra = compiled.n_qubits - orig.n_qubits;
    let b = simulate(compiled, Some(&init.extended(extra))).unwrap();
    let f = a.extended(extra).fidelity(&b);
    assert!(f > 1.0 - 1e-10, "fidelity {f}");
}

#[test]
fn rebase_preserves_random_circuits() {
    for seed in 0..40 {
        let c = random_full_circuit(4, 30, seed);
        let r = rebase_tk1_cnot(&c).unwrap();
        assert!(r.gates.iter().all(|g| matches!(g.kind, GateKind::TK1 | GateKind::CNOT)));
        assert_equivalent(&c, &r, seed + 1000);
        let counts = count_nisq(&r).unwrap();
        assert_eq!(counts.total_gates, counts.cnot_count + counts.tk1_count);
        assert!(counts.cnot_depth <= counts.cnot_count && counts.tk1_depth <= counts.tk1_count);
    }
}

#[test]
fn lowering_preserves_random_circuits() {
    for seed in 0..40 {
        let c = random_full_circuit(5, 25, seed);
        let l = lower_to_rotations_clifford_t(&c).unwrap();
        assert!(l.gates.iter().all(|g| matches!(
            g.kind,
            GateKind::CNOT
                | GateKind::H
                | GateKind::S
                | GateKind::T
                | GateKind::Tdg
                | GateKind::Rx
                | GateKind::Ry
                | GateKind::Rz
        )));
        assert_equivalent(&c, &l, seed + 77);
    }
}

#[test]
fn controlled_rotation_lowers_to_six_rotations() {
    for g in [Gate::cry(0.7, 0, 1), Gate::crx(-1.1, 1, 0), Gate::crz(2.3, 0, 1)] {
        let mut c = QuantumCircuit::new(2);
        c.push(g);
        let l = lower_to_rotations_clifford_t(&c).unwrap();
        let rot = l.gates.iter().filter(|g| g.kind.is_rotation()).count();
        assert_eq!(rot, 6);
        assert_equivalent(&c, &l, 5);
    }
}

#[test]
fn toffoli_lowering_has_seven_t() {
    let mut c = QuantumCircuit::new(3);
    c.push(Gate::toffoli(0, 1, 2));
    let l = lower_to_rotations_clifford_t(&c).unwrap();
    let t = l.gates.iter().filter(|g| matches!(g.kind, GateKind::T | GateKind::Tdg)).count();
    assert_eq!(t, 7);
    for input in 0..8 {
        let s = simulate(&l, Some(&StateVector::basis(3, input))).unwrap();
        let expect = if input & 6 == 6 { input ^ 1 } else { input };
        assert!((s.amplitudes()[expect].norm_sqr() - 1.0).abs() < 1e-12);
    }
}

#[test]
fn single_ry_is_one_tk1_and_unchanged_by_lowering() {
    let mut c = QuantumCircuit::new(1);
    c.push(Gate::ry(0.4, 0));
    let r = rebase_tk1_cnot(&c).unwrap();
    assert_eq!(r.gates.len(), 1);
    assert_eq!(r.gates[0].kind, GateKind::TK1);
    assert_equivalent(&c, &r, 3);
    assert_eq!(lower_to_rotations_clifford_t(&c).unwrap().gates, c.gates);
}

#[test]
fn mcx_vchain_toffoli_count() {
    for k in 3..7 {
        let ctrls: Vec<usize> = (0..k).collect();
        let seq = vchain_toffolis(&ctrls, k, k + 1);
        assert_eq!(seq.len(), 2 * (k - 2) + 1);
        let mut c = QuantumCircuit::new(k + 1);
        c.push(Gate::mcx(&ctrls, k));
        let r = rebase_tk1_cnot(&c).unwrap();
        assert_eq!(r.n_qubits, k + 1 + k - 2);
        assert_equivalent(&c, &r, k as u64);
    }
}

#[test]
fn counts_of_parallel_and_empty() {
    assert_eq!(count_nisq(&QuantumCircuit::new(0)).unwrap(), NisqCounts::default());
    let mut c = QuantumCircuit::new(4);
    c.push(Gate::cnot(0, 1));
    c.push(Gate::cnot(2, 3));
    let k = count_nisq(&c).unwrap();
    assert_eq!((k.cnot_count, k.cnot_depth, k.total_depth), (2, 1, 1));
    let mut bad = QuantumCircuit::new(2);
    bad.push(Gate::h(0));
    assert!(count_nisq(&bad).is_err());
}

#[test]
fn controlled_circuits_are_exact() {
    for seed in 0..20 {
        // everything except T/Tdg, which `controlled` refuses
        let mut c = random_full_circuit(3, 12, seed);
        c.gates.retain(|g| !matches!(g.kind, GateKind::T | GateKind::Tdg));
        let mut wide = c.clone();
        wide.n_qubits = 4;
        let cc = wide.controlled(3).unwrap();
        let init = random_state(3, seed);
        for ctrl in [0usize, 1] {
            let start = if ctrl == 0 { init.extended(1) } else {
                // |psi>|1>
                let mut x = QuantumCircuit::new(4);
                x.push(Gate::x(3));
                simulate(&x, Some(&init.extended(1))).unwrap()
            };
            let got = simulate(&cc, Some(&start)).unwrap();
            let want = if ctrl == 0 { start.clone() } else { simulate(&wide, Some(&start)).unwrap() };
            // exactness includes the phase: compare the raw overlap, not just fidelity
            let ov: num_complex::Complex64 = got
                .amplitudes()
                .iter()
                .zip(want.amplitudes())
                .map(|(a, b)| a.conj() * b)
                .sum();
            assert!((ov - 1.0).norm() < 1e-10, "seed {seed} ctrl {ctrl} overlap {ov}");
        }
    }
}

#[test]
fn inverse_undoes_circuit() {
    let c = random_full_circuit(4, 40, 9);
    let mut both = c.clone();
    both.append(&c.inverse()).unwrap();
    let init = random_state(4, 1);
    let out = simulate(&both, Some(&init)).unwrap();
    assert!((out.fidelity(&init) - 1.0).abs() < 1e-10);
}

#[test]
fn json_roundtrip_and_validation() {
    let c = random_full_circuit(3, 10, 4);
    let back = QuantumCircuit::from_json(&c.to_json()).unwrap();
    assert_eq!(back, c);
    let bad = r#"{"n_qubits": 1, "gates": [{"kind": "CNOT", "params": [], "qubits": [0, 0]}]}"#;
    assert!(QuantumCircuit::from_json(bad).is_err());
    let unknown = r#"{"n_qubits": 1, "gates": [{"kind": "Fredkin", "params": [], "qubits": [0]}]}"#;
    assert!(QuantumCircuit::from_json(unknown).is_err());
}

#[test]
fn boxed_circuit_is_not_simulated() {
    let mut c = QuantumCircuit::new(2);
    c.boxes.push(ResourceBox { n_qubits: 2, ..Default::default() });
    assert!(simulate(&c, None).is_err());
}

#[test]
fn sampling_frequencies() {
    let mut c = QuantumCircuit::new(2);
    c.push(Gate::h(0));
    c.push(Gate::h(1));
    let s = simulate(&c, None).unwrap();
    let n = 100_000;
    let out = sample(&s, &[0, 1], n, 42).unwrap();
    let sd = (0.25f64 * 0.75 / n as f64).sqrt();
    for k in 0..4 {
        let f = out.iter().filter(|&&o| o == k).count() as f64 / n as f64;
        assert!((f - 0.25).abs() < 3.0 * sd, "bin {k}: {f}");
    }
    let det = StateVector::basis(3, 5);
    assert!(sample(&det, &[0, 1, 2], 20, 1).unwrap().iter().all(|&o| o == 5));
}

proptest! {
    #[test]
    fn norm_preserved_after_every_gate(seed in 0u64..500) {
        let c = random_full_circuit(4, 20, seed);
        let mut s = StateVector::zero(4);
        for g in &c.gates {
            s.apply(g).unwrap();
            prop_assert!((s.norm_sqr() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn composition_is_sequential(seed in 0u64..200) {
        let a = random_full_circuit(3, 8, seed);
        let b = random_full_circuit(3, 8, seed + 9999);
        let mut ab = a.clone();
        ab.append(&b).unwrap();
        let whole = simulate(&ab, None).unwrap();
        let step = simulate(&b, Some(&simulate(&a, None).unwrap())).unwrap();
        prop_assert_eq!(whole, step);
    }

    #[test]
    fn depth_invariant_under_commuting_reorder(seed in 0u64..200) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut c = QuantumCircuit::new(6);
        for _ in 0..10 {
            let q = rng.random_range(0..5);
            c.push(Gate::cnot(q, q + 1));
            c.push(Gate::tk1(0.1, 0.2, 0.3, rng.random_range(0..6)));
        }
        let base = count_nisq(&c).unwrap();
        // swap adjacent gates on disjoint wires
        let mut d = c.clone();
        for i in 0..d.gates.len() - 1 {
            let disjoint = d.gates[i].qubits.iter().all(|q| !d.gates[i + 1].qubits.contains(q));
            if disjoint && rng.random_bool(0.5) {
                d.gates.swap(i, i + 1);
            }
        }
        prop_assert_eq!(count_nisq(&d).unwrap(), base);
    }
}

#[test]
fn outcome_pmf_matches_dense_simulation() {
    use qmci::qcore::outcome_pmf;
    // wide enough to take the quantum-prefix / classical-suffix path
    let n = 22;
    let mut c = QuantumCircuit::new(n);
    for q in 0..3 {
        c.push(Gate::h(q));
    }
    c.push(Gate::ry(0.7, 3));
    c.push(Gate::cnot(0, 3));
    c.push(Gate::ry(1.9, 4));
    for t in 5..n {
        let (a, b) = ((t * 7) % 5, (t * 3 + 1) % 5);
        if a == b {
            c.push(Gate::cnot(a, t));
        } else {
            c.push(Gate::toffoli(a, b, t));
        }
        if t % 4 == 0 {
            c.push(Gate::cnot(t - 1, t));
        }
    }
    c.push(Gate::x(n - 1));
    let wires = [n - 1, 0, 7, 12, 3, 20];
    let dense = marginal_pmf(&simulate(&c, None).unwrap(), &wires).unwrap();
    let hybrid = outcome_pmf(&c, &wires).unwrap();
    for (a, b) in dense.iter().zip(&hybrid) {
        assert!((a - b).abs() < 1e-12);
    }
    let mut boxed = c.clone();
    boxed.boxes.push(qmci::qcore::ResourceBox { n_qubits: 1, placement: 0, ..Default::default() });
    assert!(outcome_pmf(&boxed, &wires).is_err());
}
