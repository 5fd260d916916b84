//! Reversible integer arithmetic on little-endian qubit lists.
//!
//! Every routine here returns borrowed scratch qubits to |0> before it
//! finishes, so the caller can hand them to the next operation.

use crate::distloader::DistributionCircuit;
use crate::qcore::Gate;

/// Gate sink plus a pool of clean scratch wires.
pub(crate) struct Work<'a> {
    pub dc: &'a mut DistributionCircuit,
    free: Vec<usize>,
}

impl<'a> Work<'a> {
    pub fn new(dc: &'a mut DistributionCircuit) -> Self {
        let mut free = dc.scratch_qubits();
        free.reverse(); // pop lowest first
        Work { dc, free }
    }

    /// `k` clean wires, reusing scratch before widening the circuit.
    pub fn take(&mut self, k: usize) -> Vec<usize> {
        let mut out = Vec::with_capacity(k);
        for _ in 0..k {
            match self.free.pop() {
                Some(q) => out.push(q),
                None => {
                    out.push(self.dc.circuit.n_qubits);
                    self.dc.circuit.n_qubits += 1;
                }
            }
        }
        out
    }

    pub fn give(&mut self, qs: &[usize]) {
        self.free.extend_from_slice(qs);
        self.free.sort_unstable_by(|a, b| b.cmp(a));
    }

    pub fn emit(&mut self, gates: impl IntoIterator<Item = Gate>) {
        self.dc.circuit.extend(gates);
    }
}

/// Reverse of a sequence of self-inverse gates.
pub(crate) fn undo(gates: &[Gate]) -> Vec<Gate> {
    gates.iter().rev().cloned().collect()
}

/// Cuccaro ripple-carry adder: target += addend (mod 2^n), both length n,
/// with one clean carry wire.
pub(crate) fn cuccaro(target: &[usize], addend: &[usize], carry: usize, out: &mut Vec<Gate>) {
    let n = target.len();
    debug_assert_eq!(n, addend.len());
    if n == 0 {
        return;
    }
    if n == 1 {
        out.push(Gate::cnot(addend[0], target[0]));
        return;
    }
    let maj = |c: usize, b: usize, a: usize, out: &mut Vec<Gate>| {
        out.push(Gate::cnot(a, b));
        out.push(Gate::cnot(a, c));
        out.push(Gate::toffoli(c, b, a));
    };
    let uma = |c: usize, b: usize, a: usize, out: &mut Vec<Gate>| {
        out.push(Gate::toffoli(c, b, a));
        out.push(Gate::cnot(a, c));
        out.push(Gate::cnot(c, b));
    };
    maj(carry, target[0], addend[0], out);
    for i in 1..n {
        maj(addend[i - 1], target[i], addend[i], out);
    }
    for i in (1..n).rev() {
        uma(addend[i - 1], target[i], addend[i], out);
    }
    uma(carry, target[0], addend[0], out);
}

/// target += addend (mod 2^len(target)). A shorter addend is zero-padded
/// with scratch; a longer one is truncated.
pub(crate) fn add_into(w: &mut Work, target: &[usize], addend: &[usize], out: &mut Vec<Gate>) {
    let n = target.len();
    if n == 0 {
        return;
    }
    let mut a: Vec<usize> = addend.iter().copied().take(n).collect();
    let pad = n - a.len();
    let extra = w.take(pad + 1);
    a.extend_from_slice(&extra[..pad]);
    cuccaro(target, &a, extra[pad], out);
    w.give(&extra);
}

/// target -= addend (mod 2^len(target)).
pub(crate) fn sub_into(w: &mut Work, target: &[usize], addend: &[usize], out: &mut Vec<Gate>) {
    let mut g = Vec::new();
    add_into(w, target, addend, &mut g);
    out.extend(undo(&g));
}

/// XOR a classical constant into `bits`, optionally under one control.
pub(crate) fn load_const(bits: &[usize], value: u128, control: Option<usize>, out: &mut Vec<Gate>) {
    for (i, &q) in bits.iter().enumerate() {
        if i < 128 && (value >> i) & 1 == 1 {
            out.push(match control {
                Some(c) => Gate::cnot(c, q),
                None => Gate::x(q),
            });
        }
    }
}

/// target += c (mod 2^n), c given modulo 2^n.
pub(crate) fn add_const(w: &mut Work, target: &[usize], c: u128, out: &mut Vec<Gate>) {
    let n = target.len();
    let c = c & mask(n);
    if c == 0 || n == 0 {
        return;
    }
    let reg = w.take(n);
    load_const(&reg, c, None, out);
    add_into(w, target, &reg, out);
    load_const(&reg, c, None, out);
    w.give(&reg);
}

pub(crate) fn mask(n: usize) -> u128 {
    if n >= 128 {
        u128::MAX
    } else {
        (1u128 << n) - 1
    }
}

/// flag ^= [reg >= k] for a constant k, via the carry chain of
/// reg + (2^n - k).
pub(crate) fn ge_const(w: &mut Work, reg: &[usize], k: i128, flag: usize, out: &mut Vec<Gate>) {
    let n = reg.len();
    if k <= 0 {
        out.push(Gate::x(flag));
        return;
    }
    if n < 127 && k > mask(n) as i128 {
        return;
    }
    let c = ((1u128 << n) - k as u128) & mask(n); // in [1, 2^n - 1]
    if n == 1 {
        // reg >= 1
        out.push(Gate::cnot(reg[0], flag));
        return;
    }
    let carries = w.take(n - 1);
    let mut up = Vec::new();
    // carry into bit i+1 is maj(reg_i, c_i, carry_i); carry_0 = 0
    let step = |i: usize, tgt: usize, up: &mut Vec<Gate>| {
        let bit = (c >> i) & 1 == 1;
        if i == 0 {
            if bit {
                up.push(Gate::cnot(reg[0], tgt));
            }
            return;
        }
        let prev = carries[i - 1];
        if bit {
            // tgt ^= reg_i OR prev
            up.extend([Gate::x(reg[i]), Gate::x(prev)]);
            up.push(Gate::toffoli(reg[i], prev, tgt));
            up.extend([Gate::x(reg[i]), Gate::x(prev), Gate::x(tgt)]);
        } else {
            up.push(Gate::toffoli(reg[i], prev, tgt));
        }
    };
    for i in 0..n - 1 {
        step(i, carries[i], &mut up);
    }
    let mut last = Vec::new();
    step(n - 1, flag, &mut last);
    out.extend(up.iter().cloned());
    out.extend(last);
    out.extend(undo(&up));
    w.give(&carries);
}

/// A register operand: value code = raw code << shift.
#[derive(Clone, Debug)]
pub(crate) struct Shifted<'r> {
    pub bits: &'r [usize],
    pub shift: usize,
}

impl Shifted<'_> {
    pub fn max_code(&self) -> i128 {
        (mask(self.bits.len()) as i128) << self.shift
    }
}

/// Two's-complement width holding every value in [lo, hi].
pub(crate) fn signed_width(lo: i128, hi: i128) -> usize {
    let mut w = 1;
    while !(-(1i128 << (w - 1)) <= lo && hi < (1i128 << (w - 1))) {
        w += 1;
    }
    w
}

/// flag ^= [a - b >= t] where a, b are shifted registers and t an integer.
pub(crate) fn ge_regs(
    w: &mut Work,
    a: &Shifted,
    b: &Shifted,
    t: i128,
    flag: usize,
    out: &mut Vec<Gate>,
) {
    // S = a - b - t must stay representable
    let lo = -b.max_code() - t;
    let hi = a.max_code() - t;
    if lo >= 0 {
        out.push(Gate::x(flag));
        return;
    }
    if hi < 0 {
        return;
    }
    let width = signed_width(lo, hi);
    let s = w.take(width);
    let mut g = Vec::new();
    for (i, &q) in a.bits.iter().enumerate() {
        if i + a.shift < width {
            g.push(Gate::cnot(q, s[i + a.shift]));
        }
    }
    sub_into(w, &s[b.shift.min(width)..], b.bits, &mut g);
    let tm = (t.rem_euclid(1i128 << width.min(126))) as u128;
    let neg = ((1u128 << width) - tm) & mask(width);
    add_const(w, &s, neg, &mut g);
    out.extend(g.iter().cloned());
    // sign bit clear means S >= 0
    out.push(Gate::cnot(s[width - 1], flag));
    out.push(Gate::x(flag));
    out.extend(undo(&g));
    w.give(&s);
}
