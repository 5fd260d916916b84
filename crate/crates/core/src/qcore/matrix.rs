//! 2x2 unitaries for single-qubit gates and the Z-X-Z Euler decomposition.

use num_complex::Complex64;
use std::f64::consts::{FRAC_1_SQRT_2, PI};

use super::gate::GateKind;

pub type M2 = [[Complex64; 2]; 2];

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

pub fn identity() -> M2 {
    [[ONE, ZERO], [ZERO, ONE]]
}

pub fn ry(theta: f64) -> M2 {
    let (s, c) = (theta / 2.0).sin_cos();
    [
        [Complex64::new(c, 0.0), Complex64::new(-s, 0.0)],
        [Complex64::new(s, 0.0), Complex64::new(c, 0.0)],
    ]
}

pub fn rx(theta: f64) -> M2 {
    let (s, c) = (theta / 2.0).sin_cos();
    [
        [Complex64::new(c, 0.0), Complex64::new(0.0, -s)],
        [Complex64::new(0.0, -s), Complex64::new(c, 0.0)],
    ]
}

pub fn rz(theta: f64) -> M2 {
    [
        [Complex64::from_polar(1.0, -theta / 2.0), ZERO],
        [ZERO, Complex64::from_polar(1.0, theta / 2.0)],
    ]
}

pub fn phase(phi: f64) -> M2 {
    [[ONE, ZERO], [ZERO, Complex64::from_polar(1.0, phi)]]
}

pub fn tk1(alpha: f64, beta: f64, gamma: f64) -> M2 {
    mul(&rz(alpha), &mul(&rx(beta), &rz(gamma)))
}

/// Matrix of a single-qubit gate kind; `None` for multi-qubit kinds.
pub fn single_qubit(kind: GateKind, params: &[f64]) -> Option<M2> {
    let h = Complex64::new(FRAC_1_SQRT_2, 0.0);
    Some(match kind {
        GateKind::X => [[ZERO, ONE], [ONE, ZERO]],
        GateKind::H => [[h, h], [h, -h]],
        GateKind::S => phase(PI / 2.0),
        GateKind::T => phase(PI / 4.0),
        GateKind::Tdg => phase(-PI / 4.0),
        GateKind::Ry => ry(params[0]),
        GateKind::Rx => rx(params[0]),
        GateKind::Rz => rz(params[0]),
        GateKind::TK1 => tk1(params[0], params[1], params[2]),
        _ => return None,
    })
}

/// Target-qubit matrix of a controlled rotation kind.
pub fn controlled_target(kind: GateKind, theta: f64) -> Option<M2> {
    match kind {
        GateKind::CRy => Some(ry(theta)),
        GateKind::CRx => Some(rx(theta)),
        GateKind::CRz => Some(rz(theta)),
        _ => None,
    }
}

/// a * b (b acts first).
pub fn mul(a: &M2, b: &M2) -> M2 {
    let mut r = [[ZERO; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            r[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j];
        }
    }
    r
}

/// Angles (alpha, beta, gamma) with u = e^{i phi} Rz(alpha) Rx(beta) Rz(gamma).
pub fn zxz_angles(u: &M2) -> (f64, f64, f64) {
    let det = u[0][0] * u[1][1] - u[0][1] * u[1][0];
    let s = det.sqrt();
    let v00 = u[0][0] / s;
    let v10 = u[1][0] / s;
    let c_abs = v00.norm();
    let s_abs = v10.norm();
    let beta = 2.0 * s_abs.atan2(c_abs);
    let sigma = if c_abs > 1e-12 { -v00.arg() } else { 0.0 };
    let delta = if s_abs > 1e-12 {
        (Complex64::new(0.0, 1.0) * v10).arg()
    } else {
        0.0
    };
    (sigma + delta, beta, sigma - delta)
}

/// Fidelity-style distance check up to global phase: |tr(a^dag b)| / 2.
pub fn phase_overlap(a: &M2, b: &M2) -> f64 {
    let mut t = ZERO;
    for i in 0..2 {
        for j in 0..2 {
            t += a[i][j].conj() * b[i][j];
        }
    }
    t.norm() / 2.0
}
