//! Smooth periodic extensions of the target functions and their Fourier
//! coefficients.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Arc, Mutex, OnceLock};

use serde::{Deserialize, Serialize};

/// Harmonics computed per series. Coefficients decay like m^-3, so the
/// remainder past this point is below 1e-6 of the leading term.
pub const MAX_HARMONICS: usize = 512;

/// g(t) ~ a0 + sum a_m cos(m omega t) + b_m sin(m omega t), m = 1..len.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FourierSeries {
    pub omega: f64,
    pub a0: f64,
    pub a: Vec<f64>,
    pub b: Vec<f64>,
}

impl FourierSeries {
    pub fn len(&self) -> usize {
        self.a.len()
    }

    pub fn is_empty(&self) -> bool {
        self.a.is_empty()
    }

    pub fn eval(&self, t: f64) -> f64 {
        let mut s = self.a0;
        for (i, (a, b)) in self.a.iter().zip(&self.b).enumerate() {
            let (sn, cs) = ((i + 1) as f64 * self.omega * t).sin_cos();
            s += a * cs + b * sn;
        }
        s
    }

    /// Remainder estimate for harmonics past `len`, from the m^-3 decay of
    /// the last computed coefficients.
    pub fn tail_estimate(&self) -> f64 {
        let m = self.len();
        if m < 8 {
            return 0.0;
        }
        // envelope over the last few harmonics, scaled to m^-3
        let env = (m - 8..m)
            .map(|i| (self.a[i].abs() + self.b[i].abs()) * ((i + 1) as f64).powi(3))
            .fold(0.0, f64::max);
        env / (2.0 * (m as f64).powi(2))
    }
}

type Piece = (f64, f64, Box<dyn Fn(f64) -> f64>);

fn legendre_nodes(n: usize) -> Vec<(f64, f64)> {
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        out.push((x, 2.0 / ((1.0 - x * x) * dp * dp)));
    }
    out
}

/// Coefficients of the period-`period` function given piecewise on one
/// period, by composite Gauss-Legendre quadrature (panels no wider than a
/// quarter wavelength of the highest harmonic).
fn series_from_pieces(pieces: &[Piece], period: f64, harmonics: usize) -> FourierSeries {
    let omega = 2.0 * PI / period;
    let gl = legendre_nodes(16);
    let mut a0 = 0.0;
    let mut a = vec![0.0; harmonics];
    let mut b = vec![0.0; harmonics];
    let max_panel = period / (4.0 * harmonics as f64);
    for (lo, hi, f) in pieces {
        let panels = ((hi - lo) / max_panel).ceil().max(1.0) as usize;
        let h = (hi - lo) / panels as f64;
        for p in 0..panels {
            let c = lo + (p as f64 + 0.5) * h;
            for &(x, w) in &gl {
                let t = c + 0.5 * h * x;
                let fw = f(t) * w * 0.5 * h;
                a0 += fw;
                // cos(m u), sin(m u) by the angle-addition recurrence
                let (s1, c1) = (omega * t).sin_cos();
                let (mut sm, mut cm) = (s1, c1);
                for m in 0..harmonics {
                    a[m] += fw * cm;
                    b[m] += fw * sm;
                    let ns = sm * c1 + cm * s1;
                    cm = cm * c1 - sm * s1;
                    sm = ns;
                }
            }
        }
    }
    let k = 2.0 / period;
    FourierSeries {
        omega,
        a0: a0 / period,
        a: a.into_iter().map(|x| x * k).collect(),
        b: b.into_iter().map(|x| x * k).collect(),
    }
}

/// Cubic Hermite interpolant on [x0, x1] with end values and slopes.
fn hermite(x0: f64, x1: f64, p0: f64, d0: f64, p1: f64, d1: f64) -> impl Fn(f64) -> f64 {
    move |x| {
        let l = x1 - x0;
        let u = (x - x0) / l;
        let (u2, u3) = (u * u, u * u * u);
        (2.0 * u3 - 3.0 * u2 + 1.0) * p0
            + (u3 - 2.0 * u2 + u) * d0 * l
            + (-2.0 * u3 + 3.0 * u2) * p1
            + (u3 - u2) * d1 * l
    }
}

/// t on [-1, 1], period 4, odd: the return piece on [1, 3] is
/// (t-2)^3 - 2(t-2), matching value and slope at both joins.
pub fn mean_series() -> Arc<FourierSeries> {
    static S: OnceLock<Arc<FourierSeries>> = OnceLock::new();
    S.get_or_init(|| {
        let pieces: Vec<Piece> = vec![
            (-1.0, 1.0, Box::new(|t| t)),
            (1.0, 3.0, Box::new(|t| {
                let u = t - 2.0;
                u * u * u - 2.0 * u
            })),
        ];
        let mut s = series_from_pieces(&pieces, 4.0, MAX_HARMONICS);
        clean_symmetry(&mut s, Symmetry::Odd);
        Arc::new(s)
    })
    .clone()
}

/// t^2 on [-1, 1], period 4, even: the return piece is 2 - (t-2)^2.
pub fn square_series() -> Arc<FourierSeries> {
    static S: OnceLock<Arc<FourierSeries>> = OnceLock::new();
    S.get_or_init(|| {
        let pieces: Vec<Piece> = vec![
            (-1.0, 1.0, Box::new(|t| t * t)),
            (1.0, 3.0, Box::new(|t| 2.0 - (t - 2.0) * (t - 2.0))),
        ];
        let mut s = series_from_pieces(&pieces, 4.0, MAX_HARMONICS);
        clean_symmetry(&mut s, Symmetry::Even);
        Arc::new(s)
    })
    .clone()
}

/// e^s on [0, len], period 2 len, with a cubic Hermite return piece of the
/// same length back to (2 len, 1) with slope 1.
pub fn exp_series(len: f64) -> Arc<FourierSeries> {
    static CACHE: OnceLock<Mutex<HashMap<u64, Arc<FourierSeries>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    if let Some(s) = cache.lock().unwrap().get(&len.to_bits()) {
        return s.clone();
    }
    let e = len.exp();
    let ret = hermite(len, 2.0 * len, e, e, 1.0, 1.0);
    let pieces: Vec<Piece> =
        vec![(0.0, len, Box::new(|s: f64| s.exp())), (len, 2.0 * len, Box::new(ret))];
    let s = Arc::new(series_from_pieces(&pieces, 2.0 * len, MAX_HARMONICS));
    cache.lock().unwrap().insert(len.to_bits(), s.clone());
    s
}

enum Symmetry {
    Odd,
    Even,
}

/// Zero the coefficients that vanish by symmetry (quadrature leaves ~1e-17).
fn clean_symmetry(s: &mut FourierSeries, sym: Symmetry) {
    match sym {
        Symmetry::Odd => {
            s.a0 = 0.0;
            s.a.iter_mut().for_each(|x| *x = 0.0);
        }
        Symmetry::Even => s.b.iter_mut().for_each(|x| *x = 0.0),
    }
}

/// sum |c|^(2/3) over the nonzero coefficients.
pub fn s_two_thirds(s: &FourierSeries) -> f64 {
    s.a.iter().chain(&s.b).map(|c| c.abs().powf(2.0 / 3.0)).sum()
}
