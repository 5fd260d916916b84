use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{QmciError, Result};

/// Vertex-class occupation probabilities of the continuous-time walk on the
/// n-cube, computed on the (n+1)-vertex symmetrised quotient graph with
/// edge weights sqrt((n - i)(i + 1)) and walk time arccos(sqrt(p)).
/// Entry i is the weight of the class at Hamming distance i from the start,
/// which equals binom(n, i) p^(n-i) (1-p)^i.
pub fn walk_vertex_class_pmf(n: usize, p: f64) -> Result<Vec<f64>> {
    if !(0.0..=1.0).contains(&p) {
        return Err(QmciError::invalid(format!("p = {p} outside [0, 1]")));
    }
    if n == 0 {
        return Err(QmciError::invalid("walk needs n >= 1"));
    }
    let dim = n + 1;
    let mut a = DMatrix::<f64>::zeros(dim, dim);
    for i in 0..n {
        let w = (((n - i) * (i + 1)) as f64).sqrt();
        a[(i, i + 1)] = w;
        a[(i + 1, i)] = w;
    }
    let tau = p.sqrt().acos();
    // exp(i tau A) e_0 = V exp(i tau diag(lambda)) V^T e_0
    let eig = SymmetricEigen::new(a);
    let v = &eig.eigenvectors;
    let mut out = Vec::with_capacity(dim);
    for r in 0..dim {
        let (mut re, mut im) = (0.0, 0.0);
        for k in 0..dim {
            let c = v[(r, k)] * v[(0, k)];
            let ph = tau * eig.eigenvalues[k];
            re += c * ph.cos();
            im += c * ph.sin();
        }
        out.push(re * re + im * im);
    }
    Ok(out)
}

/// Binomial pmf from the walk: entry k = binom(n, k) p^k (1-p)^(n-k).
pub fn walk_binomial_pmf(n: usize, p: f64) -> Result<Vec<f64>> {
    let mut v = walk_vertex_class_pmf(n, p)?;
    v.reverse();
    Ok(v)
}
