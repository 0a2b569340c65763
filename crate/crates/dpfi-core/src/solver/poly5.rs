use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::TimeGrid;

/// Least-squares degree-5 polynomial fit of a grid function.
///
/// Coefficients are expressed in the scaled variable
/// `x = (2t - t0 - tf) / (tf - t0)` in `[-1, 1]`, which keeps the
/// Vandermonde system well conditioned on any horizon.
#[derive(Debug, Clone, Serialize)]
pub struct Poly5Fit {
    /// Coefficients of `1, x, x^2, ..., x^5` in the scaled variable.
    pub coeffs: [f64; 6],
    /// Fitted values back on the grid nodes.
    pub fitted: Vec<f64>,
    t_mid: f64,
    t_half: f64,
}

impl Poly5Fit {
    pub fn eval(&self, t: f64) -> f64 {
        let x = (t - self.t_mid) / self.t_half;
        let mut acc = 0.0;
        for &c in self.coeffs.iter().rev() {
            acc = acc * x + c;
        }
        acc
    }
}

/// Householder-QR least squares fit; needs at least 6 nodes.
pub fn poly5_fit(grid: &TimeGrid, values: &[f64]) -> Result<Poly5Fit> {
    const K: usize = 6;
    let n = grid.n;
    if values.len() != n {
        return Err(Error::ShapeMismatch {
            expected: n,
            got: values.len(),
        });
    }
    if n < K {
        return Err(Error::InvalidConfig(format!(
            "degree-5 fit needs at least {K} nodes, grid has {n}"
        )));
    }
    let t_mid = 0.5 * (grid.t0 + grid.tf);
    let t_half = 0.5 * (grid.tf - grid.t0);

    // Column-major Vandermonde in the scaled variable.
    let mut a = vec![0.0; n * K];
    for (i, &t) in grid.nodes.iter().enumerate() {
        let x = (t - t_mid) / t_half;
        let mut p = 1.0;
        for k in 0..K {
            a[k * n + i] = p;
            p *= x;
        }
    }
    let mut rhs = values.to_vec();

    // Householder QR, reflection vectors stored below the diagonal.
    for k in 0..K {
        let col = &a[k * n..(k + 1) * n];
        let mut norm = 0.0;
        for i in k..n {
            norm += col[i] * col[i];
        }
        let norm = norm.sqrt();
        if norm == 0.0 {
            return Err(Error::InvalidConfig("rank-deficient polynomial basis".into()));
        }
        let alpha = if a[k * n + k] >= 0.0 { -norm } else { norm };
        let mut v = vec![0.0; n];
        v[k] = a[k * n + k] - alpha;
        for i in k + 1..n {
            v[i] = a[k * n + i];
        }
        let vtv: f64 = v[k..].iter().map(|x| x * x).sum();
        if vtv == 0.0 {
            continue;
        }
        for col_idx in k..K {
            let c = &mut a[col_idx * n..(col_idx + 1) * n];
            let dot: f64 = v[k..].iter().zip(&c[k..]).map(|(x, y)| x * y).sum();
            let f = 2.0 * dot / vtv;
            for i in k..n {
                c[i] -= f * v[i];
            }
        }
        let dot: f64 = v[k..].iter().zip(&rhs[k..]).map(|(x, y)| x * y).sum();
        let f = 2.0 * dot / vtv;
        for i in k..n {
            rhs[i] -= f * v[i];
        }
        a[k * n + k] = alpha;
    }

    // Back substitution on the triangular factor.
    let mut coeffs = [0.0; K];
    for i in (0..K).rev() {
        let mut acc = rhs[i];
        for j in i + 1..K {
            acc -= a[j * n + i] * coeffs[j];
        }
        coeffs[i] = acc / a[i * n + i];
    }

    let fit = Poly5Fit {
        coeffs,
        fitted: Vec::new(),
        t_mid,
        t_half,
    };
    let fitted = grid.nodes.iter().map(|&t| fit.eval(t)).collect();
    Ok(Poly5Fit { fitted, ..fit })
}
