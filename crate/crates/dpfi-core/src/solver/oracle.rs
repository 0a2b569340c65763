//! Brute-force projection oracle for tiny instances.
//!
//! Enumerates every candidate active set (boxes included as rows), solves the
//! equality-constrained projection for each, and keeps the KKT-consistent
//! candidate. Exponential in the constraint count, so it is only usable on
//! toy sets; it exists to certify the production projection independently.

use crate::error::{Error, Result};
use crate::solver::set::{solve_dense, FeasibleSet, RowKind};

struct FlatRow {
    coeffs: Vec<(usize, f64)>,
    rhs: f64,
    eq: bool,
}

/// Exact projection by active-set enumeration. Rejects instances with more
/// than 20 inequality rows (boxes included) to keep the enumeration bounded.
pub fn enumerate_projection(set: &FeasibleSet, z: &[f64]) -> Result<Vec<f64>> {
    let dim = set.dim();
    assert_eq!(z.len(), dim);
    let mut eq_rows = Vec::new();
    let mut in_rows = Vec::new();
    for row in &set.rows {
        let flat = FlatRow {
            coeffs: row.coeffs.clone(),
            rhs: row.rhs,
            eq: row.kind == RowKind::Eq,
        };
        if flat.eq {
            eq_rows.push(flat);
        } else {
            in_rows.push(flat);
        }
    }
    for j in 0..dim {
        if set.lower[j].is_finite() {
            in_rows.push(FlatRow {
                coeffs: vec![(j, -1.0)],
                rhs: -set.lower[j],
                eq: false,
            });
        }
        if set.upper[j].is_finite() {
            in_rows.push(FlatRow {
                coeffs: vec![(j, 1.0)],
                rhs: set.upper[j],
                eq: false,
            });
        }
    }
    let m_in = in_rows.len();
    if m_in > 20 {
        return Err(Error::InvalidConfig(format!(
            "enumeration oracle limited to 20 inequality rows, got {m_in}"
        )));
    }
    let max_active = dim.saturating_sub(eq_rows.len()).min(m_in);

    let feas_tol = 1e-8;
    let dual_tol = 1e-9;
    let mut best: Option<(f64, Vec<f64>)> = None;

    'mask: for mask in 0u32..(1u32 << m_in) {
        if (mask.count_ones() as usize) > max_active {
            continue;
        }
        let mut active: Vec<&FlatRow> = eq_rows.iter().collect();
        let mut active_ineq_start = active.len();
        for (k, row) in in_rows.iter().enumerate() {
            if mask & (1 << k) != 0 {
                active.push(row);
            }
        }
        let k = active.len();
        // KKT for min 1/2||v-z||^2 with active rows tight:
        // v = z - A^T mu, A v = rhs  =>  (A A^T) mu = A z - rhs.
        let mut gram = vec![0.0; k * k];
        let mut rhs = vec![0.0; k];
        for a in 0..k {
            let mut az = -active[a].rhs;
            for &(j, c) in &active[a].coeffs {
                az += c * z[j];
            }
            rhs[a] = az;
            for b in a..k {
                let mut dot = 0.0;
                for &(j, ca) in &active[a].coeffs {
                    for &(j2, cb) in &active[b].coeffs {
                        if j == j2 {
                            dot += ca * cb;
                        }
                    }
                }
                gram[a * k + b] = dot;
                gram[b * k + a] = dot;
            }
        }
        let mu = if k == 0 {
            Vec::new()
        } else {
            match solve_dense(&mut gram, &mut rhs) {
                Some(mu) => mu,
                None => continue 'mask, // linearly dependent candidate
            }
        };
        let mut v = z.to_vec();
        for (a, row) in active.iter().enumerate() {
            for &(j, c) in &row.coeffs {
                v[j] -= c * mu[a];
            }
        }
        // Dual feasibility on active inequality rows.
        while active_ineq_start < k {
            if mu[active_ineq_start] < -dual_tol {
                continue 'mask;
            }
            active_ineq_start += 1;
        }
        // Primal feasibility everywhere.
        for row in eq_rows.iter() {
            let mut r = -row.rhs;
            for &(j, c) in &row.coeffs {
                r += c * v[j];
            }
            if r.abs() > feas_tol {
                continue 'mask;
            }
        }
        for row in in_rows.iter() {
            let mut r = -row.rhs;
            for &(j, c) in &row.coeffs {
                r += c * v[j];
            }
            if r > feas_tol {
                continue 'mask;
            }
        }
        let dist: f64 = v.iter().zip(z).map(|(a, b)| (a - b) * (a - b)).sum();
        if best.as_ref().map_or(true, |(d, _)| dist < *d) {
            best = Some((dist, v));
        }
    }

    best.map(|(_, v)| v)
        .ok_or_else(|| Error::InvalidConfig("enumeration found no KKT point".into()))
}
