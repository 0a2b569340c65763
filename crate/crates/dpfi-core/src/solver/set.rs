use serde::Serialize;

use crate::error::{Error, Result};
use crate::feasibility::Mode;
use crate::solver::discretize::Discretization;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum RowKind {
    /// `a . u = rhs`
    Eq,
    /// `a . u <= rhs`
    Ineq,
}

/// Provenance of a constraint row, kept for binding reports and errors.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum RowTag {
    Inventory { seller: usize },
    Demand { seller: usize, node: usize },
    Response { seller: usize, node: usize },
    Monotone { seller: usize, node: usize },
    MovingAverage { seller: usize, node: usize },
}

/// Sparse linear constraint row over the flat decision vector.
#[derive(Debug, Clone, Serialize)]
pub struct Row {
    pub kind: RowKind,
    pub tag: RowTag,
    pub coeffs: Vec<(usize, f64)>,
    pub rhs: f64,
}

impl Row {
    pub fn dot(&self, u: &[f64]) -> f64 {
        self.coeffs.iter().map(|&(j, a)| a * u[j]).sum()
    }
}

/// The discretized shared strategy set: boxes, per-seller inventory
/// equalities, per-node demand inequalities in the requested mode, and any
/// pricing-rule rows appended by the caller.
#[derive(Debug, Clone, Serialize)]
pub struct FeasibleSet {
    pub mode: Mode,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub rows: Vec<Row>,
}

impl FeasibleSet {
    pub fn dim(&self) -> usize {
        self.lower.len()
    }
}

/// Assembles the feasible set and verifies nonemptiness by constructing a
/// near-interior candidate (flat plans scaled by `1 - 1e-6`, demand-binding
/// prices clamped to the boxes). Rule rows are appended as-is; equality rule
/// rows are reconciled later by projection.
pub fn build_feasible_set(
    disc: &Discretization,
    mode: Mode,
    rule_rows: Vec<Row>,
) -> Result<FeasibleSet> {
    let lay = disc.layout;
    let (s_count, n) = (lay.sellers, lay.n);

    if mode == Mode::Robust {
        for s in 0..s_count {
            for i in 0..n {
                if disc.multiplier(s, i, mode) <= 0.0 {
                    return Err(Error::Infeasible {
                        seller: s,
                        node: i,
                        detail: format!(
                            "worst-case multiplier {} not positive",
                            disc.multiplier(s, i, mode)
                        ),
                    });
                }
            }
        }
    }

    let mut lower = vec![0.0; lay.len()];
    let mut upper = vec![0.0; lay.len()];
    for s in 0..s_count {
        for i in 0..n {
            lower[lay.price(s, i)] = disc.pi_min[s];
            upper[lay.price(s, i)] = disc.pi_max[s];
            lower[lay.plan(s, i)] = disc.d_min[s];
            upper[lay.plan(s, i)] = f64::INFINITY;
        }
    }

    let mut rows = Vec::with_capacity(s_count * (n + 1) + rule_rows.len());
    for s in 0..s_count {
        let coeffs = (0..n)
            .map(|i| (lay.plan(s, i), disc.grid.weights[i]))
            .collect();
        rows.push(Row {
            kind: RowKind::Eq,
            tag: RowTag::Inventory { seller: s },
            coeffs,
            rhs: disc.inventory[s],
        });
    }
    for s in 0..s_count {
        for i in 0..n {
            let m = disc.multiplier(s, i, mode);
            let mut coeffs = vec![
                (lay.plan(s, i), 1.0),
                (lay.price(s, i), disc.beta[s][i] * m),
            ];
            for r in 0..s_count {
                if r != s && disc.gamma[s][r][i] != 0.0 {
                    coeffs.push((lay.price(r, i), -disc.gamma[s][r][i] * m));
                }
            }
            rows.push(Row {
                kind: RowKind::Ineq,
                tag: RowTag::Demand { seller: s, node: i },
                coeffs,
                rhs: disc.alpha[s][i] * m,
            });
        }
    }
    rows.extend(rule_rows);

    let set = FeasibleSet {
        mode,
        lower,
        upper,
        rows,
    };
    interior_check(disc, &set)?;
    Ok(set)
}

/// Demand-binding candidate used both as the nonemptiness witness and as
/// the solver's initial iterate: flat plans `K_s / (tf - t0)`, prices from
/// the nodewise linear binding system, clamped to the boxes.
pub fn interior_candidate(disc: &Discretization, mode: Mode) -> Result<Vec<f64>> {
    let lay = disc.layout;
    let (s_count, n) = (lay.sellers, lay.n);
    let horizon = disc.grid.horizon();
    let plan_flat: Vec<f64> = (0..s_count).map(|s| disc.inventory[s] / horizon).collect();
    let mut u = vec![0.0; lay.len()];
    let mut a = vec![0.0; s_count * s_count];
    let mut b = vec![0.0; s_count];
    for i in 0..n {
        for s in 0..s_count {
            for r in 0..s_count {
                a[s * s_count + r] = if r == s {
                    disc.beta[s][i]
                } else {
                    -disc.gamma[s][r][i]
                };
            }
            let m = disc.multiplier(s, i, mode);
            b[s] = disc.alpha[s][i] - plan_flat[s] / m;
        }
        let prices = solve_dense(&mut a.clone(), &mut b.clone()).ok_or(Error::Infeasible {
            seller: 0,
            node: i,
            detail: "binding price system is singular".into(),
        })?;
        for s in 0..s_count {
            let clamped = prices[s].clamp(disc.pi_min[s], disc.pi_max[s]);
            u[lay.price(s, i)] = clamped;
            u[lay.plan(s, i)] = plan_flat[s];
        }
    }
    Ok(u)
}

fn interior_check(disc: &Discretization, set: &FeasibleSet) -> Result<()> {
    let lay = disc.layout;
    let u = interior_candidate(disc, set.mode)?;
    let shrink = 1.0 - 1e-6;
    for s in 0..lay.sellers {
        let plan = disc.inventory[s] / disc.grid.horizon();
        if plan * shrink < disc.d_min[s] {
            return Err(Error::Infeasible {
                seller: s,
                node: 0,
                detail: format!(
                    "flat plan {plan} is below the demand floor {}",
                    disc.d_min[s]
                ),
            });
        }
        for i in 0..lay.n {
            // Bound implied by the demand row at the clamped candidate prices.
            let row = &set.rows[lay.sellers + s * lay.n + i];
            debug_assert!(matches!(row.tag, RowTag::Demand { .. }));
            let mut bound = row.rhs;
            for &(j, c) in &row.coeffs {
                if j != lay.plan(s, i) {
                    bound -= c * u[j];
                }
            }
            if plan * shrink > bound {
                return Err(Error::Infeasible {
                    seller: s,
                    node: i,
                    detail: format!(
                        "required plan {plan:.6} exceeds the demand bound {bound:.6} \
                         at the clamped binding prices"
                    ),
                });
            }
        }
    }
    Ok(())
}

/// Gaussian elimination with partial pivoting for the small dense systems
/// used here (binding prices, oracle KKT blocks). Returns `None` when the
/// matrix is numerically singular.
pub(crate) fn solve_dense(a: &mut [f64], b: &mut [f64]) -> Option<Vec<f64>> {
    let n = b.len();
    debug_assert_eq!(a.len(), n * n);
    for col in 0..n {
        let mut piv = col;
        let mut best = a[col * n + col].abs();
        for row in col + 1..n {
            let v = a[row * n + col].abs();
            if v > best {
                best = v;
                piv = row;
            }
        }
        if best < 1e-12 {
            return None;
        }
        if piv != col {
            for k in 0..n {
                a.swap(col * n + k, piv * n + k);
            }
            b.swap(col, piv);
        }
        let d = a[col * n + col];
        for row in col + 1..n {
            let f = a[row * n + col] / d;
            if f != 0.0 {
                for k in col..n {
                    a[row * n + k] -= f * a[col * n + k];
                }
                b[row] -= f * b[col];
            }
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let mut acc = b[row];
        for k in row + 1..n {
            acc -= a[row * n + k] * x[k];
        }
        x[row] = acc / a[row * n + row];
    }
    Some(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solver::discretize::discretize;
    use crate::testutil::symmetric_market;
    use approx::assert_relative_eq;

    #[test]
    fn robust_demand_row_at_first_node() {
        // At t = 1 the robust multiplier is 3.1 - 0.8 = 2.3, so the seller-0
        // row reads D - (3000 - 176 pi_0 + 34 pi_1) * 2.3 <= 0.
        let d = discretize(&symmetric_market(10)).unwrap();
        let set = build_feasible_set(&d, Mode::Robust, Vec::new()).unwrap();
        let row = &set.rows[2]; // two inventory rows first
        assert_eq!(row.tag, RowTag::Demand { seller: 0, node: 0 });
        assert_relative_eq!(row.rhs, 3000.0 * 2.3, max_relative = 1e-12);
        let lay = d.layout;
        let coeff = |idx: usize| {
            row.coeffs
                .iter()
                .find(|(j, _)| *j == idx)
                .map(|(_, a)| *a)
                .unwrap()
        };
        assert_relative_eq!(coeff(lay.plan(0, 0)), 1.0);
        assert_relative_eq!(coeff(lay.price(0, 0)), 176.0 * 2.3, max_relative = 1e-12);
        assert_relative_eq!(coeff(lay.price(1, 0)), -34.0 * 2.3, max_relative = 1e-12);
    }

    #[test]
    fn zero_tau_makes_modes_identical() {
        let mut m = symmetric_market(8);
        m.uncertainty[0].tau = 0.0;
        m.uncertainty[1].tau = 0.0;
        let d = discretize(&m).unwrap();
        let robust = build_feasible_set(&d, Mode::Robust, Vec::new()).unwrap();
        let nominal = build_feasible_set(&d, Mode::Nominal, Vec::new()).unwrap();
        for (a, b) in robust.rows.iter().zip(&nominal.rows) {
            assert_eq!(a.rhs, b.rhs);
            assert_eq!(a.coeffs, b.coeffs);
        }
    }

    #[test]
    fn oversized_inventory_is_rejected_with_location() {
        let mut m = symmetric_market(10);
        // Max integrable robust demand at floor prices is about
        // (3000 * 2.3..3.2-ish) * 9; far below this K.
        m.sellers[0].inventory_k = 1e6;
        let d = discretize(&m).unwrap();
        let err = build_feasible_set(&d, Mode::Robust, Vec::new()).unwrap_err();
        match err {
            Error::Infeasible { seller, .. } => assert_eq!(seller, 0),
            other => panic!("expected infeasibility, got {other}"),
        }
    }

    #[test]
    fn inventory_rows_use_quadrature_weights() {
        let d = discretize(&symmetric_market(10)).unwrap();
        let set = build_feasible_set(&d, Mode::Robust, Vec::new()).unwrap();
        let row = &set.rows[1];
        assert_eq!(row.tag, RowTag::Inventory { seller: 1 });
        assert_eq!(row.rhs, 3000.0);
        assert_eq!(row.coeffs.len(), 10);
        assert_relative_eq!(row.coeffs[0].1, 0.5);
        assert_relative_eq!(row.coeffs[5].1, 1.0);
    }

    #[test]
    fn solve_dense_small_system() {
        let mut a = vec![2.0, 1.0, 1.0, 3.0];
        let mut b = vec![5.0, 10.0];
        let x = solve_dense(&mut a, &mut b).unwrap();
        assert_relative_eq!(x[0], 1.0, max_relative = 1e-12);
        assert_relative_eq!(x[1], 3.0, max_relative = 1e-12);
    }
}
