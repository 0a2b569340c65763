use crate::error::{Error, Result};
use crate::solver::set::{FeasibleSet, RowKind};

/// Result of a Euclidean projection onto the feasible set.
#[derive(Debug, Clone)]
pub struct Projection {
    /// The projected point, always inside the boxes exactly.
    pub point: Vec<f64>,
    /// One multiplier per constraint row (free sign for equalities,
    /// nonnegative for inequalities).
    pub row_duals: Vec<f64>,
    pub iterations: usize,
    /// KKT residual at exit (primal row violation and complementarity;
    /// stationarity and dual feasibility hold by construction).
    pub residual: f64,
}

/// Projects points onto one feasible set. Builds the row/variable adjacency
/// once so repeated projections inside the fixed-point loop stay cheap.
pub struct Projector<'a> {
    set: &'a FeasibleSet,
    /// rows touching each variable, as (row index, coefficient)
    adj: Vec<Vec<(usize, f64)>>,
}

impl<'a> Projector<'a> {
    pub fn new(set: &'a FeasibleSet) -> Self {
        let mut adj = vec![Vec::new(); set.dim()];
        for (r, row) in set.rows.iter().enumerate() {
            for &(j, a) in &row.coeffs {
                adj[j].push((r, a));
            }
        }
        Self { set, adj }
    }

    fn raw_point(&self, z: &[f64], y: &[f64], raw: &mut [f64]) {
        raw.copy_from_slice(z);
        for (r, row) in self.set.rows.iter().enumerate() {
            let yr = y[r];
            if yr != 0.0 {
                for &(j, a) in &row.coeffs {
                    raw[j] -= a * yr;
                }
            }
        }
    }

    fn clip(&self, raw: &[f64], v: &mut [f64]) {
        for j in 0..raw.len() {
            v[j] = raw[j].clamp(self.set.lower[j], self.set.upper[j]);
        }
    }

    /// Minimum-norm projection of `z`: the unique minimizer of
    /// `0.5 ||v - z||^2` over the set, found by maximizing the dual over row
    /// multipliers with a projected Newton method (boxes stay in the primal
    /// clip). Stops when primal row violations and complementarity fall
    /// under `tol`; errors past `max_iter` carry the best iterate seen.
    pub fn project(
        &self,
        z: &[f64],
        tol: f64,
        max_iter: usize,
        warm: Option<&[f64]>,
    ) -> Result<Projection> {
        let m = self.set.rows.len();
        let dim = self.set.dim();
        assert_eq!(z.len(), dim, "projection target has wrong dimension");
        let mut y = match warm {
            Some(w) if w.len() == m => w.to_vec(),
            _ => vec![0.0; m],
        };
        for (r, row) in self.set.rows.iter().enumerate() {
            if row.kind == RowKind::Ineq && y[r] < 0.0 {
                y[r] = 0.0;
            }
        }

        let mut raw = vec![0.0; dim];
        let mut v = vec![0.0; dim];
        let mut resid = vec![0.0; m];
        let mut best: Option<(f64, Vec<f64>, Vec<f64>)> = None;

        let mut free = Vec::with_capacity(m);
        let mut row_to_free = vec![usize::MAX; m];

        for it in 0..max_iter {
            self.raw_point(z, &y, &mut raw);
            self.clip(&raw, &mut v);
            let mut kkt: f64 = 0.0;
            for (r, row) in self.set.rows.iter().enumerate() {
                let res = row.dot(&v) - row.rhs;
                resid[r] = res;
                match row.kind {
                    RowKind::Eq => kkt = kkt.max(res.abs()),
                    RowKind::Ineq => {
                        kkt = kkt.max(res.max(0.0));
                        kkt = kkt.max((y[r] * res).abs() / (1.0 + y[r]));
                    }
                }
            }
            if best.as_ref().map_or(true, |(b, _, _)| kkt < *b) {
                best = Some((kkt, v.clone(), y.clone()));
            }
            if std::env::var("DPFI_QP_DEBUG").is_ok() && (it % 20 == 0 || it > 480) {
                let mut worst = (0usize, 0.0f64);
                for (r, row) in self.set.rows.iter().enumerate() {
                    let res = row.dot(&v) - row.rhs;
                    let score = match row.kind {
                        RowKind::Eq => res.abs(),
                        RowKind::Ineq => res.max(0.0).max((y[r] * res).abs() / (1.0 + y[r])),
                    };
                    if score > worst.1 {
                        worst = (r, score);
                    }
                }
                let inner_count = (0..dim)
                    .filter(|&j| raw[j] > self.set.lower[j] && raw[j] < self.set.upper[j])
                    .count();
                eprintln!(
                    "qp it {it}: kkt {kkt:.4e} worst row {} ({:?}) inner {inner_count}/{dim}",
                    worst.0, self.set.rows[worst.0].tag
                );
            }
            if kkt <= tol {
                return Ok(Projection {
                    point: v,
                    row_duals: y,
                    iterations: it,
                    residual: kkt,
                });
            }

            free.clear();
            for (r, row) in self.set.rows.iter().enumerate() {
                row_to_free[r] = usize::MAX;
                if row.kind == RowKind::Eq || y[r] > 0.0 || resid[r] > 0.0 {
                    row_to_free[r] = free.len();
                    free.push(r);
                }
            }
            let f = free.len();
            if f == 0 {
                // No active work left but tolerance unmet: numerically stuck.
                break;
            }

            // Newton system on the free multipliers: (A_F D A_F^T + reg) dy = r_F,
            // D masking variables strictly inside their boxes.
            let mut h = vec![0.0; f * f];
            for j in 0..dim {
                if raw[j] > self.set.lower[j] && raw[j] < self.set.upper[j] {
                    let touching = &self.adj[j];
                    for a_idx in 0..touching.len() {
                        let (ra, ca) = touching[a_idx];
                        let fa = row_to_free[ra];
                        if fa == usize::MAX {
                            continue;
                        }
                        for b_idx in a_idx..touching.len() {
                            let (rb, cb) = touching[b_idx];
                            let fb = row_to_free[rb];
                            if fb == usize::MAX {
                                continue;
                            }
                            let prod = ca * cb;
                            h[fa * f + fb] += prod;
                            if fa != fb {
                                h[fb * f + fa] += prod;
                            }
                        }
                    }
                }
            }
            let mut diag_scale = 0.0;
            for i in 0..f {
                diag_scale += h[i * f + i];
            }
            diag_scale = (diag_scale / f as f64).max(1.0);
            let grad: Vec<f64> = free.iter().map(|&r| resid[r]).collect();

            let mut reg = 1e-12 * diag_scale;
            let mut dy = None;
            for _ in 0..6 {
                let mut hreg = h.clone();
                for i in 0..f {
                    hreg[i * f + i] += reg;
                }
                if let Some(sol) = cholesky_solve(&mut hreg, &grad) {
                    if sol.iter().all(|x| x.is_finite()) {
                        dy = Some(sol);
                        break;
                    }
                }
                reg *= 100.0;
            }
            let mut dy = dy.unwrap_or_else(|| grad.clone());

            // Project the direction so inequality multipliers at zero are
            // never pushed negative, then find the largest step before any
            // positive multiplier would cross zero.
            let mut t_clamp = f64::INFINITY;
            for (k, &r) in free.iter().enumerate() {
                if self.set.rows[r].kind == RowKind::Ineq && dy[k] < 0.0 {
                    if y[r] <= 0.0 {
                        dy[k] = 0.0;
                    } else {
                        t_clamp = t_clamp.min(-y[r] / dy[k]);
                    }
                }
            }

            // Exact line search: the dual along dy is concave piecewise
            // quadratic, so its directional derivative phi is decreasing;
            // expand then bisect to its root.
            let mut shift = vec![0.0; dim];
            for (k, &r) in free.iter().enumerate() {
                if dy[k] != 0.0 {
                    for &(j, a) in &self.set.rows[r].coeffs {
                        shift[j] += a * dy[k];
                    }
                }
            }
            let raw0 = raw.clone();
            let mut phi = |t: f64| -> f64 {
                for j in 0..dim {
                    v[j] = (raw0[j] - t * shift[j]).clamp(self.set.lower[j], self.set.upper[j]);
                }
                let mut acc = 0.0;
                for (k, &r) in free.iter().enumerate() {
                    if dy[k] != 0.0 {
                        acc += dy[k] * (self.set.rows[r].dot(&v) - self.set.rows[r].rhs);
                    }
                }
                acc
            };
            if phi(0.0) <= 0.0 {
                // No ascent available along the direction: numerically stuck.
                break;
            }
            let t_star = if t_clamp.is_finite() && phi(t_clamp) >= 0.0 {
                t_clamp
            } else {
                let mut hi = 1.0f64.min(t_clamp);
                let mut expansions = 0;
                while phi(hi) > 0.0 && hi < t_clamp && expansions < 90 {
                    hi = (2.0 * hi).min(t_clamp);
                    expansions += 1;
                }
                let mut lo = 0.0;
                if phi(hi) > 0.0 {
                    hi // derivative never crossed: take the largest step seen
                } else {
                    for _ in 0..55 {
                        let mid = 0.5 * (lo + hi);
                        if phi(mid) > 0.0 {
                            lo = mid;
                        } else {
                            hi = mid;
                        }
                    }
                    0.5 * (lo + hi)
                }
            };
            for (k, &r) in free.iter().enumerate() {
                y[r] += t_star * dy[k];
                if self.set.rows[r].kind == RowKind::Ineq && y[r] < 0.0 {
                    y[r] = 0.0;
                }
            }

            // Ray phase: rows whose entire support is clipped see no
            // curvature and make no Newton progress. Their dual is locally
            // linear, so push each such violated multiplier straight to the
            // first breakpoint where a support variable unclips (still an
            // ascent: the directional derivative stays constant up to the
            // breakpoint).
            self.raw_point(z, &y, &mut raw);
            for (r, row) in self.set.rows.iter().enumerate() {
                let mut diag = 0.0;
                let mut res = -row.rhs;
                for &(j, a) in &row.coeffs {
                    let vj = raw[j].clamp(self.set.lower[j], self.set.upper[j]);
                    res += a * vj;
                    if raw[j] > self.set.lower[j] && raw[j] < self.set.upper[j] {
                        diag += a * a;
                    }
                }
                if diag > 1e-10 {
                    continue;
                }
                let dir = match row.kind {
                    RowKind::Eq if res.abs() > 0.1 * tol => res.signum(),
                    RowKind::Ineq if res > 0.1 * tol => 1.0,
                    RowKind::Ineq if y[r] > 0.0 && res < -0.1 * tol => -1.0,
                    _ => continue,
                };
                let mut t_break = f64::INFINITY;
                for &(j, a) in &row.coeffs {
                    let rate = a * dir; // raw[j] moves by -rate * t
                    if raw[j] >= self.set.upper[j] && rate > 0.0 {
                        t_break = t_break.min((raw[j] - self.set.upper[j]) / rate);
                    } else if raw[j] <= self.set.lower[j] && rate < 0.0 {
                        t_break = t_break.min((self.set.lower[j] - raw[j]) / (-rate));
                    }
                }
                if !t_break.is_finite() {
                    continue;
                }
                let mut push = t_break * (1.0 + 1e-9) + 1e-12;
                if row.kind == RowKind::Ineq && dir < 0.0 {
                    push = push.min(y[r]);
                }
                y[r] += dir * push;
                if row.kind == RowKind::Ineq && y[r] < 0.0 {
                    y[r] = 0.0;
                }
                for &(j, a) in &row.coeffs {
                    raw[j] -= a * dir * push;
                }
            }
        }

        let (residual, point, duals) = best.expect("at least one iterate");
        Err(Error::ProjectionBudget {
            tol,
            iterations: max_iter,
            residual,
            best: point.into_iter().chain(duals).collect(),
        })
    }
}

/// One-shot projection. For repeated projections against the same set use
/// [`Projector`] directly.
pub fn project(set: &FeasibleSet, z: &[f64], tol: f64, max_iter: usize) -> Result<Projection> {
    Projector::new(set).project(z, tol, max_iter, None)
}

/// KKT residual of a candidate primal/dual pair: max of equality violation,
/// inequality violation and scaled complementarity. Box feasibility is
/// checked as a hard violation too.
pub fn kkt_residual(set: &FeasibleSet, v: &[f64], row_duals: &[f64]) -> f64 {
    let mut kkt: f64 = 0.0;
    for j in 0..set.dim() {
        kkt = kkt.max(set.lower[j] - v[j]);
        if set.upper[j].is_finite() {
            kkt = kkt.max(v[j] - set.upper[j]);
        }
    }
    for (r, row) in set.rows.iter().enumerate() {
        let res = row.dot(v) - row.rhs;
        match row.kind {
            RowKind::Eq => kkt = kkt.max(res.abs()),
            RowKind::Ineq => {
                kkt = kkt.max(res.max(0.0));
                kkt = kkt.max((row_duals[r] * res).abs() / (1.0 + row_duals[r]));
            }
        }
    }
    kkt
}

/// In-place Cholesky solve of a symmetric positive definite system
/// (row-major). Returns `None` if a pivot collapses.
fn cholesky_solve(a: &mut [f64], b: &[f64]) -> Option<Vec<f64>> {
    let n = b.len();
    debug_assert_eq!(a.len(), n * n);
    for i in 0..n {
        for j in 0..=i {
            let mut s = a[i * n + j];
            for k in 0..j {
                s -= a[i * n + k] * a[j * n + k];
            }
            if i == j {
                if s <= 0.0 || !s.is_finite() {
                    return None;
                }
                a[i * n + i] = s.sqrt();
            } else {
                a[i * n + j] = s / a[j * n + j];
            }
        }
    }
    let mut x = b.to_vec();
    for i in 0..n {
        for k in 0..i {
            x[i] -= a[i * n + k] * x[k];
        }
        x[i] /= a[i * n + i];
    }
    for i in (0..n).rev() {
        for k in i + 1..n {
            x[i] -= a[k * n + i] * x[k];
        }
        x[i] /= a[i * n + i];
    }
    Some(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::feasibility::Mode;
    use crate::solver::discretize::discretize;
    use crate::solver::set::build_feasible_set;
    use crate::testutil::{single_seller_market, symmetric_market};
    use approx::assert_relative_eq;

    #[test]
    fn interior_point_is_unchanged() {
        let d = discretize(&single_seller_market(5)).unwrap();
        let set = build_feasible_set(&d, Mode::Robust, Vec::new()).unwrap();
        // A comfortably interior point: low flat plan, mid prices.
        let lay = d.layout;
        let mut z = vec![0.0; lay.len()];
        for i in 0..5 {
            z[lay.price(0, i)] = 10.0;
            z[lay.plan(0, i)] = 2500.0 / 9.0;
        }
        // Make the inventory equality hold exactly: flat K/T already does.
        let p = project(&set, &z, 1e-10, 200).unwrap();
        for j in 0..z.len() {
            assert_relative_eq!(p.point[j], z[j], epsilon = 1e-9);
        }
    }

    #[test]
    fn lone_box_violation_clamps() {
        let d = discretize(&single_seller_market(5)).unwrap();
        let set = build_feasible_set(&d, Mode::Robust, Vec::new()).unwrap();
        let lay = d.layout;
        let mut z = vec![0.0; lay.len()];
        for i in 0..5 {
            z[lay.price(0, i)] = 10.0;
            z[lay.plan(0, i)] = 2500.0 / 9.0;
        }
        z[lay.price(0, 2)] = -5.0; // below pi_min = 0, all rows stay slack
        let p = project(&set, &z, 1e-10, 200).unwrap();
        assert_relative_eq!(p.point[lay.price(0, 2)], 0.0, epsilon = 1e-9);
        for i in [0usize, 1, 3, 4] {
            assert_relative_eq!(p.point[lay.price(0, i)], 10.0, epsilon = 1e-9);
        }
    }

    #[test]
    fn projection_is_idempotent_and_nonexpansive() {
        let d = discretize(&symmetric_market(6)).unwrap();
        let set = build_feasible_set(&d, Mode::Robust, Vec::new()).unwrap();
        let lay = d.layout;
        let mut state = 42u64;
        let mut next = move || {
            state = state
                .wrapping_mul(6364136223846793005)
                .wrapping_add(1442695040888963407);
            (state >> 11) as f64 / (1u64 << 53) as f64
        };
        let qp_tol = 1e-10;
        for _ in 0..25 {
            let mut x = vec![0.0; lay.len()];
            let mut w = vec![0.0; lay.len()];
            for s in 0..2 {
                for i in 0..6 {
                    x[lay.price(s, i)] = 30.0 * next() - 3.0;
                    x[lay.plan(s, i)] = 900.0 * next() - 100.0;
                    w[lay.price(s, i)] = 30.0 * next() - 3.0;
                    w[lay.plan(s, i)] = 900.0 * next() - 100.0;
                }
            }
            let px = project(&set, &x, qp_tol, 400).unwrap().point;
            let ppx = project(&set, &px, qp_tol, 400).unwrap().point;
            let dist: f64 = px
                .iter()
                .zip(&ppx)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt();
            assert!(dist <= 2e-6, "projection not idempotent: moved {dist}");

            let pw = project(&set, &w, qp_tol, 400).unwrap().point;
            let num: f64 = px
                .iter()
                .zip(&pw)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt();
            let den: f64 = x
                .iter()
                .zip(&w)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt();
            assert!(
                num <= den + 1e-6,
                "projection expanded distances: {num} > {den}"
            );
        }
    }

    #[test]
    fn budget_error_carries_best_iterate() {
        let d = discretize(&symmetric_market(8)).unwrap();
        let set = build_feasible_set(&d, Mode::Robust, Vec::new()).unwrap();
        let z = vec![1.0; d.layout.len()];
        match project(&set, &z, 1e-14, 1) {
            Err(Error::ProjectionBudget { best, residual, .. }) => {
                assert_eq!(best.len(), d.layout.len() + set.rows.len());
                assert!(residual.is_finite());
            }
            other => panic!("expected budget error, got {:?}", other.map(|p| p.residual)),
        }
    }
}
