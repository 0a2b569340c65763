use serde::Serialize;

use crate::error::{Error, Result};
use crate::market::StrategyProfile;
use crate::solver::discretize::Discretization;
use crate::solver::poly5::poly5_fit;
use crate::solver::qp::Projector;
use crate::solver::set::{interior_candidate, FeasibleSet, RowKind, RowTag};

/// How iterates are represented between projection steps.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Representation {
    /// Raw grid values.
    Grid,
    /// Each path is refit with a degree-5 polynomial in time after every
    /// projection and evaluated back on the nodes.
    Poly5,
}

#[derive(Debug, Clone, Serialize)]
pub struct SolverConfig {
    /// Projection step scale; `None` picks a curvature-based default and
    /// halves it on divergence.
    pub step_alpha: Option<f64>,
    /// Stopping tolerance on the flat step norm `||u_{k+1} - u_k||`.
    pub eps1: f64,
    pub max_iters: usize,
    /// KKT residual tolerance for every projection subproblem.
    pub qp_tol: f64,
    pub representation: Representation,
    /// Compute the equilibrium gap certificate after convergence.
    pub gap_check: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            step_alpha: None,
            eps1: 1e-6,
            max_iters: 20_000,
            qp_tol: 1e-8,
            representation: Representation::Grid,
            gap_check: false,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if let Some(a) = self.step_alpha {
            if !(a > 0.0) || !a.is_finite() {
                return Err(Error::InvalidConfig(format!("step_alpha must be positive, got {a}")));
            }
        }
        if !(self.eps1 > 0.0) {
            return Err(Error::InvalidConfig(format!("eps1 must be positive, got {}", self.eps1)));
        }
        if !(self.qp_tol > 0.0) {
            return Err(Error::InvalidConfig(format!("qp_tol must be positive, got {}", self.qp_tol)));
        }
        if self.max_iters == 0 {
            return Err(Error::InvalidConfig("max_iters must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum ConstraintRef {
    Row(RowTag),
    PriceLower { seller: usize, node: usize },
    PriceUpper { seller: usize, node: usize },
    PlanLower { seller: usize, node: usize },
}

/// Slack and multiplier of one constraint at the solution.
#[derive(Debug, Clone, Serialize)]
pub struct BindingRecord {
    pub constraint: ConstraintRef,
    /// Inequalities: `rhs - a.v` (nonnegative up to tolerance). Equalities:
    /// absolute residual. Boxes: distance to the bound.
    pub slack: f64,
    pub dual: f64,
    pub binding: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct SolverResult {
    pub profile: StrategyProfile,
    pub iterations: usize,
    pub step_norm_trace: Vec<f64>,
    /// Equilibrium gap certificate, when requested.
    pub vi_gap: Option<f64>,
    pub revenues: Vec<f64>,
    /// Multipliers of the final projection, aligned with the set's rows.
    pub multipliers: Option<Vec<f64>>,
    pub binding_report: Vec<BindingRecord>,
    /// Step scale actually used (after any automatic halving).
    pub step_alpha: f64,
    pub step_halvings: usize,
}

impl SolverResult {
    /// Nodes where the demand inequality is slack and the plan is not
    /// resting on a bound: at a converged equilibrium this list is empty
    /// (demand binds or the plan floor carries the complementary dual).
    pub fn demand_slack_off_bound(&self, slack_tol: f64) -> Vec<(usize, usize)> {
        let mut demand_binding = std::collections::BTreeMap::new();
        let mut plan_bound = std::collections::BTreeMap::new();
        for rec in &self.binding_report {
            match rec.constraint {
                ConstraintRef::Row(RowTag::Demand { seller, node }) => {
                    demand_binding.insert((seller, node), rec.slack <= slack_tol);
                }
                ConstraintRef::PlanLower { seller, node } => {
                    plan_bound.insert((seller, node), rec.binding && rec.dual >= -1e-9);
                }
                _ => {}
            }
        }
        let mut out = Vec::new();
        for (&key, &binds) in &demand_binding {
            let at_bound = plan_bound.get(&key).copied().unwrap_or(false);
            if !binds && !at_bound {
                out.push(key);
            }
        }
        out
    }
}

/// The map `F(u)` of the equilibrium condition: `exp(-rho t) D_s` on price
/// positions, `exp(-rho t) pi_s` on plan positions.
pub fn vi_map(disc: &Discretization, u: &[f64]) -> Result<Vec<f64>> {
    let lay = disc.layout;
    if u.len() != lay.len() {
        return Err(Error::ShapeMismatch {
            expected: lay.len(),
            got: u.len(),
        });
    }
    let mut out = vec![0.0; u.len()];
    for s in 0..lay.sellers {
        for i in 0..lay.n {
            let e = disc.discount[i];
            out[lay.price(s, i)] = e * u[lay.plan(s, i)];
            out[lay.plan(s, i)] = e * u[lay.price(s, i)];
        }
    }
    Ok(out)
}

/// Curvature-scaled default step: the iteration matrix on the demand-binding
/// manifold has per-node spectrum close to
/// `2 w e beta m / (1 + (beta m)^2)`, so half the inverse of its largest
/// entry keeps the contraction comfortably inside the unit disk.
pub fn default_step_alpha(disc: &Discretization, set: &FeasibleSet) -> f64 {
    let lay = disc.layout;
    let mut lam_max: f64 = 0.0;
    for s in 0..lay.sellers {
        for i in 0..lay.n {
            let bm = disc.beta[s][i] * disc.multiplier(s, i, set.mode);
            let lam = 2.0 * disc.grid.weights[i] * disc.discount[i] * bm / (1.0 + bm * bm);
            lam_max = lam_max.max(lam);
        }
    }
    if lam_max > 0.0 {
        0.5 / lam_max
    } else {
        1.0
    }
}

const QP_MAX_ITER: usize = 500;
const MAX_HALVINGS: usize = 10;
const DIVERGENCE_WINDOW: usize = 50;
const DIVERGENCE_FACTOR: f64 = 10.0;
/// The step scale ramps up linearly over this many leading iterations so
/// the projection subproblems warm up their multipliers instead of facing
/// one distant cold target.
const RAMP_ITERS: usize = 32;

/// Projection fixed-point iteration
/// `u_{k+1} = P[u_k + alpha * (w o F)(u_k)]` run until the step norm falls
/// under `eps1`. The quadrature weights inside the step make the fixed point
/// match the weighted equilibrium condition that the gap certificate and the
/// best-response verifier test.
pub fn fixed_point_solve(
    disc: &Discretization,
    set: &FeasibleSet,
    cfg: &SolverConfig,
) -> Result<SolverResult> {
    let start = interior_candidate(disc, set.mode)?;
    fixed_point_solve_from(disc, set, cfg, &start)
}

/// Same iteration from a caller-chosen starting point (projected first).
pub fn fixed_point_solve_from(
    disc: &Discretization,
    set: &FeasibleSet,
    cfg: &SolverConfig,
    start: &[f64],
) -> Result<SolverResult> {
    cfg.validate()?;
    let lay = disc.layout;
    if cfg.representation == Representation::Poly5 && lay.n < 6 {
        return Err(Error::InvalidConfig(format!(
            "poly5 representation needs at least 6 nodes, grid has {}",
            lay.n
        )));
    }

    let projector = Projector::new(set);
    let first = projector.project(start, cfg.qp_tol, QP_MAX_ITER, None)?;
    let mut u = first.point;
    let mut duals = first.row_duals;
    let weights = disc.flat_weights();
    let mut alpha = cfg
        .step_alpha
        .unwrap_or_else(|| default_step_alpha(disc, set));
    let mut halvings = 0usize;
    let mut trace: Vec<f64> = Vec::new();

    for k in 0..cfg.max_iters {
        let ramp = ((k + 1) as f64 / RAMP_ITERS as f64).min(1.0);
        let f = vi_map(disc, &u)?;
        let mut z = u.clone();
        for j in 0..z.len() {
            z[j] += ramp * alpha * weights[j] * f[j];
        }
        let proj = projector.project(&z, cfg.qp_tol, QP_MAX_ITER, Some(&duals))?;
        duals = proj.row_duals;
        let mut u_next = proj.point;
        if cfg.representation == Representation::Poly5 {
            smooth_paths(disc, &mut u_next)?;
        }
        let step = l2_dist(&u_next, &u);
        trace.push(step);
        u = u_next;

        if step <= cfg.eps1 {
            // Poly5 smoothing can leave the iterate slightly off the set.
            let (point, row_duals, target) = if cfg.representation == Representation::Poly5 {
                let fin = projector.project(&u, cfg.qp_tol, QP_MAX_ITER, Some(&duals))?;
                let target = u.clone();
                (fin.point, fin.row_duals, target)
            } else {
                (u.clone(), duals.clone(), z)
            };
            let report = binding_report(set, &point, &row_duals, &target, cfg.qp_tol);
            return Ok(SolverResult {
                profile: lay.unflatten(&point),
                iterations: k + 1,
                step_norm_trace: trace,
                vi_gap: None,
                revenues: disc.revenues(&point),
                multipliers: Some(row_duals),
                binding_report: report,
                step_alpha: alpha,
                step_halvings: halvings,
            });
        }

        if k >= DIVERGENCE_WINDOW {
            let past = trace[k - DIVERGENCE_WINDOW];
            if past > 0.0 && step > DIVERGENCE_FACTOR * past {
                if halvings >= MAX_HALVINGS {
                    return Err(Error::Divergence {
                        step_alpha: alpha,
                        growth: step / past,
                        trace,
                    });
                }
                alpha *= 0.5;
                halvings += 1;
            }
        }
    }

    let last_step = trace.last().copied().unwrap_or(f64::NAN);
    Err(Error::NonConvergence {
        iterations: cfg.max_iters,
        last_step,
        trace,
    })
}

fn l2_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

fn smooth_paths(disc: &Discretization, u: &mut [f64]) -> Result<()> {
    let lay = disc.layout;
    let mut buf = vec![0.0; lay.n];
    for s in 0..lay.sellers {
        for kind in 0..2 {
            for i in 0..lay.n {
                buf[i] = u[if kind == 0 { lay.price(s, i) } else { lay.plan(s, i) }];
            }
            let fit = poly5_fit(&disc.grid, &buf)?;
            for i in 0..lay.n {
                u[if kind == 0 { lay.price(s, i) } else { lay.plan(s, i) }] = fit.fitted[i];
            }
        }
    }
    Ok(())
}

fn binding_report(
    set: &FeasibleSet,
    v: &[f64],
    row_duals: &[f64],
    target: &[f64],
    qp_tol: f64,
) -> Vec<BindingRecord> {
    let mut out = Vec::with_capacity(set.rows.len() + v.len());
    for (r, row) in set.rows.iter().enumerate() {
        let res = row.dot(v) - row.rhs;
        let bind_tol = (100.0 * qp_tol).max(1e-8 * (1.0 + row.rhs.abs()));
        let (slack, binding) = match row.kind {
            RowKind::Eq => (res.abs(), true),
            RowKind::Ineq => (-res, -res <= bind_tol),
        };
        out.push(BindingRecord {
            constraint: ConstraintRef::Row(row.tag),
            slack,
            dual: row_duals[r],
            binding,
        });
    }
    // Box duals: with raw = target - A^T y, the signed quantity raw - v is
    // the upper-bound multiplier when positive and minus the lower-bound
    // multiplier when negative.
    let mut raw = target.to_vec();
    for (r, row) in set.rows.iter().enumerate() {
        if row_duals[r] != 0.0 {
            for &(j, a) in &row.coeffs {
                raw[j] -= a * row_duals[r];
            }
        }
    }
    // The report only needs box records for decision variables, tagged by
    // their location in the layout. Reconstruct the layout from sizes.
    let dim = v.len();
    let per_seller = {
        // layout stores price block then plan block per seller
        // dim = 2 * sellers * n; recover n from the first inventory row
        let n = set
            .rows
            .iter()
            .find(|r| matches!(r.tag, RowTag::Inventory { .. }))
            .map(|r| r.coeffs.len())
            .unwrap_or(dim / 2);
        2 * n
    };
    let n = per_seller / 2;
    for j in 0..dim {
        let s = j / per_seller;
        let rem = j % per_seller;
        let (is_plan, node) = (rem >= n, rem % n);
        let signed = raw[j] - v[j];
        let bind_tol = (100.0 * qp_tol).max(1e-10 * (1.0 + v[j].abs()));
        if set.lower[j].is_finite() {
            let slack = v[j] - set.lower[j];
            let binding = slack <= bind_tol;
            out.push(BindingRecord {
                constraint: if is_plan {
                    ConstraintRef::PlanLower { seller: s, node }
                } else {
                    ConstraintRef::PriceLower { seller: s, node }
                },
                slack,
                dual: (-signed).max(0.0),
                binding,
            });
        }
        if set.upper[j].is_finite() && !is_plan {
            let slack = set.upper[j] - v[j];
            out.push(BindingRecord {
                constraint: ConstraintRef::PriceUpper { seller: s, node },
                slack,
                dual: signed.max(0.0),
                binding: slack <= bind_tol,
            });
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::feasibility::{feasibility_check, Mode};
    use crate::solver::discretize::discretize;
    use crate::solver::set::build_feasible_set;
    use crate::testutil::{single_seller_market, symmetric_market};
    use approx::assert_relative_eq;

    #[test]
    fn vi_map_swaps_prices_and_plans() {
        let d = discretize(&symmetric_market(5)).unwrap();
        let lay = d.layout;
        let mut u = vec![0.0; lay.len()];
        for s in 0..2 {
            for i in 0..5 {
                u[lay.price(s, i)] = 2.0;
                u[lay.plan(s, i)] = 3.0;
            }
        }
        let f = vi_map(&d, &u).unwrap();
        for s in 0..2 {
            for i in 0..5 {
                assert_eq!(f[lay.price(s, i)], 3.0);
                assert_eq!(f[lay.plan(s, i)], 2.0);
            }
        }
        // Zero input maps to zero.
        let z = vi_map(&d, &vec![0.0; lay.len()]).unwrap();
        assert!(z.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn vi_map_discounts_by_exp_rho_t() {
        let mut m = symmetric_market(10);
        m.rho = 1.0;
        let d = discretize(&m).unwrap();
        let lay = d.layout;
        let mut u = vec![0.0; lay.len()];
        u[lay.plan(0, 0)] = 1.0;
        let f = vi_map(&d, &u).unwrap();
        assert_relative_eq!(f[lay.price(0, 0)], (-1.0f64).exp(), max_relative = 1e-15);
    }

    #[test]
    fn single_seller_reaches_analytic_solution() {
        let market = single_seller_market(32);
        let d = discretize(&market).unwrap();
        let set = build_feasible_set(&d, Mode::Robust, Vec::new()).unwrap();
        let cfg = SolverConfig {
            eps1: 1e-8,
            ..SolverConfig::default()
        };
        let res = fixed_point_solve(&d, &set, &cfg).unwrap();
        let price = 17.474747474747474;
        let plan = 2500.0 / 9.0;
        for i in 0..32 {
            assert_relative_eq!(res.profile.prices[0][i], price, max_relative = 1e-7);
            assert_relative_eq!(res.profile.plans[0][i], plan, max_relative = 1e-7);
        }
        let viol = feasibility_check(&market, &res.profile, Mode::Robust, 1e-6).unwrap();
        assert!(viol.is_empty(), "{viol:?}");
    }

    #[test]
    fn starting_at_the_fixed_point_stops_immediately() {
        let market = single_seller_market(16);
        let d = discretize(&market).unwrap();
        let set = build_feasible_set(&d, Mode::Robust, Vec::new()).unwrap();
        let cfg = SolverConfig::default();
        let first = fixed_point_solve(&d, &set, &cfg).unwrap();
        let flat = d.layout.flatten(&first.profile);
        let again = fixed_point_solve_from(&d, &set, &cfg, &flat).unwrap();
        assert_eq!(again.iterations, 1);
        assert!(again.step_norm_trace[0] <= cfg.eps1);
    }

    #[test]
    fn symmetric_sellers_get_symmetric_equilibria() {
        let mut m = symmetric_market(12);
        m.sellers[1].inventory_k = 2500.0; // equalize
        m.sellers[1].d_min = m.sellers[0].d_min;
        let d = discretize(&m).unwrap();
        let set = build_feasible_set(&d, Mode::Robust, Vec::new()).unwrap();
        let res = fixed_point_solve(&d, &set, &SolverConfig::default()).unwrap();
        for i in 0..12 {
            assert_relative_eq!(
                res.profile.prices[0][i],
                res.profile.prices[1][i],
                epsilon = 1e-6
            );
            assert_relative_eq!(
                res.profile.plans[0][i],
                res.profile.plans[1][i],
                epsilon = 1e-6
            );
        }
    }

    #[test]
    fn two_seller_market_converges_and_binds() {
        let m = symmetric_market(16);
        let d = discretize(&m).unwrap();
        let set = build_feasible_set(&d, Mode::Robust, Vec::new()).unwrap();
        let res = fixed_point_solve(&d, &set, &SolverConfig::default()).unwrap();
        // Inventories hit exactly.
        for s in 0..2 {
            let total = m.grid.integrate(&res.profile.plans[s]).unwrap();
            assert_relative_eq!(total, m.sellers[s].inventory_k, max_relative = 1e-9);
        }
        // Demand binds or the plan rests on its floor everywhere.
        let bad = res.demand_slack_off_bound(1e-5);
        assert!(bad.is_empty(), "non-complementary nodes: {bad:?}");
        // Positive prices and plans at the solution keep pi * D > 0, the
        // pseudo-concavity witness.
        for s in 0..2 {
            for i in 0..16 {
                let prod = res.profile.prices[s][i] * res.profile.plans[s][i];
                assert!(prod > 0.0);
            }
        }
    }

    #[test]
    fn bad_config_is_rejected() {
        let cfg = SolverConfig {
            eps1: -1.0,
            ..SolverConfig::default()
        };
        assert!(cfg.validate().is_err());
    }
}
