//! Discretization, feasible-set assembly, the projection fixed-point
//! iteration and its certificates.

pub mod analytic;
pub mod best_response;
pub mod discretize;
pub mod fixed_point;
pub mod gap;
pub mod oracle;
pub mod poly5;
pub mod qp;
pub mod set;

pub use analytic::analytic_single_seller;
pub use best_response::{best_response, BestResponse};
pub use discretize::{discretize, DecisionLayout, Discretization};
pub use fixed_point::{
    default_step_alpha, fixed_point_solve, fixed_point_solve_from, vi_map, BindingRecord,
    ConstraintRef, Representation, SolverConfig, SolverResult,
};
pub use gap::vi_gap;
pub use oracle::enumerate_projection;
pub use poly5::{poly5_fit, Poly5Fit};
pub use qp::{kkt_residual, project, Projection, Projector};
pub use set::{build_feasible_set, interior_candidate, FeasibleSet, Row, RowKind, RowTag};

use crate::error::{Error, Result};
use crate::feasibility::Mode;
use crate::market::MarketSpec;
use crate::rules::{response_rule_rows, static_rule_rows, PricingRule};

const LAG_MAX_ROUNDS: usize = 60;

/// Top-level solve: discretizes the market, assembles the shared feasible
/// set in the requested mode (plus any pricing-rule rows) and runs the
/// projection fixed point. Response rules freeze their time-shifted price
/// at the previous outer solution and iterate until the shifted prices are
/// self-consistent.
pub fn solve_equilibrium(
    market: &MarketSpec,
    mode: Mode,
    rules: &[PricingRule],
    cfg: &SolverConfig,
) -> Result<SolverResult> {
    let disc = discretize(market)?;
    for rule in rules {
        rule.validate(disc.seller_count())?;
        rule.shift_index(&disc.grid)?;
    }
    let static_rows = static_rule_rows(rules, &disc)?;
    let lag_rules: Vec<&PricingRule> = rules.iter().filter(|r| r.needs_lag_iteration()).collect();

    if lag_rules.is_empty() {
        let set = build_feasible_set(&disc, mode, static_rows)?;
        let mut result = fixed_point_solve(&disc, &set, cfg)?;
        if cfg.gap_check {
            let u = disc.layout.flatten(&result.profile);
            result.vi_gap = Some(vi_gap(&disc, &set, &u)?);
        }
        return Ok(result);
    }

    // Implicit-lag outer loop: rows are rebuilt from the previous round's
    // prices until the shifted entries agree.
    let lay = disc.layout;
    let start = interior_candidate(&disc, mode)?;
    let mut prev_prices = lay.unflatten(&start).prices;
    let mut warm = start;
    let mut consistency = f64::INFINITY;
    for _round in 0..LAG_MAX_ROUNDS {
        let mut rows = static_rows.clone();
        for rule in &lag_rules {
            rows.extend(response_rule_rows(rule, &disc, &prev_prices, mode)?);
        }
        let set = build_feasible_set(&disc, mode, rows)?;
        let mut result = fixed_point_solve_from(&disc, &set, cfg, &warm)?;

        consistency = 0.0;
        for rule in &lag_rules {
            let d = rule.shift_index(&disc.grid)?;
            for s in 0..lay.sellers {
                for j in d..lay.n {
                    let diff = (result.profile.prices[s][j] - prev_prices[s][j]).abs();
                    consistency = consistency.max(diff);
                }
            }
        }
        if consistency <= cfg.eps1 {
            if cfg.gap_check {
                let u = lay.flatten(&result.profile);
                result.vi_gap = Some(vi_gap(&disc, &set, &u)?);
            }
            return Ok(result);
        }
        prev_prices = result.profile.prices.clone();
        warm = lay.flatten(&result.profile);
    }
    Err(Error::LagNonConvergence {
        outer_iterations: LAG_MAX_ROUNDS,
        consistency,
    })
}
