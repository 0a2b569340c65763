use serde::Serialize;

use crate::error::Result;
use crate::market::{eval_observed_demand, robust_demand_bound, MarketSpec, StrategyProfile};

/// Which demand inequality a profile is checked against: the nominal bound
/// `D <= h(pi; xi0)` or the safety-margin bound `D <= h - tau |grad_xi h|`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Mode {
    Nominal,
    Robust,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ConstraintId {
    PriceLower,
    PriceUpper,
    PlanLower,
    Inventory,
    Demand,
}

/// One violated constraint: which, where, and by how much (absolute).
#[derive(Debug, Clone, Serialize)]
pub struct Violation {
    pub constraint: ConstraintId,
    pub seller: usize,
    /// Grid node index; `None` for the per-seller inventory equality.
    pub node: Option<usize>,
    pub amount: f64,
}

/// Checks boxes, the demand floor, inventory equalities and the demand
/// inequalities nodewise. Returns an empty list iff the profile is feasible
/// within `tol` everywhere.
pub fn feasibility_check(
    market: &MarketSpec,
    profile: &StrategyProfile,
    mode: Mode,
    tol: f64,
) -> Result<Vec<Violation>> {
    profile.validate_shape(market)?;
    let g = &market.grid;
    let mut out = Vec::new();
    for s in 0..market.seller_count() {
        let p = &market.sellers[s];
        let mut prices_at = vec![0.0; market.seller_count()];
        for i in 0..g.n {
            let t = g.nodes[i];
            let price = profile.prices[s][i];
            let plan = profile.plans[s][i];
            if price < p.pi_min - tol {
                out.push(Violation {
                    constraint: ConstraintId::PriceLower,
                    seller: s,
                    node: Some(i),
                    amount: p.pi_min - price,
                });
            }
            if price > p.pi_max + tol {
                out.push(Violation {
                    constraint: ConstraintId::PriceUpper,
                    seller: s,
                    node: Some(i),
                    amount: price - p.pi_max,
                });
            }
            if plan < p.d_min - tol {
                out.push(Violation {
                    constraint: ConstraintId::PlanLower,
                    seller: s,
                    node: Some(i),
                    amount: p.d_min - plan,
                });
            }
            for (r, path) in profile.prices.iter().enumerate() {
                prices_at[r] = path[i];
            }
            let bound = match mode {
                Mode::Robust => robust_demand_bound(market, s, &prices_at, t)?,
                Mode::Nominal => {
                    let xi0 = market.uncertainty[s].xi0.value(t);
                    eval_observed_demand(market, s, &prices_at, xi0, t)?
                }
            };
            if plan > bound + tol {
                out.push(Violation {
                    constraint: ConstraintId::Demand,
                    seller: s,
                    node: Some(i),
                    amount: plan - bound,
                });
            }
        }
        let total = g.integrate(&profile.plans[s])?;
        if (total - p.inventory_k).abs() > tol {
            out.push(Violation {
                constraint: ConstraintId::Inventory,
                seller: s,
                node: None,
                amount: (total - p.inventory_k).abs(),
            });
        }
    }
    Ok(out)
}
