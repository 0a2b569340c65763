use crate::error::{Error, Result};
use crate::feasibility::Mode;
use crate::market::StrategyProfile;
use crate::solver::discretize::Discretization;

/// One seller's verified best response against frozen competitor prices.
#[derive(Debug, Clone)]
pub struct BestResponse {
    pub prices: Vec<f64>,
    pub plans: Vec<f64>,
    pub objective: f64,
}

/// Solves seller `s`'s discretized best response with competitors frozen,
/// used only to verify equilibria.
///
/// The objective is bilinear, so the solve alternates two exact convex
/// steps: plans given prices reduce to a continuous knapsack, prices given
/// plans to a nodewise clamp onto the binding manifold. Three deterministic
/// starts guard against stalling at a non-optimal stationary point.
pub fn best_response(
    disc: &Discretization,
    s: usize,
    fixed: &StrategyProfile,
    mode: Mode,
    rel_tol: f64,
) -> Result<BestResponse> {
    let lay = disc.layout;
    if s >= lay.sellers {
        return Err(Error::UnknownSeller(s));
    }
    let n = lay.n;
    // Constant part of the base factor: alpha + sum_r gamma * pi_r.
    let cross: Vec<f64> = (0..n)
        .map(|i| {
            let mut c = disc.alpha[s][i];
            for r in 0..lay.sellers {
                if r != s {
                    c += disc.gamma[s][r][i] * fixed.prices[r][i];
                }
            }
            c
        })
        .collect();
    let mult: Vec<f64> = (0..n).map(|i| disc.multiplier(s, i, mode)).collect();

    let mid_price = 0.5 * (disc.pi_min[s] + disc.pi_max[s]);
    let flat_plan = disc.inventory[s] / disc.grid.horizon();
    let binding_for_flat: Vec<f64> = (0..n)
        .map(|i| {
            ((cross[i] - flat_plan / mult[i]) / disc.beta[s][i])
                .clamp(disc.pi_min[s], disc.pi_max[s])
        })
        .collect();
    let starts: [Vec<f64>; 3] = [
        fixed.prices[s].clone(),
        binding_for_flat,
        vec![mid_price; n],
    ];

    let mut best: Option<BestResponse> = None;
    let mut failures = Vec::new();
    for (k, start) in starts.iter().enumerate() {
        match alternate(disc, s, &cross, &mult, start, rel_tol) {
            Ok(candidate) => {
                if best
                    .as_ref()
                    .map_or(true, |b| candidate.objective > b.objective)
                {
                    best = Some(candidate);
                }
            }
            Err(e) => failures.push(format!("start {k}: {e}")),
        }
    }
    best.ok_or_else(|| Error::BestResponse(failures.join("; ")))
}

fn alternate(
    disc: &Discretization,
    s: usize,
    cross: &[f64],
    mult: &[f64],
    start_prices: &[f64],
    rel_tol: f64,
) -> Result<BestResponse> {
    const MAX_SWEEPS: usize = 500;
    let n = disc.layout.n;
    let mut prices = start_prices.to_vec();
    let mut plans = vec![disc.d_min[s]; n];
    let mut last_obj = f64::NEG_INFINITY;
    for _ in 0..MAX_SWEEPS {
        plan_step(disc, s, cross, mult, &prices, &mut plans)?;
        price_step(disc, s, cross, mult, &plans, &mut prices)?;
        let obj = objective(disc, &prices, &plans);
        if obj - last_obj <= rel_tol * (1.0 + obj.abs()) {
            return Ok(BestResponse {
                prices,
                plans,
                objective: obj,
            });
        }
        last_obj = obj;
    }
    Err(Error::BestResponse(format!(
        "alternation still improving after {MAX_SWEEPS} sweeps (objective {last_obj})"
    )))
}

/// Plans given prices: maximize `sum w e pi D` under the inventory equality
/// and `d_min <= D <= cap`. Solved greedily by discounted price.
fn plan_step(
    disc: &Discretization,
    s: usize,
    cross: &[f64],
    mult: &[f64],
    prices: &[f64],
    plans: &mut [f64],
) -> Result<()> {
    let n = disc.layout.n;
    let w = &disc.grid.weights;
    let d_min = disc.d_min[s];
    let caps: Vec<f64> = (0..n)
        .map(|i| (cross[i] - disc.beta[s][i] * prices[i]) * mult[i])
        .collect();
    let mut budget = disc.inventory[s];
    for i in 0..n {
        if caps[i] < d_min - 1e-9 {
            return Err(Error::BestResponse(format!(
                "demand cap {} below the floor {d_min} at node {i}",
                caps[i]
            )));
        }
        plans[i] = d_min;
        budget -= w[i] * d_min;
    }
    if budget < -1e-9 * disc.inventory[s] {
        return Err(Error::BestResponse(
            "inventory below the integrated demand floor".into(),
        ));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        let ra = disc.discount[a] * prices[a];
        let rb = disc.discount[b] * prices[b];
        rb.partial_cmp(&ra).unwrap().then(a.cmp(&b))
    });
    for &i in &order {
        if budget <= 0.0 {
            break;
        }
        let room = (caps[i].max(d_min) - d_min) * w[i];
        let take = room.min(budget);
        plans[i] = d_min + take / w[i];
        budget -= take;
    }
    if budget > 1e-7 * disc.inventory[s] {
        return Err(Error::BestResponse(format!(
            "demand caps cannot absorb the inventory (left over {budget})"
        )));
    }
    Ok(())
}

/// Prices given plans: revenue is increasing in price until the demand
/// bound, so clamp onto the binding manifold nodewise.
fn price_step(
    disc: &Discretization,
    s: usize,
    cross: &[f64],
    mult: &[f64],
    plans: &[f64],
    prices: &mut [f64],
) -> Result<()> {
    let n = disc.layout.n;
    for i in 0..n {
        let cap_price = (cross[i] - plans[i] / mult[i]) / disc.beta[s][i];
        if cap_price < disc.pi_min[s] - 1e-9 {
            return Err(Error::BestResponse(format!(
                "plan {} infeasible at the price floor (node {i})",
                plans[i]
            )));
        }
        prices[i] = cap_price.min(disc.pi_max[s]).max(disc.pi_min[s]);
    }
    Ok(())
}

fn objective(disc: &Discretization, prices: &[f64], plans: &[f64]) -> f64 {
    let n = disc.layout.n;
    (0..n)
        .map(|i| disc.grid.weights[i] * disc.discount[i] * prices[i] * plans[i])
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solver::analytic::analytic_single_seller;
    use crate::solver::discretize::discretize;
    use crate::testutil::single_seller_market;
    use approx::assert_relative_eq;

    #[test]
    fn single_seller_matches_the_closed_form() {
        let market = single_seller_market(32);
        let d = discretize(&market).unwrap();
        let fixed = StrategyProfile {
            prices: vec![vec![10.0; 32]],
            plans: vec![vec![100.0; 32]],
        };
        let br = best_response(&d, 0, &fixed, Mode::Robust, 1e-12).unwrap();
        let (price, plan) = analytic_single_seller(1000.0, 50.0, 2.2, 2500.0, 9.0).unwrap();
        for i in 0..32 {
            assert_relative_eq!(br.prices[i], price, max_relative = 1e-4);
            assert_relative_eq!(br.plans[i], plan, max_relative = 1e-4);
        }
        let expected_obj = price * plan * 9.0;
        assert_relative_eq!(br.objective, expected_obj, max_relative = 1e-4);
    }

    #[test]
    fn widening_the_margin_cannot_help() {
        // A larger safety margin shrinks the feasible set, so the verified
        // best-response revenue weakly decreases.
        let market = single_seller_market(16);
        let fixed = StrategyProfile {
            prices: vec![vec![10.0; 16]],
            plans: vec![vec![100.0; 16]],
        };
        let mut last = f64::INFINITY;
        for tau in [0.0, 0.4, 0.8] {
            let mut m = market.clone();
            m.uncertainty[0].tau = tau;
            let d = discretize(&m).unwrap();
            let br = best_response(&d, 0, &fixed, Mode::Robust, 1e-12).unwrap();
            assert!(
                br.objective <= last + 1e-9 * last.abs(),
                "objective rose from {last} to {} as tau grew to {tau}",
                br.objective
            );
            last = br.objective;
        }
    }

    #[test]
    fn unknown_seller_is_an_error() {
        let market = single_seller_market(8);
        let d = discretize(&market).unwrap();
        let fixed = StrategyProfile {
            prices: vec![vec![10.0; 8]],
            plans: vec![vec![100.0; 8]],
        };
        assert!(matches!(
            best_response(&d, 3, &fixed, Mode::Robust, 1e-10),
            Err(Error::UnknownSeller(3))
        ));
    }
}
