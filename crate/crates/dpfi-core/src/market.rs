use std::collections::BTreeMap;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::{AffinePath, TimeGrid};

pub type SellerId = usize;

/// Demand-side and inventory parameters of one seller.
///
/// Observed demand follows the linear form with a multiplicative
/// uncertainty factor:
/// `h_s(pi; xi) = (alpha_s - beta_s * pi_s + sum_r gamma_sr * pi_r) * xi`.
#[derive(Debug, Clone, Serialize)]
pub struct SellerParams {
    /// Demand intercept (demand units).
    pub alpha: AffinePath,
    /// Own-price sensitivity (demand per price unit), positive on the grid.
    pub beta: AffinePath,
    /// Cross-price sensitivities keyed by competitor id, nonnegative.
    pub gamma: BTreeMap<SellerId, AffinePath>,
    /// Initial inventory endowment, all of it perishing at `tf`.
    pub inventory_k: f64,
    pub pi_min: f64,
    pub pi_max: f64,
    /// Strictly positive floor on planned demand.
    pub d_min: f64,
}

/// Band model for the uncertainty factor: realizations stay within
/// `|xi(t) - xi0(t)| <= tau` at every instant.
#[derive(Debug, Clone, Serialize)]
pub struct UncertaintyModel {
    pub xi0: AffinePath,
    pub tau: f64,
}

impl UncertaintyModel {
    /// Worst-case multiplier at time `t`.
    pub fn worst_multiplier(&self, t: f64) -> f64 {
        self.xi0.value(t) - self.tau
    }
}

/// A complete market instance: horizon, discounting, sellers and their
/// uncertainty models. Immutable after validation; operations are pure.
#[derive(Debug, Clone, Serialize)]
pub struct MarketSpec {
    pub grid: TimeGrid,
    /// Discount rate in `exp(-rho t)`.
    pub rho: f64,
    pub sellers: Vec<SellerParams>,
    /// One uncertainty model per seller, same order as `sellers`.
    pub uncertainty: Vec<UncertaintyModel>,
}

impl MarketSpec {
    /// Validates structural invariants. Economic assumptions have their own
    /// reported checker in [`crate::assumptions::check_assumptions`].
    pub fn validate(&self) -> Result<()> {
        let s_count = self.sellers.len();
        if s_count == 0 {
            return Err(Error::InvalidMarket("at least one seller required".into()));
        }
        if self.uncertainty.len() != s_count {
            return Err(Error::InvalidMarket(format!(
                "{} uncertainty models for {} sellers",
                self.uncertainty.len(),
                s_count
            )));
        }
        if !self.rho.is_finite() || self.rho < 0.0 {
            return Err(Error::InvalidMarket(format!(
                "discount rate must be finite and >= 0, got {}",
                self.rho
            )));
        }
        for (s, p) in self.sellers.iter().enumerate() {
            if !(p.inventory_k > 0.0) {
                return Err(Error::InvalidMarket(format!(
                    "seller {s}: inventory must be positive, got {}",
                    p.inventory_k
                )));
            }
            if !(p.pi_min >= 0.0 && p.pi_min < p.pi_max) {
                return Err(Error::InvalidMarket(format!(
                    "seller {s}: price box requires 0 <= pi_min < pi_max, got [{}, {}]",
                    p.pi_min, p.pi_max
                )));
            }
            if !(p.d_min > 0.0) {
                return Err(Error::InvalidMarket(format!(
                    "seller {s}: d_min must be strictly positive, got {}",
                    p.d_min
                )));
            }
            for id in p.gamma.keys() {
                if *id >= s_count || *id == s {
                    return Err(Error::InvalidMarket(format!(
                        "seller {s}: gamma references seller {id}"
                    )));
                }
            }
            for v in [p.alpha.a, p.alpha.b, p.beta.a, p.beta.b, p.inventory_k] {
                if !v.is_finite() {
                    return Err(Error::NonFinite(format!("seller {s} parameters")));
                }
            }
        }
        for (s, u) in self.uncertainty.iter().enumerate() {
            if !(u.tau >= 0.0) || !u.tau.is_finite() {
                return Err(Error::InvalidMarket(format!(
                    "seller {s}: tau must be finite and >= 0, got {}",
                    u.tau
                )));
            }
        }
        Ok(())
    }

    pub fn seller_count(&self) -> usize {
        self.sellers.len()
    }

    fn check_seller(&self, s: SellerId) -> Result<()> {
        if s >= self.sellers.len() {
            return Err(Error::UnknownSeller(s));
        }
        Ok(())
    }

    /// Base demand factor `alpha_s(t) - beta_s(t) pi_s + sum gamma_sr(t) pi_r`.
    pub fn base_factor(&self, s: SellerId, prices_at_t: &[f64], t: f64) -> Result<f64> {
        self.check_seller(s)?;
        if prices_at_t.len() != self.sellers.len() {
            return Err(Error::ShapeMismatch {
                expected: self.sellers.len(),
                got: prices_at_t.len(),
            });
        }
        if !t.is_finite() || prices_at_t.iter().any(|p| !p.is_finite()) {
            return Err(Error::NonFinite("base factor inputs".into()));
        }
        let p = &self.sellers[s];
        let mut base = p.alpha.value(t) - p.beta.value(t) * prices_at_t[s];
        for (r, g) in &p.gamma {
            base += g.value(t) * prices_at_t[*r];
        }
        Ok(base)
    }
}

/// Observed demand for seller `s` at posted prices and realization `xi`.
///
/// Total function: it may be negative when the own price exceeds the choke
/// price; feasibility checks and the simulator clamp where the model says so.
pub fn eval_observed_demand(
    market: &MarketSpec,
    s: SellerId,
    prices_at_t: &[f64],
    xi: f64,
    t: f64,
) -> Result<f64> {
    if !xi.is_finite() {
        return Err(Error::NonFinite("xi".into()));
    }
    Ok(market.base_factor(s, prices_at_t, t)? * xi)
}

/// Magnitude of the demand gradient with respect to the uncertainty factor,
/// `|alpha - beta pi_s + sum gamma pi_r|`. Increasing in own price beyond the
/// choke point, which is what makes the robust margin monotone.
pub fn grad_xi_magnitude(
    market: &MarketSpec,
    s: SellerId,
    prices_at_t: &[f64],
    t: f64,
) -> Result<f64> {
    Ok(market.base_factor(s, prices_at_t, t)?.abs())
}

/// Largest planned demand that stays robust-feasible at time `t`:
/// `h(pi; xi0(t)) - tau * |grad_xi h|`, the safety-margin tightening applied
/// instant by instant.
pub fn robust_demand_bound(
    market: &MarketSpec,
    s: SellerId,
    prices_at_t: &[f64],
    t: f64,
) -> Result<f64> {
    let base = market.base_factor(s, prices_at_t, t)?;
    let u = &market.uncertainty[s];
    Ok(base * u.xi0.value(t) - u.tau * base.abs())
}

/// One price path and one planned-demand path per seller on the shared grid.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StrategyProfile {
    pub prices: Vec<Vec<f64>>,
    pub plans: Vec<Vec<f64>>,
}

impl StrategyProfile {
    pub fn validate_shape(&self, market: &MarketSpec) -> Result<()> {
        let (s_count, n) = (market.seller_count(), market.grid.n);
        if self.prices.len() != s_count {
            return Err(Error::ShapeMismatch {
                expected: s_count,
                got: self.prices.len(),
            });
        }
        if self.plans.len() != s_count {
            return Err(Error::ShapeMismatch {
                expected: s_count,
                got: self.plans.len(),
            });
        }
        for path in self.prices.iter().chain(self.plans.iter()) {
            if path.len() != n {
                return Err(Error::ShapeMismatch {
                    expected: n,
                    got: path.len(),
                });
            }
        }
        Ok(())
    }
}

/// Discounted revenue per seller: trapezoidal quadrature of
/// `exp(-rho t) * pi_s(t) * D_s(t)`.
pub fn discounted_revenue(market: &MarketSpec, profile: &StrategyProfile) -> Result<Vec<f64>> {
    profile.validate_shape(market)?;
    let g = &market.grid;
    let mut out = Vec::with_capacity(market.seller_count());
    for s in 0..market.seller_count() {
        let mut acc = 0.0;
        for i in 0..g.n {
            acc += g.weights[i]
                * (-market.rho * g.nodes[i]).exp()
                * profile.prices[s][i]
                * profile.plans[s][i];
        }
        out.push(acc);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testutil::symmetric_market;
    use approx::assert_relative_eq;

    #[test]
    fn observed_demand_matches_hand_arithmetic() {
        let m = symmetric_market(10);
        // At t = 1: beta = 176, gamma = 34, prices (10, 10), xi = 3.1:
        // (3000 - 1760 + 340) * 3.1 = 1580 * 3.1 = 4898.
        let d = eval_observed_demand(&m, 0, &[10.0, 10.0], 3.1, 1.0).unwrap();
        assert_relative_eq!(d, 4898.0, max_relative = 1e-12);
    }

    #[test]
    fn observed_demand_zero_cases() {
        let m = symmetric_market(10);
        assert_eq!(
            eval_observed_demand(&m, 0, &[10.0, 10.0], 0.0, 1.0).unwrap(),
            0.0
        );
        // Choke price with competitor at 10: 176 pi = 3000 + 340.
        let choke = (3000.0 + 340.0) / 176.0;
        let d = eval_observed_demand(&m, 0, &[choke, 10.0], 2.7, 1.0).unwrap();
        assert!(d.abs() < 1e-9);
    }

    #[test]
    fn observed_demand_rejects_bad_inputs() {
        let m = symmetric_market(10);
        assert!(matches!(
            eval_observed_demand(&m, 7, &[10.0, 10.0], 1.0, 1.0),
            Err(Error::UnknownSeller(7))
        ));
        assert!(eval_observed_demand(&m, 0, &[f64::NAN, 10.0], 1.0, 1.0).is_err());
        assert!(eval_observed_demand(&m, 0, &[10.0], 1.0, 1.0).is_err());
    }

    #[test]
    fn grad_xi_magnitude_examples() {
        let m = symmetric_market(10);
        assert_relative_eq!(
            grad_xi_magnitude(&m, 0, &[10.0, 10.0], 1.0).unwrap(),
            1580.0
        );
        let choke = (3000.0 + 340.0) / 176.0;
        assert!(grad_xi_magnitude(&m, 0, &[choke, 10.0], 1.0).unwrap() < 1e-9);
        // Strictly increasing above the choke price.
        let lo = grad_xi_magnitude(&m, 0, &[choke + 1.0, 10.0], 1.0).unwrap();
        let hi = grad_xi_magnitude(&m, 0, &[choke + 2.0, 10.0], 1.0).unwrap();
        assert!(hi > lo);
    }

    #[test]
    fn robust_bound_examples() {
        let m = symmetric_market(10);
        // 1580 * 3.1 - 0.8 * 1580 = 1580 * 2.3 = 3634.
        assert_relative_eq!(
            robust_demand_bound(&m, 0, &[10.0, 10.0], 1.0).unwrap(),
            3634.0,
            max_relative = 1e-12
        );
        // tau = 0 collapses the margin.
        let mut m0 = m.clone();
        m0.uncertainty[0].tau = 0.0;
        let b = robust_demand_bound(&m0, 0, &[10.0, 10.0], 1.0).unwrap();
        let h = eval_observed_demand(&m0, 0, &[10.0, 10.0], 3.1, 1.0).unwrap();
        assert_relative_eq!(b, h);
        // Zero base factor kills both terms.
        let choke = (3000.0 + 340.0) / 176.0;
        assert!(robust_demand_bound(&m, 0, &[choke, 10.0], 1.0)
            .unwrap()
            .abs()
            < 1e-9);
    }

    #[test]
    fn robust_dominance_sampled() {
        // For any xi within the band, the bound never exceeds observed demand.
        let m = symmetric_market(10);
        let mut state = 0x9e3779b97f4a7c15u64;
        let mut next = move || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (state >> 11) as f64 / (1u64 << 53) as f64
        };
        for _ in 0..10_000 {
            let t = 1.0 + 9.0 * next();
            let prices = [26.0 * next(), 26.0 * next()];
            let u = &m.uncertainty[0];
            let xi = u.xi0.value(t) + u.tau * (2.0 * next() - 1.0);
            let bound = robust_demand_bound(&m, 0, &prices, t).unwrap();
            let seen = eval_observed_demand(&m, 0, &prices, xi, t).unwrap();
            assert!(
                bound <= seen + 1e-12 * seen.abs().max(1.0),
                "bound {bound} > observed {seen} at t={t} prices={prices:?} xi={xi}"
            );
        }
    }

    #[test]
    fn revenue_constant_integrand() {
        let m = symmetric_market(11);
        let profile = StrategyProfile {
            prices: vec![vec![2.0; 11], vec![2.0; 11]],
            plans: vec![vec![3.0; 11], vec![3.0; 11]],
        };
        let rev = discounted_revenue(&m, &profile).unwrap();
        assert_relative_eq!(rev[0], 54.0, max_relative = 1e-13);
        assert_relative_eq!(rev[1], 54.0, max_relative = 1e-13);
    }

    #[test]
    fn revenue_zero_plans() {
        let m = symmetric_market(5);
        let profile = StrategyProfile {
            prices: vec![vec![9.0; 5], vec![9.0; 5]],
            plans: vec![vec![0.0; 5], vec![0.0; 5]],
        };
        assert_eq!(discounted_revenue(&m, &profile).unwrap(), vec![0.0, 0.0]);
    }

    #[test]
    fn revenue_discounted_exponential() {
        // rho = 1, pi = D = 1 on [0,1]: integral of exp(-t) = 1 - e^{-1}.
        let grid = TimeGrid::new(0.0, 1.0, 2001).unwrap();
        let m = MarketSpec {
            grid,
            rho: 1.0,
            sellers: vec![SellerParams {
                alpha: AffinePath::constant(10.0),
                beta: AffinePath::constant(1.0),
                gamma: BTreeMap::new(),
                inventory_k: 1.0,
                pi_min: 0.0,
                pi_max: 5.0,
                d_min: 1e-9,
            }],
            uncertainty: vec![UncertaintyModel {
                xi0: AffinePath::constant(3.0),
                tau: 0.0,
            }],
        };
        let profile = StrategyProfile {
            prices: vec![vec![1.0; 2001]],
            plans: vec![vec![1.0; 2001]],
        };
        let rev = discounted_revenue(&m, &profile).unwrap();
        let exact = 1.0 - (-1.0f64).exp();
        assert!((rev[0] - exact).abs() < 1e-6, "quadrature error too large");
    }

    #[test]
    fn revenue_is_bilinear() {
        let m = symmetric_market(9);
        let profile = StrategyProfile {
            prices: vec![
                (0..9).map(|i| 10.0 + i as f64).collect(),
                (0..9).map(|i| 12.0 + 0.5 * i as f64).collect(),
            ],
            plans: vec![
                (0..9).map(|i| 200.0 + 3.0 * i as f64).collect(),
                (0..9).map(|i| 250.0 - 2.0 * i as f64).collect(),
            ],
        };
        let base = discounted_revenue(&m, &profile).unwrap();
        let mut doubled_prices = profile.clone();
        for p in &mut doubled_prices.prices {
            for v in p.iter_mut() {
                *v *= 2.0;
            }
        }
        let mut doubled_plans = profile.clone();
        for p in &mut doubled_plans.plans {
            for v in p.iter_mut() {
                *v *= 2.0;
            }
        }
        for (scaled, label) in [(doubled_prices, "prices"), (doubled_plans, "plans")] {
            let rev = discounted_revenue(&m, &scaled).unwrap();
            for s in 0..2 {
                assert_relative_eq!(rev[s], 2.0 * base[s], max_relative = 1e-13);
            }
            let _ = label;
        }
    }

    #[test]
    fn revenue_shape_mismatch() {
        let m = symmetric_market(5);
        let profile = StrategyProfile {
            prices: vec![vec![1.0; 4], vec![1.0; 5]],
            plans: vec![vec![1.0; 5], vec![1.0; 5]],
        };
        assert!(discounted_revenue(&m, &profile).is_err());
    }
}
