//! Shared market fixtures for unit tests.

use std::collections::BTreeMap;

use crate::grid::{AffinePath, TimeGrid};
use crate::market::{MarketSpec, SellerParams, UncertaintyModel};

/// Two sellers with identical demand coefficients (alpha = 3000,
/// beta = 180 - 4t, gamma = 36 - 2t), inventories 2500 and 3000,
/// xi0 = 3 + 0.1t, tau = 0.8 on [1, 10].
pub(crate) fn symmetric_market(n: usize) -> MarketSpec {
    let grid = TimeGrid::new(1.0, 10.0, n).unwrap();
    let seller = |other: usize, k: f64| SellerParams {
        alpha: AffinePath::constant(3000.0),
        beta: AffinePath::new(180.0, -4.0),
        gamma: BTreeMap::from([(other, AffinePath::new(36.0, -2.0))]),
        inventory_k: k,
        pi_min: 0.0,
        pi_max: 26.0,
        d_min: 1e-6 * k / 9.0,
    };
    let band = UncertaintyModel {
        xi0: AffinePath::new(3.0, 0.1),
        tau: 0.8,
    };
    MarketSpec {
        grid,
        rho: 0.0,
        sellers: vec![seller(1, 2500.0), seller(0, 3000.0)],
        uncertainty: vec![band.clone(), band],
    }
}

/// One seller, constant coefficients: alpha = 1000, beta = 50, xi0 = 3,
/// tau = 0.8, K = 2500 on [1, 10]. Its equilibrium has the closed form
/// plan = K/9, price = (alpha - plan/2.2)/beta.
pub(crate) fn single_seller_market(n: usize) -> MarketSpec {
    let grid = TimeGrid::new(1.0, 10.0, n).unwrap();
    MarketSpec {
        grid,
        rho: 0.0,
        sellers: vec![SellerParams {
            alpha: AffinePath::constant(1000.0),
            beta: AffinePath::constant(50.0),
            gamma: BTreeMap::new(),
            inventory_k: 2500.0,
            pi_min: 0.0,
            pi_max: 24.0,
            d_min: 1e-6 * 2500.0 / 9.0,
        }],
        uncertainty: vec![UncertaintyModel {
            xi0: AffinePath::constant(3.0),
            tau: 0.8,
        }],
    }
}
