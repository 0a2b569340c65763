use serde::Serialize;

use crate::error::{Error, Result};
use crate::feasibility::Mode;
use crate::grid::TimeGrid;
use crate::market::{MarketSpec, StrategyProfile};

/// Bijection between `(seller, kind, node)` and positions in the flat
/// decision vector. Per seller the price block comes first, then the plan
/// block: `u = [pi_0, D_0, pi_1, D_1, ...]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct DecisionLayout {
    pub sellers: usize,
    pub n: usize,
}

impl DecisionLayout {
    pub fn len(&self) -> usize {
        2 * self.sellers * self.n
    }

    #[inline]
    pub fn price(&self, s: usize, i: usize) -> usize {
        debug_assert!(s < self.sellers && i < self.n);
        s * 2 * self.n + i
    }

    #[inline]
    pub fn plan(&self, s: usize, i: usize) -> usize {
        debug_assert!(s < self.sellers && i < self.n);
        s * 2 * self.n + self.n + i
    }

    /// Inverse map: flat position to `(seller, is_plan, node)`.
    pub fn locate(&self, idx: usize) -> (usize, bool, usize) {
        debug_assert!(idx < self.len());
        let s = idx / (2 * self.n);
        let rem = idx % (2 * self.n);
        (s, rem >= self.n, rem % self.n)
    }

    pub fn flatten(&self, profile: &StrategyProfile) -> Vec<f64> {
        let mut u = vec![0.0; self.len()];
        for s in 0..self.sellers {
            for i in 0..self.n {
                u[self.price(s, i)] = profile.prices[s][i];
                u[self.plan(s, i)] = profile.plans[s][i];
            }
        }
        u
    }

    pub fn unflatten(&self, u: &[f64]) -> StrategyProfile {
        let mut prices = vec![vec![0.0; self.n]; self.sellers];
        let mut plans = vec![vec![0.0; self.n]; self.sellers];
        for s in 0..self.sellers {
            for i in 0..self.n {
                prices[s][i] = u[self.price(s, i)];
                plans[s][i] = u[self.plan(s, i)];
            }
        }
        StrategyProfile { prices, plans }
    }
}

/// Coefficient tables evaluated on the grid, plus the decision layout.
/// Everything downstream of the market model works off this struct.
#[derive(Debug, Clone)]
pub struct Discretization {
    pub layout: DecisionLayout,
    pub grid: TimeGrid,
    pub rho: f64,
    /// `exp(-rho t_i)` per node.
    pub discount: Vec<f64>,
    /// `alpha_s(t_i)`, indexed `[seller][node]`.
    pub alpha: Vec<Vec<f64>>,
    pub beta: Vec<Vec<f64>>,
    /// `gamma_sr(t_i)`, indexed `[seller][competitor][node]`; zero rows for
    /// absent edges and the diagonal.
    pub gamma: Vec<Vec<Vec<f64>>>,
    pub xi0: Vec<Vec<f64>>,
    pub tau: Vec<f64>,
    pub inventory: Vec<f64>,
    pub pi_min: Vec<f64>,
    pub pi_max: Vec<f64>,
    pub d_min: Vec<f64>,
}

impl Discretization {
    /// Demand multiplier at `(seller, node)`: worst case in robust mode,
    /// nominal otherwise.
    #[inline]
    pub fn multiplier(&self, s: usize, i: usize, mode: Mode) -> f64 {
        match mode {
            Mode::Robust => self.xi0[s][i] - self.tau[s],
            Mode::Nominal => self.xi0[s][i],
        }
    }

    pub fn seller_count(&self) -> usize {
        self.layout.sellers
    }

    /// Quadrature weights replicated over the flat layout (same weight on a
    /// node's price and plan slots).
    pub fn flat_weights(&self) -> Vec<f64> {
        let mut w = vec![0.0; self.layout.len()];
        for s in 0..self.layout.sellers {
            for i in 0..self.layout.n {
                w[self.layout.price(s, i)] = self.grid.weights[i];
                w[self.layout.plan(s, i)] = self.grid.weights[i];
            }
        }
        w
    }

    /// Discounted revenue per seller from a flat decision vector.
    pub fn revenues(&self, u: &[f64]) -> Vec<f64> {
        let lay = self.layout;
        (0..lay.sellers)
            .map(|s| {
                (0..lay.n)
                    .map(|i| {
                        self.grid.weights[i]
                            * self.discount[i]
                            * u[lay.price(s, i)]
                            * u[lay.plan(s, i)]
                    })
                    .sum()
            })
            .collect()
    }
}

/// Evaluates every coefficient path on the grid and builds the index map.
pub fn discretize(market: &MarketSpec) -> Result<Discretization> {
    market.validate()?;
    let g = market.grid.clone();
    let s_count = market.seller_count();
    let n = g.n;
    let mut alpha = Vec::with_capacity(s_count);
    let mut beta = Vec::with_capacity(s_count);
    let mut gamma = vec![vec![vec![0.0; n]; s_count]; s_count];
    let mut xi0 = Vec::with_capacity(s_count);
    for (s, p) in market.sellers.iter().enumerate() {
        alpha.push(g.nodes.iter().map(|&t| p.alpha.value(t)).collect());
        beta.push(g.nodes.iter().map(|&t| p.beta.value(t)).collect());
        for (r, path) in &p.gamma {
            for (i, &t) in g.nodes.iter().enumerate() {
                gamma[s][*r][i] = path.value(t);
            }
        }
        xi0.push(
            g.nodes
                .iter()
                .map(|&t| market.uncertainty[s].xi0.value(t))
                .collect(),
        );
    }
    let discount = g.nodes.iter().map(|&t| (-market.rho * t).exp()).collect();
    let d = Discretization {
        layout: DecisionLayout { sellers: s_count, n },
        rho: market.rho,
        discount,
        alpha,
        beta,
        gamma,
        xi0,
        tau: market.uncertainty.iter().map(|u| u.tau).collect(),
        inventory: market.sellers.iter().map(|p| p.inventory_k).collect(),
        pi_min: market.sellers.iter().map(|p| p.pi_min).collect(),
        pi_max: market.sellers.iter().map(|p| p.pi_max).collect(),
        d_min: market.sellers.iter().map(|p| p.d_min).collect(),
        grid: g,
    };
    for (s, row) in d.beta.iter().enumerate() {
        for (i, &b) in row.iter().enumerate() {
            if !b.is_finite() {
                return Err(Error::NonFinite(format!("beta table seller {s} node {i}")));
            }
        }
    }
    Ok(d)
}
