//! Dual-time-scale pricing rules as linear constraint rows.
//!
//! Price changes take effect after a lag `delta`, an exact multiple of the
//! grid spacing. The time-shifted price in the response rule is frozen at
//! the previous outer iterate (the implicit-lag treatment), which keeps
//! every generated row linear in the current decision variables.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::feasibility::Mode;
use crate::grid::TimeGrid;
use crate::solver::discretize::Discretization;
use crate::solver::set::{Row, RowKind, RowTag};

#[derive(Debug, Clone, Serialize)]
pub enum PricingRule {
    /// `pi_s(t + delta) = pi_s(t) + sigma_s [h_s(pi(t)) - D_s(t)]`.
    Response {
        delta: f64,
        /// Response strength per seller.
        sigma: Vec<f64>,
    },
    /// `pi_s(t + delta) >= pi_s(t)`.
    Monotone { delta: f64 },
    /// `pi_s(t + delta) <= (1/(t - t0)) sum_k integral of pi_k over [t0, t]`;
    /// nodes with `t - t0 < epsilon_start` are skipped to avoid the
    /// singular early window.
    MovingAverage { delta: f64, epsilon_start: f64 },
}

impl PricingRule {
    pub fn delta(&self) -> f64 {
        match self {
            PricingRule::Response { delta, .. }
            | PricingRule::Monotone { delta }
            | PricingRule::MovingAverage { delta, .. } => *delta,
        }
    }

    /// The lag as a node count; `delta` must be a positive exact multiple of
    /// the grid spacing.
    pub fn shift_index(&self, grid: &TimeGrid) -> Result<usize> {
        let delta = self.delta();
        if !(delta > 0.0) {
            return Err(Error::InvalidRule(format!(
                "delta must be positive, got {delta}"
            )));
        }
        let ratio = delta / grid.dt();
        let rounded = ratio.round();
        if (ratio - rounded).abs() > 1e-9 * ratio.max(1.0) || rounded < 1.0 {
            return Err(Error::InvalidRule(format!(
                "delta = {delta} is not an integer multiple of the grid spacing {}",
                grid.dt()
            )));
        }
        Ok(rounded as usize)
    }

    pub fn validate(&self, sellers: usize) -> Result<()> {
        match self {
            PricingRule::Response { sigma, .. } => {
                if sigma.len() != sellers {
                    return Err(Error::InvalidRule(format!(
                        "response rule carries {} sigmas for {sellers} sellers",
                        sigma.len()
                    )));
                }
                if sigma.iter().any(|s| !(*s > 0.0)) {
                    return Err(Error::InvalidRule("sigma must be positive".into()));
                }
            }
            PricingRule::MovingAverage { epsilon_start, .. } => {
                if !(*epsilon_start > 0.0) {
                    return Err(Error::InvalidRule(
                        "epsilon_start must be positive".into(),
                    ));
                }
            }
            PricingRule::Monotone { .. } => {}
        }
        Ok(())
    }

    /// True when the rule's rows depend on the previous iterate's prices.
    pub fn needs_lag_iteration(&self) -> bool {
        matches!(self, PricingRule::Response { .. })
    }
}

/// Equality rows for the price-response rule with the shifted price frozen
/// at `prev_prices`. For seller `s` and node `i` (with `i + d` on the grid):
/// `(sigma beta m - 1) pi_{s,i} - sigma sum_r gamma m pi_{r,i}
///  + sigma D_{s,i} = sigma alpha m - prev[s][i + d]`.
pub fn response_rule_rows(
    rule: &PricingRule,
    disc: &Discretization,
    prev_prices: &[Vec<f64>],
    mode: Mode,
) -> Result<Vec<Row>> {
    let PricingRule::Response { sigma, .. } = rule else {
        return Err(Error::InvalidRule("expected a response rule".into()));
    };
    rule.validate(disc.seller_count())?;
    let d = rule.shift_index(&disc.grid)?;
    let lay = disc.layout;
    let mut rows = Vec::new();
    for s in 0..lay.sellers {
        if prev_prices[s].len() != lay.n {
            return Err(Error::ShapeMismatch {
                expected: lay.n,
                got: prev_prices[s].len(),
            });
        }
        let sg = sigma[s];
        for i in 0..lay.n {
            if i + d > lay.n - 1 {
                break;
            }
            let m = disc.multiplier(s, i, mode);
            let mut coeffs = vec![
                (lay.price(s, i), sg * disc.beta[s][i] * m - 1.0),
                (lay.plan(s, i), sg),
            ];
            for r in 0..lay.sellers {
                if r != s && disc.gamma[s][r][i] != 0.0 {
                    coeffs.push((lay.price(r, i), -sg * disc.gamma[s][r][i] * m));
                }
            }
            rows.push(Row {
                kind: RowKind::Eq,
                tag: RowTag::Response { seller: s, node: i },
                coeffs,
                rhs: sg * disc.alpha[s][i] * m - prev_prices[s][i + d],
            });
        }
    }
    Ok(rows)
}

/// Inequality rows `pi_{s,i} - pi_{s,i+d} <= 0`: prices may only move up
/// across the lag. Purely in current variables.
pub fn monotone_rule_rows(rule: &PricingRule, disc: &Discretization) -> Result<Vec<Row>> {
    if !matches!(rule, PricingRule::Monotone { .. }) {
        return Err(Error::InvalidRule("expected a monotone rule".into()));
    }
    let d = rule.shift_index(&disc.grid)?;
    let lay = disc.layout;
    let mut rows = Vec::new();
    for s in 0..lay.sellers {
        for i in 0..lay.n {
            if i + d > lay.n - 1 {
                break;
            }
            rows.push(Row {
                kind: RowKind::Ineq,
                tag: RowTag::Monotone { seller: s, node: i },
                coeffs: vec![(lay.price(s, i), 1.0), (lay.price(s, i + d), -1.0)],
                rhs: 0.0,
            });
        }
    }
    Ok(rows)
}

/// Inequality rows capping the lagged price by the market's running average
/// price (competitor integrals summed without dividing by the seller
/// count). Fully linear in current variables, so no lag substitution.
pub fn moving_average_rows(rule: &PricingRule, disc: &Discretization) -> Result<Vec<Row>> {
    let PricingRule::MovingAverage { epsilon_start, .. } = rule else {
        return Err(Error::InvalidRule("expected a moving-average rule".into()));
    };
    rule.validate(disc.seller_count())?;
    let d = rule.shift_index(&disc.grid)?;
    let lay = disc.layout;
    let g = &disc.grid;
    let mut rows = Vec::new();
    for s in 0..lay.sellers {
        for i in 0..lay.n {
            if i + d > lay.n - 1 {
                break;
            }
            let elapsed = g.nodes[i] - g.t0;
            if elapsed < *epsilon_start {
                continue;
            }
            let pw = g.prefix_weights(i);
            let mut acc: BTreeMap<usize, f64> = BTreeMap::new();
            acc.insert(lay.price(s, i + d), 1.0);
            for k in 0..lay.sellers {
                for (j, &w) in pw.iter().enumerate() {
                    *acc.entry(lay.price(k, j)).or_insert(0.0) += -w / elapsed;
                }
            }
            rows.push(Row {
                kind: RowKind::Ineq,
                tag: RowTag::MovingAverage { seller: s, node: i },
                coeffs: acc.into_iter().collect(),
                rhs: 0.0,
            });
        }
    }
    Ok(rows)
}

/// Rows for every rule that does not need the implicit-lag outer loop.
pub fn static_rule_rows(rules: &[PricingRule], disc: &Discretization) -> Result<Vec<Row>> {
    let mut rows = Vec::new();
    for rule in rules {
        match rule {
            PricingRule::Monotone { .. } => rows.extend(monotone_rule_rows(rule, disc)?),
            PricingRule::MovingAverage { .. } => rows.extend(moving_average_rows(rule, disc)?),
            PricingRule::Response { .. } => {}
        }
    }
    Ok(rows)
}
