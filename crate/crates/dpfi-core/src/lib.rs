//! Robust dynamic pricing with fixed inventories.
//!
//! Sellers with perishable inventory compete on prices over a finite
//! horizon under multiplicative demand uncertainty. The crate models the
//! market, tightens the uncertain demand constraint into its deterministic
//! robust counterpart, computes the generalized equilibrium of the pricing
//! game with a projection fixed-point iteration, and evaluates posted
//! nominal and robust policies by seeded Monte Carlo simulation.

pub mod assumptions;
pub mod error;
pub mod feasibility;
pub mod grid;
pub mod market;
pub mod rules;
pub mod sim;
pub mod solver;

#[cfg(test)]
pub(crate) mod testutil;

pub use assumptions::{check_assumptions, AssumptionCheck, AssumptionReport};
pub use error::{Error, Result};
pub use feasibility::{feasibility_check, ConstraintId, Mode, Violation};
pub use grid::{AffinePath, TimeGrid};
pub use market::{
    discounted_revenue, eval_observed_demand, grad_xi_magnitude, robust_demand_bound, MarketSpec,
    SellerId, SellerParams, StrategyProfile, UncertaintyModel,
};
pub use rules::PricingRule;
pub use solver::{solve_equilibrium, SolverConfig, SolverResult};
