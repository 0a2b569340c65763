//! Monte Carlo evaluation of posted pricing policies under demand
//! uncertainty: scenario cells, the policy matrix, and the sensitivity and
//! robustness sweeps.

pub mod mc;
pub mod rng;
pub mod stats;

pub use mc::{
    build_scenario, realized_profit, realized_sales, robustness_sweep, run_scenario, sample_xi,
    scenario_matrix, sensitivity_sweep, CoefficientKind, CoefficientTarget, RobustnessCase,
    SweepPoint,
};
pub use rng::KeyedStream;
pub use stats::{histogram_fd, pairwise_sum, summarize, Histogram, SummaryStats};

use serde::Serialize;

use crate::error::{Error, Result};

/// Beta-family distribution of the uncertainty draw; `beta(1, 1)` is the
/// uniform distribution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DistributionSpec {
    pub a: f64,
    pub b: f64,
}

impl DistributionSpec {
    pub fn uniform() -> Self {
        Self { a: 1.0, b: 1.0 }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.a > 0.0 && self.b > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "beta parameters must be positive, got ({}, {})",
                self.a, self.b
            )));
        }
        Ok(())
    }

    pub fn label(&self) -> String {
        format!("beta({},{})", self.a, self.b)
    }
}

/// A posted pricing policy: prices computed either from the nominal model
/// or from the robust counterpart with safety magnitude `tau_bar`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum Policy {
    Nominal,
    Robust(f64),
}

impl Policy {
    pub fn label(&self) -> String {
        match self {
            Policy::Nominal => "N".into(),
            Policy::Robust(t) => format!("R({t})"),
        }
    }
}

/// One policy per seller. Each seller's posted paths come from the
/// equilibrium computed under the belief that every seller uses that
/// seller's own policy.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScenarioCell {
    pub policies: Vec<Policy>,
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct SellerReport {
    pub stats: SummaryStats,
    pub histogram: Histogram,
}

/// Realized-profit summary of one scenario cell.
#[derive(Debug, Clone, Serialize)]
pub struct ScenarioReport {
    pub sellers: Vec<SellerReport>,
    pub n_draws: usize,
    pub seed: u64,
    pub distribution: DistributionSpec,
}
