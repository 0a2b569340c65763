use rand_distr::{Beta, Distribution};
use serde::Serialize;

use crate::assumptions::check_assumptions;
use crate::error::{Error, Result};
use crate::feasibility::Mode;
use crate::grid::TimeGrid;
use crate::market::{eval_observed_demand, MarketSpec, StrategyProfile, UncertaintyModel};
use crate::sim::rng::KeyedStream;
use crate::sim::stats::{histogram_fd, summarize};
use crate::sim::{DistributionSpec, Policy, ScenarioCell, ScenarioReport, SellerReport};
use crate::solver::{solve_equilibrium, SolverConfig};

/// One realization of the uncertainty factor on the grid:
/// `xi_i = xi0(t_i) + tau (2 B_i - 1)` with `B_i ~ Beta(a, b)` drawn from
/// the stream keyed on `(seed, seller, draw, node)`. Every draw stays in
/// the pointwise band.
pub fn sample_xi(
    uncertainty: &UncertaintyModel,
    dist: &DistributionSpec,
    grid: &TimeGrid,
    seller: usize,
    draw_index: u64,
    seed: u64,
) -> Result<Vec<f64>> {
    dist.validate()?;
    let beta = Beta::new(dist.a, dist.b)
        .map_err(|e| Error::InvalidConfig(format!("beta({}, {}): {e}", dist.a, dist.b)))?;
    let mut out = Vec::with_capacity(grid.n);
    for (i, &t) in grid.nodes.iter().enumerate() {
        let mut stream = KeyedStream::new(seed, seller as u64, draw_index, i as u64);
        let b: f64 = beta.sample(&mut stream);
        out.push(uncertainty.xi0.value(t) + uncertainty.tau * (2.0 * b - 1.0));
    }
    Ok(out)
}

/// Nodewise sales under posted paths and a realization: the seller serves
/// the planned amount when the market expresses at least that much demand,
/// the expressed demand otherwise, never less than nothing.
pub fn realized_sales(
    posted: &StrategyProfile,
    market: &MarketSpec,
    xi: &[Vec<f64>],
) -> Result<Vec<Vec<f64>>> {
    posted.validate_shape(market)?;
    let g = &market.grid;
    if xi.len() != market.seller_count() || xi.iter().any(|row| row.len() != g.n) {
        return Err(Error::ShapeMismatch {
            expected: market.seller_count() * g.n,
            got: xi.iter().map(|r| r.len()).sum(),
        });
    }
    let mut sales = vec![vec![0.0; g.n]; market.seller_count()];
    let mut prices_at = vec![0.0; market.seller_count()];
    for i in 0..g.n {
        for (r, path) in posted.prices.iter().enumerate() {
            prices_at[r] = path[i];
        }
        for s in 0..market.seller_count() {
            let observed =
                eval_observed_demand(market, s, &prices_at, xi[s][i], g.nodes[i])?;
            sales[s][i] = posted.plans[s][i].min(observed).max(0.0);
        }
    }
    Ok(sales)
}

/// Discounted realized profit per seller.
pub fn realized_profit(
    prices: &[Vec<f64>],
    sales: &[Vec<f64>],
    rho: f64,
    grid: &TimeGrid,
) -> Result<Vec<f64>> {
    if prices.len() != sales.len() {
        return Err(Error::ShapeMismatch {
            expected: prices.len(),
            got: sales.len(),
        });
    }
    let mut out = Vec::with_capacity(prices.len());
    for (price_path, sales_path) in prices.iter().zip(sales) {
        if price_path.len() != grid.n || sales_path.len() != grid.n {
            return Err(Error::ShapeMismatch {
                expected: grid.n,
                got: price_path.len().min(sales_path.len()),
            });
        }
        let mut acc = 0.0;
        for i in 0..grid.n {
            acc += grid.weights[i] * (-rho * grid.nodes[i]).exp() * price_path[i] * sales_path[i];
        }
        out.push(acc);
    }
    Ok(out)
}

/// Equilibrium profile under the belief that every seller uses `policy`.
fn solve_policy(
    market: &MarketSpec,
    policy: Policy,
    cfg: &SolverConfig,
) -> Result<StrategyProfile> {
    match policy {
        Policy::Nominal => Ok(solve_equilibrium(market, Mode::Nominal, &[], cfg)?.profile),
        Policy::Robust(tau_bar) => {
            if !(tau_bar >= 0.0) {
                return Err(Error::InvalidConfig(format!(
                    "robust policy magnitude must be nonnegative, got {tau_bar}"
                )));
            }
            let mut believed = market.clone();
            for u in &mut believed.uncertainty {
                u.tau = tau_bar;
            }
            Ok(solve_equilibrium(&believed, Mode::Robust, &[], cfg)?.profile)
        }
    }
}

/// Small deterministic cache of policy solves keyed by the policy itself.
struct PolicyCache {
    entries: Vec<(Policy, StrategyProfile)>,
}

impl PolicyCache {
    fn new() -> Self {
        Self {
            entries: Vec::new(),
        }
    }

    fn get(
        &mut self,
        market: &MarketSpec,
        policy: Policy,
        cfg: &SolverConfig,
    ) -> Result<StrategyProfile> {
        if let Some((_, p)) = self.entries.iter().find(|(q, _)| *q == policy) {
            return Ok(p.clone());
        }
        let profile = solve_policy(market, policy, cfg)?;
        self.entries.push((policy, profile.clone()));
        Ok(profile)
    }
}

/// Assembles the posted cross-policy profile for a scenario cell: seller
/// `s` posts its own paths from the all-play-`policies[s]` equilibrium.
pub fn build_scenario(
    market: &MarketSpec,
    cell: &ScenarioCell,
    cfg: &SolverConfig,
) -> Result<StrategyProfile> {
    if cell.policies.len() != market.seller_count() {
        return Err(Error::ShapeMismatch {
            expected: market.seller_count(),
            got: cell.policies.len(),
        });
    }
    let mut cache = PolicyCache::new();
    let n = market.grid.n;
    let mut posted = StrategyProfile {
        prices: vec![vec![0.0; n]; market.seller_count()],
        plans: vec![vec![0.0; n]; market.seller_count()],
    };
    for (s, &policy) in cell.policies.iter().enumerate() {
        let eq = cache.get(market, policy, cfg)?;
        posted.prices[s] = eq.prices[s].clone();
        posted.plans[s] = eq.plans[s].clone();
    }
    Ok(posted)
}

fn report_for_posted(
    market: &MarketSpec,
    posted: &StrategyProfile,
    dist: &DistributionSpec,
    n_draws: usize,
    seed: u64,
) -> Result<ScenarioReport> {
    let s_count = market.seller_count();
    let mut profits = vec![Vec::with_capacity(n_draws); s_count];
    let mut xi = vec![Vec::new(); s_count];
    for draw in 0..n_draws {
        for (s, row) in xi.iter_mut().enumerate() {
            *row = sample_xi(
                &market.uncertainty[s],
                dist,
                &market.grid,
                s,
                draw as u64,
                seed,
            )?;
        }
        let sales = realized_sales(posted, market, &xi)?;
        let p = realized_profit(&posted.prices, &sales, market.rho, &market.grid)?;
        for s in 0..s_count {
            profits[s].push(p[s]);
        }
    }
    let sellers = profits
        .iter()
        .map(|per_draw| SellerReport {
            stats: summarize(per_draw),
            histogram: histogram_fd(per_draw),
        })
        .collect();
    Ok(ScenarioReport {
        sellers,
        n_draws,
        seed,
        distribution: *dist,
    })
}

/// Runs one scenario cell: solve the believed equilibria, post the
/// recombined paths, simulate `n_draws` independent realizations and
/// summarize per-seller profits. Deterministic given the seed.
pub fn run_scenario(
    market: &MarketSpec,
    cell: &ScenarioCell,
    dist: &DistributionSpec,
    n_draws: usize,
    seed: u64,
    cfg: &SolverConfig,
) -> Result<ScenarioReport> {
    let posted = build_scenario(market, cell, cfg)?;
    report_for_posted(market, posted_ref(&posted), dist, n_draws, seed)
}

fn posted_ref(p: &StrategyProfile) -> &StrategyProfile {
    p
}

/// The four two-seller policy cells (N,N), (N,R), (R,N), (R,R) with R at
/// each seller's true magnitude, evaluated per distribution.
pub fn scenario_matrix(
    market: &MarketSpec,
    dists: &[DistributionSpec],
    n_draws: usize,
    seed: u64,
    cfg: &SolverConfig,
) -> Result<Vec<Vec<ScenarioReport>>> {
    if market.seller_count() != 2 {
        return Err(Error::InvalidConfig(format!(
            "the policy matrix is defined for 2 sellers, market has {}",
            market.seller_count()
        )));
    }
    let r = |s: usize| Policy::Robust(market.uncertainty[s].tau);
    let cells = [
        ScenarioCell {
            policies: vec![Policy::Nominal, Policy::Nominal],
        },
        ScenarioCell {
            policies: vec![Policy::Nominal, r(1)],
        },
        ScenarioCell {
            policies: vec![r(0), Policy::Nominal],
        },
        ScenarioCell {
            policies: vec![r(0), r(1)],
        },
    ];
    // Posted profiles only depend on the cell, not the distribution.
    let mut cache = PolicyCache::new();
    let mut posted_profiles = Vec::with_capacity(4);
    for cell in &cells {
        let n = market.grid.n;
        let mut posted = StrategyProfile {
            prices: vec![vec![0.0; n]; 2],
            plans: vec![vec![0.0; n]; 2],
        };
        for (s, &policy) in cell.policies.iter().enumerate() {
            let eq = cache.get(market, policy, cfg)?;
            posted.prices[s] = eq.prices[s].clone();
            posted.plans[s] = eq.plans[s].clone();
        }
        posted_profiles.push(posted);
    }
    let mut out = Vec::with_capacity(dists.len());
    for dist in dists {
        let mut per_cell = Vec::with_capacity(4);
        for posted in &posted_profiles {
            per_cell.push(report_for_posted(market, posted, dist, n_draws, seed)?);
        }
        out.push(per_cell);
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum CoefficientKind {
    Alpha,
    Beta,
    Gamma,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct CoefficientTarget {
    pub seller: usize,
    pub coefficient: CoefficientKind,
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepPoint {
    pub value: f64,
    pub prices: Option<Vec<Vec<f64>>>,
    pub revenues: Option<Vec<f64>>,
    pub error: Option<String>,
}

/// Robust equilibria across a sweep of one demand coefficient's intercept.
/// Failed points are recorded and the sweep continues.
pub fn sensitivity_sweep(
    market: &MarketSpec,
    target: CoefficientTarget,
    values: &[f64],
    cfg: &SolverConfig,
) -> Result<Vec<SweepPoint>> {
    if target.seller >= market.seller_count() {
        return Err(Error::UnknownSeller(target.seller));
    }
    let mut out = Vec::with_capacity(values.len());
    for &value in values {
        let mut m = market.clone();
        match target.coefficient {
            CoefficientKind::Alpha => m.sellers[target.seller].alpha.a = value,
            CoefficientKind::Beta => m.sellers[target.seller].beta.a = value,
            CoefficientKind::Gamma => {
                for path in m.sellers[target.seller].gamma.values_mut() {
                    path.a = value;
                }
            }
        }
        let report = check_assumptions(&m);
        if !report.all_passed() {
            out.push(SweepPoint {
                value,
                prices: None,
                revenues: None,
                error: Some(format!(
                    "assumption check failed: {:?}",
                    report.failures().iter().map(|c| c.id).collect::<Vec<_>>()
                )),
            });
            continue;
        }
        match solve_equilibrium(&m, Mode::Robust, &[], cfg) {
            Ok(res) => out.push(SweepPoint {
                value,
                prices: Some(res.profile.prices.clone()),
                revenues: Some(res.revenues.clone()),
                error: None,
            }),
            Err(e) => out.push(SweepPoint {
                value,
                prices: None,
                revenues: None,
                error: Some(e.to_string()),
            }),
        }
    }
    Ok(out)
}

/// Who varies against whom in the robust-magnitude sweep (two sellers;
/// reports track the varying seller, index 1).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum RobustnessCase {
    /// Seller 1 posts the nominal policy while seller 2 varies its
    /// magnitude.
    OpponentNominal,
    /// Seller 1 posts the fully robust policy (true magnitude).
    OpponentVeryRobust,
    /// Both sellers use the varying magnitude.
    BothVary,
}

/// For each `tau_bar`, posts the case's paths and simulates realized
/// profits at the true magnitude; reports one cell per swept value.
pub fn robustness_sweep(
    market: &MarketSpec,
    case: RobustnessCase,
    tau_bar_values: &[f64],
    dist: &DistributionSpec,
    n_draws: usize,
    seed: u64,
    cfg: &SolverConfig,
) -> Result<Vec<ScenarioReport>> {
    if market.seller_count() != 2 {
        return Err(Error::InvalidConfig(format!(
            "the robustness sweep is defined for 2 sellers, market has {}",
            market.seller_count()
        )));
    }
    let tau_true = market.uncertainty[1].tau;
    for &tb in tau_bar_values {
        if !(0.0..=tau_true).contains(&tb) {
            return Err(Error::InvalidConfig(format!(
                "tau_bar {tb} outside [0, {tau_true}]"
            )));
        }
    }
    let mut cache = PolicyCache::new();
    let mut out = Vec::with_capacity(tau_bar_values.len());
    for &tb in tau_bar_values {
        let seller1_policy = match case {
            RobustnessCase::OpponentNominal => Policy::Nominal,
            RobustnessCase::OpponentVeryRobust => Policy::Robust(market.uncertainty[0].tau),
            RobustnessCase::BothVary => Policy::Robust(tb),
        };
        let n = market.grid.n;
        let mut posted = StrategyProfile {
            prices: vec![vec![0.0; n]; 2],
            plans: vec![vec![0.0; n]; 2],
        };
        let eq1 = cache.get(market, seller1_policy, cfg)?;
        posted.prices[0] = eq1.prices[0].clone();
        posted.plans[0] = eq1.plans[0].clone();
        let eq2 = cache.get(market, Policy::Robust(tb), cfg)?;
        posted.prices[1] = eq2.prices[1].clone();
        posted.plans[1] = eq2.plans[1].clone();
        out.push(report_for_posted(market, &posted, dist, n_draws, seed)?);
    }
    Ok(out)
}
