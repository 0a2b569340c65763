use dpfi_core::feasibility::Mode;
use dpfi_core::grid::{AffinePath, TimeGrid};
use dpfi_core::market::{MarketSpec, SellerParams, UncertaintyModel};
use dpfi_core::rules::{monotone_rule_rows, PricingRule};
use dpfi_core::solver::*;
use std::collections::BTreeMap;

fn market(n: usize) -> MarketSpec {
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
    let band = UncertaintyModel { xi0: AffinePath::new(3.0, 0.1), tau: 0.8 };
    MarketSpec { grid, rho: 0.0, sellers: vec![seller(1, 2500.0), seller(0, 3000.0)], uncertainty: vec![band.clone(), band] }
}

fn main() {
    let m = market(10);
    let d = discretize(&m).unwrap();
    let rule = PricingRule::Monotone { delta: 1.0 };
    let rows = monotone_rule_rows(&rule, &d).unwrap();
    let set = build_feasible_set(&d, Mode::Robust, rows).unwrap();
    let start = interior_candidate(&d, Mode::Robust).unwrap();
    let p0 = Projector::new(&set);
    let first = p0.project(&start, 1e-8, 500, None).unwrap();
    println!("first projection ok, resid {:.2e} iters {}", first.residual, first.iterations);
    let mut u = first.point;
    let mut duals = first.row_duals;
    let w = d.flat_weights();
    let alpha = default_step_alpha(&d, &set);
    println!("alpha = {alpha:.3}");
    for k in 0..2000 {
        let f = vi_map(&d, &u).unwrap();
        let mut z = u.clone();
        for j in 0..z.len() { z[j] += alpha * w[j] * f[j]; }
        match p0.project(&z, 1e-8, 500, Some(&duals)) {
            Ok(pr) => {
                let step: f64 = pr.point.iter().zip(&u).map(|(a,b)| (a-b)*(a-b)).sum::<f64>().sqrt();
                if k % 50 == 0 || k < 5 { println!("it {k}: step {step:.3e}, qp iters {}", pr.iterations); }
                duals = pr.row_duals;
                u = pr.point;
                if step < 1e-6 { println!("converged at {k}"); break; }
            }
            Err(e) => {
                println!("projection failed at fixed-point iter {k}: {e}");
                break;
            }
        }
    }
}
