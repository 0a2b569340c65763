use crate::error::{Error, Result};

/// Closed-form equilibrium of the single-seller market with constant
/// coefficients and no discounting.
///
/// With the demand bound binding and the inventory spent exactly, a constant
/// plan maximizes the revenue integral, so
/// `plan = K / T` and `price = (alpha - plan / m) / beta` with
/// `m = xi0 - tau`. Used as an independent oracle for the solver.
pub fn analytic_single_seller(
    alpha: f64,
    beta: f64,
    xi0_minus_tau: f64,
    inventory_k: f64,
    horizon: f64,
) -> Result<(f64, f64)> {
    for (name, v) in [
        ("alpha", alpha),
        ("beta", beta),
        ("xi0_minus_tau", xi0_minus_tau),
        ("inventory_k", inventory_k),
        ("horizon", horizon),
    ] {
        if !(v > 0.0) || !v.is_finite() {
            return Err(Error::OraclePrecondition(format!(
                "{name} must be positive and finite, got {v}"
            )));
        }
    }
    let plan = inventory_k / horizon;
    let price = (alpha - plan / xi0_minus_tau) / beta;
    if !(price > 0.0) {
        return Err(Error::OraclePrecondition(format!(
            "inventory too large for an interior solution (price = {price})"
        )));
    }
    Ok((price, plan))
}
