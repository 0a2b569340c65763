use serde::Serialize;

use crate::error::{Error, Result};

/// Uniform time grid on `[t0, tf]` with trapezoidal quadrature weights.
///
/// The grid is the computational stand-in for the continuous horizon:
/// integrals become `weights . values`, endpoint weights are half the
/// interior spacing.
#[derive(Debug, Clone, Serialize)]
pub struct TimeGrid {
    pub t0: f64,
    pub tf: f64,
    pub n: usize,
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl TimeGrid {
    pub fn new(t0: f64, tf: f64, n: usize) -> Result<Self> {
        if !t0.is_finite() || !tf.is_finite() {
            return Err(Error::NonFinite("grid endpoints".into()));
        }
        if t0 >= tf {
            return Err(Error::InvalidMarket(format!(
                "grid requires t0 < tf, got [{t0}, {tf}]"
            )));
        }
        if n < 2 {
            return Err(Error::InvalidMarket(format!("grid requires n >= 2, got {n}")));
        }
        let dt = (tf - t0) / (n - 1) as f64;
        let mut nodes = Vec::with_capacity(n);
        for i in 0..n {
            nodes.push(t0 + dt * i as f64);
        }
        // Pin the last node exactly on tf.
        nodes[n - 1] = tf;
        let mut weights = vec![dt; n];
        weights[0] = dt / 2.0;
        weights[n - 1] = dt / 2.0;
        Ok(Self {
            t0,
            tf,
            n,
            nodes,
            weights,
        })
    }

    pub fn dt(&self) -> f64 {
        (self.tf - self.t0) / (self.n - 1) as f64
    }

    pub fn horizon(&self) -> f64 {
        self.tf - self.t0
    }

    /// Trapezoidal quadrature of a grid function.
    pub fn integrate(&self, values: &[f64]) -> Result<f64> {
        if values.len() != self.n {
            return Err(Error::ShapeMismatch {
                expected: self.n,
                got: values.len(),
            });
        }
        Ok(self
            .weights
            .iter()
            .zip(values)
            .map(|(w, v)| w * v)
            .sum())
    }

    /// Trapezoidal weights restricted to the sub-interval `[t0, nodes[i]]`.
    ///
    /// Used by the moving-average pricing rule. Returns `i + 1` weights.
    pub fn prefix_weights(&self, i: usize) -> Vec<f64> {
        let dt = self.dt();
        if i == 0 {
            return vec![0.0];
        }
        let mut w = vec![dt; i + 1];
        w[0] = dt / 2.0;
        w[i] = dt / 2.0;
        w
    }
}

/// Closed-form path `value(t) = a + b*t`.
///
/// Every coefficient in the supported market family is affine in time, so
/// paths evaluate exactly at any node with no interpolation error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AffinePath {
    pub a: f64,
    pub b: f64,
}

impl AffinePath {
    pub fn new(a: f64, b: f64) -> Self {
        Self { a, b }
    }

    pub fn constant(a: f64) -> Self {
        Self { a, b: 0.0 }
    }

    pub fn value(&self, t: f64) -> f64 {
        self.a + self.b * t
    }
}
