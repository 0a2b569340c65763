use serde::Serialize;

/// Pairwise (cascade) summation: order-independent aggregation with
/// O(log n) error growth.
pub fn pairwise_sum(values: &[f64]) -> f64 {
    match values.len() {
        0 => 0.0,
        1..=8 => values.iter().sum(),
        n => {
            let mid = n / 2;
            pairwise_sum(&values[..mid]) + pairwise_sum(&values[mid..])
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize, PartialEq)]
pub struct SummaryStats {
    pub min: f64,
    pub max: f64,
    pub mean: f64,
    /// Sample standard deviation (n - 1 denominator); zero for n <= 1.
    pub sd: f64,
}

pub fn summarize(values: &[f64]) -> SummaryStats {
    assert!(!values.is_empty(), "summarize needs at least one value");
    let n = values.len() as f64;
    let mut min = f64::INFINITY;
    let mut max = f64::NEG_INFINITY;
    for &v in values {
        min = min.min(v);
        max = max.max(v);
    }
    let mean = pairwise_sum(values) / n;
    let sd = if values.len() > 1 {
        let sq: Vec<f64> = values.iter().map(|&v| (v - mean) * (v - mean)).collect();
        (pairwise_sum(&sq) / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    SummaryStats { min, max, mean, sd }
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct Histogram {
    /// `counts.len() + 1` bin edges, uniformly spaced.
    pub edges: Vec<f64>,
    pub counts: Vec<u64>,
}

/// Freedman-Diaconis binning with a floor of 10 bins. Degenerate samples
/// (zero range) get 10 unit-width bins centered on the value.
pub fn histogram_fd(values: &[f64]) -> Histogram {
    assert!(!values.is_empty());
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = sorted.len();
    let (min, max) = (sorted[0], sorted[n - 1]);
    let range = max - min;

    let bins = if range <= 0.0 {
        10
    } else {
        let q = |p: f64| -> f64 {
            let pos = p * (n - 1) as f64;
            let lo = pos.floor() as usize;
            let hi = pos.ceil() as usize;
            let frac = pos - lo as f64;
            sorted[lo] * (1.0 - frac) + sorted[hi] * frac
        };
        let iqr = q(0.75) - q(0.25);
        let width = 2.0 * iqr / (n as f64).cbrt();
        if width <= 0.0 {
            10
        } else {
            ((range / width).ceil() as usize).clamp(10, 10_000)
        }
    };

    let (lo, hi) = if range <= 0.0 {
        (min - 5.0, min + 5.0)
    } else {
        (min, max)
    };
    let bin_width = (hi - lo) / bins as f64;
    let edges: Vec<f64> = (0..=bins).map(|k| lo + bin_width * k as f64).collect();
    let mut counts = vec![0u64; bins];
    for &v in values {
        let idx = (((v - lo) / bin_width) as usize).min(bins - 1);
        counts[idx] += 1;
    }
    Histogram { edges, counts }
}
