//! Sample statistics for aggregating Monte Carlo trials.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub mean: f64,
    /// Sample standard deviation (n − 1 denominator; 0 for a single sample).
    pub std: f64,
    /// `std / √n`.
    pub stderr: f64,
    pub n: usize,
}

impl Summary {
    pub fn of(values: &[f64]) -> Summary {
        let n = values.len();
        if n == 0 {
            return Summary { mean: f64::NAN, std: f64::NAN, stderr: f64::NAN, n };
        }
        let mean = values.iter().sum::<f64>() / n as f64;
        let std = if n > 1 {
            let ss: f64 = values.iter().map(|v| (v - mean) * (v - mean)).sum();
            (ss / (n - 1) as f64).sqrt()
        } else {
            0.0
        };
        Summary { mean, std, stderr: std / (n as f64).sqrt(), n }
    }
}

/// Paired-difference t statistic `mean(d) / (sd(d)/√n)` for `d = a − b`.
/// Infinite when all differences are equal and positive.
pub fn paired_t_statistic(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let s = Summary::of(&d);
    if s.stderr == 0.0 {
        return if s.mean > 0.0 { f64::INFINITY } else if s.mean < 0.0 { f64::NEG_INFINITY } else { 0.0 };
    }
    s.mean / s.stderr
}
