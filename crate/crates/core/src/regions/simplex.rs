use serde::{Deserialize, Serialize};

use super::PriceRegion;
use crate::error::{Error, Result};

/// The probability simplex Δ_n.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimplexRegion {
    pub n: usize,
}

impl SimplexRegion {
    pub fn new(n: usize) -> Self {
        Self { n }
    }
}

/// Projection onto `{x ≥ 0, Σx = total}` by the sort-and-threshold rule.
pub fn project_onto_scaled_simplex(y: &[f64], total: f64) -> Vec<f64> {
    let tau = simplex_threshold(y, total);
    y.iter().map(|v| (v - tau).max(0.0)).collect()
}

/// The threshold τ with `Σ max(y_i − τ, 0) = total`.
pub(crate) fn simplex_threshold(y: &[f64], total: f64) -> f64 {
    let mut u = y.to_vec();
    u.sort_by(|a, b| b.partial_cmp(a).unwrap_or(std::cmp::Ordering::Equal));
    let mut cumsum = 0.0;
    let mut tau = (u[0] - total) / 1.0;
    for (j, &uj) in u.iter().enumerate() {
        cumsum += uj;
        let t = (cumsum - total) / (j as f64 + 1.0);
        if uj - t > 0.0 {
            tau = t;
        }
    }
    tau
}

impl PriceRegion for SimplexRegion {
    fn dim(&self) -> usize {
        self.n
    }

    fn violation(&self, x: &[f64]) -> f64 {
        let neg = x.iter().fold(0.0_f64, |m, v| m.max(-v));
        neg.max((x.iter().sum::<f64>() - 1.0).abs())
    }

    fn project(&self, y: &[f64]) -> Result<Vec<f64>> {
        Error::check_dim(self.n, y.len())?;
        Ok(project_onto_scaled_simplex(y, 1.0))
    }

    fn linear_maximize(&self, c: &[f64]) -> Result<Vec<f64>> {
        Error::check_dim(self.n, c.len())?;
        let mut x = vec![0.0; self.n];
        x[argmax(c)] = 1.0;
        Ok(x)
    }

    fn diameter(&self) -> f64 {
        if self.n >= 2 {
            2f64.sqrt()
        } else {
            0.0
        }
    }

    fn interior_point(&self) -> Vec<f64> {
        vec![1.0 / self.n as f64; self.n]
    }

    fn bounding_box(&self) -> Vec<(f64, f64)> {
        vec![(0.0, 1.0); self.n]
    }
}

pub(crate) fn argmax(c: &[f64]) -> usize {
    c.iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |(bi, bv), (i, &v)| if v > bv { (i, v) } else { (bi, bv) })
        .0
}
