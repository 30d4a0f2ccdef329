use serde::{Deserialize, Serialize};

use super::simplex::{argmax, project_onto_scaled_simplex};
use super::PriceRegion;
use crate::error::{Error, Result};
use crate::linalg::dist;

/// `{x ≥ 0 : 1 ≤ Σx ≤ 1 + c}`: the simplex relaxed by a maximal transaction
/// cost `c` spread over all securities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BandRegion {
    pub n: usize,
    pub c: f64,
}

impl BandRegion {
    pub fn new(n: usize, c: f64) -> Self {
        Self { n, c }
    }

    pub fn upper(&self) -> f64 {
        1.0 + self.c
    }

    fn vertices(&self) -> Vec<Vec<f64>> {
        let mut out = Vec::with_capacity(2 * self.n);
        for scale in [1.0, self.upper()] {
            for i in 0..self.n {
                let mut v = vec![0.0; self.n];
                v[i] = scale;
                out.push(v);
            }
        }
        out
    }
}

impl PriceRegion for BandRegion {
    fn dim(&self) -> usize {
        self.n
    }

    fn violation(&self, x: &[f64]) -> f64 {
        let s: f64 = x.iter().sum();
        let neg = x.iter().fold(0.0_f64, |m, v| m.max(-v));
        neg.max(1.0 - s).max(s - self.upper())
    }

    fn project(&self, y: &[f64]) -> Result<Vec<f64>> {
        Error::check_dim(self.n, y.len())?;
        // KKT: x = (y − τ)_+ with τ ≤ 0 on the lower face, τ ≥ 0 on the upper.
        let clipped: Vec<f64> = y.iter().map(|v| v.max(0.0)).collect();
        let s: f64 = clipped.iter().sum();
        if s < 1.0 {
            Ok(project_onto_scaled_simplex(y, 1.0))
        } else if s > self.upper() {
            Ok(project_onto_scaled_simplex(y, self.upper()))
        } else {
            Ok(clipped)
        }
    }

    fn linear_maximize(&self, c: &[f64]) -> Result<Vec<f64>> {
        Error::check_dim(self.n, c.len())?;
        let i = argmax(c);
        let mut x = vec![0.0; self.n];
        x[i] = if c[i] > 0.0 { self.upper() } else { 1.0 };
        Ok(x)
    }

    fn diameter(&self) -> f64 {
        if self.n <= 6 {
            let v = self.vertices();
            let mut d = 0.0_f64;
            for a in &v {
                for b in &v {
                    d = d.max(dist(a, b));
                }
            }
            d
        } else {
            2f64.sqrt() * self.upper()
        }
    }

    fn diameter_is_exact(&self) -> bool {
        self.n <= 6
    }

    fn interior_point(&self) -> Vec<f64> {
        vec![(1.0 + 0.5 * self.c) / self.n as f64; self.n]
    }

    fn bounding_box(&self) -> Vec<(f64, f64)> {
        vec![(0.0, self.upper()); self.n]
    }
}
