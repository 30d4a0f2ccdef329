use serde::{Deserialize, Serialize};

use super::PriceRegion;
use crate::error::{Error, Result};
use crate::linalg::{dist, norm};

/// Euclidean ball. The sphere-landing market uses the unit ball centered at
/// the all-ones vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BallRegion {
    pub center: Vec<f64>,
    #[serde(default = "one")]
    pub radius: f64,
}

fn one() -> f64 {
    1.0
}

impl BallRegion {
    pub fn new(center: Vec<f64>, radius: f64) -> Self {
        Self { center, radius }
    }

    pub fn unit_at_ones(dim: usize) -> Self {
        Self::new(vec![1.0; dim], 1.0)
    }
}

impl PriceRegion for BallRegion {
    fn dim(&self) -> usize {
        self.center.len()
    }

    fn violation(&self, x: &[f64]) -> f64 {
        (dist(x, &self.center) - self.radius).max(0.0)
    }

    fn project(&self, y: &[f64]) -> Result<Vec<f64>> {
        Error::check_dim(self.dim(), y.len())?;
        let d = dist(y, &self.center);
        if d <= self.radius {
            return Ok(y.to_vec());
        }
        let s = self.radius / d;
        Ok(y.iter().zip(&self.center).map(|(v, m)| m + s * (v - m)).collect())
    }

    fn linear_maximize(&self, c: &[f64]) -> Result<Vec<f64>> {
        Error::check_dim(self.dim(), c.len())?;
        let nc = norm(c);
        if nc == 0.0 {
            return Ok(self.center.clone());
        }
        Ok(self.center.iter().zip(c).map(|(m, v)| m + self.radius * v / nc).collect())
    }

    fn diameter(&self) -> f64 {
        2.0 * self.radius
    }

    fn interior_point(&self) -> Vec<f64> {
        self.center.clone()
    }

    fn bounding_box(&self) -> Vec<(f64, f64)> {
        self.center.iter().map(|m| (m - self.radius, m + self.radius)).collect()
    }
}
