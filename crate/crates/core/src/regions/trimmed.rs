use serde::{Deserialize, Serialize};

use super::dykstra::{dykstra, polish_projection, DykstraConfig, Halfspace, SetProjection};
use super::simplex::project_onto_scaled_simplex;
use super::PriceRegion;
use crate::error::{Error, Result};
use crate::lp::{self, Constraint, Relation};

/// Δ_n cut by extra halfspaces. Used to build price regions that exclude some
/// payoff vectors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HalfspaceTrimmedSimplex {
    pub n: usize,
    pub halfspaces: Vec<Halfspace>,
}

impl HalfspaceTrimmedSimplex {
    pub fn new(n: usize, halfspaces: Vec<Halfspace>) -> Result<Self> {
        let t = Self { n, halfspaces };
        t.validate()?;
        Ok(t)
    }

    pub(crate) fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::Config("trimmed simplex needs n ≥ 1".into()));
        }
        for h in &self.halfspaces {
            Error::check_dim(self.n, h.a.len())?;
        }
        let cons = self.lp_constraints();
        lp::maximize(&vec![0.0; self.n], &cons)
            .map(|_| ())
            .map_err(|_| Error::Config("trimmed simplex is empty".into()))
    }

    fn lp_constraints(&self) -> Vec<Constraint> {
        let mut cons = vec![Constraint::new(vec![1.0; self.n], Relation::Eq, 1.0)];
        cons.extend(self.halfspaces.iter().map(|h| Constraint::new(h.a.clone(), Relation::Le, h.b)));
        cons
    }

    fn all_inequalities(&self) -> Vec<Halfspace> {
        let mut out: Vec<Halfspace> = (0..self.n)
            .map(|i| {
                let mut a = vec![0.0; self.n];
                a[i] = -1.0;
                Halfspace::new(a, 0.0)
            })
            .collect();
        out.extend(self.halfspaces.iter().cloned());
        out
    }
}

impl PriceRegion for HalfspaceTrimmedSimplex {
    fn dim(&self) -> usize {
        self.n
    }

    fn violation(&self, x: &[f64]) -> f64 {
        let neg = x.iter().fold(0.0_f64, |m, v| m.max(-v));
        let sum = (x.iter().sum::<f64>() - 1.0).abs();
        self.halfspaces.iter().fold(neg.max(sum), |m, h| m.max(crate::linalg::dot(&h.a, x) - h.b))
    }

    fn project(&self, y: &[f64]) -> Result<Vec<f64>> {
        Error::check_dim(self.n, y.len())?;
        let simplex = |v: &[f64]| project_onto_scaled_simplex(v, 1.0);
        let cuts: Vec<Box<SetProjection>> = self
            .halfspaces
            .iter()
            .map(|h| Box::new(move |v: &[f64]| h.project(v)) as Box<SetProjection>)
            .collect();
        let mut sets: Vec<&SetProjection> = vec![&simplex];
        sets.extend(cuts.iter().map(|b| b.as_ref()));
        let (x, rep) = dykstra(y, &sets, DykstraConfig::default());
        let eq = [Halfspace::new(vec![1.0; self.n], 1.0)];
        if let Some(p) = polish_projection(y, &x, &eq, &self.all_inequalities()) {
            return Ok(p);
        }
        if !rep.converged {
            return Err(Error::solver("trimmed simplex projection (dykstra)", rep.sweeps));
        }
        Ok(x)
    }

    fn linear_maximize(&self, c: &[f64]) -> Result<Vec<f64>> {
        Error::check_dim(self.n, c.len())?;
        lp::maximize(c, &self.lp_constraints())
            .map_err(|e| Error::solver(format!("trimmed simplex linear maximization: {e}"), 0))
    }

    fn diameter(&self) -> f64 {
        2f64.sqrt()
    }

    fn diameter_is_exact(&self) -> bool {
        false
    }

    fn interior_point(&self) -> Vec<f64> {
        let uniform = vec![1.0 / self.n as f64; self.n];
        if self.violation(&uniform) <= 1e-12 {
            return uniform;
        }
        // Average of a few LP vertices lies in the region by convexity.
        let mut acc = vec![0.0; self.n];
        let mut count = 0.0;
        for i in 0..self.n {
            let mut c = vec![0.0; self.n];
            c[i] = 1.0;
            for sign in [1.0, -1.0] {
                let dir: Vec<f64> = c.iter().map(|v| v * sign).collect();
                if let Ok(v) = self.linear_maximize(&dir) {
                    acc.iter_mut().zip(&v).for_each(|(a, b)| *a += b);
                    count += 1.0;
                }
            }
        }
        acc.into_iter().map(|v| v / count).collect()
    }

    fn bounding_box(&self) -> Vec<(f64, f64)> {
        vec![(0.0, 1.0); self.n]
    }
}
