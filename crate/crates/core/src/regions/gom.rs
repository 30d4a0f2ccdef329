//! Generalized order matrices in reduced coordinates.
//!
//! A full n×n order matrix X has X(i,i) = 1/2 and X(j,i) = 1 − X(i,j), so it
//! is determined by the n(n−1)/2 entries above the diagonal. In those
//! coordinates the region is the unit box cut by, for every triple i<j<k,
//! the slab 0 ≤ x_ij + x_jk − x_ik ≤ 1.

use serde::{Deserialize, Serialize};

use super::dykstra::{dykstra, polish_projection, DykstraConfig, Halfspace, SetProjection};
use super::PriceRegion;
use crate::error::{Error, Result};
use crate::lp::{self, Constraint, Relation};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GomRegion {
    pub n: usize,
}

pub fn pair_count(n: usize) -> usize {
    n * n.saturating_sub(1) / 2
}

/// Reduced index of the unordered pair `i < j` (0-based, lexicographic).
pub fn pair_index(n: usize, i: usize, j: usize) -> usize {
    debug_assert!(i < j && j < n);
    i * (2 * n - i - 1) / 2 + (j - i - 1)
}

/// Inverse of [`pair_index`].
pub fn pair_of(n: usize, k: usize) -> (usize, usize) {
    let mut i = 0;
    let mut start = 0;
    loop {
        let row = n - i - 1;
        if k < start + row {
            return (i, i + 1 + (k - start));
        }
        start += row;
        i += 1;
    }
}

/// All triples `i < j < k` as reduced indices `(ij, jk, ik)`.
pub fn triples(n: usize) -> Vec<(usize, usize, usize)> {
    let mut out = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            for k in j + 1..n {
                out.push((pair_index(n, i, j), pair_index(n, j, k), pair_index(n, i, k)));
            }
        }
    }
    out
}

impl GomRegion {
    pub fn new(n: usize) -> Self {
        Self { n }
    }

    fn triangle_sum(x: &[f64], t: (usize, usize, usize)) -> f64 {
        x[t.0] + x[t.1] - x[t.2]
    }

    fn triangle_row(&self, t: (usize, usize, usize), sign: f64) -> Vec<f64> {
        let mut a = vec![0.0; pair_count(self.n)];
        a[t.0] = sign;
        a[t.1] = sign;
        a[t.2] = -sign;
        a
    }

    /// All defining inequalities `a·x ≤ b`.
    pub fn halfspaces(&self) -> Vec<Halfspace> {
        let k = pair_count(self.n);
        let mut out = Vec::with_capacity(2 * k + 2 * k * k);
        for i in 0..k {
            let mut e = vec![0.0; k];
            e[i] = 1.0;
            out.push(Halfspace::new(e.clone(), 1.0));
            e[i] = -1.0;
            out.push(Halfspace::new(e, 0.0));
        }
        for t in triples(self.n) {
            out.push(Halfspace::new(self.triangle_row(t, 1.0), 1.0));
            out.push(Halfspace::new(self.triangle_row(t, -1.0), 0.0));
        }
        out
    }

    /// Dykstra over the box and every triangle slab, each projected exactly.
    pub fn project_dykstra(&self, y: &[f64], cfg: DykstraConfig) -> (Vec<f64>, super::DykstraReport) {
        let clamp = |v: &[f64]| v.iter().map(|x| x.clamp(0.0, 1.0)).collect::<Vec<f64>>();
        let slabs: Vec<Box<SetProjection>> = triples(self.n)
            .into_iter()
            .map(|t| {
                Box::new(move |v: &[f64]| {
                    let s = Self::triangle_sum(v, t);
                    let shift = if s > 1.0 {
                        (s - 1.0) / 3.0
                    } else if s < 0.0 {
                        s / 3.0
                    } else {
                        return v.to_vec();
                    };
                    let mut out = v.to_vec();
                    out[t.0] -= shift;
                    out[t.1] -= shift;
                    out[t.2] += shift;
                    out
                }) as Box<SetProjection>
            })
            .collect();
        let mut sets: Vec<&SetProjection> = vec![&clamp];
        sets.extend(slabs.iter().map(|b| b.as_ref()));
        dykstra(y, &sets, cfg)
    }
}

impl PriceRegion for GomRegion {
    fn dim(&self) -> usize {
        pair_count(self.n)
    }

    fn violation(&self, x: &[f64]) -> f64 {
        let mut v = x.iter().fold(0.0_f64, |m, &a| m.max(-a).max(a - 1.0));
        for t in triples(self.n) {
            let s = Self::triangle_sum(x, t);
            v = v.max(-s).max(s - 1.0);
        }
        v
    }

    fn project(&self, y: &[f64]) -> Result<Vec<f64>> {
        Error::check_dim(self.dim(), y.len())?;
        let (x, rep) = self.project_dykstra(y, DykstraConfig::default());
        if let Some(p) = polish_projection(y, &x, &[], &self.halfspaces()) {
            return Ok(p);
        }
        if !rep.converged {
            return Err(Error::solver("gom projection (dykstra)", rep.sweeps));
        }
        Ok(x)
    }

    fn linear_maximize(&self, c: &[f64]) -> Result<Vec<f64>> {
        Error::check_dim(self.dim(), c.len())?;
        let cons: Vec<Constraint> = self
            .halfspaces()
            .into_iter()
            .filter(|h| h.b > 0.0 || h.a.iter().filter(|v| **v != 0.0).count() > 1)
            .map(|h| Constraint::new(h.a, Relation::Le, h.b))
            .collect();
        lp::maximize(c, &cons).map_err(|e| Error::solver(format!("gom linear maximization: {e}"), 0))
    }

    fn diameter(&self) -> f64 {
        (pair_count(self.n) as f64).sqrt()
    }

    fn diameter_is_exact(&self) -> bool {
        false
    }

    fn interior_point(&self) -> Vec<f64> {
        vec![0.5; self.dim()]
    }

    fn bounding_box(&self) -> Vec<(f64, f64)> {
        vec![(0.0, 1.0); self.dim()]
    }
}
