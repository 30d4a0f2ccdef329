//! Convex hulls of finitely many points, with Euclidean projection by
//! Wolfe's minimum-norm-point algorithm.

use std::collections::HashMap;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::PriceRegion;
use crate::error::{Error, Result};
use crate::linalg::{dist, dot, sub};

/// Largest generator count accepted by [`HullHandle::new`].
pub const MAX_GENERATORS: usize = 50_000;

const WOLFE_MAX_ITER: usize = 10_000;

/// Above this many generators the diameter is bounded by twice the largest
/// distance from the centroid instead of scanning all pairs.
pub const EXACT_DIAMETER_LIMIT: usize = 2_000;

/// `conv{p_1, …, p_m}` given by its generators.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "HullSpec", into = "HullSpec")]
pub struct HullHandle {
    generators: Vec<Vec<f64>>,
    #[serde(skip)]
    diameter: f64,
    #[serde(skip)]
    diameter_exact: bool,
    /// Generator index by bit pattern, for exact membership lookups.
    #[serde(skip)]
    keys: HashMap<Vec<u64>, usize>,
}

fn key(x: &[f64]) -> Vec<u64> {
    x.iter().map(|v| (v + 0.0).to_bits()).collect()
}

#[derive(Serialize, Deserialize)]
struct HullSpec {
    generators: Vec<Vec<f64>>,
}

impl TryFrom<HullSpec> for HullHandle {
    type Error = Error;
    fn try_from(s: HullSpec) -> Result<Self> {
        HullHandle::new(s.generators)
    }
}

impl From<HullHandle> for HullSpec {
    fn from(h: HullHandle) -> Self {
        HullSpec { generators: h.generators }
    }
}

/// Result of a minimum-norm-point computation.
#[derive(Debug, Clone, PartialEq)]
pub struct MinNormPoint {
    pub point: Vec<f64>,
    /// Convex weights on the generators (index, weight).
    pub weights: Vec<(usize, f64)>,
    pub iterations: usize,
}

impl HullHandle {
    pub fn new(generators: Vec<Vec<f64>>) -> Result<Self> {
        let first = generators.first().ok_or_else(|| Error::Config("hull needs at least one generator".into()))?;
        let dim = first.len();
        if dim == 0 {
            return Err(Error::Config("hull generators must be nonempty vectors".into()));
        }
        if generators.len() > MAX_GENERATORS {
            return Err(Error::EnumerationUnavailable(format!(
                "{} hull generators exceed the cap of {MAX_GENERATORS}",
                generators.len()
            )));
        }
        for g in &generators {
            Error::check_dim(dim, g.len())?;
            if g.iter().any(|v| !v.is_finite()) {
                return Err(Error::Config("hull generators must be finite".into()));
            }
        }
        let diameter_exact = generators.len() <= EXACT_DIAMETER_LIMIT;
        let mut diameter: f64 = 0.0;
        if diameter_exact {
            for (i, a) in generators.iter().enumerate() {
                for b in &generators[i + 1..] {
                    diameter = diameter.max(dist(a, b));
                }
            }
        } else {
            let m = generators.len() as f64;
            let mut centroid = vec![0.0; dim];
            for g in &generators {
                centroid.iter_mut().zip(g).for_each(|(a, b)| *a += b / m);
            }
            diameter = 2.0 * generators.iter().map(|g| dist(g, &centroid)).fold(0.0, f64::max);
        }
        let keys = generators.iter().enumerate().map(|(i, g)| (key(g), i)).collect();
        Ok(Self { generators, diameter, diameter_exact, keys })
    }

    pub fn generators(&self) -> &[Vec<f64>] {
        &self.generators
    }

    /// Closest hull point to `x`.
    pub fn nearest(&self, x: &[f64]) -> Result<MinNormPoint> {
        Error::check_dim(self.dim(), x.len())?;
        if let Some(&i) = self.keys.get(&key(x)) {
            return Ok(MinNormPoint { point: x.to_vec(), weights: vec![(i, 1.0)], iterations: 0 });
        }
        let shifted: Vec<Vec<f64>> = self.generators.iter().map(|g| sub(g, x)).collect();
        let mut mnp = min_norm_point(&shifted)?;
        mnp.point.iter_mut().zip(x).for_each(|(p, v)| *p += v);
        Ok(mnp)
    }

    /// Euclidean distance from `x` to the hull.
    pub fn distance(&self, x: &[f64]) -> Result<f64> {
        Ok(dist(&self.nearest(x)?.point, x))
    }
}

/// Minimizes `‖Σ w_i p_i‖` over convex weights `w` (Wolfe, 1976).
pub fn min_norm_point(points: &[Vec<f64>]) -> Result<MinNormPoint> {
    let scale = points.iter().map(|p| dot(p, p)).fold(0.0, f64::max).max(1e-300);
    let start = (0..points.len())
        .min_by(|&a, &b| dot(&points[a], &points[a]).total_cmp(&dot(&points[b], &points[b])))
        .ok_or_else(|| Error::Config("min-norm point of an empty set".into()))?;
    let mut active = vec![start];
    let mut w = vec![1.0];
    let combine = |active: &[usize], w: &[f64]| -> Vec<f64> {
        let mut x = vec![0.0; points[0].len()];
        for (&i, &wi) in active.iter().zip(w) {
            x.iter_mut().zip(&points[i]).for_each(|(a, b)| *a += wi * b);
        }
        x
    };
    let mut x = points[start].clone();
    for iter in 1..=WOLFE_MAX_ITER {
        let xx = dot(&x, &x);
        let (j, xp) = points
            .iter()
            .enumerate()
            .map(|(j, p)| (j, dot(&x, p)))
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .expect("nonempty");
        if xx - xp <= 1e-15 * scale || active.contains(&j) {
            return Ok(MinNormPoint { point: x, weights: active.into_iter().zip(w).collect(), iterations: iter });
        }
        active.push(j);
        w.push(0.0);
        loop {
            let v = affine_min_norm(points, &active);
            if v.iter().all(|&vi| vi > 1e-14) {
                w = v;
                break;
            }
            let mut theta: f64 = 1.0;
            for (&wi, &vi) in w.iter().zip(&v) {
                if vi <= 1e-14 && wi - vi > 0.0 {
                    theta = theta.min(wi / (wi - vi));
                }
            }
            for (wi, vi) in w.iter_mut().zip(&v) {
                *wi += theta * (vi - *wi);
            }
            let keep: Vec<bool> = w.iter().map(|&wi| wi > 1e-14).collect();
            active = active.iter().zip(&keep).filter(|(_, &k)| k).map(|(&a, _)| a).collect();
            w = w.iter().zip(&keep).filter(|(_, &k)| k).map(|(&a, _)| a).collect();
            let total: f64 = w.iter().sum();
            w.iter_mut().for_each(|wi| *wi /= total);
            if active.len() <= 1 {
                break;
            }
        }
        let next = combine(&active, &w);
        if dot(&next, &next) >= xx && iter > 1 {
            // No further progress in floating point.
            return Ok(MinNormPoint { point: x, weights: active.into_iter().zip(w).collect(), iterations: iter });
        }
        x = next;
    }
    Err(Error::solver("min-norm point (wolfe)", WOLFE_MAX_ITER))
}

/// Weights `v` with `Σ v = 1` minimizing `‖Σ v_i p_i‖` over the affine hull
/// of the active points.
fn affine_min_norm(points: &[Vec<f64>], active: &[usize]) -> Vec<f64> {
    let k = active.len();
    // Work relative to the first active point for conditioning:
    // minimize ‖p_0 + Σ_{i≥1} u_i (p_i − p_0)‖.
    if k == 1 {
        return vec![1.0];
    }
    let p0 = &points[active[0]];
    let d = p0.len();
    let m = DMatrix::from_fn(d, k - 1, |r, c| points[active[c + 1]][r] - p0[r]);
    let rhs = -DVector::from_column_slice(p0);
    let u = m
        .clone()
        .svd(true, true)
        .solve(&rhs, 1e-13)
        .unwrap_or_else(|_| DVector::zeros(k - 1));
    let mut v = Vec::with_capacity(k);
    v.push(1.0 - u.sum());
    v.extend(u.iter());
    v
}

impl PriceRegion for HullHandle {
    fn dim(&self) -> usize {
        self.generators[0].len()
    }

    fn violation(&self, x: &[f64]) -> f64 {
        self.distance(x).unwrap_or(f64::INFINITY)
    }

    fn project(&self, y: &[f64]) -> Result<Vec<f64>> {
        Ok(self.nearest(y)?.point)
    }

    fn linear_maximize(&self, c: &[f64]) -> Result<Vec<f64>> {
        Error::check_dim(self.dim(), c.len())?;
        let best = self
            .generators
            .iter()
            .max_by(|a, b| dot(a, c).total_cmp(&dot(b, c)))
            .expect("nonempty");
        Ok(best.clone())
    }

    fn diameter(&self) -> f64 {
        self.diameter
    }

    fn diameter_is_exact(&self) -> bool {
        self.diameter_exact
    }

    fn interior_point(&self) -> Vec<f64> {
        let m = self.generators.len() as f64;
        let mut acc = vec![0.0; self.dim()];
        for g in &self.generators {
            acc.iter_mut().zip(g).for_each(|(a, b)| *a += b / m);
        }
        acc
    }

    fn bounding_box(&self) -> Vec<(f64, f64)> {
        (0..self.dim())
            .map(|i| {
                self.generators
                    .iter()
                    .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), g| (lo.min(g[i]), hi.max(g[i])))
            })
            .collect()
    }
}
