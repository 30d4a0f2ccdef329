//! Dykstra's alternating projections onto an intersection of convex sets,
//! followed by an optional active-set polish for polyhedra.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::linalg::{dist, dot};

/// `a·x ≤ b`
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Halfspace {
    pub a: Vec<f64>,
    pub b: f64,
}

impl Halfspace {
    pub fn new(a: Vec<f64>, b: f64) -> Self {
        Self { a, b }
    }

    pub fn violation(&self, x: &[f64]) -> f64 {
        (dot(&self.a, x) - self.b).max(0.0) / dot(&self.a, &self.a).sqrt().max(1e-300)
    }

    pub fn project(&self, y: &[f64]) -> Vec<f64> {
        let over = dot(&self.a, y) - self.b;
        if over <= 0.0 {
            return y.to_vec();
        }
        let s = over / dot(&self.a, &self.a);
        y.iter().zip(&self.a).map(|(v, a)| v - s * a).collect()
    }
}

#[derive(Debug, Clone, Copy)]
pub struct DykstraConfig {
    pub max_sweeps: usize,
    /// Stop once every projection within a sweep moves the iterate less
    /// than this in total.
    pub tol: f64,
}

impl Default for DykstraConfig {
    fn default() -> Self {
        Self { max_sweeps: 50_000, tol: 1e-10 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DykstraReport {
    pub sweeps: usize,
    pub last_move: f64,
    pub converged: bool,
}

pub(crate) type SetProjection<'a> = dyn Fn(&[f64]) -> Vec<f64> + 'a;
type Projector<'a> = &'a SetProjection<'a>;

pub fn dykstra(y: &[f64], sets: &[Projector<'_>], cfg: DykstraConfig) -> (Vec<f64>, DykstraReport) {
    let n = y.len();
    let mut x = y.to_vec();
    let mut incr = vec![vec![0.0; n]; sets.len()];
    let mut last_move = f64::INFINITY;
    for sweep in 1..=cfg.max_sweeps {
        let mut path = 0.0;
        for (proj, p) in sets.iter().zip(incr.iter_mut()) {
            let z: Vec<f64> = x.iter().zip(p.iter()).map(|(a, b)| a + b).collect();
            let next = proj(&z);
            for i in 0..n {
                p[i] = z[i] - next[i];
            }
            path += dist(&x, &next);
            x = next;
        }
        last_move = path;
        if last_move < cfg.tol {
            return (x, DykstraReport { sweeps: sweep, last_move, converged: true });
        }
    }
    (x, DykstraReport { sweeps: cfg.max_sweeps, last_move, converged: false })
}

/// Refines an approximate projection of `y` onto `{x : eq rows hold, a·x ≤ b}`
/// by solving the projection onto the affine set of constraints that are
/// active at `approx`. Returns `None` if the refined point is infeasible or
/// strays from `approx`.
pub fn polish_projection(
    y: &[f64],
    approx: &[f64],
    equalities: &[Halfspace],
    inequalities: &[Halfspace],
) -> Option<Vec<f64>> {
    let n = y.len();
    let active: Vec<&Halfspace> = equalities
        .iter()
        .chain(inequalities.iter().filter(|h| {
            let scale = dot(&h.a, &h.a).sqrt();
            (h.b - dot(&h.a, approx)) <= 1e-7 * scale
        }))
        .collect();
    if active.is_empty() {
        return if inequalities.iter().all(|h| h.violation(y) <= 1e-13) { Some(y.to_vec()) } else { None };
    }
    let k = active.len();
    let a = DMatrix::from_fn(k, n, |i, j| active[i].a[j]);
    let yv = DVector::from_column_slice(y);
    let bv = DVector::from_iterator(k, active.iter().map(|h| h.b));
    let rhs = &a * &yv - bv;
    let gram = &a * a.transpose();
    let mu = gram.svd(true, true).solve(&rhs, 1e-12).ok()?;
    let x = yv - a.transpose() * mu;
    let x: Vec<f64> = x.iter().cloned().collect();
    let feasible = equalities.iter().all(|h| (dot(&h.a, &x) - h.b).abs() <= 1e-11)
        && inequalities.iter().all(|h| h.violation(&x) <= 1e-12);
    if feasible && dist(&x, approx) <= 1e-6 {
        Some(x)
    } else {
        None
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_halfspaces_corner() {
        // x ≤ 0 and y ≤ 0 from (1, 1): the answer is the origin.
        let h1 = Halfspace::new(vec![1.0, 0.0], 0.0);
        let h2 = Halfspace::new(vec![0.0, 1.0], 0.0);
        let p1 = |v: &[f64]| h1.project(v);
        let p2 = |v: &[f64]| h2.project(v);
        let (x, rep) = dykstra(&[1.0, 1.0], &[&p1, &p2], DykstraConfig::default());
        assert!(rep.converged);
        assert!(x[0].abs() < 1e-12 && x[1].abs() < 1e-12);
    }

    #[test]
    fn dykstra_differs_from_plain_alternation() {
        // Halfspace x+y ≤ 0 and x ≤ -1 (exact projection of (2,0) is (-1, 0)... checked via polish)
        let h1 = Halfspace::new(vec![1.0, 1.0], 0.0);
        let h2 = Halfspace::new(vec![1.0, 0.0], -1.0);
        let p1 = |v: &[f64]| h1.project(v);
        let p2 = |v: &[f64]| h2.project(v);
        let y = [2.0, 0.5];
        let (x, _) = dykstra(&y, &[&p1, &p2], DykstraConfig::default());
        // Oracle: brute-force grid over the feasible region near the answer.
        let mut best = (f64::INFINITY, 0.0, 0.0);
        for i in 0..=400 {
            for j in 0..=400 {
                let (a, b) = (-2.0 + i as f64 * 0.005, -1.0 + j as f64 * 0.005);
                if a + b <= 0.0 && a <= -1.0 {
                    let d = (a - y[0]).powi(2) + (b - y[1]).powi(2);
                    if d < best.0 {
                        best = (d, a, b);
                    }
                }
            }
        }
        assert!((x[0] - best.1).abs() < 0.01 && (x[1] - best.2).abs() < 0.01);
        let polished = polish_projection(&y, &x, &[], &[h1, h2]).unwrap();
        assert!(dist(&polished, &x) < 1e-8);
    }
}
