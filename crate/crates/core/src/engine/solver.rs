//! Maximizers of `x·q − R(x)` over a price region: closed forms, the nested
//! one-dimensional solver for the entropy family on simplex/band regions, and
//! projected gradient ascent with a Frank–Wolfe duality-gap certificate.

use serde::{Deserialize, Serialize};

use crate::conjugates::{Barrier, Conjugate};
use crate::error::{Error, Result};
use crate::linalg::{dot, log_sum_exp, norm, softmax, sub};
use crate::regions::PriceRegion;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverConfig {
    /// Duality-gap tolerance for iterative solves.
    pub tolerance: f64,
    pub max_iterations: usize,
    /// Skip closed forms and use projected gradient ascent everywhere.
    pub generic_only: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self { tolerance: 1e-8, max_iterations: 100_000, generic_only: false }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    LogSumExp,
    BallClosedForm,
    QuadraticProjection,
    EntropyNested,
    ProjectedGradient,
}

/// Maximizer and maximum of `x·q − R(x)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Solution {
    pub price: Vec<f64>,
    pub cost: f64,
    /// Frank–Wolfe duality gap at `price` (an upper bound on suboptimality).
    pub gap: f64,
    pub iterations: usize,
    pub method: Method,
}

pub fn lmsr(b: f64, q: &[f64]) -> Solution {
    let scaled: Vec<f64> = q.iter().map(|v| v / b).collect();
    Solution {
        price: softmax(&scaled),
        cost: b * log_sum_exp(&scaled),
        gap: 0.0,
        iterations: 0,
        method: Method::LogSumExp,
    }
}

/// `sup_{‖x − m‖ ≤ r} x·q − λ‖x − m‖²`, with the norm of `q` for seam checks.
pub fn ball_quadratic(lambda: f64, center: &[f64], radius: f64, q: &[f64]) -> Solution {
    let nq = norm(q);
    let qm = dot(q, center);
    let (price, cost) = if nq <= 2.0 * lambda * radius {
        let x = center.iter().zip(q).map(|(m, v)| m + v / (2.0 * lambda)).collect();
        (x, nq * nq / (4.0 * lambda) + qm)
    } else {
        let x = center.iter().zip(q).map(|(m, v)| m + radius * v / nq).collect();
        (x, radius * nq - lambda * radius * radius + qm)
    };
    Solution { price, cost, gap: 0.0, iterations: 0, method: Method::BallClosedForm }
}

/// Solves `b·log x + a·x = d` for `x > 0` by Newton's method in `u = log x`.
fn entropy_coordinate(b: f64, a: f64, d: f64) -> f64 {
    if a == 0.0 {
        return (d / b).exp();
    }
    // The root u* satisfies u* ≤ d/b, and u* ≤ max(log(d/a), 0) when d > 0.
    let mut u = if d > 0.0 { (d / b).min((d / a).ln().max(0.0)) } else { d / b };
    for _ in 0..100 {
        let e = u.exp();
        let f = b * u + a * e - d;
        let step = f / (b + a * e);
        u -= step;
        if step.abs() <= 1e-15 * (1.0 + u.abs()) {
            break;
        }
    }
    u.exp()
}

/// Maximizer over `{x ≥ 0, Σx = s}` of `x·q − bΣx log x − (a/2)‖x‖²`,
/// returning the point and the multiplier on the sum constraint.
fn entropy_slice(b: f64, a: f64, q: &[f64], s: f64) -> (Vec<f64>, f64) {
    let scaled: Vec<f64> = q.iter().map(|v| v / b).collect();
    let nu0 = b * log_sum_exp(&scaled) - b - b * s.ln();
    if a == 0.0 {
        return (softmax(&scaled).into_iter().map(|p| s * p).collect(), nu0);
    }
    let n = q.len() as f64;
    let qmax = q.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut lo = qmax - b - b * s.ln() - a * s;
    let mut hi = qmax - b - b * (s / n).ln() - a * s / n;
    let solve = |nu: f64| -> (Vec<f64>, f64, f64) {
        let x: Vec<f64> = q.iter().map(|&qi| entropy_coordinate(b, a, qi - b - nu)).collect();
        let slope: f64 = -x.iter().map(|&xi| xi / (b + a * xi)).sum::<f64>();
        let excess = x.iter().sum::<f64>() - s;
        (x, excess, slope)
    };
    let mut nu = nu0.clamp(lo, hi);
    let mut best = solve(nu);
    for _ in 0..200 {
        let (_, excess, slope) = &best;
        if excess.abs() <= 1e-15 * s {
            break;
        }
        if *excess > 0.0 {
            lo = nu;
        } else {
            hi = nu;
        }
        let newton = nu - excess / slope;
        nu = if newton > lo && newton < hi && slope.is_finite() && *slope < 0.0 { newton } else { 0.5 * (lo + hi) };
        if hi - lo <= 1e-15 * (1.0 + nu.abs()) {
            best = solve(nu);
            break;
        }
        best = solve(nu);
    }
    (best.0, nu)
}

/// Price for the entropy family on `{x ≥ 0, lo ≤ Σx ≤ hi}`.
pub fn entropy_family(b: f64, barrier: Barrier, lo: f64, hi: f64, q: &[f64]) -> (Vec<f64>, usize) {
    let curvature = |s: f64| match barrier {
        Barrier::Ratio { gamma, c } => 2.0 * gamma / (1.0 + c - s),
        _ => 0.0,
    };
    let slope = |s: f64| -> (Vec<f64>, f64) {
        let (x, nu) = entropy_slice(b, curvature(s), q, s);
        let pull = match barrier {
            Barrier::None => 0.0,
            Barrier::Log { gamma, c } => gamma / (1.0 + c - s),
            Barrier::Ratio { gamma, c } => {
                let t = 1.0 + c - s;
                gamma * dot(&x, &x) / (t * t)
            }
        };
        (x, nu - pull)
    };
    if hi <= lo {
        return (slope(lo).0, 0);
    }
    let (x_lo, d_lo) = slope(lo);
    if d_lo <= 0.0 {
        return (x_lo, 0);
    }
    if let Barrier::None = barrier {
        let scaled: Vec<f64> = q.iter().map(|v| v / b).collect();
        let s = (log_sum_exp(&scaled) - 1.0).exp().clamp(lo, hi);
        return (softmax(&scaled).into_iter().map(|p| s * p).collect(), 0);
    }
    let (mut a, mut z) = (lo, hi);
    let mut iterations = 0;
    while z - a > 1e-16 * z && iterations < 200 {
        iterations += 1;
        let mid = 0.5 * (a + z);
        if mid <= a || mid >= z {
            break;
        }
        if slope(mid).1 > 0.0 {
            a = mid;
        } else {
            z = mid;
        }
    }
    (slope(a).0, iterations)
}

/// Frank–Wolfe gap `max_{s ∈ Π} ∇f(x)·(s − x)` for `f(x) = x·q − R(x)`.
pub fn duality_gap(region: &dyn PriceRegion, conjugate: &Conjugate, q: &[f64], x: &[f64]) -> Result<f64> {
    let g = sub(q, &conjugate.floored_gradient(x)?);
    let s = region.linear_maximize(&g)?;
    Ok(dot(&g, &sub(&s, x)).max(0.0))
}

/// Projected gradient ascent with backtracking on `x·q − R(x)`.
pub fn projected_gradient(
    region: &dyn PriceRegion,
    conjugate: &Conjugate,
    q: &[f64],
    cfg: &SolverConfig,
) -> Result<Solution> {
    let objective = |x: &[f64]| -> Option<f64> { conjugate.value(x).ok().map(|r| dot(x, q) - r) };
    let mut x = region.interior_point();
    let mut fx = objective(&x).ok_or_else(|| Error::DomainViolation("interior point outside the conjugate's domain".into()))?;
    let mut t = 1.0;
    for it in 1..=cfg.max_iterations {
        let g = sub(q, &conjugate.floored_gradient(&x)?);
        let s = region.linear_maximize(&g)?;
        let gap = dot(&g, &sub(&s, &x)).max(0.0);
        if gap <= cfg.tolerance {
            return Ok(Solution { price: x, cost: fx, gap, iterations: it, method: Method::ProjectedGradient });
        }
        // Accept the step once the local gradient Lipschitz estimate is at
        // most 1/t; unlike a sufficient-decrease test this stays meaningful
        // when objective differences fall below rounding error.
        let mut accepted = None;
        while t > 1e-20 {
            let trial: Vec<f64> = x.iter().zip(&g).map(|(a, b)| a + t * b).collect();
            let next = region.project(&trial)?;
            if let Some(fn_) = objective(&next) {
                let d = sub(&next, &x);
                let g_next = sub(q, &conjugate.floored_gradient(&next)?);
                if t * norm(&sub(&g_next, &g)) <= norm(&d) {
                    accepted = Some((next, fn_, d));
                    break;
                }
            }
            t *= 0.5;
        }
        let Some((next, fnext, d)) = accepted else {
            return Err(Error::solver("projected gradient line search", it));
        };
        let stalled = norm(&d) <= 1e-15 * (1.0 + norm(&x));
        x = next;
        fx = fnext;
        if stalled {
            let gap = duality_gap(region, conjugate, q, &x)?;
            if gap <= cfg.tolerance.max(1e-12 * (1.0 + fx.abs())) {
                return Ok(Solution { price: x, cost: fx, gap, iterations: it, method: Method::ProjectedGradient });
            }
            return Err(Error::solver("projected gradient stalled", it));
        }
        t = (t * 1.5).min(1e6);
    }
    Err(Error::solver("projected gradient ascent", cfg.max_iterations))
}
