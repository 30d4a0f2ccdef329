//! Strictly convex conjugate functions R with values, gradients, Hessians
//! and Bregman divergences.
//!
//! Entropy terms use the convention 0·log 0 = 0; coordinates in `[0, 1e-12]`
//! count as zero for values, while gradients there are undefined.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{dot, sub};

/// Coordinates at or below this are treated as exactly zero by entropy terms.
pub const ZERO_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Conjugate {
    /// `b Σ x_i log x_i`; conjugate of the LMSR cost on the simplex.
    NegEntropy { b: f64 },
    /// `λ ‖x − m‖²`
    Quadratic { lambda: f64, center: Vec<f64> },
    /// `b Σ x_i log x_i − γ log(1 + c − Σx)`
    BarrierEntropy { b: f64, gamma: f64, c: f64 },
    /// `b Σ x_i log x_i + γ ‖x‖² / (1 + c − Σx)`
    RatioBarrierEntropy { b: f64, gamma: f64, c: f64 },
}

/// Sum-dependent barrier attached to an entropy term.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Barrier {
    None,
    Log { gamma: f64, c: f64 },
    Ratio { gamma: f64, c: f64 },
}

fn entropy_value(b: f64, x: &[f64]) -> Result<f64> {
    let mut acc = 0.0;
    for &v in x {
        if v < -ZERO_FLOOR {
            return Err(Error::DomainViolation(format!("entropy needs x ≥ 0, got {v}")));
        }
        if v > ZERO_FLOOR {
            acc += v * v.ln();
        }
    }
    Ok(b * acc)
}

fn entropy_gradient(b: f64, x: &[f64]) -> Result<Vec<f64>> {
    x.iter()
        .map(|&v| {
            if v <= ZERO_FLOOR {
                Err(Error::UndefinedGradient(format!("entropy coordinate {v} on the boundary")))
            } else {
                Ok(b * (v.ln() + 1.0))
            }
        })
        .collect()
}

fn slack(c: f64, x: &[f64]) -> Result<f64> {
    let t = 1.0 + c - x.iter().sum::<f64>();
    if t <= 0.0 {
        Err(Error::DomainViolation(format!("price sum reaches the 1 + c = {} barrier", 1.0 + c)))
    } else {
        Ok(t)
    }
}

impl Conjugate {
    pub fn neg_entropy(b: f64) -> Self {
        Conjugate::NegEntropy { b }
    }

    pub fn quadratic(lambda: f64, center: Vec<f64>) -> Self {
        Conjugate::Quadratic { lambda, center }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = match self {
            Conjugate::NegEntropy { b } => *b > 0.0,
            Conjugate::Quadratic { lambda, center } => *lambda > 0.0 && !center.is_empty(),
            Conjugate::BarrierEntropy { b, gamma, c } | Conjugate::RatioBarrierEntropy { b, gamma, c } => {
                *b > 0.0 && *gamma > 0.0 && *c > 0.0
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("conjugate parameters must be positive: {self:?}")))
        }
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            Conjugate::NegEntropy { .. } => "neg_entropy",
            Conjugate::Quadratic { .. } => "quadratic",
            Conjugate::BarrierEntropy { .. } => "barrier_entropy",
            Conjugate::RatioBarrierEntropy { .. } => "ratio_barrier_entropy",
        }
    }

    /// Entropy scale and barrier, for the entropy family.
    pub fn entropy_parts(&self) -> Option<(f64, Barrier)> {
        match *self {
            Conjugate::NegEntropy { b } => Some((b, Barrier::None)),
            Conjugate::BarrierEntropy { b, gamma, c } => Some((b, Barrier::Log { gamma, c })),
            Conjugate::RatioBarrierEntropy { b, gamma, c } => Some((b, Barrier::Ratio { gamma, c })),
            Conjugate::Quadratic { .. } => None,
        }
    }

    pub fn value(&self, x: &[f64]) -> Result<f64> {
        match self {
            Conjugate::NegEntropy { b } => entropy_value(*b, x),
            Conjugate::Quadratic { lambda, center } => {
                Error::check_dim(center.len(), x.len())?;
                let d = sub(x, center);
                Ok(lambda * dot(&d, &d))
            }
            Conjugate::BarrierEntropy { b, gamma, c } => {
                let t = slack(*c, x)?;
                Ok(entropy_value(*b, x)? - gamma * t.ln())
            }
            Conjugate::RatioBarrierEntropy { b, gamma, c } => {
                let t = slack(*c, x)?;
                Ok(entropy_value(*b, x)? + gamma * dot(x, x) / t)
            }
        }
    }

    pub fn gradient(&self, x: &[f64]) -> Result<Vec<f64>> {
        match self {
            Conjugate::NegEntropy { b } => entropy_gradient(*b, x),
            Conjugate::Quadratic { lambda, center } => {
                Error::check_dim(center.len(), x.len())?;
                Ok(x.iter().zip(center).map(|(v, m)| 2.0 * lambda * (v - m)).collect())
            }
            Conjugate::BarrierEntropy { b, gamma, c } => {
                let t = slack(*c, x)?;
                Ok(entropy_gradient(*b, x)?.into_iter().map(|g| g + gamma / t).collect())
            }
            Conjugate::RatioBarrierEntropy { b, gamma, c } => {
                let t = slack(*c, x)?;
                let shared = gamma * dot(x, x) / (t * t);
                let g = entropy_gradient(*b, x)?;
                Ok(g.into_iter().zip(x).map(|(g, v)| g + 2.0 * gamma * v / t + shared).collect())
            }
        }
    }

    /// Gradient with entropy coordinates and the barrier slack floored at
    /// [`ZERO_FLOOR`], so first-order solvers can step off the boundary.
    pub fn floored_gradient(&self, x: &[f64]) -> Result<Vec<f64>> {
        let entropy = |b: f64| -> Vec<f64> { x.iter().map(|&v| b * (v.max(ZERO_FLOOR).ln() + 1.0)).collect() };
        let floored_slack = |c: f64| (1.0 + c - x.iter().sum::<f64>()).max(ZERO_FLOOR);
        Ok(match self {
            Conjugate::Quadratic { .. } => return self.gradient(x),
            Conjugate::NegEntropy { b } => entropy(*b),
            Conjugate::BarrierEntropy { b, gamma, c } => {
                let t = floored_slack(*c);
                entropy(*b).into_iter().map(|g| g + gamma / t).collect()
            }
            Conjugate::RatioBarrierEntropy { b, gamma, c } => {
                let t = floored_slack(*c);
                let shared = gamma * dot(x, x) / (t * t);
                entropy(*b).into_iter().zip(x).map(|(g, v)| g + 2.0 * gamma * v / t + shared).collect()
            }
        })
    }

    pub fn hessian(&self, x: &[f64]) -> Result<Vec<Vec<f64>>> {
        let n = x.len();
        let entropy_diag = |b: f64| -> Result<Vec<Vec<f64>>> {
            let mut h = vec![vec![0.0; n]; n];
            for (i, &v) in x.iter().enumerate() {
                if v <= ZERO_FLOOR {
                    return Err(Error::UndefinedGradient(format!("entropy Hessian at coordinate {v}")));
                }
                h[i][i] = b / v;
            }
            Ok(h)
        };
        match self {
            Conjugate::NegEntropy { b } => entropy_diag(*b),
            Conjugate::Quadratic { lambda, center } => {
                Error::check_dim(center.len(), n)?;
                Ok((0..n).map(|i| (0..n).map(|j| if i == j { 2.0 * lambda } else { 0.0 }).collect()).collect())
            }
            Conjugate::BarrierEntropy { b, gamma, c } => {
                let t = slack(*c, x)?;
                let mut h = entropy_diag(*b)?;
                h.iter_mut().flatten().for_each(|v| *v += gamma / (t * t));
                Ok(h)
            }
            Conjugate::RatioBarrierEntropy { b, gamma, c } => {
                let t = slack(*c, x)?;
                let mut h = entropy_diag(*b)?;
                let v: Vec<f64> = x.iter().map(|a| a / t).collect();
                let vv = dot(&v, &v);
                let k = 2.0 * gamma / t;
                for i in 0..n {
                    for j in 0..n {
                        let delta = if i == j { 1.0 } else { 0.0 };
                        h[i][j] += k * (delta + v[i] + v[j] + vv);
                    }
                }
                Ok(h)
            }
        }
    }

    /// `D_R(x, y) = R(x) − R(y) − ∇R(y)·(x − y)`
    pub fn bregman(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        Error::check_dim(y.len(), x.len())?;
        let g = self.gradient(y)?;
        Ok(self.value(x)? - self.value(y)? - dot(&g, &sub(x, y)))
    }

    /// Lower bound on the curvature of R over its domain, used as a depth
    /// estimate.
    pub fn strong_convexity(&self) -> f64 {
        match self {
            Conjugate::Quadratic { lambda, .. } => 2.0 * lambda,
            Conjugate::NegEntropy { b }
            | Conjugate::BarrierEntropy { b, .. }
            | Conjugate::RatioBarrierEntropy { b, .. } => *b,
        }
    }
}

/// Smallest γ for which the barrier conjugate over the band `1 ≤ Σx ≤ 1 + c`
/// is minimized on the simplex face (at the uniform vector).
pub fn barrier_gamma_threshold(barrier_is_ratio: bool, n: usize, b: f64, c: f64) -> f64 {
    let excess = (n as f64).ln() - 1.0;
    if excess <= 0.0 {
        return 0.0;
    }
    if barrier_is_ratio {
        b * excess * n as f64 * c * c / (2.0 * c + 1.0)
    } else {
        c * b * excess
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    const LN2: f64 = std::f64::consts::LN_2;

    fn random_simplex_point(rng: &mut impl Rng, n: usize) -> Vec<f64> {
        let e: Vec<f64> = (0..n).map(|_| -rng.gen_range(1e-3..1.0f64).ln()).collect();
        let s: f64 = e.iter().sum();
        e.into_iter().map(|v| v / s).collect()
    }

    fn all() -> Vec<Conjugate> {
        vec![
            Conjugate::neg_entropy(1.3),
            Conjugate::quadratic(0.7, vec![1.0 / 3.0; 3]),
            Conjugate::BarrierEntropy { b: 1.0, gamma: 0.1, c: 0.5 },
            Conjugate::RatioBarrierEntropy { b: 1.0, gamma: 0.2, c: 0.5 },
        ]
    }

    #[test]
    fn entropy_value_at_uniform() {
        let v = Conjugate::neg_entropy(1.0).value(&[0.5, 0.5]).unwrap();
        assert!((v + LN2).abs() < 1e-15);
    }

    #[test]
    fn entropy_zero_log_zero() {
        assert_eq!(Conjugate::neg_entropy(1.0).value(&[1.0, 0.0]).unwrap(), 0.0);
    }

    #[test]
    fn quadratic_examples() {
        let r = Conjugate::quadratic(1.0, vec![1.0; 3]);
        assert_eq!(r.value(&[1.0, 1.0, 1.0]).unwrap(), 0.0);
        assert_eq!(r.value(&[2.0, 1.0, 1.0]).unwrap(), 1.0);
        assert_eq!(r.gradient(&[2.0, 1.0, 1.0]).unwrap(), vec![2.0, 0.0, 0.0]);
        assert_eq!(r.bregman(&[2.0, 1.0, 1.0], &[1.0, 1.0, 1.0]).unwrap(), 1.0);
    }

    #[test]
    fn entropy_gradient_example() {
        let g = Conjugate::neg_entropy(1.0).gradient(&[0.5, 0.5]).unwrap();
        for v in g {
            assert!((v - (0.5f64.ln() + 1.0)).abs() < 1e-15);
        }
    }

    #[test]
    fn barrier_gradient_example() {
        let r = Conjugate::BarrierEntropy { b: 1.0, gamma: 0.1, c: 0.5 };
        let g = r.gradient(&[0.5, 0.5]).unwrap();
        for v in g {
            assert!((v - (0.5f64.ln() + 1.0 + 0.1 / 0.5)).abs() < 1e-14);
        }
    }

    #[test]
    fn kl_divergence_example() {
        let d = Conjugate::neg_entropy(1.0).bregman(&[1.0, 0.0], &[0.5, 0.5]).unwrap();
        assert!((d - LN2).abs() < 1e-15);
    }

    #[test]
    fn gradient_undefined_on_boundary() {
        let r = Conjugate::neg_entropy(1.0);
        assert!(matches!(r.gradient(&[1.0, 0.0]), Err(Error::UndefinedGradient(_))));
        assert!(matches!(r.bregman(&[0.5, 0.5], &[1.0, 0.0]), Err(Error::UndefinedGradient(_))));
    }

    #[test]
    fn barrier_rejects_points_past_the_cap() {
        let r = Conjugate::BarrierEntropy { b: 1.0, gamma: 0.1, c: 0.5 };
        assert!(matches!(r.value(&[0.8, 0.8]), Err(Error::DomainViolation(_))));
    }

    #[test]
    fn log_barrier_is_constant_on_simplex() {
        let r = Conjugate::BarrierEntropy { b: 1.0, gamma: 0.1, c: 0.5 };
        let e = Conjugate::neg_entropy(1.0);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..50 {
            let x = random_simplex_point(&mut rng, 4);
            let diff = r.value(&x).unwrap() - e.value(&x).unwrap();
            assert!((diff + 0.1 * 0.5f64.ln()).abs() < 1e-12);
        }
    }

    #[test]
    fn log_barrier_curvature_along_ones_diverges() {
        let r = Conjugate::BarrierEntropy { b: 1.0, gamma: 0.1, c: 0.5 };
        let n = 3;
        let mut prev = 0.0;
        for t in [0.4, 0.1, 0.01, 1e-4] {
            let x = vec![(1.5 - t) / n as f64; n];
            let h = r.hessian(&x).unwrap();
            let ones = vec![1.0 / (n as f64).sqrt(); n];
            let curv: f64 = (0..n).map(|i| ones[i] * dot(&h[i], &ones)).sum();
            let barrier = 0.1 * n as f64 / (t * t);
            assert!(curv >= barrier);
            assert!(curv > prev);
            prev = curv;
        }
    }

    #[test]
    fn ratio_barrier_smallest_eigenvalue_diverges() {
        // The quadratic-over-linear barrier curves every direction as Σx → 1 + c.
        let r = Conjugate::RatioBarrierEntropy { b: 1.0, gamma: 0.2, c: 0.5 };
        let mut prev = 0.0;
        for t in [0.4, 0.1, 0.01, 1e-3] {
            let x = vec![0.6 * (1.5 - t), 0.3 * (1.5 - t), 0.1 * (1.5 - t)];
            let h = r.hessian(&x).unwrap();
            let m = nalgebra::DMatrix::from_fn(3, 3, |i, j| h[i][j]);
            let lmin = m.symmetric_eigenvalues().min();
            assert!(lmin > prev, "{lmin} <= {prev}");
            prev = lmin;
        }
        assert!(prev > 100.0);
    }

    #[test]
    fn bregman_nonnegative_on_random_pairs() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for r in all() {
            for _ in 0..1000 {
                let x = random_simplex_point(&mut rng, 3);
                let y = random_simplex_point(&mut rng, 3);
                assert!(r.bregman(&x, &y).unwrap() >= -1e-12, "{}", r.kind_name());
            }
        }
    }

    #[test]
    fn quadratic_bregman_is_scaled_squared_distance() {
        let r = Conjugate::quadratic(2.5, vec![0.2, 0.3, 0.5]);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..200 {
            let x: Vec<f64> = (0..3).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let y: Vec<f64> = (0..3).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let d = sub(&x, &y);
            assert!((r.bregman(&x, &y).unwrap() - 2.5 * dot(&d, &d)).abs() < 1e-10);
        }
    }

    #[test]
    fn midpoint_strict_convexity() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for r in all() {
            for _ in 0..300 {
                let x = random_simplex_point(&mut rng, 3);
                let y = random_simplex_point(&mut rng, 3);
                if crate::linalg::dist(&x, &y) < 1e-3 {
                    continue;
                }
                let m: Vec<f64> = x.iter().zip(&y).map(|(a, b)| 0.5 * (a + b)).collect();
                let lhs = r.value(&m).unwrap();
                let rhs = 0.5 * (r.value(&x).unwrap() + r.value(&y).unwrap());
                assert!(lhs < rhs - 1e-12, "{}", r.kind_name());
            }
        }
    }

    #[test]
    fn gradients_match_central_differences() {
        // Independent check: central differences with step 1e-5.
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for r in all() {
            for _ in 0..50 {
                let x: Vec<f64> = random_simplex_point(&mut rng, 3).iter().map(|v| 0.05 + 0.9 * v).collect();
                let g = r.gradient(&x).unwrap();
                for i in 0..3 {
                    let (mut xp, mut xm) = (x.clone(), x.clone());
                    xp[i] += 1e-5;
                    xm[i] -= 1e-5;
                    let fd = (r.value(&xp).unwrap() - r.value(&xm).unwrap()) / 2e-5;
                    assert!((fd - g[i]).abs() <= 1e-4 * g[i].abs().max(1.0), "{}", r.kind_name());
                }
            }
        }
    }

    #[test]
    fn hessians_match_gradient_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for r in all() {
            let x: Vec<f64> = random_simplex_point(&mut rng, 3).iter().map(|v| 0.1 + 0.8 * v).collect();
            let h = r.hessian(&x).unwrap();
            for j in 0..3 {
                let (mut xp, mut xm) = (x.clone(), x.clone());
                xp[j] += 1e-6;
                xm[j] -= 1e-6;
                let (gp, gm) = (r.gradient(&xp).unwrap(), r.gradient(&xm).unwrap());
                for i in 0..3 {
                    let fd = (gp[i] - gm[i]) / 2e-6;
                    assert!((fd - h[i][j]).abs() <= 1e-5 * h[i][j].abs().max(1.0), "{}", r.kind_name());
                }
            }
        }
    }

    #[test]
    fn entropy_minimum_on_simplex() {
        // min over Δ_n of b Σ x log x is −b log n at the uniform point
        let r = Conjugate::neg_entropy(2.0);
        let v = r.value(&[0.25; 4]).unwrap();
        assert!((v + 2.0 * 4f64.ln()).abs() < 1e-14);
    }

    #[test]
    fn floored_gradient_is_finite_on_boundary() {
        let r = Conjugate::BarrierEntropy { b: 1.0, gamma: 0.1, c: 0.5 };
        let g = r.floored_gradient(&[1.5, 0.0]).unwrap();
        assert!(g.iter().all(|v| v.is_finite()));
        assert!(g[1] < g[0]);
    }

    #[test]
    fn gamma_thresholds() {
        assert_eq!(barrier_gamma_threshold(false, 2, 1.0, 0.5), 0.0);
        let g = barrier_gamma_threshold(false, 5, 1.0, 0.5);
        assert!((g - 0.5 * (5f64.ln() - 1.0)).abs() < 1e-15);
    }
}
