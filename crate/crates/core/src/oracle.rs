//! Brute-force validators: grid maximization of the conjugate objective,
//! hull distance, finite differences and no-arbitrage witnesses. These share
//! no code with the engine's fast paths.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::conjugates::Conjugate;
use crate::engine::Market;
use crate::error::{Error, Result};
use crate::linalg::dot;
use crate::payoffs::{check_distribution, Outcome};
use crate::regions::{PriceRegion, Region};

pub use crate::regions::HullHandle;

/// Largest region dimension the grid oracle accepts.
pub const GRID_MAX_DIM: usize = 4;

/// Smallest grid resolution the grid oracle accepts.
pub const GRID_MIN_RESOLUTION: usize = 50;

/// A probability vector over enumerated outcomes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BeliefDistribution {
    probabilities: Vec<f64>,
}

impl BeliefDistribution {
    pub fn new(probabilities: Vec<f64>) -> Result<Self> {
        check_distribution(&probabilities, probabilities.len())?;
        Ok(Self { probabilities })
    }

    pub fn uniform(n: usize) -> Self {
        Self { probabilities: vec![1.0 / n as f64; n] }
    }

    /// A draw from the flat Dirichlet distribution.
    pub fn random(n: usize, rng: &mut impl Rng) -> Self {
        let e: Vec<f64> = (0..n).map(|_| -(1.0 - rng.gen::<f64>()).ln()).collect();
        let s: f64 = e.iter().sum();
        Self { probabilities: e.into_iter().map(|v| v / s).collect() }
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.probabilities
    }
}

/// Hull of the market's enumerated payoff vectors.
pub fn payoff_hull(market: &Market) -> Result<HullHandle> {
    HullHandle::new(market.payoff().payoff_vectors()?)
}

/// Euclidean distance from `x` to the hull.
pub fn hull_distance(hull: &HullHandle, x: &[f64]) -> Result<f64> {
    hull.distance(x)
}

fn visit_lattice(dims: usize, resolution: usize, f: &mut dyn FnMut(&[usize])) {
    let mut idx = vec![0usize; dims];
    loop {
        f(&idx);
        let mut k = 0;
        loop {
            if k == dims {
                return;
            }
            idx[k] += 1;
            if idx[k] <= resolution {
                break;
            }
            idx[k] = 0;
            k += 1;
        }
    }
}

/// `max x·q − R(x)` over grid points of the region. Simplex-like regions are
/// sampled on a lattice of their free coordinates; others on a box grid of
/// their bounding box filtered by membership.
pub fn grid_cost(region: &Region, conjugate: &Conjugate, q: &[f64], resolution: usize) -> Result<f64> {
    let d = region.dim();
    Error::check_dim(d, q.len())?;
    if d > GRID_MAX_DIM {
        return Err(Error::Unsupported(format!("grid oracle needs dimension ≤ {GRID_MAX_DIM}, got {d}")));
    }
    if resolution < GRID_MIN_RESOLUTION {
        return Err(Error::Config(format!("grid resolution must be at least {GRID_MIN_RESOLUTION}")));
    }
    let step = 1.0 / resolution as f64;
    let mut best = f64::NEG_INFINITY;
    let mut consider = |x: &[f64]| {
        if region.violation(x) <= 1e-12 {
            if let Ok(r) = conjugate.value(x) {
                best = best.max(dot(x, q) - r);
            }
        }
    };
    match region {
        Region::Simplex(_) | Region::TrimmedSimplex(_) => {
            visit_lattice(d - 1, resolution, &mut |idx| {
                let mut x: Vec<f64> = idx.iter().map(|&i| i as f64 * step).collect();
                let rest = 1.0 - x.iter().sum::<f64>();
                if rest >= -1e-12 {
                    x.push(rest.max(0.0));
                    consider(&x);
                }
            });
        }
        Region::Band(band) => {
            let top = band.upper();
            visit_lattice(d, resolution, &mut |idx| {
                let s = 1.0 + band.c * idx[d - 1] as f64 * step;
                let mut x: Vec<f64> = idx[..d - 1].iter().map(|&i| top * i as f64 * step).collect();
                let rest = s - x.iter().sum::<f64>();
                if rest >= -1e-12 {
                    x.push(rest.max(0.0));
                    consider(&x);
                }
            });
        }
        _ => {
            let bounds = region.bounding_box();
            visit_lattice(d, resolution, &mut |idx| {
                let x: Vec<f64> = idx
                    .iter()
                    .zip(&bounds)
                    .map(|(&i, &(lo, hi))| lo + (hi - lo) * i as f64 * step)
                    .collect();
                consider(&x);
            });
        }
    }
    if best.is_finite() {
        Ok(best)
    } else {
        Err(Error::solver("grid oracle found no member grid point", 0))
    }
}

/// Central differences of `f` at `q` with step `h`.
pub fn finite_diff_gradient(f: impl Fn(&[f64]) -> Result<f64>, q: &[f64], h: f64) -> Result<Vec<f64>> {
    if !(1e-7..=1e-3).contains(&h) {
        return Err(Error::Config(format!("finite-difference step must lie in [1e-7, 1e-3], got {h}")));
    }
    (0..q.len())
        .map(|i| {
            let (mut qp, mut qm) = (q.to_vec(), q.to_vec());
            qp[i] += h;
            qm[i] -= h;
            Ok((f(&qp)? - f(&qm)?) / (2.0 * h))
        })
        .collect()
}

/// Outcome certifying that a trade is not an arbitrage, or the best
/// counterexample found.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum ArbitrageCheck {
    /// `trade_cost(q, r) ≥ ρ(o)·r − 1e-6`.
    Witness { outcome: Outcome, payout: f64, cost: f64 },
    /// Every outcome pays more than the trade cost.
    Violation { outcome: Outcome, payout: f64, cost: f64, shortfall: f64 },
}

impl ArbitrageCheck {
    pub fn is_witness(&self) -> bool {
        matches!(self, ArbitrageCheck::Witness { .. })
    }
}

pub fn no_arbitrage_witness(market: &Market, q: &[f64], r: &[f64]) -> Result<ArbitrageCheck> {
    let outcomes = market.payoff().enumerate_outcomes()?;
    let cost = market.trade_cost(q, r)?;
    let mut worst: Option<(Outcome, f64)> = None;
    for o in outcomes {
        let payout = dot(&market.payoff().payoff_vector(&o)?, r);
        if cost >= payout - 1e-6 {
            return Ok(ArbitrageCheck::Witness { outcome: o, payout, cost });
        }
        if worst.as_ref().is_none_or(|(_, p)| payout < *p) {
            worst = Some((o, payout));
        }
    }
    let (outcome, payout) = worst.expect("enumeration is nonempty");
    Ok(ArbitrageCheck::Violation { outcome, payout, cost, shortfall: payout - cost })
}

/// Largest hull distance among order-matrix polytope vertices found by
/// random linear maximization; zero when the polytope equals the hull of
/// the permutation payoffs.
pub fn gom_hull_gap_probe(n: usize, directions: usize, rng: &mut impl Rng) -> Result<(f64, Vec<f64>)> {
    let payoff = crate::payoffs::Payoff::PairBet { n };
    let hull = HullHandle::new(payoff.payoff_vectors()?)?;
    let region = Region::gom(n);
    let mut best = (0.0, region.interior_point());
    for _ in 0..directions {
        let c: Vec<f64> = (0..region.dim()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let v = region.linear_maximize(&c)?;
        let d = hull.distance(&v)?;
        if d > best.0 {
            best = (d, v);
        }
    }
    Ok(best)
}
