//! The market maker: `C(q) = sup_{x ∈ Π} x·q − R(x)`, prices `∇C(q)`, trade
//! costs and diagnostics.

mod diagnostics;
mod solver;

pub use diagnostics::{ArbitrageBundle, LossBound, LossLowerBound};
pub use solver::{duality_gap, projected_gradient, Method, Solution, SolverConfig};

use serde::{Deserialize, Serialize};

use crate::conjugates::{Barrier, Conjugate};
use crate::error::{Error, Result};
use crate::linalg::{add, dot, norm, sub};
use crate::payoffs::{Outcome, Payoff};
use crate::regions::{HullHandle, PriceRegion, Region, MEMBER_TOL};

/// How the price region relates to the hull of the payoff vectors.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Coverage {
    /// `Π = H(ρ(O))`: no arbitrage.
    Exact,
    /// `H(ρ(O)) ⊆ Π`: bounded loss, possible arbitrage.
    Relaxed,
    /// Some payoff vectors lie outside `Π`: loss is unbounded.
    Partial,
}

/// Hull of the payoff vectors as a pricing problem of its own.
#[derive(Debug, Clone)]
enum HullView {
    SameAsRegion,
    Separate(Box<Market>),
    Unavailable(String),
}

/// Seam half-width around `‖q‖ = 2λr` where the ball market's depth is
/// undefined.
pub const SEAM_WIDTH: f64 = 1e-6;

/// Step for finite-difference Hessians of the price map.
pub const HESSIAN_STEP: f64 = 1e-4;

/// A priced trade.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Quote {
    pub bundle: Vec<f64>,
    pub cost: f64,
    pub pre_price: Vec<f64>,
    pub post_price: Vec<f64>,
    /// Bid-ask spread for the bundle; absent where selling is forbidden.
    pub spread: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct Market {
    region: Region,
    conjugate: Conjugate,
    payoff: Payoff,
    coverage: Coverage,
    positive_only: bool,
    solver: SolverConfig,
    initial: Solution,
    hull: HullView,
}

impl Market {
    pub fn new(
        region: Region,
        conjugate: Conjugate,
        payoff: Payoff,
        coverage: Coverage,
        positive_only: bool,
        solver: SolverConfig,
    ) -> Result<Self> {
        region.validate()?;
        conjugate.validate()?;
        if payoff.dim() != region.dim() {
            return Err(Error::Config(format!(
                "payoff has {} securities but the region has dimension {}",
                payoff.dim(),
                region.dim()
            )));
        }
        if let Conjugate::Quadratic { center, .. } = &conjugate {
            Error::check_dim(region.dim(), center.len())?;
        }
        if conjugate.entropy_parts().is_some() && region.bounding_box().iter().any(|&(lo, _)| lo < -MEMBER_TOL) {
            return Err(Error::Config("entropy conjugates need a region inside the nonnegative orthant".into()));
        }
        if let Conjugate::BarrierEntropy { c, .. } | Conjugate::RatioBarrierEntropy { c, .. } = conjugate {
            let compatible = match &region {
                Region::Band(band) => (band.c - c).abs() <= 1e-12,
                Region::Simplex(_) | Region::TrimmedSimplex(_) => true,
                _ => false,
            };
            if !compatible {
                return Err(Error::Config(format!(
                    "barrier conjugate with c = {c} needs a band region with the same c or a simplex"
                )));
            }
        }
        let hull = hull_view(&region, &conjugate, &payoff, coverage, solver)?;
        let mut market = Market {
            region,
            conjugate,
            payoff,
            coverage,
            positive_only,
            solver,
            initial: Solution { price: vec![], cost: 0.0, gap: 0.0, iterations: 0, method: Method::ProjectedGradient },
            hull,
        };
        market.check_coverage()?;
        market.initial = market.solve(&vec![0.0; market.dim()])?;
        if coverage == Coverage::Relaxed {
            let d = market.hull_distance(&market.initial.price.clone())?;
            if d > 1e-7 {
                return Err(Error::InitialPrice(format!(
                    "initial price {:?} lies {d:e} outside the payoff hull",
                    market.initial.price
                )));
            }
        }
        Ok(market)
    }

    /// LMSR with liquidity `b` over `n` outcomes.
    pub fn lmsr(n: usize, b: f64) -> Result<Self> {
        Market::new(
            Region::simplex(n),
            Conjugate::neg_entropy(b),
            Payoff::Complete { n },
            Coverage::Exact,
            false,
            SolverConfig::default(),
        )
    }

    /// Sphere-landing market: unit ball at the ones vector in R³ with
    /// `R(x) = λ‖x − 1‖²`.
    pub fn sphere(lambda: f64) -> Result<Self> {
        Market::new(
            Region::ball(3),
            Conjugate::quadratic(lambda, vec![1.0; 3]),
            Payoff::Sphere,
            Coverage::Exact,
            false,
            SolverConfig::default(),
        )
    }

    /// Pair betting over the reduced order-matrix polytope with
    /// `R(x) = λ‖x − ½‖²`.
    pub fn pair_bet(n: usize, lambda: f64) -> Result<Self> {
        let k = crate::regions::pair_count(n);
        Market::new(
            Region::gom(n),
            Conjugate::quadratic(lambda, vec![0.5; k]),
            Payoff::PairBet { n },
            Coverage::Relaxed,
            false,
            SolverConfig::default(),
        )
    }

    /// Transaction-cost market over `{x ≥ 0, 1 ≤ Σx ≤ 1 + c}` that only sells
    /// positive bundles. `gamma` defaults to the smallest value keeping the
    /// initial price on the simplex (at least 0.01).
    pub fn txncost(n: usize, b: f64, c: f64, gamma: Option<f64>, ratio_barrier: bool) -> Result<Self> {
        let threshold = crate::conjugates::barrier_gamma_threshold(ratio_barrier, n, b, c);
        let gamma = gamma.unwrap_or_else(|| threshold.max(0.01));
        if gamma < threshold * (1.0 - 1e-12) {
            return Err(Error::InitialPrice(format!(
                "γ = {gamma} is below {threshold}, so the initial price would leave the simplex"
            )));
        }
        let conjugate = if ratio_barrier {
            Conjugate::RatioBarrierEntropy { b, gamma, c }
        } else {
            Conjugate::BarrierEntropy { b, gamma, c }
        };
        Market::new(Region::band(n, c), conjugate, Payoff::Complete { n }, Coverage::Relaxed, true, SolverConfig::default())
    }

    fn check_coverage(&self) -> Result<()> {
        if self.coverage == Coverage::Partial {
            return Ok(());
        }
        let vectors = match self.payoff.payoff_vectors() {
            Ok(v) => v,
            Err(Error::EnumerationUnavailable(_)) => self.sampled_payoffs(512)?,
            Err(e) => return Err(e),
        };
        for v in &vectors {
            if self.region.violation(v) > MEMBER_TOL {
                return Err(Error::Config(format!(
                    "payoff vector {v:?} lies outside the {} region; declare partial coverage",
                    self.region.kind_name()
                )));
            }
        }
        Ok(())
    }

    /// Deterministic payoff samples for infinite outcome spaces.
    pub(crate) fn sampled_payoffs(&self, count: usize) -> Result<Vec<Vec<f64>>> {
        match self.payoff {
            Payoff::Sphere => sphere_points(count)
                .into_iter()
                .map(|u| self.payoff.payoff_vector(&Outcome::Point(u)))
                .collect(),
            _ => self.payoff.payoff_vectors(),
        }
    }

    pub fn region(&self) -> &Region {
        &self.region
    }

    pub fn conjugate(&self) -> &Conjugate {
        &self.conjugate
    }

    pub fn payoff(&self) -> &Payoff {
        &self.payoff
    }

    pub fn coverage(&self) -> Coverage {
        self.coverage
    }

    pub fn positive_only(&self) -> bool {
        self.positive_only
    }

    pub fn solver_config(&self) -> &SolverConfig {
        &self.solver
    }

    pub fn dim(&self) -> usize {
        self.region.dim()
    }

    /// `C(0) = −min_Π R`.
    pub fn initial_cost(&self) -> f64 {
        self.initial.cost
    }

    /// `∇C(0) = argmin_Π R`.
    pub fn initial_price(&self) -> &[f64] {
        &self.initial.price
    }

    fn check_quantity(&self, q: &[f64]) -> Result<()> {
        Error::check_dim(self.dim(), q.len())?;
        if q.iter().any(|v| !v.is_finite()) {
            return Err(Error::DomainViolation("quantities must be finite".into()));
        }
        Ok(())
    }

    /// Maximizer and value of `x·q − R(x)` over the price region.
    pub fn solve(&self, q: &[f64]) -> Result<Solution> {
        self.check_quantity(q)?;
        if self.solver.generic_only {
            return projected_gradient(&self.region, &self.conjugate, q, &self.solver);
        }
        match (&self.region, &self.conjugate) {
            (Region::Simplex(_), Conjugate::NegEntropy { b }) => Ok(solver::lmsr(*b, q)),
            (Region::Ball(ball), Conjugate::Quadratic { lambda, center }) if *center == ball.center => {
                Ok(solver::ball_quadratic(*lambda, center, ball.radius, q))
            }
            (_, Conjugate::Quadratic { lambda, center }) => {
                let target: Vec<f64> = q.iter().zip(center).map(|(v, m)| v / (2.0 * lambda) + m).collect();
                let x = self.region.project(&target)?;
                let cost = dot(&x, q) - self.conjugate.value(&x)?;
                let gap = duality_gap(&self.region, &self.conjugate, q, &x)?;
                Ok(Solution { price: x, cost, gap, iterations: 1, method: Method::QuadraticProjection })
            }
            (Region::Simplex(_) | Region::Band(_), conj) if conj.entropy_parts().is_some() => {
                let (b, barrier) = conj.entropy_parts().expect("entropy family");
                let hi = match &self.region {
                    Region::Band(band) => band.upper(),
                    _ => 1.0,
                };
                let (x, iterations) = solver::entropy_family(b, barrier, 1.0, hi, q);
                let cost = dot(&x, q) - self.conjugate.value(&x)?;
                let gap = duality_gap(&self.region, &self.conjugate, q, &x)?;
                Ok(Solution { price: x, cost, gap, iterations, method: Method::EntropyNested })
            }
            _ => projected_gradient(&self.region, &self.conjugate, q, &self.solver),
        }
    }

    pub fn cost(&self, q: &[f64]) -> Result<f64> {
        Ok(self.solve(q)?.cost)
    }

    pub fn price(&self, q: &[f64]) -> Result<Vec<f64>> {
        Ok(self.solve(q)?.price)
    }

    fn check_bundle(&self, r: &[f64]) -> Result<()> {
        Error::check_dim(self.dim(), r.len())?;
        if r.iter().any(|v| !v.is_finite()) {
            return Err(Error::DomainViolation("bundles must be finite".into()));
        }
        if self.positive_only && r.iter().any(|&v| v < 0.0) {
            return Err(Error::NegativeBundle);
        }
        Ok(())
    }

    /// `C(q + r) − C(q)`.
    pub fn trade_cost(&self, q: &[f64], r: &[f64]) -> Result<f64> {
        self.check_quantity(q)?;
        self.check_bundle(r)?;
        if r.iter().all(|&v| v == 0.0) {
            return Ok(0.0);
        }
        Ok(self.cost(&add(q, r))? - self.cost(q)?)
    }

    /// `(C(q + r) − C(q)) − (C(q) − C(q − r))`.
    pub fn bid_ask_spread(&self, q: &[f64], r: &[f64]) -> Result<f64> {
        self.check_quantity(q)?;
        self.check_bundle(r)?;
        let minus: Vec<f64> = r.iter().map(|v| -v).collect();
        self.check_bundle(&minus)?;
        if r.iter().all(|&v| v == 0.0) {
            return Ok(0.0);
        }
        let c = self.cost(q)?;
        Ok((self.cost(&add(q, r))? - c) - (c - self.cost(&sub(q, r))?))
    }

    /// `D_C(q′, q) = C(q′) − C(q) − ∇C(q)·(q′ − q)`.
    pub fn cost_divergence(&self, q_next: &[f64], q: &[f64]) -> Result<f64> {
        let at = self.solve(q)?;
        Ok(self.cost(q_next)? - at.cost - dot(&at.price, &sub(q_next, q)))
    }

    pub fn quote(&self, q: &[f64], r: &[f64]) -> Result<Quote> {
        self.check_quantity(q)?;
        self.check_bundle(r)?;
        let pre = self.solve(q)?;
        let post = self.solve(&add(q, r))?;
        let spread = if self.positive_only { None } else { Some(self.bid_ask_spread(q, r)?) };
        Ok(Quote { bundle: r.to_vec(), cost: post.cost - pre.cost, pre_price: pre.price, post_price: post.price, spread })
    }

    /// Payout `ρ(o)·q` owed to traders.
    pub fn settle(&self, q: &[f64], o: &Outcome) -> Result<f64> {
        self.check_quantity(q)?;
        Ok(dot(&self.payoff.payoff_vector(o)?, q))
    }

    /// `ρ(o)·q − (C(q) − C(0))`.
    pub fn realized_loss(&self, q: &[f64], o: &Outcome) -> Result<f64> {
        Ok(self.settle(q, o)? - (self.cost(q)? - self.initial.cost))
    }

    /// `q + ε(ρ(o) − ∇C(q))`.
    pub fn drain_step(&self, q: &[f64], o: &Outcome, eps: f64) -> Result<Vec<f64>> {
        if !(eps > 0.0) {
            return Err(Error::Config(format!("drain step needs ε > 0, got {eps}")));
        }
        let rho = self.payoff.payoff_vector(o)?;
        let p = self.price(q)?;
        Ok(q.iter().zip(rho.iter().zip(&p)).map(|(qi, (ri, pi))| qi + eps * (ri - pi)).collect())
    }

    /// `∇²C(q)`: analytic where available, otherwise central differences of
    /// the price with step [`HESSIAN_STEP`].
    pub fn hessian(&self, q: &[f64]) -> Result<Vec<Vec<f64>>> {
        let sol = self.solve(q)?;
        let n = self.dim();
        match (sol.method, &self.region, &self.conjugate) {
            (Method::LogSumExp, _, Conjugate::NegEntropy { b }) => {
                let p = &sol.price;
                Ok((0..n)
                    .map(|i| (0..n).map(|j| (if i == j { p[i] } else { 0.0 } - p[i] * p[j]) / b).collect())
                    .collect())
            }
            (Method::BallClosedForm, Region::Ball(ball), Conjugate::Quadratic { lambda, .. }) => {
                let nq = norm(q);
                let seam = 2.0 * lambda * ball.radius;
                if (nq - seam).abs() <= SEAM_WIDTH {
                    return Err(Error::DepthUndefined(format!("‖q‖ = {nq} is on the seam ‖q‖ = {seam}")));
                }
                if nq < seam {
                    let d = 1.0 / (2.0 * lambda);
                    Ok((0..n).map(|i| (0..n).map(|j| if i == j { d } else { 0.0 }).collect()).collect())
                } else {
                    let k = ball.radius / nq;
                    Ok((0..n)
                        .map(|i| {
                            (0..n)
                                .map(|j| k * (if i == j { 1.0 } else { 0.0 } - q[i] * q[j] / (nq * nq)))
                                .collect()
                        })
                        .collect())
                }
            }
            (Method::EntropyNested, region, conj) => entropy_hessian(region, conj, &sol.price),
            _ => self.finite_difference_hessian(q),
        }
    }

    #[allow(clippy::needless_range_loop)]
    fn finite_difference_hessian(&self, q: &[f64]) -> Result<Vec<Vec<f64>>> {
        let n = self.dim();
        let mut h = vec![vec![0.0; n]; n];
        for j in 0..n {
            let (mut qp, mut qm) = (q.to_vec(), q.to_vec());
            qp[j] += HESSIAN_STEP;
            qm[j] -= HESSIAN_STEP;
            let (pp, pm) = (self.price(&qp)?, self.price(&qm)?);
            for (i, row) in h.iter_mut().enumerate() {
                row[j] = (pp[i] - pm[i]) / (2.0 * HESSIAN_STEP);
            }
        }
        for i in 0..n {
            for j in 0..i {
                let avg = 0.5 * (h[i][j] + h[j][i]);
                h[i][j] = avg;
                h[j][i] = avg;
            }
        }
        Ok(h)
    }

    /// `β(q) = 1 / λ_max(∇²C(q))`; infinite where the Hessian vanishes.
    pub fn depth(&self, q: &[f64]) -> Result<f64> {
        let h = self.hessian(q)?;
        let (lmax, _) = crate::linalg::power_iteration(&h, 1e-8, 10_000);
        Ok(if lmax <= 1e-300 { f64::INFINITY } else { 1.0 / lmax })
    }

    /// A lower bound on `β(q)` over all `q`.
    pub fn worst_case_depth(&self) -> f64 {
        match (&self.region, &self.conjugate) {
            (Region::Simplex(_), Conjugate::NegEntropy { b }) => 2.0 * b,
            (_, Conjugate::Quadratic { lambda, .. }) => 2.0 * lambda,
            (region, conj) => {
                let top = region.bounding_box().iter().fold(0.0_f64, |m, &(_, hi)| m.max(hi));
                conj.strong_convexity() / top.max(1.0)
            }
        }
    }

    /// Euclidean distance from `x` to the payoff hull.
    pub fn hull_distance(&self, x: &[f64]) -> Result<f64> {
        Error::check_dim(self.dim(), x.len())?;
        let region = match &self.hull {
            HullView::SameAsRegion => &self.region,
            HullView::Separate(m) => &m.region,
            HullView::Unavailable(why) => return Err(Error::EnumerationUnavailable(why.clone())),
        };
        match region {
            Region::Hull(h) => h.distance(x),
            r => Ok(crate::linalg::dist(&r.project(x)?, x)),
        }
    }

    /// The same conjugate restricted to the payoff hull.
    fn hull_market(&self) -> Result<&Market> {
        match &self.hull {
            HullView::SameAsRegion => Ok(self),
            HullView::Separate(m) => Ok(m),
            HullView::Unavailable(why) => Err(Error::EnumerationUnavailable(why.clone())),
        }
    }
}

/// `∇²C` for the entropy family: the inverse of `∇²R` restricted to the face
/// whose sum constraints are active.
fn entropy_hessian(region: &Region, conj: &Conjugate, x: &[f64]) -> Result<Vec<Vec<f64>>> {
    let n = x.len();
    if x.iter().any(|&v| v <= crate::conjugates::ZERO_FLOOR) {
        return Err(Error::DepthUndefined("price on the boundary of the orthant".into()));
    }
    let hr = conj.hessian(x)?;
    let m = nalgebra::DMatrix::from_fn(n, n, |i, j| hr[i][j]);
    let inv = m
        .try_inverse()
        .ok_or_else(|| Error::DepthUndefined("conjugate Hessian is singular".into()))?;
    let s: f64 = x.iter().sum();
    let sum_active = match region {
        Region::Band(band) => {
            let free_above = matches!(conj.entropy_parts(), Some((_, Barrier::Log { .. } | Barrier::Ratio { .. })));
            s - 1.0 <= 1e-12 || (!free_above && band.upper() - s <= 1e-12)
        }
        _ => true,
    };
    let mut h = inv.clone();
    if sum_active {
        let ones = nalgebra::DVector::from_element(n, 1.0);
        let v = &inv * &ones;
        let denom = ones.dot(&v);
        h -= &v * v.transpose() / denom;
    }
    Ok((0..n).map(|i| (0..n).map(|j| h[(i, j)]).collect()).collect())
}

fn hull_view(
    region: &Region,
    conjugate: &Conjugate,
    payoff: &Payoff,
    coverage: Coverage,
    solver: SolverConfig,
) -> Result<HullView> {
    if coverage == Coverage::Exact {
        return Ok(HullView::SameAsRegion);
    }
    let hull_region = match *payoff {
        Payoff::Complete { n } => Region::simplex(n),
        Payoff::Sphere => Region::ball(3),
        Payoff::PairBet { n } if n <= 4 => Region::gom(n),
        Payoff::PairBet { .. } => match payoff.payoff_vectors() {
            Ok(v) => Region::Hull(HullHandle::new(v)?),
            Err(Error::EnumerationUnavailable(why)) => return Ok(HullView::Unavailable(why)),
            Err(e) => return Err(e),
        },
    };
    if &hull_region == region {
        return Ok(HullView::SameAsRegion);
    }
    let market = Market::new(hull_region, conjugate.clone(), payoff.clone(), Coverage::Exact, false, solver)?;
    Ok(HullView::Separate(Box::new(market)))
}

/// Deterministic, roughly uniform points on the unit sphere (Fibonacci
/// lattice).
pub fn sphere_points(count: usize) -> Vec<Vec<f64>> {
    let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
    (0..count)
        .map(|i| {
            let z = 1.0 - 2.0 * (i as f64 + 0.5) / count as f64;
            let r = (1.0 - z * z).sqrt();
            let phi = golden * i as f64;
            vec![r * phi.cos(), r * phi.sin(), z]
        })
        .collect()
}
