//! Loss and arbitrage diagnostics derived from the conjugate.

use serde::{Deserialize, Serialize};

use super::{Coverage, Market};
use crate::conjugates::ZERO_FLOOR;
use crate::error::{Error, Result};
use crate::linalg::{add, dot, sub};
use crate::payoffs::Outcome;
use crate::regions::{PriceRegion, MEMBER_TOL};

/// Worst-case loss bound `R(ρ(o)) − min_H R − D_R(ρ(o), ∇C(q))`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LossBound {
    pub bound: f64,
    /// `sup_{x ∈ ρ(O)} R(x) − min_H R`, valid for every state.
    pub a_priori: f64,
    pub conjugate_at_outcome: f64,
    pub hull_minimum: f64,
    /// `D_R(ρ(o), ∇C(q))`, the slack subtracted from the a-priori bound.
    pub divergence: f64,
}

/// `β·diam²/8`, the loss some trade sequence forces on any market with
/// worst-case depth `β`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LossLowerBound {
    pub value: f64,
    pub depth: f64,
    pub diameter: f64,
    /// False when `diameter` is only an upper bound on the hull diameter.
    pub diameter_exact: bool,
}

/// A bundle that moves the price onto the payoff hull.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArbitrageBundle {
    pub bundle: Vec<f64>,
    /// Price after buying the bundle.
    pub target_price: Vec<f64>,
    /// `min_{x ∈ H} D_R(x, ∇C(q))`.
    pub profit_bound: f64,
    /// `min_o ρ(o)·r − (C(q + r) − C(q))` over enumerated outcomes.
    pub worst_case_profit: Option<f64>,
    /// The target sits on the boundary where `∇R` is undefined; the bundle
    /// only approaches it.
    pub boundary: bool,
    /// Whether the market's bundle rules allow trading it.
    pub executable: bool,
}

impl Market {
    /// `min_{x ∈ H(ρ(O))} R(x)`.
    pub fn hull_minimum(&self) -> Result<f64> {
        Ok(-self.hull_market()?.initial_cost())
    }

    /// `sup_{x ∈ ρ(O)} R(x) − min_H R`.
    pub fn a_priori_loss_bound(&self) -> Result<f64> {
        let vectors = self.sampled_payoffs(4096)?;
        let mut top = f64::NEG_INFINITY;
        for v in &vectors {
            top = top.max(self.conjugate.value(v)?);
        }
        Ok(top - self.hull_minimum()?)
    }

    pub fn worst_loss_bound(&self, q: &[f64], o: &Outcome) -> Result<LossBound> {
        let rho = self.payoff.payoff_vector(o)?;
        if self.region.violation(&rho) > MEMBER_TOL {
            return Err(Error::DomainViolation(format!(
                "payoff vector {rho:?} lies outside the price region, so the loss is unbounded"
            )));
        }
        let price = self.price(q)?;
        let conjugate_at_outcome = self.conjugate.value(&rho)?;
        let hull_minimum = self.hull_minimum()?;
        let divergence = self.conjugate.bregman(&rho, &price)?;
        Ok(LossBound {
            bound: conjugate_at_outcome - hull_minimum - divergence,
            a_priori: self.a_priori_loss_bound()?,
            conjugate_at_outcome,
            hull_minimum,
            divergence,
        })
    }

    pub fn loss_lower_bound(&self) -> Result<LossLowerBound> {
        let hull = self.hull_market()?;
        let (diameter, diameter_exact) = match self.payoff.payoff_vectors() {
            Ok(v) if v.len() <= 1000 => {
                let mut d: f64 = 0.0;
                for (i, a) in v.iter().enumerate() {
                    for b in &v[i + 1..] {
                        d = d.max(crate::linalg::dist(a, b));
                    }
                }
                (d, true)
            }
            _ => (hull.region.diameter(), hull.region.diameter_is_exact()),
        };
        let depth = self.worst_case_depth();
        Ok(LossLowerBound { value: depth * diameter * diameter / 8.0, depth, diameter, diameter_exact })
    }

    /// `min_{x ∈ H} D_R(x, x0)` and its minimizer, for a price `x0` where
    /// `∇R` is defined.
    pub fn hull_divergence(&self, x0: &[f64]) -> Result<(f64, Vec<f64>)> {
        let g = self.conjugate.gradient(x0)?;
        let sol = self.hull_market()?.solve(&g)?;
        let value = dot(&g, x0) - self.conjugate.value(x0)? - sol.cost;
        Ok((value.max(0.0), sol.price))
    }

    /// Guaranteed profit available to an arbitrageur at state `q`.
    pub fn arbitrage_profit_bound(&self, q: &[f64]) -> Result<f64> {
        if self.coverage == Coverage::Exact {
            self.check_quantity(q)?;
            return Ok(0.0);
        }
        Ok(self.hull_divergence(&self.price(q)?)?.0)
    }

    /// The bundle `∇R(x*) − q` with `x*` the divergence projection of the
    /// current price onto the payoff hull.
    pub fn arbitrage_bundle(&self, q: &[f64]) -> Result<ArbitrageBundle> {
        let price = self.price(q)?;
        let (profit_bound, target) = if self.coverage == Coverage::Exact {
            (0.0, price.clone())
        } else {
            self.hull_divergence(&price)?
        };
        if profit_bound <= 1e-14 {
            return Ok(ArbitrageBundle {
                bundle: vec![0.0; q.len()],
                target_price: price,
                profit_bound: 0.0,
                worst_case_profit: Some(0.0),
                boundary: false,
                executable: true,
            });
        }
        let boundary = self.conjugate.entropy_parts().is_some() && target.iter().any(|&v| v <= ZERO_FLOOR);
        let holdings = if boundary { self.conjugate.floored_gradient(&target)? } else { self.conjugate.gradient(&target)? };
        let bundle = sub(&holdings, q);
        let next = add(q, &bundle);
        let paid = self.cost(&next)? - self.cost(q)?;
        let worst_case_profit = match self.payoff.payoff_vectors() {
            Ok(vectors) => Some(vectors.iter().map(|v| dot(v, &bundle) - paid).fold(f64::INFINITY, f64::min)),
            Err(Error::EnumerationUnavailable(_)) => None,
            Err(e) => return Err(e),
        };
        Ok(ArbitrageBundle {
            target_price: self.price(&next)?,
            executable: !self.positive_only || bundle.iter().all(|&v| v >= 0.0),
            bundle,
            profit_bound,
            worst_case_profit,
            boundary,
        })
    }
}
