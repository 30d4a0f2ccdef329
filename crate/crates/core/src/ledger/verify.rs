//! The invariant battery behind the `verify` command.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::MarketState;
use crate::engine::{Coverage, Market};
use crate::error::{Error, Result};
use crate::linalg::{add, dist, dot, norm_inf, scale};
use crate::oracle;
use crate::payoffs::{Outcome, Payoff};
use crate::regions::{PriceRegion, Region};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckResult {
    pub name: String,
    pub passed: bool,
    /// Largest measured violation (0 when none).
    pub residual: f64,
    pub tolerance: f64,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub market: String,
    pub checks: Vec<CheckResult>,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn to_text(&self) -> String {
        let mut out = format!("verify {}\n", self.market);
        for c in &self.checks {
            out += &format!(
                "[{}] {:<26} residual {:.3e} (tol {:.1e}) {}\n",
                if c.passed { "PASS" } else { "FAIL" },
                c.name,
                c.residual,
                c.tolerance,
                c.detail
            );
        }
        out
    }
}

struct Battery {
    checks: Vec<CheckResult>,
}

impl Battery {
    fn record(&mut self, name: &str, residual: f64, tolerance: f64, detail: impl Into<String>) {
        self.checks.push(CheckResult {
            name: name.to_string(),
            passed: residual <= tolerance,
            residual,
            tolerance,
            detail: detail.into(),
        });
    }

    /// Runs `f`, recording solver or domain errors as a failed check.
    fn run(&mut self, name: &str, tolerance: f64, f: impl FnOnce() -> Result<(f64, String)>) {
        match f() {
            Ok((residual, detail)) => self.record(name, residual, tolerance, detail),
            Err(e) => self.record(name, f64::INFINITY, tolerance, format!("error: {e}")),
        }
    }
}

const SAMPLES: usize = 40;

/// Liquidity scale used to size random quantity vectors.
fn scale_of(market: &Market) -> f64 {
    market.worst_case_depth().clamp(0.1, 10.0)
}

fn random_vector(rng: &mut ChaCha8Rng, k: usize, spread: f64, nonnegative: bool) -> Vec<f64> {
    (0..k)
        .map(|_| if nonnegative { rng.gen_range(0.0..spread) } else { rng.gen_range(-spread..spread) })
        .collect()
}

/// Runs the invariant battery on a market, and on a state when given.
pub fn verify(market: &Market, state: Option<&MarketState>) -> VerifyReport {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let mut b = Battery { checks: Vec::new() };
    let k = market.dim();
    let s = scale_of(market);
    let pos = market.positive_only();
    let eps = market.solver_config().tolerance;
    let qs: Vec<Vec<f64>> = (0..SAMPLES).map(|_| random_vector(&mut rng, k, 2.0 * s, pos)).collect();
    let rs: Vec<Vec<f64>> = (0..SAMPLES).map(|_| random_vector(&mut rng, k, s, pos)).collect();

    b.run("conjugate_consistency", 2.0 * eps, || {
        let mut worst: f64 = 0.0;
        for q in &qs {
            let sol = market.solve(q)?;
            let direct = dot(&sol.price, q) - market.conjugate().value(&sol.price)?;
            worst = worst.max((sol.cost - direct).abs());
        }
        Ok((worst, "C(q) = x·q − R(x) at the price".into()))
    });

    b.run("price_in_region", 1e-7, || {
        let mut worst: f64 = 0.0;
        for q in &qs {
            worst = worst.max(market.region().violation(&market.price(q)?));
        }
        Ok((worst, format!("{} region membership", market.region().kind_name())))
    });

    b.run("gradient_matches_price", 1e-4, || {
        let mut worst: f64 = 0.0;
        for q in qs.iter().take(10) {
            let g = oracle::finite_diff_gradient(|v| market.cost(v), q, 1e-5)?;
            worst = worst.max(norm_inf(&crate::linalg::sub(&g, &market.price(q)?)));
        }
        Ok((worst, "central differences, step 1e-5".into()))
    });

    b.run("path_independence", 3.0 * eps.max(1e-12), || {
        let mut worst: f64 = 0.0;
        for (q, r) in qs.iter().zip(&rs) {
            let t: f64 = rng.gen_range(0.0..1.0);
            let r1 = scale(r, t);
            let r2 = scale(r, 1.0 - t);
            let whole = market.trade_cost(q, r)?;
            let split = market.trade_cost(q, &r1)? + market.trade_cost(&add(q, &r1), &r2)?;
            worst = worst.max((whole - split).abs() / whole.abs().max(1.0));
        }
        Ok((worst, "split trades cost the same".into()))
    });

    b.run("information_incorporation", 1e-7, || {
        let mut worst: f64 = 0.0;
        for (q, r) in qs.iter().zip(&rs) {
            let first = market.trade_cost(q, r)?;
            let second = market.trade_cost(&add(q, r), r)?;
            worst = worst.max(first - second);
        }
        Ok((worst, "repeat purchases never get cheaper".into()))
    });

    b.run("cost_convexity", 1e-7, || {
        let mut worst: f64 = 0.0;
        for (a, c) in qs.iter().zip(qs.iter().skip(1)) {
            let mid = scale(&add(a, c), 0.5);
            worst = worst.max(market.cost(&mid)? - 0.5 * (market.cost(a)? + market.cost(c)?));
        }
        Ok((worst, "midpoint convexity of C".into()))
    });

    if market.region().dim() <= 3 {
        b.run("grid_oracle_agreement", 0.0, || {
            let mut worst: f64 = 0.0;
            let res = if k <= 2 { 2000 } else { 120 };
            for q in qs.iter().take(5) {
                let grid = oracle::grid_cost(market.region(), market.conjugate(), q, res)?;
                let c = market.cost(q)?;
                // The grid maximum never exceeds C(q) and sits within a
                // first-order grid error of it.
                let bound = market.region().diameter() * (norm_inf(q) + 10.0 * scale_of(market)) * 4.0 / res as f64;
                let over = (grid - c - 1e-9).max(0.0);
                let under = (c - grid - bound).max(0.0);
                worst = worst.max(over.max(under));
            }
            Ok((worst, format!("grid resolution {res}")))
        });
    }

    let enumerable = market.payoff().payoff_vectors().is_ok();
    if market.coverage() == Coverage::Exact {
        if enumerable {
            b.run("no_arbitrage_witness", 1e-6, || {
                let mut worst: f64 = 0.0;
                for (q, r) in qs.iter().zip(&rs) {
                    if let oracle::ArbitrageCheck::Violation { shortfall, .. } = oracle::no_arbitrage_witness(market, q, r)? {
                        worst = worst.max(shortfall);
                    }
                }
                Ok((worst, "some outcome pays no more than the trade costs".into()))
            });
        }
        b.run("price_in_hull", 1e-6, || {
            let mut worst: f64 = 0.0;
            for q in qs.iter().take(15) {
                worst = worst.max(market.hull_distance(&market.price(q)?)?);
            }
            Ok((worst, "prices stay in the payoff hull".into()))
        });
    }

    if market.coverage() == Coverage::Relaxed {
        b.run("initial_price_in_hull", 1e-7, || {
            let d = market.hull_distance(market.initial_price())?;
            Ok((d, "∇C(0) lies in the payoff hull".into()))
        });
    }

    if let Payoff::PairBet { n } = *market.payoff() {
        if n <= 4 {
            b.run("gom_equals_hull", 1e-9, || {
                let hull = oracle::payoff_hull(market)?;
                let gom = Region::gom(n);
                let mut worst: f64 = 0.0;
                for _ in 0..200 {
                    let c = random_vector(&mut rng, k, 1.0, false);
                    worst = worst.max(hull.distance(&gom.linear_maximize(&c)?)?);
                }
                Ok((worst, "200 random vertices are permutation payoffs".into()))
            });
        }
    }

    if market.coverage() == Coverage::Partial {
        b.run("unbounded_loss_detector", 0.0, || unbounded_loss(market));
    }

    if pos {
        b.run("price_sum_band", 1e-9, || {
            let cap = market.region().bounding_box().iter().fold(0.0_f64, |m, &(_, hi)| m.max(hi));
            let mut q = vec![0.0; k];
            let mut worst: f64 = 0.0;
            for r in &rs {
                q = add(&q, r);
                let sum: f64 = market.price(&q)?.iter().sum();
                worst = worst.max(1.0 - sum).max(sum - cap);
            }
            let fixed = rs.first().cloned().unwrap_or_else(|| vec![1.0; k]);
            let mut q = vec![0.0; k];
            let mut last = market.price(&q)?.iter().sum::<f64>();
            for _ in 0..rs.len() {
                q = add(&q, &fixed);
                let sum: f64 = market.price(&q)?.iter().sum();
                worst = worst.max(last - sum);
                last = sum;
            }
            Ok((worst, "price sums stay in the band and rise under a repeated purchase".into()))
        });
    }

    if let Some(state) = state {
        b.run("cash_conservation", 3.0 * eps * (state.trades.len().max(1) as f64), || {
            let recomputed = state.recomputed_collected(market)?;
            Ok(((state.collected - recomputed).abs(), format!("{} trades", state.trades.len())))
        });
        b.run("replay_determinism", 0.0, || {
            let again = state.replay()?;
            let same = again.q == state.q && again.collected.to_bits() == state.collected.to_bits();
            Ok((if same { 0.0 } else { dist(&again.q, &state.q) + (again.collected - state.collected).abs() }, "replaying the log".into()))
        });
        if market.coverage() != Coverage::Partial && enumerable {
            b.run("realized_loss_within_bound", 1e-5, || {
                let mut worst = f64::NEG_INFINITY;
                for o in market.payoff().enumerate_outcomes()? {
                    let loss = market.realized_loss(&state.q, &o)?;
                    match market.worst_loss_bound(&state.q, &o) {
                        Ok(bound) => worst = worst.max(loss - bound.bound),
                        Err(Error::UndefinedGradient(_)) => {}
                        Err(e) => return Err(e),
                    }
                }
                Ok((worst.max(0.0), "every outcome".into()))
            });
        }
    }

    VerifyReport { market: market_label(market), checks: b.checks }
}

fn market_label(market: &Market) -> String {
    format!(
        "{} region, {} conjugate, {} payoff ({:?} coverage)",
        market.region().kind_name(),
        market.conjugate().kind_name(),
        market.payoff().kind_name(),
        market.coverage()
    )
}

/// Drains the market towards each payoff vector outside the price region and
/// checks that the realized loss grows at least `0.9·ε·k²` per step, with
/// `k` the distance from the payoff to the region.
fn unbounded_loss(market: &Market) -> Result<(f64, String)> {
    let eps = 0.01;
    let steps = 1000;
    let mut worst: f64 = 0.0;
    let mut detail = String::new();
    for o in market.payoff().enumerate_outcomes()? {
        let rho = market.payoff().payoff_vector(&o)?;
        let k = dist(&market.region().project(&rho)?, &rho);
        if k <= 1e-6 {
            continue;
        }
        let floor = 0.9 * eps * k * k;
        let mut q = vec![0.0; market.dim()];
        let mut loss = market.realized_loss(&q, &o)?;
        let mut min_step = f64::INFINITY;
        for _ in 0..steps {
            q = market.drain_step(&q, &o, eps)?;
            let next = market.realized_loss(&q, &o)?;
            min_step = min_step.min(next - loss);
            loss = next;
        }
        worst = worst.max(floor - min_step);
        detail += &format!("{}: k = {k:.6}, min step {min_step:.3e} vs {floor:.3e}, loss {loss:.4}; ", outcome_label(&o));
    }
    if detail.is_empty() {
        detail = "every payoff vector lies in the region".into();
    }
    Ok((worst.max(0.0), detail))
}

fn outcome_label(o: &Outcome) -> String {
    serde_json::to_string(o).expect("outcomes serialize")
}
