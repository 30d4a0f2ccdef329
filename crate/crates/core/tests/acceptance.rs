//! Acceptance suite: one line per criterion, nonzero exit if any fails.

use std::process::ExitCode;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use dualmm::conjugates::Conjugate;
use dualmm::engine::{Coverage, Market, SolverConfig};
use dualmm::error::Result;
use dualmm::ledger::{MarketConfig, MarketSpec, MarketState};
use dualmm::linalg::{dist, dot, norm, sub};
use dualmm::oracle::{self, ArbitrageCheck};
use dualmm::payoffs::{Outcome, Payoff};
use dualmm::regions::{HullHandle, PriceRegion, Region};

type Criterion = fn() -> Result<Verdict>;

struct Verdict {
    passed: bool,
    detail: String,
}

/// Collects named sub-checks of one criterion.
#[derive(Default)]
struct Checks {
    failures: Vec<String>,
    notes: Vec<String>,
}

impl Checks {
    fn within(&mut self, what: &str, residual: f64, tol: f64) {
        if residual <= tol {
            self.notes.push(format!("{what} {residual:.1e}"));
        } else {
            self.failures.push(format!("{what} residual {residual:.3e} > {tol:.0e}"));
        }
    }

    fn holds(&mut self, what: &str, ok: bool, detail: String) {
        if ok {
            self.notes.push(format!("{what} ({detail})"));
        } else {
            self.failures.push(format!("{what}: {detail}"));
        }
    }

    fn verdict(self) -> Verdict {
        if self.failures.is_empty() {
            Verdict { passed: true, detail: self.notes.join("; ") }
        } else {
            let mut detail = self.failures.join("; ");
            if !self.notes.is_empty() {
                detail += &format!(" | holding: {}", self.notes.join("; "));
            }
            Verdict { passed: false, detail }
        }
    }
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn uniform(rng: &mut ChaCha8Rng, n: usize, lo: f64, hi: f64) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(lo..hi)).collect()
}

fn unit_direction(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    loop {
        let v = uniform(rng, n, -1.0, 1.0);
        let l = norm(&v);
        if l > 1e-3 && l <= 1.0 {
            return v.iter().map(|x| x / l).collect();
        }
    }
}

fn sphere_exactness() -> Result<Verdict> {
    let mut c = Checks::default();
    let lambda = 1.0;
    let fast = Market::sphere(lambda)?;
    let generic = Market::new(
        Region::ball(3),
        Conjugate::quadratic(lambda, vec![1.0; 3]),
        Payoff::Sphere,
        Coverage::Exact,
        false,
        SolverConfig { generic_only: true, ..SolverConfig::default() },
    )?;
    let mut r = rng(1);
    let (mut worst, mut inner, mut outer) = (0.0_f64, 0, 0);
    for i in 0..200 {
        let radius = if i % 2 == 0 { r.gen_range(0.0..2.0) } else { r.gen_range(2.0..6.0) };
        let q: Vec<f64> = unit_direction(&mut r, 3).iter().map(|v| v * radius).collect();
        if radius < 2.0 * lambda { inner += 1 } else { outer += 1 }
        worst = worst.max((fast.cost(&q)? - generic.cost(&q)?).abs());
    }
    c.within(&format!("closed form vs generic ({inner} inner, {outer} outer)"), worst, 1e-6);
    let p = fast.price(&[1.0, 0.0, 0.0])?;
    c.within("price((1,0,0))", dist(&p, &[1.5, 1.0, 1.0]), 1e-8);
    let mut worst = 0.0_f64;
    for _ in 0..50 {
        let q: Vec<f64> = unit_direction(&mut r, 3).iter().map(|v| v * r.gen_range(0.0..1.9)).collect();
        worst = worst.max((fast.depth(&q)? - 2.0 * lambda).abs());
    }
    c.within("depth = 2λ at 50 interior points", worst, 1e-4);
    Ok(c.verdict())
}

fn sphere_loss_tightness() -> Result<Verdict> {
    let mut c = Checks::default();
    let lambda = 1.0;
    let (mut state, market) = MarketState::init(MarketConfig::new(MarketSpec::Sphere { lambda }))?;
    for _ in 0..4 {
        state.apply_trade(&market, &[0.5, 0.0, 0.0])?;
    }
    c.within("price at the payoff vertex", dist(&market.price(&state.q)?, &[2.0, 1.0, 1.0]), 1e-8);
    let s = state.settle(&market, &Outcome::Point(vec![1.0, 0.0, 0.0]))?;
    c.within("realized loss = λ", (s.realized_loss - lambda).abs(), 1e-4);
    let bound = s.bound.unwrap_or(f64::NAN);
    c.within("worst-case bound = λ", (bound - lambda).abs(), 1e-4);
    let lower = market.loss_lower_bound()?;
    // β = 2λ and the unit ball around (1,1,1) has diameter 2.
    let expected = 2.0 * lambda * 2.0 * 2.0 / 8.0;
    c.within("lower bound β·diam²/8 = λ", (lower.value - expected).abs().max((expected - lambda).abs()), 1e-4);
    Ok(c.verdict())
}

/// Independent evaluation of `b log Σ exp(q/b)` and its softmax.
fn naive_lmsr(b: f64, q: &[f64]) -> (f64, Vec<f64>) {
    let m = q.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let w: Vec<f64> = q.iter().map(|v| ((v - m) / b).exp()).collect();
    let z: f64 = w.iter().sum();
    (m + b * z.ln(), w.iter().map(|v| v / z).collect())
}

fn lmsr_reproduction() -> Result<Verdict> {
    let mut c = Checks::default();
    let mut r = rng(3);
    let mut worst = 0.0_f64;
    for n in 2..=6 {
        for &b in &[0.5, 1.0, 3.0] {
            let m = Market::lmsr(n, b)?;
            for _ in 0..200 {
                let q = uniform(&mut r, n, -10.0, 10.0);
                let (cost, price) = naive_lmsr(b, &q);
                worst = worst.max((m.cost(&q)? - cost).abs()).max(dist(&m.price(&q)?, &price));
            }
        }
    }
    c.within("cost and price vs log-sum-exp", worst, 1e-10);
    let mut excess = f64::NEG_INFINITY;
    for n in 2..=6 {
        let b = 1.0;
        let m = Market::lmsr(n, b)?;
        let outcomes = m.payoff().enumerate_outcomes()?;
        let mut q = vec![0.0; n];
        for _ in 0..10_000 {
            let trade = uniform(&mut r, n, -1.0, 1.0);
            q = dualmm::linalg::add(&q, &trade);
            for o in &outcomes {
                excess = excess.max(m.realized_loss(&q, o)? - b * (n as f64).ln());
            }
        }
    }
    c.within("10,000-trade loss above b log n", excess.max(0.0), 1e-6);
    Ok(c.verdict())
}

/// Price-in-hull distance and the best no-arbitrage witness shortfall for
/// one market, with the payoff hull computed independently of the engine.
struct HullOracle {
    hull: Option<HullHandle>,
}

impl HullOracle {
    fn new(m: &Market) -> Result<Self> {
        Ok(Self { hull: if m.payoff().outcome_count().is_some() { Some(oracle::payoff_hull(m)?) } else { None } })
    }

    fn distance(&self, x: &[f64]) -> Result<f64> {
        match &self.hull {
            Some(h) => oracle::hull_distance(h, x),
            // Payoffs of the sphere fill the unit sphere around (1,1,1).
            None => Ok((dist(x, &[1.0; 3]) - 1.0).max(0.0)),
        }
    }

    fn arbitrage_shortfall(&self, m: &Market, q: &[f64], r: &[f64]) -> Result<f64> {
        if self.hull.is_some() {
            return Ok(match oracle::no_arbitrage_witness(m, q, r)? {
                ArbitrageCheck::Witness { .. } => 0.0,
                ArbitrageCheck::Violation { shortfall, .. } => shortfall,
            });
        }
        // The outcome u = −r/‖r‖ pays the least.
        let payout = r.iter().sum::<f64>() - norm(r);
        Ok((payout - m.trade_cost(q, r)?).max(0.0))
    }
}

fn axiom_battery() -> Result<Verdict> {
    let mut c = Checks::default();
    let markets = vec![
        ("lmsr n=3", Market::lmsr(3, 1.0)?, 3.0),
        ("lmsr n=5", Market::lmsr(5, 0.7)?, 3.0),
        ("sphere", Market::sphere(1.0)?, 4.0),
        ("pairbet n=3", Market::pair_bet(3, 1.0)?, 2.0),
        ("pairbet n=4", Market::pair_bet(4, 1.0)?, 2.0),
    ];
    let mut r = rng(4);
    for (name, m, scale) in &markets {
        let k = m.dim();
        let oracle = HullOracle::new(m)?;
        let mut res = [0.0_f64; 5];
        for _ in 0..1000 {
            let q = uniform(&mut r, k, -scale, *scale);
            let r1 = uniform(&mut r, k, -1.0, 1.0);
            let r2 = uniform(&mut r, k, -1.0, 1.0);
            let split = m.trade_cost(&q, &r1)? + m.trade_cost(&dualmm::linalg::add(&q, &r1), &r2)?;
            let joint = m.trade_cost(&q, &dualmm::linalg::add(&r1, &r2))?;
            res[0] = res[0].max((split - joint).abs());
            let again = m.trade_cost(&dualmm::linalg::add(&q, &r1), &r1)?;
            res[1] = res[1].max(m.trade_cost(&q, &r1)? - again);
            let a = uniform(&mut r, k, -scale, *scale);
            let mid: Vec<f64> = a.iter().zip(&q).map(|(x, y)| 0.5 * (x + y)).collect();
            res[2] = res[2].max(m.cost(&mid)? - 0.5 * (m.cost(&a)? + m.cost(&q)?));
            res[3] = res[3].max(oracle.distance(&m.price(&q)?)?);
            res[4] = res[4].max(oracle.arbitrage_shortfall(m, &q, &r1)?);
        }
        let names = ["path independence", "information incorporation", "midpoint convexity", "price in hull", "no-arbitrage witness"];
        let mut fails = Vec::new();
        for (what, v) in names.iter().zip(res) {
            if v > 1e-6 {
                fails.push(format!("{what} {v:.3e}"));
            }
        }
        let worst = res.iter().cloned().fold(0.0, f64::max);
        c.holds(name, fails.is_empty(), if fails.is_empty() { format!("worst {worst:.1e}") } else { fails.join(", ") });
    }
    Ok(c.verdict())
}

fn trimmed_fixture() -> Result<Market> {
    MarketConfig::from_json(r#"{"kind":"trimmed","n":2,"lambda":1.0,"halfspaces":[{"a":[1.0,0.0],"b":0.8}]}"#)?.build()
}

fn band_fixture() -> Result<Market> {
    Market::new(
        Region::band(2, 1.0),
        Conjugate::quadratic(1.0, vec![0.0, 0.0]),
        Payoff::Complete { n: 2 },
        Coverage::Relaxed,
        false,
        SolverConfig::default(),
    )
}

fn gradient_checks() -> Result<Verdict> {
    let mut c = Checks::default();
    let markets = vec![
        ("lmsr", Market::lmsr(4, 1.0)?),
        ("sphere", Market::sphere(1.0)?),
        ("pairbet n=4", Market::pair_bet(4, 1.0)?),
        ("pairbet n=5", Market::pair_bet(5, 1.0)?),
        ("txncost", Market::txncost(3, 1.0, 0.5, None, true)?),
        ("txncost log", Market::txncost(3, 1.0, 0.5, None, false)?),
        ("trimmed", trimmed_fixture()?),
        ("band", band_fixture()?),
    ];
    let mut r = rng(5);
    let mut worst = 0.0_f64;
    let mut who = "";
    for (name, m) in &markets {
        for _ in 0..40 {
            let q = uniform(&mut r, m.dim(), -3.0, 3.0);
            let fd = oracle::finite_diff_gradient(|x| m.cost(x), &q, 1e-5)?;
            let d = sub(&fd, &m.price(&q)?).iter().fold(0.0_f64, |a, v| a.max(v.abs()));
            if d > worst {
                worst = d;
                who = name;
            }
        }
    }
    c.within(&format!("finite-difference gradient on {} markets (worst {who})", markets.len()), worst, 1e-4);
    let smooth = vec![
        Market::sphere(1.0)?,
        Market::lmsr(3, 1.0)?,
        Market::new(
            Region::simplex(3),
            Conjugate::quadratic(0.75, vec![1.0 / 3.0; 3]),
            Payoff::Complete { n: 3 },
            Coverage::Exact,
            false,
            SolverConfig::default(),
        )?,
    ];
    let (mut div, mut spread) = (f64::NEG_INFINITY, f64::NEG_INFINITY);
    for m in &smooth {
        let beta = m.worst_case_depth();
        for _ in 0..300 {
            let q = uniform(&mut r, m.dim(), -3.0, 3.0);
            let step = uniform(&mut r, m.dim(), -1.0, 1.0);
            let r2 = dot(&step, &step);
            div = div.max(m.cost_divergence(&dualmm::linalg::add(&q, &step), &q)? - r2 / (2.0 * beta));
            spread = spread.max(m.bid_ask_spread(&q, &step)? - 2.0 * r2 / beta);
        }
    }
    c.within("D_C ≤ ‖r‖²/2β", div.max(0.0), 1e-6);
    c.within("spread ≤ 2‖r‖²/β", spread.max(0.0), 1e-6);
    Ok(c.verdict())
}

fn pair_betting() -> Result<Verdict> {
    let mut c = Checks::default();
    let mut r = rng(6);
    for n in [3, 4] {
        let payoff = Payoff::PairBet { n };
        let gom = Region::gom(n);
        let vectors = payoff.payoff_vectors()?;
        let worst = vectors.iter().map(|v| gom.violation(v)).fold(0.0, f64::max);
        c.within(&format!("all {} permutations in the n={n} polytope", vectors.len()), worst, 1e-12);
        let mut off = 0.0_f64;
        for _ in 0..1000 {
            let dir = uniform(&mut r, gom.dim(), -1.0, 1.0);
            let v = gom.linear_maximize(&dir)?;
            off = off.max(vectors.iter().map(|p| dist(p, &v)).fold(f64::INFINITY, f64::min));
        }
        c.within(&format!("1000 maximizers are permutations (n={n})"), off, 1e-9);
    }
    let (mut gap, mut slowest) = (0.0_f64, 0.0_f64);
    for n in 3..=8 {
        let m = Market::pair_bet(n, 1.0)?;
        for _ in 0..3 {
            let q = uniform(&mut r, m.dim(), -4.0, 4.0);
            let bundle = uniform(&mut r, m.dim(), -1.0, 1.0);
            let t = Instant::now();
            m.quote(&q, &bundle)?;
            slowest = slowest.max(t.elapsed().as_secs_f64());
            gap = gap.max(m.solve(&q)?.gap).max(m.solve(&dualmm::linalg::add(&q, &bundle))?.gap);
        }
    }
    c.within("duality gap up to n=8", gap, 1e-8);
    c.holds("quote time", slowest < 5.0, format!("slowest {slowest:.3}s"));
    Ok(c.verdict())
}

fn relaxations() -> Result<Verdict> {
    let mut c = Checks::default();
    let m = trimmed_fixture()?;
    // Distance from e_1 to {x ∈ Δ_2 : x_1 ≤ 0.8} by scanning the segment.
    let k = (0..=800_000)
        .map(|i| {
            let x1 = i as f64 * 1e-6;
            dist(&[x1, 1.0 - x1], &[1.0, 0.0])
        })
        .fold(f64::INFINITY, f64::min);
    c.within("k = 0.2√2", (k - 0.2 * 2f64.sqrt()).abs(), 1e-9);
    let (o, eps) = (Outcome::Index(1), 0.01);
    let mut q = vec![0.0; 2];
    let mut loss = m.realized_loss(&q, &o)?;
    let mut min_step = f64::INFINITY;
    for _ in 0..1000 {
        q = m.drain_step(&q, &o, eps)?;
        let next = m.realized_loss(&q, &o)?;
        min_step = min_step.min(next - loss);
        loss = next;
    }
    let floor = 0.9 * eps * k * k;
    c.holds("per-step drain loss", min_step >= floor, format!("min {min_step:.4e} vs {floor:.4e}, total {loss:.4}"));

    let m = band_fixture()?;
    let q = [1.5, 1.5];
    c.within("price (0.75, 0.75)", dist(&m.price(&q)?, &[0.75, 0.75]), 1e-12);
    c.within("arbitrage profit bound 0.125", (m.arbitrage_profit_bound(&q)? - 0.125).abs(), 1e-6);
    let a = m.arbitrage_bundle(&q)?;
    let cost = m.trade_cost(&q, &a.bundle)?;
    let worst = (0..2).map(|i| a.bundle[i] - cost).fold(f64::INFINITY, f64::min);
    c.holds("bundle worst-case profit", worst >= 0.125 - 1e-6, format!("{worst:.9}"));
    Ok(c.verdict())
}

/// Depth drops along `q ← q + r_t` once the price sum passes `1 + c/2`.
fn depth_drops(m: &Market, c: f64, bundles: impl Iterator<Item = Vec<f64>>) -> Result<(usize, usize, f64)> {
    let (mut samples, mut drops, mut worst) = (0, 0, 0.0_f64);
    let mut q = vec![0.0; m.dim()];
    let mut last: Option<f64> = None;
    for r in bundles {
        q = dualmm::linalg::add(&q, &r);
        if m.price(&q)?.iter().sum::<f64>() <= 1.0 + c / 2.0 {
            continue;
        }
        let d = m.depth(&q)?;
        samples += 1;
        if let Some(l) = last {
            if d < l * (1.0 - 1e-9) {
                drops += 1;
                worst = worst.max((l - d) / l);
            }
        }
        last = Some(d);
    }
    Ok((samples, drops, worst))
}

fn transaction_costs() -> Result<Verdict> {
    let mut ch = Checks::default();
    let (b, c) = (1.0, 0.5);
    let mut r = rng(8);
    let mut band = 0.0_f64;
    let mut loss_excess = f64::NEG_INFINITY;
    let (mut ray, mut random) = ((0, 0, 0.0_f64), (0, 0, 0.0_f64));
    for n in [2, 3, 5] {
        let m = Market::txncost(n, b, c, None, true)?;
        let outcomes = m.payoff().enumerate_outcomes()?;
        let mut q = vec![0.0; n];
        for t in 1..=1000 {
            let trade = uniform(&mut r, n, 0.0, 0.2);
            q = dualmm::linalg::add(&q, &trade);
            let s: f64 = m.price(&q)?.iter().sum();
            band = band.max(1.0 - s).max(s - (1.0 + c));
            if t % 50 == 0 {
                for o in &outcomes {
                    let bound = m.worst_loss_bound(&q, o)?.bound;
                    loss_excess = loss_excess.max(m.realized_loss(&q, o)? - bound);
                }
            }
        }
        let rays: Vec<Vec<f64>> = vec![
            vec![1.0; n],
            (0..n).map(|i| 1.0 + 0.1 * i as f64).collect(),
            (0..n).map(|i| if i % 2 == 0 { 1.0 } else { 0.3 }).collect(),
            (0..n).map(|i| if i % 2 == 0 { 0.2 } else { 1.0 }).collect(),
        ];
        for dir in rays {
            let (s, d, w) = depth_drops(&m, c, std::iter::repeat_n(dir.iter().map(|v| 0.05 * v).collect(), 300))?;
            ray = (ray.0 + s, ray.1 + d, ray.2.max(w));
        }
        for _ in 0..3 {
            let steps: Vec<Vec<f64>> = (0..300).map(|_| uniform(&mut r, n, 0.0, 0.1)).collect();
            let (s, d, w) = depth_drops(&m, c, steps.into_iter())?;
            random = (random.0 + s, random.1 + d, random.2.max(w));
        }
    }
    ch.within("price sums in [1, 1+c]", band.max(0.0), 1e-9);
    ch.holds(
        "depth along repeated bundles",
        ray.1 == 0,
        format!("{} drops in {} samples, worst relative {:.2e}", ray.1, ray.0, ray.2),
    );
    ch.holds(
        "depth along random positive trades",
        random.1 == 0,
        format!("{} drops in {} samples, worst relative {:.2e}", random.1, random.0, random.2),
    );
    ch.within("realized loss above bound in 1000-trade runs", loss_excess.max(0.0), 1e-6);
    Ok(ch.verdict())
}

fn main() -> ExitCode {
    let criteria: [(&str, Criterion); 8] = [
        ("sphere market exactness", sphere_exactness),
        ("sphere loss bound tightness", sphere_loss_tightness),
        ("LMSR reproduction", lmsr_reproduction),
        ("axiom battery", axiom_battery),
        ("gradient and Hessian checks", gradient_checks),
        ("pair betting", pair_betting),
        ("relaxed price regions", relaxations),
        ("transaction-cost market", transaction_costs),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let t = Instant::now();
        let verdict = run().unwrap_or_else(|e| Verdict { passed: false, detail: format!("error: {e}") });
        if !verdict.passed {
            failed += 1;
        }
        println!(
            "[{}] {} {}: {} ({:.1}s)",
            if verdict.passed { "PASS" } else { "FAIL" },
            i + 1,
            name,
            verdict.detail,
            t.elapsed().as_secs_f64()
        );
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
