//! Stateful market operation: configuration, trade log, cash accounting,
//! settlement and JSON persistence.
//!
//! Reals are written with the shortest representation that parses back to
//! the same `f64`, so saved states reload bit for bit.

mod verify;

pub use verify::{verify, CheckResult, VerifyReport};

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::conjugates::Conjugate;
use crate::engine::{Coverage, Market, Quote, SolverConfig};
use crate::error::{Error, Result};
use crate::payoffs::{Outcome, Payoff};
use crate::regions::{BandRegion, Halfspace, HalfspaceTrimmedSimplex, Region};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BarrierKind {
    /// `γ‖x‖² / (1 + c − Σx)`
    #[default]
    Ratio,
    /// `−γ log(1 + c − Σx)`
    Log,
}

/// The market definition, as read from a config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MarketSpec {
    Lmsr {
        n: usize,
        b: f64,
    },
    Sphere {
        lambda: f64,
    },
    #[serde(rename = "pairbet")]
    PairBet {
        n: usize,
        lambda: f64,
    },
    #[serde(rename = "txncost")]
    TxnCost {
        n: usize,
        b: f64,
        c: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        gamma: Option<f64>,
        #[serde(default)]
        barrier: BarrierKind,
    },
    /// A simplex cut by extra halfspaces, priced with `λ‖x − m‖²` (uniform
    /// `m`). Excludes payoff vectors, so losses can grow without bound.
    Trimmed {
        n: usize,
        lambda: f64,
        halfspaces: Vec<Halfspace>,
    },
    Custom {
        region: Region,
        conjugate: Conjugate,
        payoff: Payoff,
        coverage: Coverage,
        #[serde(default)]
        positive_only: bool,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarketConfig {
    #[serde(flatten)]
    pub spec: MarketSpec,
    #[serde(default)]
    pub solver: SolverConfig,
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::Config(format!("{name} must be positive and finite, got {v}")))
    }
}

fn at_least(name: &str, v: usize, min: usize) -> Result<()> {
    if v >= min {
        Ok(())
    } else {
        Err(Error::Config(format!("{name} must be at least {min}, got {v}")))
    }
}

impl MarketConfig {
    pub fn new(spec: MarketSpec) -> Self {
        Self { spec, solver: SolverConfig::default() }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&read(path.as_ref())?)
    }

    pub fn build(&self) -> Result<Market> {
        let s = self.solver;
        if !(s.tolerance > 0.0) || s.max_iterations == 0 {
            return Err(Error::Config("solver tolerance and iteration cap must be positive".into()));
        }
        match &self.spec {
            MarketSpec::Lmsr { n, b } => {
                at_least("n", *n, 2)?;
                positive("b", *b)?;
                Market::new(Region::simplex(*n), Conjugate::neg_entropy(*b), Payoff::Complete { n: *n }, Coverage::Exact, false, s)
            }
            MarketSpec::Sphere { lambda } => {
                positive("lambda", *lambda)?;
                Market::new(Region::ball(3), Conjugate::quadratic(*lambda, vec![1.0; 3]), Payoff::Sphere, Coverage::Exact, false, s)
            }
            MarketSpec::PairBet { n, lambda } => {
                at_least("n", *n, 2)?;
                positive("lambda", *lambda)?;
                let k = crate::regions::pair_count(*n);
                Market::new(
                    Region::gom(*n),
                    Conjugate::quadratic(*lambda, vec![0.5; k]),
                    Payoff::PairBet { n: *n },
                    Coverage::Relaxed,
                    false,
                    s,
                )
            }
            MarketSpec::TxnCost { n, b, c, gamma, barrier } => {
                at_least("n", *n, 2)?;
                positive("b", *b)?;
                positive("c", *c)?;
                if let Some(g) = gamma {
                    positive("gamma", *g)?;
                }
                let ratio = *barrier == BarrierKind::Ratio;
                let threshold = crate::conjugates::barrier_gamma_threshold(ratio, *n, *b, *c);
                let gamma = gamma.unwrap_or_else(|| threshold.max(0.01));
                if gamma < threshold * (1.0 - 1e-12) {
                    return Err(Error::InitialPrice(format!(
                        "γ = {gamma} is below {threshold}, so the initial price would leave the simplex"
                    )));
                }
                let conjugate = if ratio {
                    Conjugate::RatioBarrierEntropy { b: *b, gamma, c: *c }
                } else {
                    Conjugate::BarrierEntropy { b: *b, gamma, c: *c }
                };
                Market::new(Region::Band(BandRegion::new(*n, *c)), conjugate, Payoff::Complete { n: *n }, Coverage::Relaxed, true, s)
            }
            MarketSpec::Trimmed { n, lambda, halfspaces } => {
                at_least("n", *n, 2)?;
                positive("lambda", *lambda)?;
                let region = Region::TrimmedSimplex(HalfspaceTrimmedSimplex::new(*n, halfspaces.clone())?);
                let conjugate = Conjugate::quadratic(*lambda, vec![1.0 / *n as f64; *n]);
                Market::new(region, conjugate, Payoff::Complete { n: *n }, Coverage::Partial, false, s)
            }
            MarketSpec::Custom { region, conjugate, payoff, coverage, positive_only } => {
                Market::new(region.clone(), conjugate.clone(), payoff.clone(), *coverage, *positive_only, s)
            }
        }
    }
}

/// One executed trade. `seq` is a logical timestamp.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TradeRecord {
    pub seq: u64,
    pub bundle: Vec<f64>,
    /// Certain payout bought alongside the bundle (reversed pair bets).
    #[serde(default, skip_serializing_if = "is_zero")]
    pub fixed: f64,
    pub cost: f64,
    pub post_price: Vec<f64>,
}

fn is_zero(v: &f64) -> bool {
    *v == 0.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Settlement {
    pub outcome: Outcome,
    pub payout: f64,
    /// `C(q) − C(0)` plus certain payouts sold.
    pub collected: f64,
    pub realized_loss: f64,
    /// Worst-case loss bound for this outcome; absent when the payoff vector
    /// lies outside the price region.
    pub bound: Option<f64>,
    /// `−D_R(ρ(o), ∇C(q))`, the gap between the bound and its a-priori form.
    pub gap_term: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarketState {
    pub config: MarketConfig,
    pub q: Vec<f64>,
    /// Certain payout owed regardless of the outcome.
    #[serde(default)]
    pub fixed: f64,
    /// Running sum of per-trade costs.
    pub collected: f64,
    pub trades: Vec<TradeRecord>,
    pub settlement: Option<Settlement>,
}

/// Summary of a state for display.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub kind: String,
    pub q: Vec<f64>,
    pub price: Vec<f64>,
    pub price_sum: f64,
    pub collected: f64,
    /// `C(q) − C(0)` plus certain payouts sold, recomputed from scratch.
    pub recomputed: f64,
    pub trades: usize,
    pub initial_price: Vec<f64>,
    pub a_priori_loss_bound: Option<f64>,
    pub arbitrage_profit_bound: Option<f64>,
    pub settlement: Option<Settlement>,
}

impl MarketState {
    /// A fresh state for `config` with its built market.
    pub fn init(config: MarketConfig) -> Result<(Self, Market)> {
        let market = config.build()?;
        let state = MarketState {
            q: vec![0.0; market.dim()],
            config,
            fixed: 0.0,
            collected: 0.0,
            trades: Vec::new(),
            settlement: None,
        };
        Ok((state, market))
    }

    pub fn market(&self) -> Result<Market> {
        self.config.build()
    }

    fn check_open(&self) -> Result<()> {
        if self.settlement.is_some() {
            Err(Error::AlreadySettled)
        } else {
            Ok(())
        }
    }

    /// Buys `r` at the firm quote `C(q + r) − C(q)`. The state is unchanged
    /// if pricing fails.
    pub fn apply_trade(&mut self, market: &Market, r: &[f64]) -> Result<Quote> {
        self.apply(market, r, 0.0)
    }

    /// Buys ordered-pair securities `(i, j) → amount` in a pair-betting
    /// market. Reversed pairs are folded into the reduced coordinates plus a
    /// certain payout.
    pub fn apply_pair_trade(&mut self, market: &Market, pairs: &[((usize, usize), f64)]) -> Result<Quote> {
        let (r, fixed) = market.payoff().fold_ordered_pairs(pairs)?;
        self.apply(market, &r, fixed)
    }

    fn apply(&mut self, market: &Market, r: &[f64], fixed: f64) -> Result<Quote> {
        self.check_open()?;
        let mut quote = market.quote(&self.q, r)?;
        quote.cost += fixed;
        for (qi, ri) in self.q.iter_mut().zip(r) {
            *qi += ri;
        }
        self.fixed += fixed;
        self.collected += quote.cost;
        self.trades.push(TradeRecord {
            seq: self.trades.len() as u64 + 1,
            bundle: r.to_vec(),
            fixed,
            cost: quote.cost,
            post_price: quote.post_price.clone(),
        });
        Ok(quote)
    }

    /// `C(q) − C(0)` plus certain payouts sold.
    pub fn recomputed_collected(&self, market: &Market) -> Result<f64> {
        Ok(market.cost(&self.q)? - market.initial_cost() + self.fixed)
    }

    pub fn settle(&mut self, market: &Market, outcome: &Outcome) -> Result<Settlement> {
        self.check_open()?;
        let payout = market.settle(&self.q, outcome)? + self.fixed;
        let collected = self.recomputed_collected(market)?;
        let (bound, gap_term) = match market.worst_loss_bound(&self.q, outcome) {
            Ok(b) => (Some(b.bound), Some(-b.divergence)),
            Err(Error::DomainViolation(_) | Error::UndefinedGradient(_) | Error::EnumerationUnavailable(_)) => (None, None),
            Err(e) => return Err(e),
        };
        let settlement = Settlement {
            outcome: market.payoff().normalize(outcome)?,
            payout,
            collected,
            realized_loss: payout - collected,
            bound,
            gap_term,
        };
        self.settlement = Some(settlement.clone());
        Ok(settlement)
    }

    /// Rebuilds the state by replaying the trade log from a fresh market.
    pub fn replay(&self) -> Result<MarketState> {
        let (mut fresh, market) = MarketState::init(self.config.clone())?;
        for t in &self.trades {
            fresh.apply(&market, &t.bundle, t.fixed)?;
        }
        if let Some(s) = &self.settlement {
            fresh.settle(&market, &s.outcome)?;
        }
        Ok(fresh)
    }

    pub fn report(&self, market: &Market) -> Result<Report> {
        let price = market.price(&self.q)?;
        Ok(Report {
            kind: self.config.spec.kind_name().to_string(),
            price_sum: price.iter().sum(),
            price,
            q: self.q.clone(),
            collected: self.collected,
            recomputed: self.recomputed_collected(market)?,
            trades: self.trades.len(),
            initial_price: market.initial_price().to_vec(),
            a_priori_loss_bound: market.a_priori_loss_bound().ok(),
            arbitrage_profit_bound: market.arbitrage_profit_bound(&self.q).ok(),
            settlement: self.settlement.clone(),
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("states serialize")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(format!("unreadable state: {e}")))
    }

    /// Writes the state through a temporary file and an atomic rename.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let tmp = path.with_extension("json.tmp");
        fs::write(&tmp, self.to_json()).map_err(|e| Error::Config(format!("cannot write {}: {e}", tmp.display())))?;
        fs::rename(&tmp, path).map_err(|e| Error::Config(format!("cannot write {}: {e}", path.display())))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&read(path.as_ref())?)
    }
}

impl MarketSpec {
    pub fn kind_name(&self) -> &'static str {
        match self {
            MarketSpec::Lmsr { .. } => "lmsr",
            MarketSpec::Sphere { .. } => "sphere",
            MarketSpec::PairBet { .. } => "pairbet",
            MarketSpec::TxnCost { .. } => "txncost",
            MarketSpec::Trimmed { .. } => "trimmed",
            MarketSpec::Custom { .. } => "custom",
        }
    }
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))
}

/// Parses a bundle: a JSON array of reals in the market's coordinates, or,
/// for pair betting, an array of `[i, j, amount]` ordered-pair purchases.
pub fn parse_bundle(market: &Market, v: &Value) -> Result<ParsedBundle> {
    let arr = v.as_array().ok_or_else(|| Error::Config(format!("bundle must be a JSON array, got {v}")))?;
    if arr.iter().all(Value::is_number) {
        let r = arr.iter().map(|e| e.as_f64().expect("number")).collect();
        return Ok(ParsedBundle::Direct(r));
    }
    if !matches!(market.payoff(), Payoff::PairBet { .. }) {
        return Err(Error::Config(format!("bundle must be an array of numbers, got {v}")));
    }
    let pairs = arr
        .iter()
        .map(|e| {
            let t = e.as_array().filter(|t| t.len() == 3);
            let parse = |t: &Vec<Value>| Some(((t[0].as_u64()? as usize, t[1].as_u64()? as usize), t[2].as_f64()?));
            t.and_then(parse).ok_or_else(|| Error::Config(format!("pair purchase must be [i, j, amount], got {e}")))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ParsedBundle::Pairs(pairs))
}

#[derive(Debug, Clone, PartialEq)]
pub enum ParsedBundle {
    Direct(Vec<f64>),
    Pairs(Vec<((usize, usize), f64)>),
}

impl ParsedBundle {
    /// Reduced bundle and certain payout.
    pub fn resolve(&self, market: &Market) -> Result<(Vec<f64>, f64)> {
        match self {
            ParsedBundle::Direct(r) => Ok((r.clone(), 0.0)),
            ParsedBundle::Pairs(p) => market.payoff().fold_ordered_pairs(p),
        }
    }

    pub fn apply(&self, state: &mut MarketState, market: &Market) -> Result<Quote> {
        match self {
            ParsedBundle::Direct(r) => state.apply_trade(market, r),
            ParsedBundle::Pairs(p) => state.apply_pair_trade(market, p),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    fn lmsr2() -> MarketConfig {
        MarketConfig::from_json(r#"{"kind": "lmsr", "n": 2, "b": 1.0}"#).unwrap()
    }

    #[test]
    fn config_kinds_parse() {
        for text in [
            r#"{"kind": "lmsr", "n": 3, "b": 1.0}"#,
            r#"{"kind": "sphere", "lambda": 1.0}"#,
            r#"{"kind": "pairbet", "n": 4, "lambda": 1.0}"#,
            r#"{"kind": "txncost", "n": 2, "b": 1.0, "c": 0.5, "gamma": 0.1}"#,
            r#"{"kind": "txncost", "n": 3, "b": 1.0, "c": 0.5, "barrier": "log"}"#,
            r#"{"kind": "trimmed", "n": 2, "lambda": 1.0, "halfspaces": [{"a": [1.0, 0.0], "b": 0.8}]}"#,
            r#"{"kind": "custom", "region": {"type": "band", "n": 2, "c": 1.0},
                "conjugate": {"type": "quadratic", "lambda": 1.0, "center": [0.0, 0.0]},
                "payoff": {"type": "complete", "n": 2}, "coverage": "relaxed"}"#,
            r#"{"kind": "lmsr", "n": 2, "b": 1.0, "solver": {"tolerance": 1e-9}}"#,
        ] {
            let c = MarketConfig::from_json(text).unwrap_or_else(|e| panic!("{text}: {e}"));
            c.build().unwrap_or_else(|e| panic!("{text}: {e}"));
        }
    }

    #[test]
    fn bad_configs_are_rejected() {
        for text in [
            r#"{"kind": "lmsr", "n": 3, "b": -1.0}"#,
            r#"{"kind": "lmsr", "n": 1, "b": 1.0}"#,
            r#"{"kind": "sphere"}"#,
            r#"{"kind": "bogus"}"#,
            r#"{"kind": "txncost", "n": 5, "b": 1.0, "c": 0.5, "gamma": 0.05, "barrier": "log"}"#,
        ] {
            let r = MarketConfig::from_json(text).and_then(|c| c.build().map(|_| ()));
            assert!(r.is_err(), "{text}");
        }
    }

    #[test]
    fn initial_prices() {
        let (_, m) = MarketState::init(MarketConfig::from_json(r#"{"kind": "lmsr", "n": 3, "b": 1.0}"#).unwrap()).unwrap();
        for p in m.initial_price() {
            assert!((p - 1.0 / 3.0).abs() < 1e-15);
        }
        let (_, m) = MarketState::init(MarketConfig::from_json(r#"{"kind": "sphere", "lambda": 1.0}"#).unwrap()).unwrap();
        assert_eq!(m.initial_price(), &[1.0, 1.0, 1.0]);
        let cfg = r#"{"kind": "txncost", "n": 2, "b": 1.0, "c": 0.5, "gamma": 0.1}"#;
        let (_, m) = MarketState::init(MarketConfig::from_json(cfg).unwrap()).unwrap();
        for p in m.initial_price() {
            assert!((p - 0.5).abs() < 1e-12);
        }
    }

    #[test]
    fn trade_updates_state() {
        let (mut s, m) = MarketState::init(lmsr2()).unwrap();
        let q0 = s.apply_trade(&m, &[0.0, 0.0]).unwrap();
        assert_eq!(q0.cost, 0.0);
        assert_eq!(s.q, vec![0.0, 0.0]);
        let q = s.apply_trade(&m, &[1.0, 0.0]).unwrap();
        assert!((q.cost - 0.620115).abs() < 1e-6);
        assert!((q.post_price[0] - 0.731).abs() < 1e-3);
        assert_eq!(s.trades.len(), 2);
        assert_eq!(s.trades[1].seq, 2);
    }

    #[test]
    fn failed_trade_leaves_state_unchanged() {
        let cfg = MarketConfig::from_json(r#"{"kind": "txncost", "n": 2, "b": 1.0, "c": 0.5}"#).unwrap();
        let (mut s, m) = MarketState::init(cfg).unwrap();
        s.apply_trade(&m, &[1.0, 0.5]).unwrap();
        let before = s.clone();
        assert!(matches!(s.apply_trade(&m, &[1.0, -0.5]), Err(Error::NegativeBundle)));
        assert!(s.apply_trade(&m, &[1.0]).is_err());
        assert_eq!(s, before);
    }

    #[test]
    fn settlement_without_trades_has_zero_loss() {
        let (mut s, m) = MarketState::init(lmsr2()).unwrap();
        let st = s.settle(&m, &Outcome::Index(2)).unwrap();
        assert_eq!(st.realized_loss, 0.0);
        assert!(matches!(s.settle(&m, &Outcome::Index(1)), Err(Error::AlreadySettled)));
        assert!(matches!(s.apply_trade(&m, &[1.0, 0.0]), Err(Error::AlreadySettled)));
    }

    #[test]
    fn sphere_settlement_at_center() {
        let cfg = MarketConfig::from_json(r#"{"kind": "sphere", "lambda": 1.0}"#).unwrap();
        let (mut s, m) = MarketState::init(cfg).unwrap();
        let st = s.settle(&m, &Outcome::Point(vec![0.6, 0.0, 0.8])).unwrap();
        assert_eq!(st.realized_loss, 0.0);
        assert!(st.bound.unwrap().abs() < 1e-15);
    }

    #[test]
    fn sphere_settlement_after_driving_price_to_vertex() {
        let cfg = MarketConfig::from_json(r#"{"kind": "sphere", "lambda": 1.0}"#).unwrap();
        let (mut s, m) = MarketState::init(cfg).unwrap();
        s.apply_trade(&m, &[2.0, 0.0, 0.0]).unwrap();
        let st = s.settle(&m, &Outcome::Point(vec![1.0, 0.0, 0.0])).unwrap();
        assert!((st.realized_loss - 1.0).abs() < 1e-12);
        assert!((st.bound.unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn reversed_pair_purchase_pays_through_fixed_amount() {
        let cfg = MarketConfig::from_json(r#"{"kind": "pairbet", "n": 3, "lambda": 1.0}"#).unwrap();
        let (mut s, m) = MarketState::init(cfg).unwrap();
        let bundle = parse_bundle(&m, &json!([[2, 1, 1.0]])).unwrap();
        let quote = bundle.apply(&mut s, &m).unwrap();
        assert_eq!(s.fixed, 1.0);
        assert_eq!(s.q, vec![-1.0, 0.0, 0.0]);
        // The price moves against the buyer, so one unit costs more than the
        // 1/2 quoted at the uniform price.
        assert!(quote.cost > 0.5);
        // Competitor 2 finishes behind 1: the (2, 1) security pays 1.
        let st = s.settle(&m, &Outcome::Permutation(vec![1, 2, 3])).unwrap();
        assert_eq!(st.payout, 1.0);
    }

    #[test]
    fn persistence_round_trip() {
        let dir = std::env::temp_dir().join(format!("dualmm-ledger-{}", std::process::id()));
        fs::create_dir_all(&dir).unwrap();
        let path = dir.join("state.json");
        let (mut s, m) = MarketState::init(lmsr2()).unwrap();
        s.apply_trade(&m, &[0.1 + 0.2, -1.0 / 3.0]).unwrap();
        s.apply_trade(&m, &[std::f64::consts::PI, 1e-17]).unwrap();
        s.save(&path).unwrap();
        let back = MarketState::load(&path).unwrap();
        assert_eq!(back, s);
        assert_eq!(back.collected.to_bits(), s.collected.to_bits());
        fs::remove_dir_all(&dir).unwrap();
    }

    #[test]
    fn replay_is_exact() {
        let (mut s, m) = MarketState::init(lmsr2()).unwrap();
        for k in 0..20 {
            s.apply_trade(&m, &[(k as f64).sin(), (k as f64 * 0.7).cos()]).unwrap();
        }
        assert_eq!(s.replay().unwrap(), s);
    }

    #[test]
    fn bundles_parse() {
        let m = MarketConfig::from_json(r#"{"kind": "lmsr", "n": 2, "b": 1.0}"#).unwrap().build().unwrap();
        assert_eq!(parse_bundle(&m, &json!([1, 0.5])).unwrap(), ParsedBundle::Direct(vec![1.0, 0.5]));
        assert!(parse_bundle(&m, &json!([[1, 2, 1.0]])).is_err());
        assert!(parse_bundle(&m, &json!({"a": 1})).is_err());
    }
}
