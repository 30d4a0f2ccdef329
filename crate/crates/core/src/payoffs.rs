//! Payoff structures ρ: O → R^K_+ and their outcome encodings.
//!
//! Pair-betting outcomes are permutations `π` with `π(i)` the finishing
//! position of competitor `i` (1 is best). The `(i, j)` security pays 1
//! when `π(i) > π(j)`, so it pays when `i` finishes behind `j`.

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::regions::{pair_count, pair_index};

/// Default cap on exhaustive outcome enumeration.
pub const ENUMERATION_CAP: usize = 50_000;

/// Largest pair-betting size whose permutations are enumerated.
pub const MAX_ENUMERABLE_COMPETITORS: usize = 8;

/// Tolerance for accepting near-unit sphere outcomes.
pub const SPHERE_UNIT_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Payoff {
    /// `n` mutually exclusive outcomes paying the standard basis vectors.
    Complete { n: usize },
    /// Unit vectors `u ∈ R³` paying `u + 1`.
    Sphere,
    /// Permutations of `n` competitors, reduced to `i < j` coordinates.
    PairBet { n: usize },
}

/// A decoded outcome.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Outcome {
    /// 1-based outcome index for complete markets.
    Index(usize),
    /// Positions `π(1), …, π(n)` for pair betting.
    Permutation(Vec<usize>),
    /// Unit vector for the sphere market.
    Point(Vec<f64>),
}

impl Payoff {
    pub fn dim(&self) -> usize {
        match *self {
            Payoff::Complete { n } => n,
            Payoff::Sphere => 3,
            Payoff::PairBet { n } => pair_count(n),
        }
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            Payoff::Complete { .. } => "complete",
            Payoff::Sphere => "sphere",
            Payoff::PairBet { .. } => "pair_bet",
        }
    }

    /// Parses an outcome from its JSON encoding: an integer index, an array
    /// of three reals, or an array permutation of `1..=n`.
    pub fn parse_outcome(&self, v: &Value) -> Result<Outcome> {
        let invalid = || Error::InvalidOutcome(format!("cannot decode {v} for a {} payoff", self.kind_name()));
        let outcome = match self {
            Payoff::Complete { .. } => Outcome::Index(v.as_u64().ok_or_else(invalid)? as usize),
            Payoff::Sphere => {
                let arr = v.as_array().ok_or_else(invalid)?;
                let u = arr.iter().map(|e| e.as_f64().ok_or_else(invalid)).collect::<Result<Vec<_>>>()?;
                Outcome::Point(u)
            }
            Payoff::PairBet { .. } => {
                let arr = v.as_array().ok_or_else(invalid)?;
                let p = arr.iter().map(|e| e.as_u64().map(|k| k as usize).ok_or_else(invalid)).collect::<Result<Vec<_>>>()?;
                Outcome::Permutation(p)
            }
        };
        self.normalize(&outcome)
    }

    pub fn outcome_to_json(&self, o: &Outcome) -> Value {
        serde_json::to_value(o).expect("outcomes serialize")
    }

    /// Validates an outcome, normalizing near-unit sphere points.
    pub fn normalize(&self, o: &Outcome) -> Result<Outcome> {
        match (self, o) {
            (Payoff::Complete { n }, Outcome::Index(i)) => {
                if (1..=*n).contains(i) {
                    Ok(o.clone())
                } else {
                    Err(Error::InvalidOutcome(format!("index {i} outside 1..={n}")))
                }
            }
            (Payoff::Sphere, Outcome::Point(u)) => {
                if u.len() != 3 || u.iter().any(|v| !v.is_finite()) {
                    return Err(Error::InvalidOutcome(format!("sphere outcome must be three finite reals, got {u:?}")));
                }
                let norm = crate::linalg::norm(u);
                if (norm - 1.0).abs() > SPHERE_UNIT_TOL {
                    return Err(Error::InvalidOutcome(format!("sphere outcome has norm {norm}, expected 1")));
                }
                Ok(Outcome::Point(u.iter().map(|v| v / norm).collect()))
            }
            (Payoff::PairBet { n }, Outcome::Permutation(p)) => {
                let mut seen = vec![false; *n];
                if p.len() != *n {
                    return Err(Error::InvalidOutcome(format!("permutation has length {}, expected {n}", p.len())));
                }
                for &pos in p {
                    if pos == 0 || pos > *n || seen[pos - 1] {
                        return Err(Error::InvalidOutcome(format!("{p:?} is not a permutation of 1..={n}")));
                    }
                    seen[pos - 1] = true;
                }
                Ok(o.clone())
            }
            // Integer-valued sphere points decode as permutations.
            (Payoff::Sphere, Outcome::Permutation(p)) => {
                self.normalize(&Outcome::Point(p.iter().map(|&v| v as f64).collect()))
            }
            _ => Err(Error::InvalidOutcome(format!("{o:?} does not match a {} payoff", self.kind_name()))),
        }
    }

    pub fn payoff_vector(&self, o: &Outcome) -> Result<Vec<f64>> {
        let o = self.normalize(o)?;
        Ok(match (self, &o) {
            (Payoff::Complete { n }, Outcome::Index(i)) => {
                let mut e = vec![0.0; *n];
                e[i - 1] = 1.0;
                e
            }
            (Payoff::Sphere, Outcome::Point(u)) => u.iter().map(|v| v + 1.0).collect(),
            (Payoff::PairBet { n }, Outcome::Permutation(p)) => {
                let mut x = vec![0.0; pair_count(*n)];
                for i in 0..*n {
                    for j in i + 1..*n {
                        if p[i] > p[j] {
                            x[pair_index(*n, i, j)] = 1.0;
                        }
                    }
                }
                x
            }
            _ => unreachable!("normalize checked the variant"),
        })
    }

    /// Number of outcomes, or `None` when infinite.
    pub fn outcome_count(&self) -> Option<usize> {
        match *self {
            Payoff::Complete { n } => Some(n),
            Payoff::Sphere => None,
            Payoff::PairBet { n } => (1..=n).try_fold(1usize, |acc, k| acc.checked_mul(k)),
        }
    }

    pub fn enumerate_outcomes(&self) -> Result<Vec<Outcome>> {
        self.enumerate_outcomes_capped(ENUMERATION_CAP)
    }

    pub fn enumerate_outcomes_capped(&self, cap: usize) -> Result<Vec<Outcome>> {
        let count = self.outcome_count().ok_or_else(|| Error::EnumerationUnavailable("the sphere outcome space is infinite".into()))?;
        if count > cap {
            return Err(Error::EnumerationUnavailable(format!("{count} outcomes exceed the cap of {cap}")));
        }
        Ok(match *self {
            Payoff::Complete { n } => (1..=n).map(Outcome::Index).collect(),
            Payoff::PairBet { n } => {
                if n > MAX_ENUMERABLE_COMPETITORS {
                    return Err(Error::EnumerationUnavailable(format!("pair betting enumerates at most {MAX_ENUMERABLE_COMPETITORS} competitors")));
                }
                permutations(n).into_iter().map(Outcome::Permutation).collect()
            }
            Payoff::Sphere => unreachable!(),
        })
    }

    /// All payoff vectors of an enumerable outcome space.
    pub fn payoff_vectors(&self) -> Result<Vec<Vec<f64>>> {
        self.enumerate_outcomes()?.iter().map(|o| self.payoff_vector(o)).collect()
    }

    /// `Σ_o p(o) ρ(o)` over the enumerated outcomes.
    pub fn expected_payoff(&self, p: &[f64]) -> Result<Vec<f64>> {
        let outcomes = self.enumerate_outcomes()?;
        check_distribution(p, outcomes.len())?;
        let mut acc = vec![0.0; self.dim()];
        for (o, &w) in outcomes.iter().zip(p) {
            if w != 0.0 {
                acc = crate::linalg::axpy(&acc, w, &self.payoff_vector(o)?);
            }
        }
        Ok(acc)
    }

    /// Folds a pair-betting bundle over ordered pairs into reduced
    /// coordinates. `(i, j)` with `i < j` maps directly; `(j, i)` pays
    /// `1 − x_ij`, so it contributes `−a` to the reduced bundle and a fixed
    /// payout of `a`. Pairs are 1-based.
    pub fn fold_ordered_pairs(&self, pairs: &[((usize, usize), f64)]) -> Result<(Vec<f64>, f64)> {
        let Payoff::PairBet { n } = *self else {
            return Err(Error::Unsupported("ordered-pair bundles need a pair-betting payoff".into()));
        };
        let mut r = vec![0.0; pair_count(n)];
        let mut constant = 0.0;
        for &((i, j), a) in pairs {
            if i == 0 || j == 0 || i > n || j > n || i == j {
                return Err(Error::InvalidOutcome(format!("({i}, {j}) is not a tradable pair for n = {n}")));
            }
            if i < j {
                r[pair_index(n, i - 1, j - 1)] += a;
            } else {
                r[pair_index(n, j - 1, i - 1)] -= a;
                constant += a;
            }
        }
        Ok((r, constant))
    }
}

pub fn check_distribution(p: &[f64], len: usize) -> Result<()> {
    Error::check_dim(len, p.len())?;
    let total: f64 = p.iter().sum();
    if p.iter().any(|&w| !(w >= 0.0)) || (total - 1.0).abs() > 1e-9 {
        return Err(Error::NotADistribution(format!("entries must be nonnegative and sum to 1 (sum {total})")));
    }
    Ok(())
}

/// All permutations of `1..=n` in lexicographic order.
pub fn permutations(n: usize) -> Vec<Vec<usize>> {
    let mut p: Vec<usize> = (1..=n).collect();
    let mut out = vec![p.clone()];
    while let Some(i) = (1..n).rev().find(|&i| p[i - 1] < p[i]) {
        let j = (i..n).rev().find(|&j| p[j] > p[i - 1]).expect("successor exists");
        p.swap(i - 1, j);
        p[i..].reverse();
        out.push(p.clone());
    }
    out
}
