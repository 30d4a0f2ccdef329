//! Dense two-phase simplex method with Bland's rule.
//!
//! Only used as the linear-maximization oracle for the small polyhedral price
//! regions (tens of variables, a few hundred rows). Returns a basic feasible
//! solution, i.e. a vertex of the polytope.

use thiserror::Error;

const EPS: f64 = 1e-11;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Relation {
    Le,
    Ge,
    Eq,
}

#[derive(Debug, Clone)]
pub struct Constraint {
    pub coeffs: Vec<f64>,
    pub rel: Relation,
    pub rhs: f64,
}

impl Constraint {
    pub fn new(coeffs: Vec<f64>, rel: Relation, rhs: f64) -> Self {
        Self { coeffs, rel, rhs }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LpError {
    #[error("linear program is infeasible")]
    Infeasible,
    #[error("linear program is unbounded")]
    Unbounded,
    #[error("simplex iteration limit reached")]
    IterationLimit,
}

struct Tableau {
    rows: Vec<Vec<f64>>,
    basis: Vec<usize>,
    ncols: usize,
}

impl Tableau {
    fn rhs(&self, i: usize) -> f64 {
        self.rows[i][self.ncols]
    }

    fn pivot(&mut self, r: usize, c: usize) {
        let p = self.rows[r][c];
        for v in self.rows[r].iter_mut() {
            *v /= p;
        }
        let pivot_row = self.rows[r].clone();
        for (i, row) in self.rows.iter_mut().enumerate() {
            if i == r {
                continue;
            }
            let f = row[c];
            if f != 0.0 {
                for (v, pv) in row.iter_mut().zip(&pivot_row) {
                    *v -= f * pv;
                }
            }
        }
        self.basis[r] = c;
    }

    /// Maximizes `obj` over the columns flagged in `allowed`. Picks the
    /// most improving column and falls back to Bland's rule after a run of
    /// degenerate pivots.
    fn optimize(&mut self, obj: &[f64], allowed: &[bool]) -> Result<(), LpError> {
        let max_iter = 50_000;
        let mut reduced = obj[..self.ncols].to_vec();
        for (i, &b) in self.basis.iter().enumerate() {
            let w = obj[b];
            if w != 0.0 {
                for (z, v) in reduced.iter_mut().zip(&self.rows[i]) {
                    *z -= w * v;
                }
            }
        }
        let mut degenerate = 0;
        for _ in 0..max_iter {
            let mut in_basis = vec![false; self.ncols];
            self.basis.iter().for_each(|&b| in_basis[b] = true);
            let candidates = (0..self.ncols).filter(|&j| allowed[j] && !in_basis[j] && reduced[j] > EPS);
            let entering = if degenerate < 50 {
                candidates.max_by(|&a, &b| reduced[a].total_cmp(&reduced[b]))
            } else {
                candidates.min()
            };
            let Some(j) = entering else { return Ok(()) };
            let mut leave: Option<(usize, f64)> = None;
            for i in 0..self.rows.len() {
                let a = self.rows[i][j];
                if a > EPS {
                    let ratio = self.rhs(i) / a;
                    leave = match leave {
                        None => Some((i, ratio)),
                        Some((k, best)) => {
                            if ratio < best - EPS
                                || (ratio <= best + EPS && self.basis[i] < self.basis[k])
                            {
                                Some((i, ratio))
                            } else {
                                Some((k, best))
                            }
                        }
                    };
                }
            }
            let Some((r, ratio)) = leave else { return Err(LpError::Unbounded) };
            degenerate = if ratio <= EPS { degenerate + 1 } else { 0 };
            self.pivot(r, j);
            let f = reduced[j];
            for (z, v) in reduced.iter_mut().zip(&self.rows[r]) {
                *z -= f * v;
            }
        }
        Err(LpError::IterationLimit)
    }
}

/// Maximizes `c·x` subject to `constraints` and `x ≥ 0`.
pub fn maximize(c: &[f64], constraints: &[Constraint]) -> Result<Vec<f64>, LpError> {
    let n = c.len();
    let m = constraints.len();

    // Normalize to nonnegative right-hand sides.
    let normalized: Vec<Constraint> = constraints
        .iter()
        .map(|k| {
            if k.rhs < 0.0 {
                let rel = match k.rel {
                    Relation::Le => Relation::Ge,
                    Relation::Ge => Relation::Le,
                    Relation::Eq => Relation::Eq,
                };
                Constraint::new(k.coeffs.iter().map(|v| -v).collect(), rel, -k.rhs)
            } else {
                k.clone()
            }
        })
        .collect();

    let n_slack = normalized.iter().filter(|k| k.rel != Relation::Eq).count();
    let n_art = normalized.iter().filter(|k| k.rel != Relation::Le).count();
    let ncols = n + n_slack + n_art;
    let mut rows = vec![vec![0.0; ncols + 1]; m];
    let mut basis = vec![0; m];
    let mut is_art = vec![false; ncols];
    let (mut s, mut a) = (n, n + n_slack);
    for (i, k) in normalized.iter().enumerate() {
        rows[i][..n].copy_from_slice(&k.coeffs);
        rows[i][ncols] = k.rhs;
        match k.rel {
            Relation::Le => {
                rows[i][s] = 1.0;
                basis[i] = s;
                s += 1;
            }
            Relation::Ge => {
                rows[i][s] = -1.0;
                s += 1;
                rows[i][a] = 1.0;
                basis[i] = a;
                is_art[a] = true;
                a += 1;
            }
            Relation::Eq => {
                rows[i][a] = 1.0;
                basis[i] = a;
                is_art[a] = true;
                a += 1;
            }
        }
    }
    let mut t = Tableau { rows, basis, ncols };

    if n_art > 0 {
        let phase1: Vec<f64> = is_art.iter().map(|&b| if b { -1.0 } else { 0.0 }).collect();
        t.optimize(&phase1, &vec![true; ncols])?;
        let infeasibility: f64 =
            t.basis.iter().enumerate().filter(|(_, &b)| is_art[b]).map(|(i, _)| t.rhs(i)).sum();
        if infeasibility > 1e-9 {
            return Err(LpError::Infeasible);
        }
        // Drive zero-level artificials out of the basis; drop redundant rows.
        let mut i = 0;
        while i < t.rows.len() {
            if is_art[t.basis[i]] {
                let col = (0..ncols).find(|&j| !is_art[j] && t.rows[i][j].abs() > 1e-9);
                match col {
                    Some(j) => {
                        t.pivot(i, j);
                        i += 1;
                    }
                    None => {
                        t.rows.remove(i);
                        t.basis.remove(i);
                    }
                }
            } else {
                i += 1;
            }
        }
    }

    let mut obj = vec![0.0; ncols];
    obj[..n].copy_from_slice(c);
    let allowed: Vec<bool> = is_art.iter().map(|b| !b).collect();
    t.optimize(&obj, &allowed)?;

    let mut x = vec![0.0; n];
    for (i, &b) in t.basis.iter().enumerate() {
        if b < n {
            x[b] = t.rhs(i).max(0.0);
        }
    }
    Ok(x)
}
