//! Small dense-vector helpers shared across the crate.

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub fn norm_inf(a: &[f64]) -> f64 {
    a.iter().fold(0.0_f64, |m, x| m.max(x.abs()))
}

pub fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

pub fn add(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}

pub fn scale(a: &[f64], s: f64) -> Vec<f64> {
    a.iter().map(|x| x * s).collect()
}

/// `a + s * b`
pub fn axpy(a: &[f64], s: f64, b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x + s * y).collect()
}

pub fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

pub fn sum(a: &[f64]) -> f64 {
    a.iter().sum()
}

/// Numerically stable `log Σ exp(v_i)`.
pub fn log_sum_exp(v: &[f64]) -> f64 {
    let m = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return m;
    }
    m + v.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

/// Softmax with max-shift.
pub fn softmax(v: &[f64]) -> Vec<f64> {
    let m = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = v.iter().map(|x| (x - m).exp()).collect();
    let z: f64 = e.iter().sum();
    e.into_iter().map(|x| x / z).collect()
}

/// Largest eigenvalue of a symmetric positive semidefinite matrix by power
/// iteration. Returns `(eigenvalue, iterations)`.
pub fn power_iteration(m: &[Vec<f64>], tol: f64, max_iter: usize) -> (f64, usize) {
    let n = m.len();
    if n == 0 {
        return (0.0, 0);
    }
    // Deterministic start with no special alignment to common eigenvectors.
    let mut v: Vec<f64> = (0..n).map(|i| 1.0 + 0.618_033_988_75 * (i as f64 + 1.0).sin()).collect();
    let nv = norm(&v);
    v.iter_mut().for_each(|x| *x /= nv);
    let mut lambda = 0.0;
    for it in 1..=max_iter {
        let w: Vec<f64> = m.iter().map(|row| dot(row, &v)).collect();
        let nw = norm(&w);
        if nw == 0.0 {
            return (0.0, it);
        }
        let next = dot(&v, &w);
        v = w.into_iter().map(|x| x / nw).collect();
        if (next - lambda).abs() <= tol * next.abs().max(1e-300) {
            return (next, it);
        }
        lambda = next;
    }
    (lambda, max_iter)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lse_matches_naive_for_moderate_inputs() {
        let v = [0.3, -1.2, 2.0];
        let naive = v.iter().map(|x: &f64| x.exp()).sum::<f64>().ln();
        assert!((log_sum_exp(&v) - naive).abs() < 1e-14);
    }

    #[test]
    fn lse_survives_overflow() {
        let v = [1000.0, 1000.0];
        assert!((log_sum_exp(&v) - (1000.0 + 2f64.ln())).abs() < 1e-12);
    }

    #[test]
    fn power_iteration_finds_top_eigenvalue() {
        let m = vec![vec![2.0, 1.0], vec![1.0, 2.0]];
        let (l, _) = power_iteration(&m, 1e-12, 10_000);
        assert!((l - 3.0).abs() < 1e-9);
    }
}
