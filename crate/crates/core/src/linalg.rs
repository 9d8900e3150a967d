//! Tridiagonal solves for the implicit time steps.

/// Solves `lower[i] x[i-1] + diag[i] x[i] + upper[i] x[i+1] = rhs[i]` by the
/// Thomas algorithm. `lower[0]` and `upper[n-1]` are ignored. The system must
/// be diagonally dominant (all callers build M-matrices).
pub fn solve_tridiagonal(lower: &[f64], diag: &[f64], upper: &[f64], rhs: &[f64]) -> Vec<f64> {
    let n = diag.len();
    assert!(n > 0 && lower.len() == n && upper.len() == n && rhs.len() == n);
    let mut c = vec![0.0; n];
    let mut d = vec![0.0; n];
    c[0] = upper[0] / diag[0];
    d[0] = rhs[0] / diag[0];
    for i in 1..n {
        let m = diag[i] - lower[i] * c[i - 1];
        c[i] = if i + 1 < n { upper[i] / m } else { 0.0 };
        d[i] = (rhs[i] - lower[i] * d[i - 1]) / m;
    }
    let mut x = vec![0.0; n];
    x[n - 1] = d[n - 1];
    for i in (0..n - 1).rev() {
        x[i] = d[i] - c[i] * x[i + 1];
    }
    x
}

/// Tridiagonal system whose last row also couples to `x[n-3]` through
/// `extra`. The extra entry is eliminated with row `n-2` before the Thomas sweep.
pub fn solve_tridiagonal_with_tail(
    lower: &mut [f64],
    diag: &mut [f64],
    upper: &mut [f64],
    rhs: &mut [f64],
    extra: f64,
) -> Vec<f64> {
    let n = diag.len();
    assert!(n >= 3);
    if extra != 0.0 {
        // Row n-2: lower[n-2] x[n-3] + diag[n-2] x[n-2] + upper[n-2] x[n-1] = rhs[n-2].
        let f = extra / lower[n - 2];
        lower[n - 1] -= f * diag[n - 2];
        diag[n - 1] -= f * upper[n - 2];
        rhs[n - 1] -= f * rhs[n - 2];
    }
    solve_tridiagonal(lower, diag, upper, rhs)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn apply(lower: &[f64], diag: &[f64], upper: &[f64], x: &[f64]) -> Vec<f64> {
        let n = x.len();
        (0..n)
            .map(|i| {
                let mut s = diag[i] * x[i];
                if i > 0 {
                    s += lower[i] * x[i - 1];
                }
                if i + 1 < n {
                    s += upper[i] * x[i + 1];
                }
                s
            })
            .collect()
    }

    #[test]
    fn recovers_known_solution() {
        let n = 50;
        let lower: Vec<f64> = (0..n).map(|i| -1.0 - 0.01 * i as f64).collect();
        let upper: Vec<f64> = (0..n).map(|i| -0.5 + 0.002 * i as f64).collect();
        let diag: Vec<f64> = (0..n).map(|i| 3.0 + 0.1 * (i as f64).sin()).collect();
        let truth: Vec<f64> = (0..n).map(|i| (i as f64 * 0.3).cos()).collect();
        let rhs = apply(&lower, &diag, &upper, &truth);
        let x = solve_tridiagonal(&lower, &diag, &upper, &rhs);
        for (a, b) in x.iter().zip(&truth) {
            assert!((a - b).abs() < 1e-13);
        }
    }

    #[test]
    fn tail_entry_is_eliminated() {
        // Last row: x[n-1] - 2 x[n-2] + x[n-3] = 0 (linear extrapolation).
        let n = 6;
        let mut lower = vec![-1.0; n];
        let mut diag = vec![4.0; n];
        let mut upper = vec![-1.0; n];
        lower[n - 1] = -2.0;
        diag[n - 1] = 1.0;
        let truth = [1.0, 2.0, 3.5, 4.0, 5.0, 6.0];
        let mut rhs: Vec<f64> = apply(&lower, &diag, &upper, &truth);
        rhs[n - 1] = truth[n - 1] - 2.0 * truth[n - 2] + truth[n - 3];
        let x = solve_tridiagonal_with_tail(&mut lower, &mut diag, &mut upper, &mut rhs, 1.0);
        for (a, b) in x.iter().zip(&truth) {
            assert!((a - b).abs() < 1e-12, "{a} vs {b}");
        }
    }
}
