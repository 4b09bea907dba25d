//! Gauss–Legendre quadrature nodes and weights.

/// Nodes and weights of the `n`-point Gauss–Legendre rule on `[a, b]`.
///
/// Roots of the Legendre polynomial are found by Newton iteration from the
/// Chebyshev initial guess; this is accurate to machine precision for the
/// modest orders used here (n <= 64).
pub fn gauss_legendre(n: usize, a: f64, b: f64) -> Vec<(f64, f64)> {
    assert!(n >= 1);
    let mut out = Vec::with_capacity(n);
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    for i in 0..n {
        // Initial guess: Chebyshev-like approximation to the i-th root.
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            // Evaluate P_n and P_n' by the three-term recurrence.
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            let p = if n == 1 { x } else { p1 };
            dp = (n as f64) * (x * p - p0) / (x * x - 1.0);
            let step = p / dp;
            x -= step;
            if step.abs() < 1e-15 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        out.push((mid - half * x, half * w));
    }
    out.sort_by(|u, v| u.0.partial_cmp(&v.0).unwrap());
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn integrates_polynomials_exactly() {
        for n in [1usize, 2, 4, 8, 16, 32] {
            let rule = gauss_legendre(n, 0.0, 1.0);
            // Exact for degrees up to 2n-1.
            for d in 0..(2 * n).min(20) {
                let num: f64 = rule.iter().map(|&(x, w)| w * x.powi(d as i32)).sum();
                let exact = 1.0 / (d as f64 + 1.0);
                assert!((num - exact).abs() < 1e-13, "n={n} d={d}: {num} vs {exact}");
            }
        }
    }

    #[test]
    fn weights_sum_to_interval_length() {
        let rule = gauss_legendre(32, 0.5, 1.0);
        let s: f64 = rule.iter().map(|&(_, w)| w).sum();
        assert!((s - 0.5).abs() < 1e-14);
    }
}
