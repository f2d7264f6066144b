//! Small one-dimensional quadrature helpers shared by the norm and measure
//! modules.

/// Composite midpoint rule with `n` panels on `[a, b]`.
pub fn midpoint<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, n: usize) -> f64 {
    if b <= a || n == 0 {
        return 0.0;
    }
    let h = (b - a) / n as f64;
    let mut acc = 0.0;
    for i in 0..n {
        acc += f(a + (i as f64 + 0.5) * h);
    }
    acc * h
}

/// Midpoint rule refined by doubling until two successive levels agree to
/// `rel_tol` (relative), starting from `n0` panels. Returns `None` when the
/// refinement has not settled within `max_doublings`.
pub fn midpoint_refine<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    n0: usize,
    rel_tol: f64,
    max_doublings: usize,
) -> Option<f64> {
    let mut n = n0.max(4);
    let mut prev = midpoint(f, a, b, n);
    for _ in 0..max_doublings {
        n *= 2;
        let cur = midpoint(f, a, b, n);
        let scale = cur.abs().max(prev.abs());
        if scale == 0.0 || (cur - prev).abs() <= rel_tol * scale {
            return Some(cur);
        }
        prev = cur;
    }
    None
}

/// Adaptive Simpson quadrature for smooth integrands.
pub fn simpson_adaptive<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> f64 {
    fn simpson<F: Fn(f64) -> f64>(f: &F, a: f64, m: f64, b: f64) -> f64 {
        (b - a) / 6.0 * (f(a) + 4.0 * f(m) + f(b))
    }
    fn rec<F: Fn(f64) -> f64>(
        f: &F,
        a: f64,
        b: f64,
        whole: f64,
        tol: f64,
        depth: usize,
    ) -> f64 {
        let m = 0.5 * (a + b);
        let left = simpson(f, a, 0.5 * (a + m), m);
        let right = simpson(f, m, 0.5 * (m + b), b);
        if depth == 0 || (left + right - whole).abs() <= 15.0 * tol {
            left + right + (left + right - whole) / 15.0
        } else {
            rec(f, a, m, left, tol * 0.5, depth - 1) + rec(f, m, b, right, tol * 0.5, depth - 1)
        }
    }
    if b <= a {
        return 0.0;
    }
    let m = 0.5 * (a + b);
    let whole = simpson(f, a, m, b);
    rec(f, a, b, whole, tol, 40)
}

/// Least-squares slope and intercept of `y` against `x`.
///
/// Returns `(slope, intercept, max_abs_residual)`.
pub fn linear_fit(x: &[f64], y: &[f64]) -> (f64, f64, f64) {
    assert_eq!(x.len(), y.len());
    let n = x.len() as f64;
    let sx: f64 = x.iter().sum();
    let sy: f64 = y.iter().sum();
    let sxx: f64 = x.iter().map(|v| v * v).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| a * b).sum();
    let denom = n * sxx - sx * sx;
    let slope = (n * sxy - sx * sy) / denom;
    let intercept = (sy - slope * sx) / n;
    let max_res = x
        .iter()
        .zip(y)
        .map(|(a, b)| (b - (slope * a + intercept)).abs())
        .fold(0.0_f64, f64::max);
    (slope, intercept, max_res)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn midpoint_converges_on_polynomial() {
        let f = |x: f64| 3.0 * x * x;
        let v = midpoint_refine(&f, 0.0, 2.0, 8, 1e-6, 20).unwrap();
        assert!((v - 8.0).abs() < 1e-4, "{v}");
    }

    #[test]
    fn simpson_exact_on_cubic() {
        let f = |x: f64| x * x * x - 2.0 * x;
        let v = simpson_adaptive(&f, -1.0, 3.0, 1e-12);
        assert!((v - (81.0 / 4.0 - 1.0 / 4.0 - 9.0 + 1.0)).abs() < 1e-10, "{v}");
    }

    #[test]
    fn simpson_matches_bracket_weight_integral() {
        // reference value for int_{-4}^{4} (1+x^2)^{0.55} dx via fine midpoint
        let f = |x: f64| (1.0 + x * x).powf(0.55);
        let a = simpson_adaptive(&f, -4.0, 4.0, 1e-12);
        let b = midpoint(&f, -4.0, 4.0, 1 << 20);
        assert!((a - b).abs() / b < 1e-8);
    }

    #[test]
    fn fit_recovers_line() {
        let x = [0.0, 1.0, 2.0, 3.0];
        let y = [1.0, 3.0, 5.0, 7.0];
        let (s, i, r) = linear_fit(&x, &y);
        assert!((s - 2.0).abs() < 1e-12);
        assert!((i - 1.0).abs() < 1e-12);
        assert!(r < 1e-12);
    }
}
