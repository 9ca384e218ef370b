//! Small quadrature toolbox: adaptive Simpson, Gauss-Legendre rules and a
//! doubling trapezoid rule for periodic integrands.
//!
//! These are the building blocks of the semi-analytic oracle layer and of the
//! validation suites that compare closed-form kernels against direct
//! integration.

/// Adaptive Simpson integration of `f` on `[a, b]`.
///
/// Classic recursive bisection with Richardson correction; `tol` is an
/// absolute tolerance for the whole interval. Depth is capped so that a
/// pathological integrand terminates rather than recursing forever.
pub fn adaptive_simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> f64 {
    fn simpson<F: Fn(f64) -> f64>(f: &F, a: f64, fa: f64, b: f64, fb: f64) -> (f64, f64, f64) {
        let m = 0.5 * (a + b);
        let fm = f(m);
        (m, fm, (b - a) / 6.0 * (fa + 4.0 * fm + fb))
    }
    fn recurse<F: Fn(f64) -> f64>(
        f: &F,
        a: f64,
        fa: f64,
        b: f64,
        fb: f64,
        m: f64,
        fm: f64,
        whole: f64,
        tol: f64,
        depth: u32,
    ) -> f64 {
        let (lm, flm, left) = simpson(f, a, fa, m, fm);
        let (rm, frm, right) = simpson(f, m, fm, b, fb);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            left + right + delta / 15.0
        } else {
            recurse(f, a, fa, m, fm, lm, flm, left, 0.5 * tol, depth - 1)
                + recurse(f, m, fm, b, fb, rm, frm, right, 0.5 * tol, depth - 1)
        }
    }
    if a == b {
        return 0.0;
    }
    let fa = f(a);
    let fb = f(b);
    let (m, fm, whole) = simpson(f, a, fa, b, fb);
    recurse(f, a, fa, b, fb, m, fm, whole, tol, 48)
}

/// Nodes and weights of the `n`-point Gauss-Legendre rule on `[-1, 1]`.
///
/// Newton iteration on the Legendre polynomial; accurate to machine
/// precision for the moderate orders used here (n <= a few hundred).
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = (n + 1) / 2;
    for i in 0..m {
        // Chebyshev initial guess
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            // evaluate P_n and P_n' by recurrence
            let mut p0 = 1.0;
            let mut p1 = x;
            for k in 2..=n {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    (nodes, weights)
}

/// Integrate `f` on `[a, b]` with an `n`-point Gauss-Legendre rule.
pub fn integrate_gl<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, n: usize) -> f64 {
    let (x, w) = gauss_legendre(n);
    let c = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    let mut s = 0.0;
    for i in 0..n {
        s += w[i] * f(mid + c * x[i]);
    }
    c * s
}

/// Mean of a 2*pi-periodic function by the trapezoid rule with node doubling.
///
/// For periodic analytic integrands the trapezoid rule converges
/// geometrically, so doubling until the relative change drops below `rel_tol`
/// gives close to full precision at low cost. Node count is capped at 2^17.
pub fn periodic_mean<F: Fn(f64) -> f64>(f: &F, rel_tol: f64) -> f64 {
    let two_pi = 2.0 * std::f64::consts::PI;
    let mut n = 32usize;
    let mut prev = {
        let mut s = 0.0;
        for i in 0..n {
            s += f(two_pi * i as f64 / n as f64);
        }
        s / n as f64
    };
    while n < (1 << 17) {
        // refine: existing nodes stay, add midpoints
        let mut s_new = 0.0;
        for i in 0..n {
            s_new += f(two_pi * (i as f64 + 0.5) / n as f64);
        }
        let cur = 0.5 * (prev + s_new / n as f64);
        n *= 2;
        let scale = cur.abs().max(1e-300);
        if (cur - prev).abs() <= rel_tol * scale {
            return cur;
        }
        prev = cur;
    }
    prev
}

/// Sum of a slice by recursive pairwise reduction.
///
/// Error grows like O(log n) in the length instead of O(n) for left-to-right
/// accumulation; used by the optional pairwise backprojection mode.
pub fn pairwise_sum(v: &[f64]) -> f64 {
    if v.len() <= 8 {
        return v.iter().sum();
    }
    let mid = v.len() / 2;
    pairwise_sum(&v[..mid]) + pairwise_sum(&v[mid..])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn simpson_polynomial_exact() {
        let f = |x: f64| 3.0 * x * x;
        let v = adaptive_simpson(&f, 0.0, 2.0, 1e-12);
        assert!((v - 8.0).abs() < 1e-12);
    }

    #[test]
    fn simpson_sqrt_singularity_after_substitution() {
        // int_0^1 dx/sqrt(x) = 2, mapped by x = v^2 to a smooth integrand
        let f = |v: f64| 2.0;
        let v = adaptive_simpson(&f, 0.0, 1.0, 1e-12);
        assert!((v - 2.0).abs() < 1e-12);
    }

    #[test]
    fn gauss_legendre_degree_exactness() {
        // 5-point rule integrates x^8 on [-1,1] exactly (degree 9 rule)
        let v = integrate_gl(&|x: f64| x.powi(8), -1.0, 1.0, 5);
        assert!((v - 2.0 / 9.0).abs() < 1e-13, "got {v}");
    }

    #[test]
    fn periodic_mean_bessel_like() {
        // (1/2pi) int exp(cos t) dt = I_0(1) = 1.2660658777520084
        let v = periodic_mean(&|t: f64| t.cos().exp(), 1e-14);
        assert!((v - 1.266_065_877_752_008_4).abs() < 1e-13);
    }

    #[test]
    fn pairwise_matches_naive() {
        let v: Vec<f64> = (0..1000).map(|i| (i as f64).sin()).collect();
        let a = pairwise_sum(&v);
        let b: f64 = v.iter().sum();
        assert!((a - b).abs() < 1e-9);
    }
}
