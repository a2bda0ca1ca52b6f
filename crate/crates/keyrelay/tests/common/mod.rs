//! Shared oracles for the integration tests: adaptive quadrature of defining
//! integrals and a dense linear-system stationary solver. These deliberately
//! avoid the library's own evaluation paths so they can stand as independent
//! references.
#![allow(dead_code)]

/// Recursive adaptive Simpson quadrature.
pub fn adaptive_simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> f64 {
    let fa = f(a);
    let fb = f(b);
    let m = 0.5 * (a + b);
    let fm = f(m);
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    simpson_step(f, a, b, fa, fb, fm, whole, tol, 60)
}

#[allow(clippy::too_many_arguments)]
fn simpson_step<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    fa: f64,
    fb: f64,
    fm: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> f64 {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        left + right + delta / 15.0
    } else {
        simpson_step(f, a, m, fa, fm, flm, left, 0.5 * tol, depth - 1)
            + simpson_step(f, m, b, fm, fb, frm, right, 0.5 * tol, depth - 1)
    }
}

/// E1(x) = ∫_x^∞ e^{-u}/u du via the substitution u = x·e^s, which turns the
/// integral into ∫_0^∞ exp(-x e^s) ds with a bounded smooth integrand.
/// Valid for 0 < x < 745 (beyond that the true value underflows f64).
/// The tolerance is scaled to the value's magnitude (≈ e^{-x}/max(x,1)) so
/// the result is accurate in the relative sense.
pub fn e1_quadrature(x: f64) -> f64 {
    assert!(x > 0.0 && x < 745.0);
    let s_max = (745.0 / x).ln();
    let f = |s: f64| (-x * s.exp()).exp();
    let scale = ((-x).exp() / x.max(1.0)).max(1e-300);
    adaptive_simpson(&f, 0.0, s_max, 1e-13 * scale)
}

/// e^x·E1(x) = ∫_0^∞ exp(-x (e^s - 1)) ds, valid for every positive x.
/// Tolerance scaled to the bracketing bound 1/(x+1) < value < 1/x.
pub fn scaled_e1_quadrature(x: f64) -> f64 {
    assert!(x > 0.0);
    let s_max = (745.0 / x).ln_1p();
    let f = |s: f64| (-x * s.exp_m1()).exp();
    adaptive_simpson(&f, 0.0, s_max, 1e-13 / (x + 1.0))
}

/// E{ln(1 + β Z)} for Z exponential with mean θ, by direct quadrature of
/// ∫_0^∞ ln(1 + βθ t) e^{-t} dt. Independent reference for the
/// exponential-integral identity used by the fast-RSI closed form.
pub fn mean_log1p_exponential(beta: f64, theta: f64) -> f64 {
    assert!(beta > 0.0 && theta > 0.0);
    let f = |t: f64| (beta * theta * t).ln_1p() * (-t).exp();
    adaptive_simpson(&f, 0.0, 60.0, 1e-14)
}

/// Stationary distribution of a row-stochastic sparse chain by dense Gaussian
/// elimination on πT = π with Σπ = 1. Only sensible for small chains.
#[allow(clippy::needless_range_loop)]
pub fn dense_stationary(rows: &[Vec<(usize, f64)>]) -> Vec<f64> {
    let n = rows.len();
    // Build (T^T - I) with the last equation replaced by Σπ = 1.
    let mut a = vec![vec![0.0f64; n + 1]; n];
    for (i, row) in rows.iter().enumerate() {
        for &(j, p) in row {
            a[j][i] += p;
        }
    }
    for i in 0..n {
        a[i][i] -= 1.0;
    }
    for x in a[n - 1].iter_mut().take(n) {
        *x = 1.0;
    }
    a[n - 1][n] = 1.0;

    // Partial-pivot elimination.
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&r1, &r2| a[r1][col].abs().partial_cmp(&a[r2][col].abs()).unwrap())
            .unwrap();
        a.swap(col, pivot);
        let p = a[col][col];
        assert!(p.abs() > 1e-14, "singular chain matrix");
        for r in 0..n {
            if r != col {
                let factor = a[r][col] / p;
                if factor != 0.0 {
                    for c in col..=n {
                        a[r][c] -= factor * a[col][c];
                    }
                }
            }
        }
    }
    (0..n).map(|i| a[i][n] / a[i][i]).collect()
}
