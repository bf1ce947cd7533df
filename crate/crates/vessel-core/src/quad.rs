//! Gauss-Legendre quadrature and an adaptive Simpson oracle.

use nalgebra::DMatrix;

/// Nodes and weights of the `n`-point Gauss-Legendre rule on `[-1, 1]`,
/// computed from the symmetric Jacobi matrix (Golub-Welsch).
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1, "quadrature order must be at least 1");
    if n == 1 {
        return (vec![0.0], vec![2.0]);
    }
    let mut jacobi = DMatrix::<f64>::zeros(n, n);
    for i in 1..n {
        let b = i as f64 / (4.0 * (i * i) as f64 - 1.0).sqrt();
        jacobi[(i, i - 1)] = b;
        jacobi[(i - 1, i)] = b;
    }
    let eig = jacobi.symmetric_eigen();
    let mut pairs: Vec<(f64, f64)> = (0..n)
        .map(|j| {
            let v0 = eig.eigenvectors[(0, j)];
            (eig.eigenvalues[j], 2.0 * v0 * v0)
        })
        .collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    pairs.into_iter().unzip()
}

/// Points per composite panel used by the integral-equation pipeline.
pub const PANEL_ORDER: usize = 8;

/// Composite Gauss-Legendre rule on `[0, x]`: `ceil(n_points / 8)` equal
/// panels of the 8-point rule. Returns `(nodes, weights)` in increasing order.
pub fn panel_rule(x: f64, n_points: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(x > 0.0, "panel rule needs a positive interval");
    assert!(n_points >= 1);
    let panels = n_points.div_ceil(PANEL_ORDER);
    let (base_nodes, base_weights) = gauss_legendre(PANEL_ORDER);
    let mut nodes = Vec::with_capacity(panels * PANEL_ORDER);
    let mut weights = Vec::with_capacity(panels * PANEL_ORDER);
    let width = x / panels as f64;
    for p in 0..panels {
        let a = width * p as f64;
        let mid = a + 0.5 * width;
        for (&u, &w) in base_nodes.iter().zip(base_weights.iter()) {
            nodes.push(mid + 0.5 * width * u);
            weights.push(0.5 * width * w);
        }
    }
    (nodes, weights)
}

/// Adaptive Simpson integration, used as a slow, independent oracle in tests.
pub fn adaptive_simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> f64 {
    fn simpson<F: Fn(f64) -> f64>(f: &F, a: f64, fa: f64, b: f64, fb: f64) -> (f64, f64, f64) {
        let m = 0.5 * (a + b);
        let fm = f(m);
        ((b - a) / 6.0 * (fa + 4.0 * fm + fb), m, fm)
    }
    fn recurse<F: Fn(f64) -> f64>(
        f: &F,
        a: f64,
        fa: f64,
        b: f64,
        fb: f64,
        whole: f64,
        m: f64,
        fm: f64,
        tol: f64,
        depth: u32,
    ) -> f64 {
        let (left, lm, flm) = simpson(f, a, fa, m, fm);
        let (right, rm, frm) = simpson(f, m, fm, b, fb);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            left + right + delta / 15.0
        } else {
            recurse(f, a, fa, m, fm, left, lm, flm, 0.5 * tol, depth - 1)
                + recurse(f, m, fm, b, fb, right, rm, frm, 0.5 * tol, depth - 1)
        }
    }
    if a == b {
        return 0.0;
    }
    let fa = f(a);
    let fb = f(b);
    let (whole, m, fm) = simpson(f, a, fa, b, fb);
    recurse(f, a, fa, b, fb, whole, m, fm, tol, 48)
}
