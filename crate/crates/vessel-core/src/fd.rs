//! Second-order finite-difference stencils used by the residual checks.

use num_complex::Complex64;

/// Central first derivative, `O(h^2)`.
pub fn central_1<F: FnMut(f64) -> f64>(mut f: F, x: f64, h: f64) -> f64 {
    (f(x + h) - f(x - h)) / (2.0 * h)
}

/// Central second derivative, `O(h^2)`.
pub fn central_2<F: FnMut(f64) -> f64>(mut f: F, x: f64, h: f64) -> f64 {
    (f(x + h) - 2.0 * f(x) + f(x - h)) / (h * h)
}

/// Five-point central third derivative, `O(h^2)`.
pub fn central_3<F: FnMut(f64) -> f64>(mut f: F, x: f64, h: f64) -> f64 {
    (f(x + 2.0 * h) - 2.0 * f(x + h) + 2.0 * f(x - h) - f(x - 2.0 * h)) / (2.0 * h * h * h)
}

/// Central first derivative of a complex-valued function.
pub fn central_1_c<F: FnMut(f64) -> Complex64>(mut f: F, x: f64, h: f64) -> Complex64 {
    (f(x + h) - f(x - h)) / (2.0 * h)
}

/// Central second derivative of a complex-valued function.
pub fn central_2_c<F: FnMut(f64) -> Complex64>(mut f: F, x: f64, h: f64) -> Complex64 {
    (f(x + h) - 2.0 * f(x) + f(x - h)) / (h * h)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn stencils_on_sine() {
        let f = |x: f64| (2.0 * x).sin();
        let h = 1e-4;
        assert_abs_diff_eq!(central_1(f, 0.7, h), 2.0 * (1.4f64).cos(), epsilon = 1e-7);
        assert_abs_diff_eq!(central_2(f, 0.7, h), -4.0 * (1.4f64).sin(), epsilon = 1e-5);
        assert_abs_diff_eq!(
            central_3(f, 0.7, 1e-3),
            -8.0 * (1.4f64).cos(),
            epsilon = 1e-4
        );
    }

    #[test]
    fn convergence_is_second_order() {
        let f = |x: f64| x.exp().sin();
        // d/dx sin(e^x) = e^x cos(e^x)
        let exact = {
            let e = (0.5f64).exp();
            e * e.cos()
        };
        let e1 = (central_1(f, 0.5, 1e-2) - exact).abs();
        let e2 = (central_1(f, 0.5, 5e-3) - exact).abs();
        let ratio = e1 / e2;
        assert!((3.5..=4.5).contains(&ratio), "ratio {ratio}");
    }
}
