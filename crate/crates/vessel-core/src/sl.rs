//! Sturm-Liouville outputs of a vessel: the reconstructed potential, the
//! eigensolutions attached to the spectral atoms, the reproducing kernel of
//! the transformation operator, and an ODE-level residual certifying that the
//! transfer function maps free waves to outputs of the dressed problem.

use nalgebra::Vector2;
use num_complex::Complex64;

use crate::error::{Result, VesselError};
use crate::measure::IMAG_TOL;
use crate::vessel::{FiniteVessel, gamma_star_from};

type C64 = Complex64;

fn assert_real(z: C64, what: &str) -> f64 {
    assert!(
        z.im.abs() <= IMAG_TOL * (1.0 + z.re.abs()),
        "{what} expected real, got imaginary part {:.3e}",
        z.im
    );
    z.re
}

/// `q = -2 (2 Im H0_12 - (Re H0_11)^2)`, shared between the static potential
/// and its time-frozen evolved counterpart so the two reduce bitwise.
pub(crate) fn q_from_h0(h0: &nalgebra::Matrix2<C64>) -> f64 {
    -2.0 * (2.0 * h0[(0, 1)].im - h0[(0, 0)].re * h0[(0, 0)].re)
}

/// The reconstructed potential `q(x) = -2 (2 Im H0_12 - (Re H0_11)^2)`,
/// equal to `-2 (log tau)''`.
pub fn potential(v: &FiniteVessel, x: f64) -> Result<f64> {
    if v.rank() == 0 {
        return Ok(0.0);
    }
    let h0 = v.h0(x)?;
    Ok(q_from_h0(&h0))
}

/// Eigensolution `n`: the unique solution of `-phi'' + q phi = lambda_n phi`
/// with `phi(0) = 1` that the vessel attaches to atom `n`.
///
/// In the symmetrized representation it is the `n`-th entry of
/// `X(x)^{-1} c_1(x)` divided by `sqrt(b_n)`.
pub fn phi(v: &FiniteVessel, n: usize, x: f64) -> Result<f64> {
    if n >= v.rank() {
        return Err(VesselError::IndexOutOfRange {
            index: n,
            len: v.rank(),
        });
    }
    let factor = v.factor(x)?;
    let p = factor.solve_vec(&v.c1_vector(x));
    Ok(assert_real(p[n], "eigensolution") / v.weights()[n].sqrt())
}

/// A handle pairing a vessel with one spectral atom.
pub struct Eigensolution<'a> {
    vessel: &'a FiniteVessel,
    index: usize,
}

impl<'a> Eigensolution<'a> {
    pub fn new(vessel: &'a FiniteVessel, index: usize) -> Result<Self> {
        if index >= vessel.rank() {
            return Err(VesselError::IndexOutOfRange {
                index,
                len: vessel.rank(),
            });
        }
        Ok(Eigensolution { vessel, index })
    }

    /// The Sturm-Liouville eigenvalue of this solution.
    pub fn lambda(&self) -> f64 {
        self.vessel.lambdas()[self.index]
    }

    pub fn eval(&self, x: f64) -> Result<f64> {
        phi(self.vessel, self.index, x)
    }
}

/// The transformation-operator kernel
/// `K(x, y) = -c_1(x)^T X(x)^{-1} c_1(y)`, defined for `y <= x` (and
/// continued by the same formula elsewhere). It satisfies
/// `q(x) = 2 d/dx K(x, x)` and
/// `phi_n(x) = cos(k_n x) + integral_0^x K(x, y) cos(k_n y) dy`.
pub fn k_kernel(v: &FiniteVessel, x: f64, y: f64) -> Result<f64> {
    if v.rank() == 0 {
        return Ok(0.0);
    }
    let factor = v.factor(x)?;
    let p = factor.solve_vec(&v.c1_vector(y));
    let value: C64 = v
        .c1_vector(x)
        .iter()
        .zip(p.iter())
        .map(|(a, b)| a * b)
        .sum();
    Ok(-assert_real(value, "kernel"))
}

/// Max-norm residual of the output ODE `-sigma1 y' + (lambda sigma2 + gamma_star) y = 0`
/// for `y(x) = S(lambda, x) u(x)`, where `u(x) = [cos(kappa x), i kappa sin(kappa x)]`
/// with `kappa = sqrt(-i lambda)` solves the free (`gamma`) equation.
///
/// The derivative is formed by central differences with step `h`, so an exact
/// vessel yields a residual of order `h^2`.
pub fn backlund_residual(v: &FiniteVessel, lambda: C64, xs: &[f64], h: f64) -> Result<f64> {
    let params = v.params().clone();
    let kappa = (-Complex64::new(0.0, 1.0) * lambda).sqrt();
    let u = |x: f64| -> Vector2<C64> {
        Vector2::new(
            (kappa * x).cos(),
            Complex64::new(0.0, 1.0) * kappa * (kappa * x).sin(),
        )
    };
    let mut worst = 0.0f64;
    for &x in xs {
        let y_at = |s: f64| -> Result<Vector2<C64>> { Ok(v.transfer(lambda, s)? * u(s)) };
        let y = y_at(x)?;
        let y_prime = (y_at(x + h)? - y_at(x - h)?) / Complex64::new(2.0 * h, 0.0);
        let gs = gamma_star_from(&params, &v.h0(x)?);
        let residual = -params.sigma1 * y_prime + (params.sigma2 * lambda + gs) * y;
        worst = worst.max(residual.norm());
    }
    Ok(worst)
}
