//! Time evolution of the vessel under the KdV flow.
//!
//! Each row picks up the dispersive phase `theta_n(t) = k_n^3 t`, and the
//! Gram matrix gains a closed-form boundary integral in `t` alongside the
//! usual spatial integral, so no time stepping is ever performed: the
//! potential `q(x, t) = -2 d^2/dx^2 log det X(x, t)` solves
//! `q_t = -(3/2) q q_x + (1/4) q_xxx` exactly, and the finite-difference
//! residual measures only stencil truncation.

use nalgebra::{DMatrix, Vector2};
use num_complex::Complex64;

use crate::error::{Result, VesselError};
use crate::measure::{SpectralMeasure, IMAG_TOL};
use crate::sl;
use crate::vessel::FiniteVessel;

type C64 = Complex64;

/// A vessel frozen at one instant of the KdV flow.
#[derive(Debug, Clone)]
pub struct EvolvedState {
    vessel: FiniteVessel,
    t: f64,
}

impl EvolvedState {
    pub fn new(vessel: &FiniteVessel, t: f64) -> Self {
        EvolvedState {
            vessel: vessel.clone(),
            t,
        }
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn vessel(&self) -> &FiniteVessel {
        &self.vessel
    }

    /// Row `n` of the evolved `B(x, t)`:
    /// `[cos(k_n x - theta_n), -i k_n sin(k_n x - theta_n)]`.
    pub fn b_row_t(&self, n: usize, x: f64) -> Result<Vector2<C64>> {
        if n >= self.vessel.rank() {
            return Err(VesselError::IndexOutOfRange {
                index: n,
                len: self.vessel.rank(),
            });
        }
        Ok(self.vessel.b_row_xt(n, x, self.t))
    }

    /// The evolved Gram matrix; at `t = 0` this is bit-for-bit the static
    /// `x_matrix` because the shared assembly path contributes exact zeros
    /// for every time term.
    pub fn x_matrix_t(&self, x: f64) -> DMatrix<C64> {
        self.vessel.x_matrix_xt(x, self.t)
    }

    pub fn tau(&self, x: f64) -> f64 {
        self.vessel.tau_xt(x, self.t)
    }

    /// The potential at this instant.
    pub fn q(&self, x: f64) -> Result<f64> {
        q_xt(&self.vessel, x, self.t)
    }

    /// Max-norm bounded-form Lyapunov residual at this instant; the flow
    /// preserves the identity, so this stays at rounding level.
    pub fn lyapunov_residual(&self, x: f64) -> f64 {
        self.vessel.lyapunov_residual_xt(x, self.t)
    }
}

/// `q(x, t) = -2 d^2/dx^2 log det X(x, t)` through the same sandwiched-inverse
/// formula as the static potential, applied to the time-frozen vessel.
/// At `t = 0` the result equals the static potential exactly.
pub fn q_xt(v: &FiniteVessel, x: f64, t: f64) -> Result<f64> {
    if v.rank() == 0 {
        return Ok(0.0);
    }
    let factor = v.factor_xt(x, Some(t))?;
    let h0 = v.h0_at(&factor, x, t);
    Ok(sl::q_from_h0(&h0))
}

/// Finite-difference residual of the flow equation
/// `q_t + (3/2) q q_x - (1/4) q_xxx` at `(x, t)`, central stencils of step `h`
/// (5-point for the third derivative). Second-order accurate.
pub fn kdv_residual(v: &FiniteVessel, x: f64, t: f64, h: f64) -> Result<f64> {
    if !(h > 0.0) {
        return Err(VesselError::InvalidInput(format!(
            "derivative step must be positive, got {h}"
        )));
    }
    let q = |xx: f64, tt: f64| q_xt(v, xx, tt);
    let q_t = (q(x, t + h)? - q(x, t - h)?) / (2.0 * h);
    let q_x = (q(x + h, t)? - q(x - h, t)?) / (2.0 * h);
    let q_xxx =
        (q(x + 2.0 * h, t)? - 2.0 * q(x + h, t)? + 2.0 * q(x - h, t)? - q(x - 2.0 * h, t)?)
            / (2.0 * h * h * h);
    Ok((q_t + 1.5 * q(x, t)? * q_x - 0.25 * q_xxx).abs())
}

/// The boundary value the spectral data assigns at `x = 0`:
/// `2 sum_n b_n k_n sin(k_n^3 t)`, asserted real.
pub fn boundary_trace(m: &SpectralMeasure, t: f64) -> f64 {
    let total: C64 = m
        .atoms()
        .iter()
        .map(|atom| {
            let k = crate::measure::sqrt_node(atom.lambda);
            let omega = k * k * k;
            k * (omega * t).sin() * atom.weight
        })
        .sum();
    let value = 2.0 * total;
    assert!(
        value.im.abs() <= IMAG_TOL * (1.0 + value.re.abs()),
        "boundary trace expected real, got imaginary part {:.3e}",
        value.im
    );
    value.re
}

/// Merge a signed perturbation `nu` into the measure, accepting it only if
/// its kernel contribution vanishes on a sample grid:
/// `max |sum_l nu_l cos(k_l x) cos(k_l y)|` over a 10x10 grid in `[0, 2]^2`
/// must not exceed `1e-10 * (1 + sum |nu_l|)`. An accepted perturbation
/// leaves the reconstructed potential at `t = 0` unchanged while shifting the
/// boundary trace.
pub fn perturb(m: &SpectralMeasure, nu: &[(f64, f64)]) -> Result<SpectralMeasure> {
    let scale: f64 = 1.0 + nu.iter().map(|&(_, w)| w.abs()).sum::<f64>();
    let tol = 1e-10 * scale;
    let mut max_violation = 0.0f64;
    for i in 0..10 {
        for j in 0..10 {
            let x = 2.0 * i as f64 / 9.0;
            let y = 2.0 * j as f64 / 9.0;
            let value: C64 = nu
                .iter()
                .map(|&(lambda, w)| {
                    let k = crate::measure::sqrt_node(lambda);
                    (k * x).cos() * (k * y).cos() * w
                })
                .sum();
            max_violation = max_violation.max(value.norm());
        }
    }
    if max_violation > tol {
        return Err(VesselError::NotOrthogonal { max_violation });
    }
    let mut pairs: Vec<(f64, f64)> = m
        .atoms()
        .iter()
        .map(|a| (a.lambda, a.weight))
        .collect();
    pairs.extend_from_slice(nu);
    Ok(SpectralMeasure::new_signed(&pairs))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quad::adaptive_simpson;
    use crate::vessel::VesselParams;
    use approx::assert_abs_diff_eq;

    fn vessel(pairs: &[(f64, f64)]) -> FiniteVessel {
        FiniteVessel::from_measure(&SpectralMeasure::new(pairs).unwrap()).unwrap()
    }

    fn mixed2() -> FiniteVessel {
        vessel(&[(-1.0, 0.7), (1.5, 0.4)])
    }

    #[test]
    fn evolved_row_reduces_bitwise_at_t0() {
        let v = mixed2();
        let state = EvolvedState::new(&v, 0.0);
        for n in 0..v.rank() {
            for &x in &[-0.8, 0.0, 0.6, 2.3] {
                assert_eq!(state.b_row_t(n, x).unwrap(), v.b_row(n, x).unwrap());
            }
        }
    }

    #[test]
    fn evolved_row_satisfies_wave_equation() {
        // time derivative of each row equals (i A) times its x-derivative,
        // i.e. the factor is i * (i lambda_n) = -lambda_n
        let v = mixed2();
        let h = 1e-4;
        for n in 0..v.rank() {
            let factor = -v.lambdas()[n];
            for &(x, t) in &[(0.5, 0.3), (1.2, 0.8)] {
                let dt = (v.b_row_xt(n, x, t + h) - v.b_row_xt(n, x, t - h)) / C64::new(2.0 * h, 0.0);
                let dx = (v.b_row_xt(n, x + h, t) - v.b_row_xt(n, x - h, t)) / C64::new(2.0 * h, 0.0);
                assert!(
                    (dt - dx * C64::new(factor, 0.0)).norm() <= 1e-5,
                    "n={n}, x={x}, t={t}"
                );
            }
        }
    }

    #[test]
    fn bound_state_row_is_translated_hyperbolic() {
        // lambda = -1, k = i: the phase k x - k^3 t = i(x + t), so the row is
        // [cosh(x + t), i sinh(x + t)]
        let v = vessel(&[(-1.0, 1.0)]);
        let state = EvolvedState::new(&v, 0.35);
        for &x in &[0.0, 0.4, 1.1] {
            let row = state.b_row_t(0, x).unwrap();
            let s = x + 0.35;
            assert_abs_diff_eq!(row[0].re, s.cosh(), epsilon = 1e-12);
            assert_abs_diff_eq!(row[0].im, 0.0, epsilon = 1e-12);
            assert_abs_diff_eq!(row[1].re, 0.0, epsilon = 1e-12);
            assert_abs_diff_eq!(row[1].im, s.sinh(), epsilon = 1e-12);
        }
    }

    #[test]
    fn evolved_gram_reduces_bitwise_at_t0() {
        let v = mixed2();
        let state = EvolvedState::new(&v, 0.0);
        for &x in &[-1.0, 0.0, 0.7, 1.9] {
            assert_eq!(state.x_matrix_t(x), v.x_matrix(x));
        }
    }

    #[test]
    fn evolved_gram_time_derivative() {
        // FD in t against the closed-form right-hand side
        // i A C sigma2 C* - i C sigma2 C* A* + i C gamma C*
        let v = mixed2();
        let params = VesselParams::sturm_liouville();
        let h = 1e-4;
        for &(x, t) in &[(0.6, 0.4), (1.4, 1.0)] {
            let fd = (v.x_matrix_xt(x, t + h) - v.x_matrix_xt(x, t - h)) / C64::new(2.0 * h, 0.0);
            let c = v.c_matrix_xt(x, t);
            let s2 = &c * params.sigma2 * c.adjoint();
            let g = &c * params.gamma * c.adjoint();
            let i = C64::new(0.0, 1.0);
            for n in 0..v.rank() {
                for m in 0..v.rank() {
                    let a_n = i * v.lambdas()[n];
                    let a_m_conj = (i * v.lambdas()[m]).conj();
                    let rhs = i * a_n * s2[(n, m)] - i * s2[(n, m)] * a_m_conj + i * g[(n, m)];
                    assert!(
                        (fd[(n, m)] - rhs).norm() <= 1e-5,
                        "entry ({n},{m}) at x={x}, t={t}"
                    );
                }
            }
        }
    }

    #[test]
    fn evolved_gram_matches_quadrature_assembly() {
        // oracle: numerically integrate the spatial and boundary integrands
        let v = mixed2();
        let params = VesselParams::sturm_liouville();
        let (x, t) = (0.9, 0.6);
        let closed = v.x_matrix_xt(x, t);
        let i = C64::new(0.0, 1.0);
        for n in 0..v.rank() {
            for m in 0..v.rank() {
                let weight = (v.weights()[n] * v.weights()[m]).sqrt();
                let spatial = |y: f64| -> C64 {
                    let rn = v.b_row_xt(n, y, t);
                    let rm = v.b_row_xt(m, y, t);
                    (rn.transpose() * params.sigma2 * rm.conjugate())[0]
                };
                let boundary = |s: f64| -> C64 {
                    let rn = v.b_row_xt(n, 0.0, s);
                    let rm = v.b_row_xt(m, 0.0, s);
                    let s2 = (rn.transpose() * params.sigma2 * rm.conjugate())[0];
                    let g = (rn.transpose() * params.gamma * rm.conjugate())[0];
                    let a_n = i * v.lambdas()[n];
                    let a_m_conj = (i * v.lambdas()[m]).conj();
                    i * a_n * s2 - i * s2 * a_m_conj + i * g
                };
                let quad_c = |f: &dyn Fn(f64) -> C64, hi: f64| -> C64 {
                    C64::new(
                        adaptive_simpson(&|s| f(s).re, 0.0, hi, 1e-13),
                        adaptive_simpson(&|s| f(s).im, 0.0, hi, 1e-13),
                    )
                };
                let mut expected = quad_c(&spatial, x) + quad_c(&boundary, t);
                expected *= weight;
                if n == m {
                    expected += C64::new(1.0, 0.0);
                }
                assert!(
                    (closed[(n, m)] - expected).norm() <= 1e-10,
                    "entry ({n},{m}): closed {} vs quadrature {}",
                    closed[(n, m)],
                    expected
                );
            }
        }
    }

    #[test]
    fn potential_reduces_exactly_at_t0() {
        let v = mixed2();
        for &x in &[0.05, 0.4, 1.3, 2.6] {
            let static_q = sl::potential(&v, x).unwrap();
            let evolved_q = q_xt(&v, x, 0.0).unwrap();
            assert_eq!(evolved_q, static_q);
        }
        let empty = FiniteVessel::from_measure(&SpectralMeasure::empty()).unwrap();
        assert_eq!(q_xt(&empty, 0.9, 0.7).unwrap(), 0.0);
    }

    #[test]
    fn flow_residual_is_second_order() {
        let v = vessel(&[(-1.0, 1.0)]);
        let (x, t) = (0.7, 0.4);
        let coarse = kdv_residual(&v, x, t, 1e-2).unwrap();
        let fine = kdv_residual(&v, x, t, 5e-3).unwrap();
        assert!(coarse <= 1e-3, "coarse residual {coarse:.3e}");
        let ratio = coarse / fine;
        assert!(
            (3.5..=4.5).contains(&ratio),
            "expected second-order decay, got {coarse:.3e} -> {fine:.3e} (ratio {ratio:.2})"
        );
    }

    #[test]
    fn boundary_trace_examples() {
        let m = SpectralMeasure::new(&[(-1.0, 0.7), (1.5, 0.4)]).unwrap();
        assert_eq!(boundary_trace(&m, 0.0), 0.0);

        // one atom (-kappa^2, c): 2 c kappa sinh(kappa^3 t)
        let one = SpectralMeasure::new(&[(-1.0, 1.0)]).unwrap();
        assert_abs_diff_eq!(boundary_trace(&one, 0.5), 2.0 * 0.5f64.sinh(), epsilon = 1e-14);
        assert_abs_diff_eq!(boundary_trace(&one, 1.0), 2.0 * 1.0f64.sinh(), epsilon = 1e-14);

        let kappa: f64 = 1.3;
        let scaled = SpectralMeasure::new(&[(-kappa * kappa, 0.6)]).unwrap();
        assert_abs_diff_eq!(
            boundary_trace(&scaled, 0.4),
            2.0 * 0.6 * kappa * (kappa.powi(3) * 0.4).sinh(),
            epsilon = 1e-12
        );
    }

    #[test]
    fn lyapunov_preserved_under_flow() {
        let v = vessel(&[(-1.0, 0.8), (0.6, 0.5), (2.9, 1.2)]);
        for i in 0..5 {
            for j in 0..5 {
                let x = 0.5 * i as f64;
                let t = 0.5 * j as f64;
                let state = EvolvedState::new(&v, t);
                assert!(
                    state.lyapunov_residual(x) <= 1e-9,
                    "x={x}, t={t}: {}",
                    state.lyapunov_residual(x)
                );
            }
        }
    }

    #[test]
    fn perturb_accepts_zero_and_rejects_cancellation() {
        let m = SpectralMeasure::new(&[(-1.0, 0.7), (1.5, 0.4)]).unwrap();
        let same = perturb(&m, &[]).unwrap();
        assert_eq!(same.atoms(), m.atoms());

        let minus: Vec<(f64, f64)> = m.atoms().iter().map(|a| (a.lambda, -a.weight)).collect();
        let err = perturb(&m, &minus);
        match err {
            Err(VesselError::NotOrthogonal { max_violation }) => {
                assert!(max_violation > 1.0);
            }
            other => panic!("expected orthogonality rejection, got {other:?}"),
        }

        // a generic single atom is never kernel-orthogonal
        assert!(matches!(
            perturb(&m, &[(-0.5, 0.3)]),
            Err(VesselError::NotOrthogonal { .. })
        ));
    }

    #[test]
    fn singular_evolved_gram_reports_location() {
        let v = vessel(&[(-1.0, 1.0)]);
        let x0 = -0.8034069886263154;
        match q_xt(&v, x0, 0.0) {
            Err(VesselError::SingularGram { location, .. }) => {
                assert!(location.contains("t=0"), "location was {location}");
            }
            other => panic!("expected singular report, got {other:?}"),
        }
    }
}
