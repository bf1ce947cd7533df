//! Vessels over the NLS and canonical-system parameter packs, demonstrating
//! that the same generator/row/Gram machinery produces solutions of other
//! integrable equations.
//!
//! For the NLS pack (`sigma1 = I`, `sigma2 = diag(1,-1)/2`, `gamma = 0`) the
//! translation and evolution equations decouple per row and column: column 1
//! scales by `exp(-a_n x/2 - i a_n^2 t/2)` and column 2 by its reciprocal
//! phase. The Gram matrix solves the bounded Lyapunov equation
//! `a_n X_nm + X_nm conj(a_m) + (B B*)_nm = 0` pointwise; for degenerate
//! pairs (`a_n + conj(a_m) = 0`, allowed when the corresponding rows are
//! orthogonal) the entry grows linearly, `X_nm = M x + 2 i a_n M t` with
//! `M = (B0 sigma2 B0*)_nm`. The extracted amplitude `beta = H0_12` then
//! satisfies `i beta_t + beta_xx + 2 |beta|^2 beta = 0`.

use nalgebra::{DMatrix, Matrix2};
use num_complex::Complex64;

use crate::error::{Result, VesselError};
use crate::vessel::{factor_square, gamma_star_from, VesselParams};

type C64 = Complex64;

const I_UNIT: C64 = C64::new(0.0, 1.0);

fn re(v: f64) -> C64 {
    C64::new(v, 0.0)
}

/// Relative threshold declaring a generator pair degenerate.
const DEGENERATE_PAIR_TOL: f64 = 1e-12;
/// Allowed row non-orthogonality on a degenerate pair.
const ORTHOGONALITY_TOL: f64 = 1e-10;

/// NLS parameters: `sigma1 = I`, `sigma2 = diag(1, -1)/2`, `gamma = 0`.
pub fn nls_params() -> VesselParams {
    let z = C64::new(0.0, 0.0);
    VesselParams {
        sigma1: Matrix2::identity(),
        sigma2: Matrix2::new(re(0.5), z, z, re(-0.5)),
        gamma: Matrix2::zeros(),
    }
}

/// Canonical-system parameters: `sigma1 = [[0, i], [-i, 0]]`, `sigma2 = I`,
/// `gamma = 0`.
pub fn canonical_params() -> VesselParams {
    let z = C64::new(0.0, 0.0);
    VesselParams {
        sigma1: Matrix2::new(z, I_UNIT, -I_UNIT, z),
        sigma2: Matrix2::identity(),
        gamma: Matrix2::zeros(),
    }
}

fn degenerate(a_n: C64, a_m: C64) -> bool {
    (a_n + a_m.conj()).norm() <= DEGENERATE_PAIR_TOL * (1.0 + a_n.norm() + a_m.norm())
}

fn matrix2_from(h: &DMatrix<C64>) -> Matrix2<C64> {
    Matrix2::new(h[(0, 0)], h[(0, 1)], h[(1, 0)], h[(1, 1)])
}

/// A finite-rank vessel over the NLS parameter pack.
#[derive(Debug, Clone)]
pub struct NlsVessel {
    params: VesselParams,
    a: Vec<C64>,
    b0: DMatrix<C64>,
    trivial: bool,
}

impl NlsVessel {
    /// `a` are the generator values (each with nonzero real part), `b0` the
    /// initial `N x 2` row matrix. Degenerate pairs `a_n + conj(a_m) = 0`
    /// are admitted only when the corresponding rows satisfy
    /// `(B0 B0*)_nm = 0`, which the bounded Lyapunov equation forces.
    pub fn new(a: Vec<C64>, b0: DMatrix<C64>) -> Result<Self> {
        if b0.nrows() != a.len() || b0.ncols() != 2 {
            return Err(VesselError::InvalidInput(format!(
                "row matrix must be {} x 2, got {} x {}",
                a.len(),
                b0.nrows(),
                b0.ncols()
            )));
        }
        for (n, &a_n) in a.iter().enumerate() {
            if a_n.re.abs() <= DEGENERATE_PAIR_TOL {
                return Err(VesselError::InvalidInput(format!(
                    "generator value {n} has zero real part ({a_n}); the Gram \
                     solve needs Re(a) != 0"
                )));
            }
        }
        let scale = 1.0 + b0.iter().map(|z| z.norm()).fold(0.0, f64::max);
        for n in 0..a.len() {
            for m in 0..a.len() {
                if degenerate(a[n], a[m]) {
                    let product: C64 = (0..2).map(|c| b0[(n, c)] * b0[(m, c)].conj()).sum();
                    if product.norm() > ORTHOGONALITY_TOL * scale * scale {
                        return Err(VesselError::InvalidInput(format!(
                            "degenerate generator pair ({n}, {m}) requires \
                             orthogonal rows; inner product is {product}"
                        )));
                    }
                }
            }
        }
        let trivial = b0.iter().all(|z| z.norm() == 0.0);
        Ok(NlsVessel {
            params: nls_params(),
            a,
            b0,
            trivial,
        })
    }

    pub fn rank(&self) -> usize {
        self.a.len()
    }

    pub fn params(&self) -> &VesselParams {
        &self.params
    }

    pub fn generator(&self) -> &[C64] {
        &self.a
    }

    /// The evolved row matrix: column 1 scales by
    /// `exp(-a_n x/2 - i a_n^2 t/2)`, column 2 by the reciprocal factor.
    pub fn b_matrix(&self, x: f64, t: f64) -> DMatrix<C64> {
        let mut b = self.b0.clone();
        for (n, &a_n) in self.a.iter().enumerate() {
            let phase = a_n * (x / 2.0) + I_UNIT * a_n * a_n * (t / 2.0);
            b[(n, 0)] *= (-phase).exp();
            b[(n, 1)] *= phase.exp();
        }
        b
    }

    /// The Gram matrix solving `a_n X_nm + X_nm conj(a_m) = -(B B*)_nm`
    /// entrywise, with the linear-growth branch on degenerate pairs.
    pub fn x_matrix(&self, x: f64, t: f64) -> DMatrix<C64> {
        let n = self.rank();
        let b = self.b_matrix(x, t);
        DMatrix::from_fn(n, n, |i, j| {
            if degenerate(self.a[i], self.a[j]) {
                let m: C64 = (0..2)
                    .map(|c| self.b0[(i, c)] * self.params.sigma2[(c, c)] * self.b0[(j, c)].conj())
                    .sum();
                m * x + I_UNIT * 2.0 * self.a[i] * m * t
            } else {
                let product: C64 = (0..2).map(|c| b[(i, c)] * b[(j, c)].conj()).sum();
                -product / (self.a[i] + self.a[j].conj())
            }
        })
    }

    /// `H0(x, t) = B* X^{-1} B`.
    pub fn h0(&self, x: f64, t: f64) -> Result<Matrix2<C64>> {
        if self.trivial {
            return Ok(Matrix2::zeros());
        }
        let factor = factor_square(self.x_matrix(x, t), format!("x={x}, t={t}"))?;
        let b = self.b_matrix(x, t);
        let solved = factor.solve(&b);
        Ok(matrix2_from(&(b.adjoint() * solved)))
    }

    /// The linkage matrix `gamma_star = [sigma2, H0]`, asserted to have the
    /// off-diagonal skew structure `[[0, beta], [-conj(beta), 0]]`.
    pub fn gamma_star(&self, x: f64, t: f64) -> Result<Matrix2<C64>> {
        let h0 = self.h0(x, t)?;
        let gs = gamma_star_from(&self.params, &h0);
        let scale = 1.0 + gs.norm();
        assert!(
            gs[(0, 0)].norm() <= 1e-10 * scale && gs[(1, 1)].norm() <= 1e-10 * scale,
            "amplitude linkage has a nonzero diagonal at x={x}, t={t}"
        );
        assert!(
            (gs[(1, 0)] + gs[(0, 1)].conj()).norm() <= 1e-10 * scale,
            "amplitude linkage is not skew at x={x}, t={t}"
        );
        Ok(gs)
    }

    /// The NLS amplitude `beta(x, t) = gamma_star_12 = H0_12`.
    pub fn beta(&self, x: f64, t: f64) -> Result<C64> {
        if self.trivial {
            return Ok(C64::new(0.0, 0.0));
        }
        Ok(self.gamma_star(x, t)?[(0, 1)])
    }

    /// Max-norm residual of the bounded Lyapunov identity
    /// `a_n X_nm + X_nm conj(a_m) + (B B*)_nm` at `(x, t)`.
    pub fn lyapunov_residual(&self, x: f64, t: f64) -> f64 {
        let n = self.rank();
        let b = self.b_matrix(x, t);
        let xm = self.x_matrix(x, t);
        let mut worst = 0.0f64;
        for i in 0..n {
            for j in 0..n {
                let product: C64 = (0..2).map(|c| b[(i, c)] * b[(j, c)].conj()).sum();
                let entry = self.a[i] * xm[(i, j)] + xm[(i, j)] * self.a[j].conj() + product;
                worst = worst.max(entry.norm());
            }
        }
        worst
    }
}

/// Finite-difference residual of `i beta_t + beta_xx + 2 |beta|^2 beta`
/// at `(x, t)` with step `h`; second-order accurate for an exact vessel.
pub fn enls_residual(v: &NlsVessel, x: f64, t: f64, h: f64) -> Result<f64> {
    if !(h > 0.0) {
        return Err(VesselError::InvalidInput(format!(
            "derivative step must be positive, got {h}"
        )));
    }
    let beta_t = (v.beta(x, t + h)? - v.beta(x, t - h)?) / re(2.0 * h);
    let beta_xx =
        (v.beta(x + h, t)? - v.beta(x, t)? * 2.0 + v.beta(x - h, t)?) / re(h * h);
    let beta = v.beta(x, t)?;
    Ok((I_UNIT * beta_t + beta_xx + re(2.0) * beta.norm_sqr() * beta).norm())
}

/// A static finite-rank vessel over the canonical-system parameter pack.
#[derive(Debug, Clone)]
pub struct CanonicalVessel {
    params: VesselParams,
    a: Vec<C64>,
    b0: DMatrix<C64>,
    trivial: bool,
}

impl CanonicalVessel {
    /// Degenerate generator pairs are rejected outright: the canonical Gram
    /// entries have no linear-growth branch here.
    pub fn new(a: Vec<C64>, b0: DMatrix<C64>) -> Result<Self> {
        if b0.nrows() != a.len() || b0.ncols() != 2 {
            return Err(VesselError::InvalidInput(format!(
                "row matrix must be {} x 2, got {} x {}",
                a.len(),
                b0.nrows(),
                b0.ncols()
            )));
        }
        for n in 0..a.len() {
            for m in 0..a.len() {
                if degenerate(a[n], a[m]) {
                    return Err(VesselError::InvalidInput(format!(
                        "generator pair ({n}, {m}) is degenerate; the canonical \
                         Gram solve needs a_n + conj(a_m) != 0"
                    )));
                }
            }
        }
        let trivial = b0.iter().all(|z| z.norm() == 0.0);
        Ok(CanonicalVessel {
            params: canonical_params(),
            a,
            b0,
            trivial,
        })
    }

    pub fn rank(&self) -> usize {
        self.a.len()
    }

    pub fn params(&self) -> &VesselParams {
        &self.params
    }

    /// Rows evolve by `B_n(x) = B0_n (cosh(a_n x) I - sinh(a_n x) sigma1)`,
    /// the exact solution of the canonical translation equation.
    pub fn b_matrix(&self, x: f64) -> DMatrix<C64> {
        let s1 = self.params.sigma1;
        let n = self.rank();
        let mut b = DMatrix::zeros(n, 2);
        for i in 0..n {
            let e = Matrix2::identity() * (self.a[i] * x).cosh() - s1 * (self.a[i] * x).sinh();
            for c in 0..2 {
                b[(i, c)] = self.b0[(i, 0)] * e[(0, c)] + self.b0[(i, 1)] * e[(1, c)];
            }
        }
        b
    }

    /// Gram matrix from the bounded Lyapunov equation with the canonical
    /// metric: `X_nm = -(B sigma1 B*)_nm / (a_n + conj(a_m))`.
    pub fn x_matrix(&self, x: f64) -> DMatrix<C64> {
        let n = self.rank();
        let b = self.b_matrix(x);
        let s1 = self.params.sigma1;
        DMatrix::from_fn(n, n, |i, j| {
            let mut product = C64::new(0.0, 0.0);
            for p in 0..2 {
                for q in 0..2 {
                    product += b[(i, p)] * s1[(p, q)] * b[(j, q)].conj();
                }
            }
            -product / (self.a[i] + self.a[j].conj())
        })
    }

    /// `H0(x) = B* X^{-1} B`.
    pub fn h0(&self, x: f64) -> Result<Matrix2<C64>> {
        if self.trivial {
            return Ok(Matrix2::zeros());
        }
        let factor = factor_square(self.x_matrix(x), format!("x={x}"))?;
        let b = self.b_matrix(x);
        let solved = factor.solve(&b);
        Ok(matrix2_from(&(b.adjoint() * solved)))
    }

    /// The linkage matrix `gamma_star(x) = [H0, sigma1]` (since
    /// `sigma2 = I`, `gamma = 0`), always skew-Hermitian.
    pub fn gamma_star(&self, x: f64) -> Result<Matrix2<C64>> {
        let h0 = self.h0(x)?;
        Ok(gamma_star_from(&self.params, &h0))
    }

    /// Max-norm residual of
    /// `a_n X_nm + X_nm conj(a_m) + (B sigma1 B*)_nm` at `x`.
    pub fn lyapunov_residual(&self, x: f64) -> f64 {
        let n = self.rank();
        let b = self.b_matrix(x);
        let xm = self.x_matrix(x);
        let s1 = self.params.sigma1;
        let mut worst = 0.0f64;
        for i in 0..n {
            for j in 0..n {
                let mut product = C64::new(0.0, 0.0);
                for p in 0..2 {
                    for q in 0..2 {
                        product += b[(i, p)] * s1[(p, q)] * b[(j, q)].conj();
                    }
                }
                let entry = self.a[i] * xm[(i, j)] + xm[(i, j)] * self.a[j].conj() + product;
                worst = worst.max(entry.norm());
            }
        }
        worst
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn n1_vessel() -> NlsVessel {
        NlsVessel::new(
            vec![C64::new(1.0, 0.0)],
            DMatrix::from_row_slice(1, 2, &[re(1.0), re(1.0)]),
        )
        .unwrap()
    }

    /// Degenerate symmetric spectrum {1 + i/2, -1 + i/2} with
    /// sigma1-orthogonal rows.
    fn n2_vessel() -> NlsVessel {
        NlsVessel::new(
            vec![C64::new(1.0, 0.5), C64::new(-1.0, 0.5)],
            DMatrix::from_row_slice(
                2,
                2,
                &[re(1.0), C64::new(0.0, 0.5), C64::new(0.0, 0.5), re(1.0)],
            ),
        )
        .unwrap()
    }

    fn n3_vessel() -> NlsVessel {
        NlsVessel::new(
            vec![
                C64::new(0.8, 0.3),
                C64::new(-1.1, 0.6),
                C64::new(0.5, -0.4),
            ],
            DMatrix::from_row_slice(
                3,
                2,
                &[
                    C64::new(1.0, 0.2),
                    C64::new(-0.3, 0.7),
                    C64::new(0.4, -0.5),
                    C64::new(0.9, 0.1),
                    C64::new(-0.6, 0.3),
                    C64::new(0.2, 0.8),
                ],
            ),
        )
        .unwrap()
    }

    #[test]
    fn zero_rows_give_zero_amplitude() {
        let v = NlsVessel::new(
            vec![C64::new(1.0, 0.0)],
            DMatrix::from_element(1, 2, C64::new(0.0, 0.0)),
        )
        .unwrap();
        assert_eq!(v.beta(0.3, 0.2).unwrap(), C64::new(0.0, 0.0));
    }

    #[test]
    fn n1_amplitude_cross_checked_against_direct_solve() {
        // a = 1, B0 = [1, 1]: X(0) = -(1 + 1)/(1 + 1) = -1,
        // H0(0) = B0* (-1)^{-1} B0 = -[[1,1],[1,1]], so beta(0) = -1
        let v = n1_vessel();
        let beta0 = v.beta(0.0, 0.0).unwrap();
        assert_abs_diff_eq!(beta0.re, -1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(beta0.im, 0.0, epsilon = 1e-14);
        let h0 = v.h0(0.0, 0.0).unwrap();
        assert_abs_diff_eq!((h0 + Matrix2::from_element(re(1.0))).norm(), 0.0, epsilon = 1e-14);
    }

    #[test]
    fn generator_validation() {
        // zero real part rejected
        assert!(matches!(
            NlsVessel::new(
                vec![C64::new(0.0, 1.0)],
                DMatrix::from_element(1, 2, re(1.0))
            ),
            Err(VesselError::InvalidInput(_))
        ));
        // degenerate pair with non-orthogonal rows rejected
        assert!(matches!(
            NlsVessel::new(
                vec![C64::new(1.0, 0.5), C64::new(-1.0, 0.5)],
                DMatrix::from_row_slice(2, 2, &[re(1.0), re(0.0), re(1.0), re(0.0)]),
            ),
            Err(VesselError::InvalidInput(_))
        ));
        // same pair with orthogonal rows accepted
        assert!(n2_vessel().rank() == 2);
    }

    #[test]
    fn linkage_skew_structure_on_n3() {
        let v = n3_vessel();
        for &x in &[0.0, 0.4, 0.9] {
            for &t in &[0.0, 0.3] {
                let gs = v.gamma_star(x, t).unwrap();
                assert!(gs[(0, 0)].norm() <= 1e-10);
                assert!(gs[(1, 1)].norm() <= 1e-10);
                assert!((gs[(1, 0)] + gs[(0, 1)].conj()).norm() <= 1e-10);
            }
        }
    }

    #[test]
    fn amplitude_equation_residual_n1() {
        let v = n1_vessel();
        let (x, t) = (0.3, 0.2);
        let coarse = enls_residual(&v, x, t, 1e-2).unwrap();
        let fine = enls_residual(&v, x, t, 5e-3).unwrap();
        assert!(coarse <= 1e-3, "coarse residual {coarse:.3e}");
        let ratio = coarse / fine;
        assert!(
            (3.5..=4.5).contains(&ratio),
            "expected second-order decay, got ratio {ratio:.2}"
        );
    }

    #[test]
    fn amplitude_equation_residual_n2_degenerate() {
        let v = n2_vessel();
        let (x, t) = (0.5, 0.5);
        let coarse = enls_residual(&v, x, t, 1e-2).unwrap();
        let fine = enls_residual(&v, x, t, 5e-3).unwrap();
        assert!(coarse <= 1e-3, "coarse residual {coarse:.3e}");
        let ratio = coarse / fine;
        assert!(
            (3.5..=4.5).contains(&ratio),
            "expected second-order decay, got ratio {ratio:.2}"
        );
    }

    #[test]
    fn lyapunov_permanence_in_x_and_t() {
        for v in [n1_vessel(), n2_vessel(), n3_vessel()] {
            for i in 0..=5 {
                let x = 0.2 * i as f64;
                for &t in &[0.0, 0.4] {
                    assert!(
                        v.lyapunov_residual(x, t) <= 1e-9,
                        "x={x}, t={t}: {}",
                        v.lyapunov_residual(x, t)
                    );
                }
            }
        }
    }

    #[test]
    fn canonical_parameters_are_involutive() {
        let p = canonical_params();
        p.validate().unwrap();
        let square = p.sigma1 * p.sigma1;
        assert_abs_diff_eq!((square - Matrix2::identity()).norm(), 0.0, epsilon = 1e-15);
    }

    fn canonical2() -> CanonicalVessel {
        CanonicalVessel::new(
            vec![C64::new(0.7, 0.2), C64::new(-0.4, 0.9)],
            DMatrix::from_row_slice(
                2,
                2,
                &[
                    re(1.0),
                    C64::new(0.3, -0.2),
                    C64::new(0.0, 0.5),
                    re(1.1),
                ],
            ),
        )
        .unwrap()
    }

    #[test]
    fn canonical_trivial_rows_give_gamma() {
        let v = CanonicalVessel::new(
            vec![C64::new(1.0, 0.0)],
            DMatrix::from_element(1, 2, C64::new(0.0, 0.0)),
        )
        .unwrap();
        assert_eq!(v.gamma_star(0.7).unwrap(), Matrix2::zeros());
    }

    #[test]
    fn canonical_rejects_degenerate_spectrum() {
        assert!(matches!(
            CanonicalVessel::new(
                vec![C64::new(1.0, 0.5), C64::new(-1.0, 0.5)],
                DMatrix::from_element(2, 2, re(1.0)),
            ),
            Err(VesselError::InvalidInput(_))
        ));
    }

    #[test]
    fn canonical_lyapunov_and_translation() {
        let v = canonical2();
        for &x in &[0.0, 0.3, 0.6, 1.0] {
            assert!(v.lyapunov_residual(x) <= 1e-10, "x={x}");
        }
        // d/dx X = B sigma2 B* = B B* (sigma2 = I)
        let h = 1e-4;
        let x = 0.6;
        let fd = (v.x_matrix(x + h) - v.x_matrix(x - h)) / re(2.0 * h);
        let b = v.b_matrix(x);
        let bb = &b * b.adjoint();
        assert!((fd - bb).iter().map(|z| z.norm()).fold(0.0, f64::max) <= 1e-6);
    }

    #[test]
    fn canonical_linkage_skew_hermitian() {
        let v = canonical2();
        for &x in &[0.0, 0.45, 0.9] {
            let gs = v.gamma_star(x).unwrap();
            assert!((gs + gs.adjoint()).norm() <= 1e-10, "x={x}");
        }
    }
}
