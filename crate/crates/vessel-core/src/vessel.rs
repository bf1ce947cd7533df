//! The finite-rank vessel engine.
//!
//! A rank-`N` vessel is built from a positive atomic measure: the generator
//! is multiplication by `i*lambda_n`, the row functions are
//! `B_n(x) = [cos(k_n x), -i k_n sin(k_n x)]` with `k_n = sqrt_node(lambda_n)`,
//! and the Gram matrix is carried in the symmetrized representation
//! `X(x) = I + [sqrt(b_n b_m) * integral_0^x cos(k_n y) cos(conj(k_m) y) dy]`,
//! which is Hermitian in the standard inner product and leaves the tau
//! function and all sandwiched products `C* X^{-1} C` unchanged.
//!
//! All integrals are evaluated in closed form with series fallbacks at
//! degenerate frequencies, so the algebraic identities (Lyapunov, symmetry,
//! translation/derivative equations) hold to rounding accuracy on the whole
//! line, including the pre-vessel region `x < 0`.

use nalgebra::{DMatrix, DVector, Dyn, Matrix2, Vector2, LU};
use num_complex::Complex64;

use crate::error::{Result, VesselError};
use crate::measure::{sqrt_node, SpectralMeasure};

/// Below this magnitude a trigonometric frequency is expanded in series.
pub const DEGENERATE_FREQ_TOL: f64 = 1e-10;
/// Minimum allowed distance from `lambda` to the generator spectrum.
pub const SPECTRUM_PROXIMITY_TOL: f64 = 1e-8;
/// Relative pivot threshold declaring the Gram matrix singular.
pub const SINGULAR_PIVOT_TOL: f64 = 1e-12;

type C64 = Complex64;

fn re(v: f64) -> C64 {
    C64::new(v, 0.0)
}

const I_UNIT: C64 = C64::new(0.0, 1.0);

/// `integral` of `cos(a y + phi)` over `[0, x]` shifted so that it reads
/// `(sin(a x + phi) - sin(phi)) / a`, with a second-order series fallback for
/// `|a| < DEGENERATE_FREQ_TOL`.
pub(crate) fn cos_int(a: C64, phi: C64, x: f64) -> C64 {
    if a.norm() < DEGENERATE_FREQ_TOL {
        re(x) * phi.cos() - a * re(0.5 * x * x) * phi.sin() - a * a * re(x * x * x / 6.0) * phi.cos()
    } else {
        ((a * x + phi).sin() - phi.sin()) / a
    }
}

/// `sin(a t) / a` with the series fallback `t (1 - (a t)^2 / 6)`.
pub(crate) fn sin_int(a: C64, t: f64) -> C64 {
    if a.norm() < DEGENERATE_FREQ_TOL {
        re(t) * (re(1.0) - a * a * re(t * t / 6.0))
    } else {
        (a * t).sin() / a
    }
}

/// The constant parameter triple selecting an integrable hierarchy.
#[derive(Debug, Clone, PartialEq)]
pub struct VesselParams {
    pub sigma1: Matrix2<C64>,
    pub sigma2: Matrix2<C64>,
    pub gamma: Matrix2<C64>,
}

impl VesselParams {
    /// Sturm-Liouville parameters:
    /// `sigma1 = [[0,1],[1,0]]`, `sigma2 = [[1,0],[0,0]]`, `gamma = [[0,0],[0,i]]`.
    pub fn sturm_liouville() -> Self {
        let z = C64::new(0.0, 0.0);
        let one = re(1.0);
        VesselParams {
            sigma1: Matrix2::new(z, one, one, z),
            sigma2: Matrix2::new(one, z, z, z),
            gamma: Matrix2::new(z, z, z, I_UNIT),
        }
    }

    /// Check the defining structure: `sigma1` Hermitian invertible,
    /// `sigma2` Hermitian, `gamma` skew-Hermitian.
    pub fn validate(&self) -> Result<()> {
        let herm = |m: &Matrix2<C64>| (m - m.adjoint()).norm() <= 1e-12;
        if !herm(&self.sigma1) {
            return Err(VesselError::InvalidInput("sigma1 is not Hermitian".into()));
        }
        if self.sigma1.determinant().norm() < 1e-12 {
            return Err(VesselError::InvalidInput("sigma1 is not invertible".into()));
        }
        if !herm(&self.sigma2) {
            return Err(VesselError::InvalidInput("sigma2 is not Hermitian".into()));
        }
        if (self.gamma + self.gamma.adjoint()).norm() > 1e-12 {
            return Err(VesselError::InvalidInput(
                "gamma is not skew-Hermitian".into(),
            ));
        }
        Ok(())
    }
}

/// The linkage formula `gamma + sigma2 H0 sigma1 - sigma1 H0 sigma2`,
/// shared by every parameter pack.
pub fn gamma_star_from(params: &VesselParams, h0: &Matrix2<C64>) -> Matrix2<C64> {
    params.gamma + params.sigma2 * h0 * params.sigma1 - params.sigma1 * h0 * params.sigma2
}

/// A rank-`N` vessel over the Sturm-Liouville parameter triple.
#[derive(Debug, Clone)]
pub struct FiniteVessel {
    params: VesselParams,
    lambdas: Vec<f64>,
    nodes: Vec<C64>,
    weights: Vec<f64>,
    sqrt_w: Vec<f64>,
}

/// A factored Gram-matrix snapshot at one evaluation point.
pub struct GramFactor {
    location: String,
    matrix: DMatrix<C64>,
    lu: Option<LU<C64, Dyn, Dyn>>,
}

/// LU-factor a square complex matrix, rejecting it as singular when the
/// smallest pivot magnitude falls below `SINGULAR_PIVOT_TOL` relative to the
/// largest entry. Shared by every parameter pack.
pub(crate) fn factor_square(matrix: DMatrix<C64>, location: String) -> Result<GramFactor> {
    let n = matrix.nrows();
    if n == 0 {
        return Ok(GramFactor {
            location,
            matrix,
            lu: None,
        });
    }
    let scale = matrix.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let lu = matrix.clone().lu();
    let u = lu.u();
    let min_pivot = (0..n).map(|i| u[(i, i)].norm()).fold(f64::INFINITY, f64::min);
    if min_pivot < SINGULAR_PIVOT_TOL * (1.0 + scale) {
        return Err(VesselError::SingularGram {
            location,
            det: lu.determinant().norm(),
        });
    }
    Ok(GramFactor {
        location,
        matrix,
        lu: Some(lu),
    })
}

impl GramFactor {
    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.matrix
    }

    pub fn det(&self) -> C64 {
        match &self.lu {
            Some(lu) => lu.determinant(),
            None => re(1.0),
        }
    }

    pub fn solve(&self, rhs: &DMatrix<C64>) -> DMatrix<C64> {
        match &self.lu {
            Some(lu) => lu
                .solve(rhs)
                .unwrap_or_else(|| panic!("solve after pivot check at {}", self.location)),
            None => rhs.clone(),
        }
    }

    pub fn solve_vec(&self, rhs: &DVector<C64>) -> DVector<C64> {
        match &self.lu {
            Some(lu) => lu
                .solve(rhs)
                .unwrap_or_else(|| panic!("solve after pivot check at {}", self.location)),
            None => rhs.clone(),
        }
    }
}

impl FiniteVessel {
    /// Build the vessel for a strictly positive measure.
    pub fn from_measure(m: &SpectralMeasure) -> Result<Self> {
        if !m.is_positive() {
            return Err(VesselError::InvalidMeasure(
                "vessel construction requires strictly positive weights".into(),
            ));
        }
        let lambdas: Vec<f64> = m.atoms().iter().map(|a| a.lambda).collect();
        let weights: Vec<f64> = m.atoms().iter().map(|a| a.weight).collect();
        Ok(FiniteVessel {
            params: VesselParams::sturm_liouville(),
            nodes: lambdas.iter().map(|&l| sqrt_node(l)).collect(),
            sqrt_w: weights.iter().map(|&w| w.sqrt()).collect(),
            lambdas,
            weights,
        })
    }

    pub fn rank(&self) -> usize {
        self.lambdas.len()
    }

    pub fn params(&self) -> &VesselParams {
        &self.params
    }

    pub fn lambdas(&self) -> &[f64] {
        &self.lambdas
    }

    pub fn nodes(&self) -> &[C64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    fn check_index(&self, n: usize) -> Result<()> {
        if n >= self.rank() {
            Err(VesselError::IndexOutOfRange {
                index: n,
                len: self.rank(),
            })
        } else {
            Ok(())
        }
    }

    /// Row `n` of `B(x)`: `[cos(k_n x), -i k_n sin(k_n x)]`.
    pub fn b_row(&self, n: usize, x: f64) -> Result<Vector2<C64>> {
        self.check_index(n)?;
        Ok(self.b_row_xt(n, x, 0.0))
    }

    /// Row `n` of the time-evolved `B(x, t)` with phase `theta_n = k_n^3 t`:
    /// `[cos(k_n x - theta_n), -i k_n sin(k_n x - theta_n)]`.
    pub(crate) fn b_row_xt(&self, n: usize, x: f64, t: f64) -> Vector2<C64> {
        let k = self.nodes[n];
        let arg = k * x - k * k * k * t;
        Vector2::new(arg.cos(), -I_UNIT * k * arg.sin())
    }

    /// The `N x 2` matrix whose rows are `sqrt(b_n) * B_n(x)`.
    pub fn c_matrix(&self, x: f64) -> DMatrix<C64> {
        self.c_matrix_xt(x, 0.0)
    }

    pub(crate) fn c_matrix_xt(&self, x: f64, t: f64) -> DMatrix<C64> {
        let n = self.rank();
        let mut c = DMatrix::zeros(n, 2);
        for i in 0..n {
            let row = self.b_row_xt(i, x, t);
            c[(i, 0)] = row[0] * self.sqrt_w[i];
            c[(i, 1)] = row[1] * self.sqrt_w[i];
        }
        c
    }

    /// First column of `c_matrix`: `sqrt(b_n) cos(k_n x)`.
    pub fn c1_vector(&self, x: f64) -> DVector<C64> {
        DVector::from_fn(self.rank(), |i, _| {
            (self.nodes[i] * x).cos() * self.sqrt_w[i]
        })
    }

    /// `integral_0^x cos(k_n y) cos(k_m y) dy` in closed form with series
    /// fallbacks at degenerate frequencies. Valid for all real `x`.
    pub fn gram_entry(&self, n: usize, m: usize, x: f64) -> Result<C64> {
        self.check_index(n)?;
        self.check_index(m)?;
        let (kn, km) = (self.nodes[n], self.nodes[m]);
        let zero = C64::new(0.0, 0.0);
        Ok((cos_int(kn - km, zero, x) + cos_int(kn + km, zero, x)) * 0.5)
    }

    /// The symmetrized Gram matrix
    /// `X(x) = I + [sqrt(b_n b_m) * integral_0^x cos(k_n y) cos(conj(k_m) y) dy]`.
    pub fn x_matrix(&self, x: f64) -> DMatrix<C64> {
        self.x_matrix_xt(x, 0.0)
    }

    /// Time-evolved Gram matrix. The `(n, m)` entry augments the identity by
    /// `sqrt(b_n b_m)` times the closed-form value of
    /// `integral_0^x B-row products dy + integral_0^t boundary products ds`,
    /// where both integrals are products-to-sums of trigonometric terms in the
    /// frequencies `k_n ± conj(k_m)` and `k_n^3 ± conj(k_m)^3`. At `t = 0` the
    /// time part contributes exactly zero, so the static matrix is recovered
    /// bit for bit.
    pub(crate) fn x_matrix_xt(&self, x: f64, t: f64) -> DMatrix<C64> {
        let n = self.rank();
        DMatrix::from_fn(n, n, |i, j| {
            let ki = self.nodes[i];
            let kjc = self.nodes[j].conj();
            let wi = ki * ki * ki;
            let wjc = kjc * kjc * kjc;
            let theta_i = wi * t;
            let theta_jc = wjc * t;
            // spatial part: 1/2 [ cos_int(ki - kjc, -(thi - thj)) + cos_int(ki + kjc, -(thi + thj)) ]
            let g = (cos_int(ki - kjc, -(theta_i - theta_jc), x)
                + cos_int(ki + kjc, -(theta_i + theta_jc), x))
                * 0.5;
            // time-boundary part at x = 0
            let iuu = (sin_int(wi - wjc, t) + sin_int(wi + wjc, t)) * 0.5;
            let iww = ki * kjc * (sin_int(wi - wjc, t) - sin_int(wi + wjc, t)) * 0.5;
            let time_part = -(re(self.lambdas[i] + self.lambdas[j]) * iuu + iww);
            let diag = if i == j { re(1.0) } else { re(0.0) };
            diag + re(self.sqrt_w[i] * self.sqrt_w[j]) * (g + time_part)
        })
    }

    /// Assemble and factor the Gram matrix at `x`, reporting a singular
    /// factorization (a tau-function zero crossing) as an error.
    pub fn factor(&self, x: f64) -> Result<GramFactor> {
        self.factor_xt(x, None)
    }

    pub(crate) fn factor_xt(&self, x: f64, t: Option<f64>) -> Result<GramFactor> {
        let location = match t {
            Some(t) => format!("x={x}, t={t}"),
            None => format!("x={x}"),
        };
        let matrix = match t {
            Some(t) => self.x_matrix_xt(x, t),
            None => self.x_matrix(x),
        };
        factor_square(matrix, location)
    }

    /// `tau(x) = det X(x)` (the initial Gram operator is the identity, and the
    /// symmetrized determinant is similarity-invariant).
    pub fn tau(&self, x: f64) -> f64 {
        self.tau_xt(x, 0.0)
    }

    pub(crate) fn tau_xt(&self, x: f64, t: f64) -> f64 {
        if self.rank() == 0 {
            return 1.0;
        }
        if x == 0.0 && t == 0.0 {
            return 1.0;
        }
        let det = self.x_matrix_xt(x, t).lu().determinant();
        assert!(
            det.im.abs() <= 1e-9 * (1.0 + det.re.abs()),
            "tau expected real, got imaginary part {:.3e}",
            det.im
        );
        det.re
    }

    /// `H0(x) = C*(x) X(x)^{-1} C(x)`, the 2x2 sandwiched inverse.
    pub fn h0(&self, x: f64) -> Result<Matrix2<C64>> {
        let factor = self.factor(x)?;
        Ok(self.h0_at(&factor, x, 0.0))
    }

    pub(crate) fn h0_at(&self, factor: &GramFactor, x: f64, t: f64) -> Matrix2<C64> {
        if self.rank() == 0 {
            return Matrix2::zeros();
        }
        let c = self.c_matrix_xt(x, t);
        let solved = factor.solve(&c);
        let h = c.adjoint() * solved;
        Matrix2::new(h[(0, 0)], h[(0, 1)], h[(1, 0)], h[(1, 1)])
    }

    /// The linkage matrix `gamma_star(x) = gamma + sigma2 H0 sigma1 - sigma1 H0 sigma2`.
    ///
    /// For the Sturm-Liouville parameters the result has the exact structure
    /// `[[H0_12 - H0_21, H0_11], [-H0_11, i]]`, which is asserted.
    pub fn gamma_star(&self, x: f64) -> Result<Matrix2<C64>> {
        let h0 = self.h0(x)?;
        let gs = gamma_star_from(&self.params, &h0);
        let scale = 1.0 + gs.norm();
        assert!(
            (gs[(0, 1)] - h0[(0, 0)]).norm() <= 1e-10 * scale
                && (gs[(1, 0)] + h0[(0, 0)]).norm() <= 1e-10 * scale
                && (gs[(1, 1)] - I_UNIT).norm() <= 1e-10 * scale,
            "linkage structure violated at x={x}"
        );
        Ok(gs)
    }

    fn spectrum_distance(&self, lambda: C64) -> f64 {
        self.lambdas
            .iter()
            .map(|&l| (lambda - C64::new(0.0, l)).norm())
            .fold(f64::INFINITY, f64::min)
    }

    /// The transfer function
    /// `S(lambda, x) = I - C*(x) X(x)^{-1} diag(1/(lambda - i lambda_n)) C(x) sigma1`.
    pub fn transfer(&self, lambda: C64, x: f64) -> Result<Matrix2<C64>> {
        if self.rank() == 0 {
            return Ok(Matrix2::identity());
        }
        let distance = self.spectrum_distance(lambda);
        if distance < SPECTRUM_PROXIMITY_TOL {
            return Err(VesselError::SpectrumProximity { distance });
        }
        let factor = self.factor(x)?;
        let c = self.c_matrix_xt(x, 0.0);
        let mut dc = c.clone();
        for i in 0..self.rank() {
            let r = re(1.0) / (lambda - C64::new(0.0, self.lambdas[i]));
            dc[(i, 0)] *= r;
            dc[(i, 1)] *= r;
        }
        let solved = factor.solve(&dc);
        let sandwich = c.adjoint() * solved;
        let sandwich2 = Matrix2::new(
            sandwich[(0, 0)],
            sandwich[(0, 1)],
            sandwich[(1, 0)],
            sandwich[(1, 1)],
        );
        Ok(Matrix2::identity() - sandwich2 * self.params.sigma1)
    }

    /// Max-norm of the bounded-form Lyapunov residual
    /// `i (lambda_n - lambda_m) X_nm + (C sigma1 C*)_nm`, which vanishes
    /// identically for an exact vessel at every real `x`.
    pub fn lyapunov_residual(&self, x: f64) -> f64 {
        self.lyapunov_residual_xt(x, 0.0)
    }

    pub(crate) fn lyapunov_residual_xt(&self, x: f64, t: f64) -> f64 {
        let n = self.rank();
        if n == 0 {
            return 0.0;
        }
        let xm = self.x_matrix_xt(x, t);
        let c = self.c_matrix_xt(x, t);
        let p = &c * self.params.sigma1 * c.adjoint();
        let mut worst = 0.0f64;
        for i in 0..n {
            for j in 0..n {
                let entry = I_UNIT * (self.lambdas[i] - self.lambdas[j]) * xm[(i, j)] + p[(i, j)];
                worst = worst.max(entry.norm());
            }
        }
        worst
    }

    /// Max-norm of the resolvent-form Lyapunov residual
    /// `X R*(-conj(lambda)) + R(lambda) X - R(lambda) C sigma1 C* R*(-conj(lambda))`,
    /// whose entries equal the bounded-form entries divided by
    /// `(lambda - i lambda_n)(lambda - i lambda_m)`.
    pub fn lyapunov_resolvent_residual(&self, lambda: C64, x: f64) -> Result<f64> {
        let n = self.rank();
        if n == 0 {
            return Ok(0.0);
        }
        let distance = self.spectrum_distance(lambda);
        if distance < SPECTRUM_PROXIMITY_TOL {
            return Err(VesselError::SpectrumProximity { distance });
        }
        let xm = self.x_matrix(x);
        let c = self.c_matrix_xt(x, 0.0);
        let p = &c * self.params.sigma1 * c.adjoint();
        let r: Vec<C64> = self
            .lambdas
            .iter()
            .map(|&l| re(1.0) / (lambda - C64::new(0.0, l)))
            .collect();
        let mut worst = 0.0f64;
        for i in 0..n {
            for j in 0..n {
                let s_j = -r[j];
                let entry = xm[(i, j)] * s_j + r[i] * xm[(i, j)] - r[i] * p[(i, j)] * s_j;
                worst = worst.max(entry.norm());
            }
        }
        Ok(worst)
    }

    /// Max-norm of `S*(-conj(lambda), x) sigma1 S(lambda, x) - sigma1`.
    pub fn symmetry_residual(&self, lambda: C64, x: f64) -> Result<f64> {
        let s1 = self.transfer(lambda, x)?;
        let s2 = self.transfer(-lambda.conj(), x)?;
        let residual = s2.adjoint() * self.params.sigma1 * s1 - self.params.sigma1;
        Ok(residual.iter().map(|z| z.norm()).fold(0.0, f64::max))
    }
}
