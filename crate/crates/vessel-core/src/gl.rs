//! Independent integral-equation pipeline recovering the kernel `K(x, y)` and
//! the potential directly from a spectral measure, with no vessel algebra
//! involved: the equation `f(x,y) + K(x,y) + integral_0^x K(x,t) f(t,y) dt = 0`
//! is discretized by Nystroem collocation on composite Gauss-Legendre panels.
//!
//! This is the ground-truth oracle: both pipelines reconstruct the same
//! potential, and the acceptance suite compares them pointwise.

use nalgebra::{DMatrix, DVector};

use crate::error::{Result, VesselError};
use crate::measure::{kernel_f, sqrt_node, SpectralMeasure};
use crate::quad::panel_rule;

/// Minimum singular value demanded of the symmetrized Nystroem operator.
pub const WELL_POSED_SIGMA_MIN: f64 = 0.99;

/// One solved collocation row: the values `k_j ~ K(x, t_j)` on the
/// quadrature nodes `t_j` of `[0, x]`.
#[derive(Debug, Clone)]
pub struct GlRow {
    pub x: f64,
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
    pub k: Vec<f64>,
    /// Smallest singular value of `I + sqrt(W) F sqrt(W)`; for a positive
    /// measure this operator is `I` plus a positive-semidefinite matrix, so
    /// the value is at least 1 up to rounding.
    pub sigma_min: f64,
}

impl GlRow {
    /// Nystroem continuation of the solved row to an arbitrary second
    /// argument: `K(x, y) = -f(x, y) - sum_j k_j f(t_j, y) w_j`.
    pub fn extend(&self, m: &SpectralMeasure, y: f64) -> f64 {
        let correction: f64 = self
            .k
            .iter()
            .zip(self.nodes.iter())
            .zip(self.weights.iter())
            .map(|((&k, &t), &w)| k * kernel_f(m, t, y) * w)
            .sum();
        -kernel_f(m, self.x, y) - correction
    }

    /// The diagonal value `K(x, x)`.
    pub fn diagonal(&self, m: &SpectralMeasure) -> f64 {
        self.extend(m, self.x)
    }

    /// Transformation-operator representation of the spectral solution:
    /// `phi(x; mu) = cos(sqrt(mu) x) + sum_j k_j cos(sqrt(mu) t_j) w_j`.
    pub fn phi(&self, mu: f64) -> f64 {
        let root = sqrt_node(mu);
        let integral: f64 = self
            .k
            .iter()
            .zip(self.nodes.iter())
            .zip(self.weights.iter())
            .map(|((&k, &t), &w)| k * (root * t).cos().re * w)
            .sum();
        (root * self.x).cos().re + integral
    }
}

/// Solve the collocation system `(I + F W) k = -f(x, .)` on `n_points`
/// composite Gauss-Legendre nodes over `[0, x]`.
///
/// Well-posedness is certified on the symmetrized operator
/// `I + sqrt(W) F sqrt(W)` (similar to `I + F W`, and Hermitian), whose
/// smallest singular value must stay above [`WELL_POSED_SIGMA_MIN`].
pub fn solve_row(m: &SpectralMeasure, x: f64, n_points: usize) -> Result<GlRow> {
    if x < 0.0 {
        return Err(VesselError::InvalidInput(format!(
            "kernel row requires x >= 0, got {x}"
        )));
    }
    if n_points == 0 {
        return Err(VesselError::InvalidInput(
            "kernel row requires at least one quadrature point".into(),
        ));
    }
    let (nodes, weights) = panel_rule(x, n_points);
    let n = nodes.len();
    let f_matrix = DMatrix::from_fn(n, n, |i, j| kernel_f(m, nodes[i], nodes[j]));

    let sqrt_w: Vec<f64> = weights.iter().map(|&w| w.max(0.0).sqrt()).collect();
    let symmetrized =
        DMatrix::identity(n, n) + DMatrix::from_fn(n, n, |i, j| sqrt_w[i] * f_matrix[(i, j)] * sqrt_w[j]);
    let sigma_min = symmetrized
        .svd(false, false)
        .singular_values
        .iter()
        .fold(f64::INFINITY, |acc, &s| acc.min(s));
    if sigma_min < WELL_POSED_SIGMA_MIN {
        return Err(VesselError::IllConditioned { sigma_min });
    }

    let mut system = f_matrix;
    for j in 0..n {
        for i in 0..n {
            system[(i, j)] *= weights[j];
        }
        system[(j, j)] += 1.0;
    }
    let rhs = DVector::from_fn(n, |i, _| -kernel_f(m, x, nodes[i]));
    let k = system
        .lu()
        .solve(&rhs)
        .expect("collocation system invertible after conditioning check");

    Ok(GlRow {
        x,
        nodes,
        weights,
        k: k.iter().copied().collect(),
        sigma_min,
    })
}

/// Potential at one point from the kernel diagonal: `q(x) = 2 d/dx K(x, x)`,
/// by central differences over two solved rows.
pub fn q_at(m: &SpectralMeasure, x: f64, n_points: usize, h: f64) -> Result<f64> {
    if !(h > 0.0) {
        return Err(VesselError::InvalidInput(format!(
            "derivative step must be positive, got {h}"
        )));
    }
    if x - h < 0.0 {
        return Err(VesselError::InvalidInput(format!(
            "potential from kernel requires x - h >= 0, got x={x}, h={h}"
        )));
    }
    let upper = solve_row(m, x + h, n_points)?.diagonal(m);
    let lower = solve_row(m, x - h, n_points)?.diagonal(m);
    Ok((upper - lower) / h)
}

/// Potential on a uniform ascending grid: central differences of the kernel
/// diagonal in the interior, one-sided second-order stencils at both ends.
pub fn q_on_grid(m: &SpectralMeasure, xs: &[f64], n_points: usize) -> Result<Vec<f64>> {
    if xs.len() < 3 {
        return Err(VesselError::InvalidInput(
            "potential grid needs at least 3 points".into(),
        ));
    }
    let h = xs[1] - xs[0];
    if !(h > 0.0) {
        return Err(VesselError::InvalidInput(
            "potential grid must be strictly ascending".into(),
        ));
    }
    for pair in xs.windows(2) {
        if (pair[1] - pair[0] - h).abs() > 1e-9 * (1.0 + h.abs()) {
            return Err(VesselError::InvalidInput(
                "potential grid must be uniform".into(),
            ));
        }
    }
    let diag: Vec<f64> = xs
        .iter()
        .map(|&x| solve_row(m, x, n_points).map(|row| row.diagonal(m)))
        .collect::<Result<_>>()?;
    let n = xs.len();
    let mut q = vec![0.0; n];
    q[0] = (-3.0 * diag[0] + 4.0 * diag[1] - diag[2]) / h;
    q[n - 1] = (3.0 * diag[n - 1] - 4.0 * diag[n - 2] + diag[n - 3]) / h;
    for i in 1..n - 1 {
        q[i] = (diag[i + 1] - diag[i - 1]) / h;
    }
    Ok(q)
}

/// Residual of the inverse representation
/// `cos(sqrt(mu) x) = phi(x) + integral_0^x K1(x, t) phi(t) dt`,
/// where `K1(x, t) = -K(t, x)` is the Volterra resolvent of `K` (the negative
/// of the continued kernel with its arguments exchanged) and every `phi` is
/// produced by the forward representation.
pub fn inverse_rep_residual(m: &SpectralMeasure, x: f64, mu: f64, n_points: usize) -> Result<f64> {
    let row = solve_row(m, x, n_points)?;
    let phi_x = row.phi(mu);
    let (nodes, weights) = panel_rule(x, n_points);
    let mut integral = 0.0;
    for (&t, &w) in nodes.iter().zip(weights.iter()) {
        let inner = solve_row(m, t, n_points)?;
        let k1 = -inner.extend(m, x);
        integral += k1 * inner.phi(mu) * w;
    }
    let target = (sqrt_node(mu) * x).cos().re;
    Ok((phi_x + integral - target).abs())
}

/// A triangular table of solved rows on a uniform outer grid.
#[derive(Debug, Clone)]
pub struct KernelGrid {
    pub x_max: f64,
    pub n_points: usize,
    pub rows: Vec<GlRow>,
}

impl KernelGrid {
    /// Solve rows at `n_outer` uniform points `x_i = i * x_max / n_outer`,
    /// `i = 1..=n_outer`.
    pub fn build(
        m: &SpectralMeasure,
        x_max: f64,
        n_outer: usize,
        n_points: usize,
    ) -> Result<Self> {
        if !(x_max > 0.0) || n_outer == 0 {
            return Err(VesselError::InvalidInput(
                "kernel grid requires x_max > 0 and at least one outer point".into(),
            ));
        }
        let rows = (1..=n_outer)
            .map(|i| solve_row(m, x_max * i as f64 / n_outer as f64, n_points))
            .collect::<Result<_>>()?;
        Ok(KernelGrid {
            x_max,
            n_points,
            rows,
        })
    }

    /// Refine by halving the panel width (doubling the per-row point budget).
    pub fn refine(&self, m: &SpectralMeasure) -> Result<Self> {
        KernelGrid::build(m, self.x_max, self.rows.len(), 2 * self.n_points)
    }
}
