//! Spectral measures and the seed kernels `f(x, y)` and `F(x, y)`.
//!
//! A [`SpectralMeasure`] is a finite list of atoms `(lambda_n, b_n)` with
//! strictly positive weights, optionally augmented by an absolutely
//! continuous density that is discretized to quadrature atoms at load time,
//! so every downstream consumer sees a purely atomic measure.

use num_complex::Complex64;
use serde::Deserialize;

use crate::error::{Result, VesselError};
use crate::quad;

/// Tolerance under which two nodes are considered the same atom and merged.
pub const NODE_MERGE_TOL: f64 = 1e-12;
/// Below this magnitude a node is treated as `lambda = 0` in `F(x, y)`.
pub const LAMBDA_ZERO_TOL: f64 = 1e-14;
/// Imaginary dust allowed in nominally real kernel sums.
pub const IMAG_TOL: f64 = 1e-12;

/// One atom of the measure: an energy node and its mass.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Atom {
    pub lambda: f64,
    pub weight: f64,
}

/// A finite atomic spectral measure.
///
/// Weights are strictly positive for publicly constructed measures; signed
/// weights can only enter through the KdV perturbation entry point, which
/// re-validates what such a measure may be used for.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralMeasure {
    atoms: Vec<Atom>,
}

/// `k` with `k^2 = lambda`: the nonnegative real root for `lambda >= 0`,
/// `i * sqrt(|lambda|)` for `lambda < 0`, so that `cos(k x)` evaluates to
/// `cosh(sqrt(|lambda|) x)` on bound states.
pub fn sqrt_node(lambda: f64) -> Complex64 {
    if lambda >= 0.0 {
        Complex64::new(lambda.sqrt(), 0.0)
    } else {
        Complex64::new(0.0, (-lambda).sqrt())
    }
}

fn merge_sorted(mut atoms: Vec<Atom>) -> Vec<Atom> {
    atoms.sort_by(|a, b| a.lambda.total_cmp(&b.lambda));
    let mut merged: Vec<Atom> = Vec::with_capacity(atoms.len());
    for atom in atoms {
        match merged.last_mut() {
            Some(last) if (atom.lambda - last.lambda).abs() <= NODE_MERGE_TOL => {
                last.weight += atom.weight;
            }
            _ => merged.push(atom),
        }
    }
    merged.retain(|a| a.weight != 0.0);
    merged
}

impl SpectralMeasure {
    /// The zero measure.
    pub fn empty() -> Self {
        SpectralMeasure { atoms: Vec::new() }
    }

    /// Build from `(lambda, weight)` pairs. Weights must be strictly
    /// positive; nodes closer than [`NODE_MERGE_TOL`] are merged.
    pub fn new(pairs: &[(f64, f64)]) -> Result<Self> {
        for &(lambda, weight) in pairs {
            if !(weight > 0.0) {
                return Err(VesselError::InvalidMeasure(format!(
                    "weight {weight} at lambda {lambda} is not strictly positive"
                )));
            }
            if !lambda.is_finite() || !weight.is_finite() {
                return Err(VesselError::InvalidMeasure(format!(
                    "non-finite atom ({lambda}, {weight})"
                )));
            }
        }
        Ok(SpectralMeasure {
            atoms: merge_sorted(
                pairs
                    .iter()
                    .map(|&(lambda, weight)| Atom { lambda, weight })
                    .collect(),
            ),
        })
    }

    /// Internal constructor for signed measures (KdV perturbation output).
    pub(crate) fn new_signed(pairs: &[(f64, f64)]) -> Self {
        SpectralMeasure {
            atoms: merge_sorted(
                pairs
                    .iter()
                    .map(|&(lambda, weight)| Atom { lambda, weight })
                    .collect(),
            ),
        }
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn total_mass(&self) -> f64 {
        self.atoms.iter().map(|a| a.weight).sum()
    }

    /// True when every weight is strictly positive (false only for measures
    /// produced by the perturbation entry point).
    pub fn is_positive(&self) -> bool {
        self.atoms.iter().all(|a| a.weight > 0.0)
    }

    /// Parse the JSON measure document:
    /// `{"atoms": [{"lambda": .., "weight": ..}, ..],
    ///   "density": {"kind": "table", "points": [[lambda, value], ..], "quad_order": n}}`.
    ///
    /// The optional density is a piecewise-linear table sampled at increasing
    /// nodes; each segment is discretized with `quad_order` Gauss-Legendre
    /// points, after which the engine sees only atoms.
    pub fn from_json(text: &str) -> Result<Self> {
        let spec: MeasureSpec = serde_json::from_str(text)
            .map_err(|e| VesselError::InvalidMeasure(format!("measure JSON: {e}")))?;
        let mut pairs: Vec<(f64, f64)> =
            spec.atoms.iter().map(|a| (a.lambda, a.weight)).collect();
        for &(lambda, weight) in &pairs {
            if !(weight > 0.0) {
                return Err(VesselError::InvalidMeasure(format!(
                    "key 'atoms': weight {weight} at lambda {lambda} is not strictly positive"
                )));
            }
        }
        if let Some(density) = spec.density {
            pairs.extend(discretize_density(&density)?);
        }
        SpectralMeasure::new(&pairs)
    }
}

/// Pass-through from a raw spectral function's atoms to the effective
/// scattering measure: for purely atomic input the continuous subtraction on
/// the positive half-line carries no atoms, so the atoms transfer unchanged.
pub fn omega_from_rho(rho_atoms: &[(f64, f64)]) -> Result<SpectralMeasure> {
    SpectralMeasure::new(rho_atoms)
}

#[derive(Debug, Deserialize)]
struct MeasureSpec {
    #[serde(default)]
    atoms: Vec<AtomSpec>,
    #[serde(default)]
    density: Option<DensitySpec>,
}

#[derive(Debug, Deserialize)]
struct AtomSpec {
    lambda: f64,
    weight: f64,
}

#[derive(Debug, Deserialize)]
struct DensitySpec {
    kind: String,
    points: Vec<[f64; 2]>,
    quad_order: usize,
}

fn discretize_density(density: &DensitySpec) -> Result<Vec<(f64, f64)>> {
    if density.kind != "table" {
        return Err(VesselError::InvalidMeasure(format!(
            "key 'density.kind': unsupported kind '{}', expected 'table'",
            density.kind
        )));
    }
    if density.points.len() < 2 {
        return Err(VesselError::InvalidMeasure(
            "key 'density.points': need at least two table points".into(),
        ));
    }
    if density.quad_order == 0 {
        return Err(VesselError::InvalidMeasure(
            "key 'density.quad_order': must be at least 1".into(),
        ));
    }
    for pair in density.points.windows(2) {
        if pair[1][0] <= pair[0][0] {
            return Err(VesselError::InvalidMeasure(
                "key 'density.points': lambda values must be strictly increasing".into(),
            ));
        }
    }
    if density.points.iter().any(|p| p[1] < 0.0) {
        return Err(VesselError::InvalidMeasure(
            "key 'density.points': density values must be nonnegative".into(),
        ));
    }
    let (nodes, weights) = quad::gauss_legendre(density.quad_order);
    let mut out = Vec::new();
    for pair in density.points.windows(2) {
        let (l0, v0) = (pair[0][0], pair[0][1]);
        let (l1, v1) = (pair[1][0], pair[1][1]);
        let half = 0.5 * (l1 - l0);
        let mid = 0.5 * (l1 + l0);
        for (&u, &w) in nodes.iter().zip(weights.iter()) {
            let lambda = mid + half * u;
            let s = (lambda - l0) / (l1 - l0);
            let value = v0 + s * (v1 - v0);
            let weight = value * w * half;
            if weight > 0.0 {
                out.push((lambda, weight));
            }
        }
    }
    Ok(out)
}

fn assert_real(z: Complex64) -> f64 {
    assert!(
        z.im.abs() <= IMAG_TOL,
        "kernel sum expected real, imaginary part {:.3e}",
        z.im
    );
    z.re
}

/// The cosine kernel `f(x, y) = sum_n b_n cos(k_n x) cos(k_n y)`.
pub fn kernel_f(m: &SpectralMeasure, x: f64, y: f64) -> f64 {
    let mut acc = Complex64::new(0.0, 0.0);
    for atom in m.atoms() {
        let k = sqrt_node(atom.lambda);
        acc += atom.weight * (k * x).cos() * (k * y).cos();
    }
    assert_real(acc)
}

/// The sine kernel `F(x, y) = sum_n b_n sin(k_n x) sin(k_n y) / lambda_n`,
/// with the analytic limit `b_n x y` for nodes at the origin.
pub fn kernel_big_f(m: &SpectralMeasure, x: f64, y: f64) -> f64 {
    let mut acc = Complex64::new(0.0, 0.0);
    for atom in m.atoms() {
        if atom.lambda.abs() < LAMBDA_ZERO_TOL {
            acc += Complex64::new(atom.weight * x * y, 0.0);
        } else {
            let k = sqrt_node(atom.lambda);
            acc += atom.weight * (k * x).sin() * (k * y).sin() / atom.lambda;
        }
    }
    assert_real(acc)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use nalgebra::DMatrix;
    use proptest::prelude::*;

    #[test]
    fn sqrt_node_branches() {
        assert_eq!(sqrt_node(4.0), Complex64::new(2.0, 0.0));
        assert_eq!(sqrt_node(-1.0), Complex64::new(0.0, 1.0));
        assert_eq!(sqrt_node(0.0), Complex64::new(0.0, 0.0));
    }

    #[test]
    fn omega_passthrough() {
        assert!(omega_from_rho(&[]).unwrap().is_empty());
        let m = omega_from_rho(&[(-1.0, 1.0)]).unwrap();
        assert_eq!(m.atoms(), &[Atom { lambda: -1.0, weight: 1.0 }]);
        let m = omega_from_rho(&[(-1.0, 0.5), (-4.0, 2.0)]).unwrap();
        assert_eq!(m.len(), 2);
        assert_eq!(m.atoms()[0].lambda, -4.0);
        assert_eq!(m.atoms()[1].lambda, -1.0);
    }

    #[test]
    fn rejects_nonpositive_weight() {
        assert!(matches!(
            SpectralMeasure::new(&[(-1.0, 0.0)]),
            Err(VesselError::InvalidMeasure(_))
        ));
        assert!(matches!(
            SpectralMeasure::new(&[(-1.0, -0.5)]),
            Err(VesselError::InvalidMeasure(_))
        ));
    }

    #[test]
    fn merges_close_nodes() {
        let m = SpectralMeasure::new(&[(-1.0, 0.5), (-1.0 + 1e-13, 0.25)]).unwrap();
        assert_eq!(m.len(), 1);
        assert_abs_diff_eq!(m.atoms()[0].weight, 0.75, epsilon = 1e-15);
    }

    #[test]
    fn kernel_f_examples() {
        let empty = SpectralMeasure::empty();
        assert_eq!(kernel_f(&empty, 0.7, 1.3), 0.0);
        let m = SpectralMeasure::new(&[(-1.0, 1.0)]).unwrap();
        assert_abs_diff_eq!(kernel_f(&m, 0.0, 0.0), 1.0, epsilon = 1e-15);
        // cosh(1)^2, frozen to 16 digits
        assert_abs_diff_eq!(kernel_f(&m, 1.0, 1.0), 2.381097845541817, epsilon = 1e-14);
    }

    #[test]
    fn kernel_f_symmetric() {
        let m = SpectralMeasure::new(&[(-2.0, 0.7), (1.5, 0.3), (4.0, 1.1)]).unwrap();
        for &(x, y) in &[(0.3, 1.9), (2.0, 0.1), (1.2, 1.2)] {
            assert_eq!(kernel_f(&m, x, y), kernel_f(&m, y, x));
        }
    }

    #[test]
    fn kernel_big_f_examples() {
        let empty = SpectralMeasure::empty();
        assert_eq!(kernel_big_f(&empty, 1.0, 2.0), 0.0);
        let m = SpectralMeasure::new(&[(-1.0, 1.0)]).unwrap();
        // sin(i)^2 / (-1) = sinh(1)^2
        assert_abs_diff_eq!(
            kernel_big_f(&m, 1.0, 1.0),
            1.381097845541817,
            epsilon = 1e-14
        );
    }

    #[test]
    fn kernel_big_f_zero_node_limit() {
        let m = SpectralMeasure::new(&[(1e-15, 0.8)]).unwrap();
        assert_abs_diff_eq!(kernel_big_f(&m, 1.2, 0.7), 0.8 * 1.2 * 0.7, epsilon = 1e-14);
    }

    #[test]
    fn mixed_derivative_of_big_f_matches_f() {
        let m = SpectralMeasure::new(&[(-1.0, 0.9), (2.25, 0.4)]).unwrap();
        let h = 1e-4;
        for &(x, y) in &[(0.5, 0.8), (1.1, 0.3), (1.7, 1.7)] {
            let dd = (kernel_big_f(&m, x + h, y + h) - kernel_big_f(&m, x + h, y - h)
                - kernel_big_f(&m, x - h, y + h)
                + kernel_big_f(&m, x - h, y - h))
                / (4.0 * h * h);
            assert_abs_diff_eq!(dd, kernel_f(&m, x, y), epsilon = 1e-6);
        }
    }

    #[test]
    fn density_table_discretizes_to_atoms() {
        let text = r#"{
            "atoms": [{"lambda": -1.0, "weight": 0.5}],
            "density": {"kind": "table", "points": [[1.0, 1.0], [2.0, 1.0]], "quad_order": 4}
        }"#;
        let m = SpectralMeasure::from_json(text).unwrap();
        assert_eq!(m.len(), 5);
        // constant density 1 on [1, 2] carries total mass 1
        let density_mass: f64 = m
            .atoms()
            .iter()
            .filter(|a| a.lambda > 0.0)
            .map(|a| a.weight)
            .sum();
        assert_abs_diff_eq!(density_mass, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn json_errors_name_the_key() {
        let bad = r#"{"atoms": [{"lambda": -1.0, "weight": -2.0}]}"#;
        let err = SpectralMeasure::from_json(bad).unwrap_err();
        assert!(err.to_string().contains("atoms"));
        let bad = r#"{"atoms": [], "density": {"kind": "spline", "points": [[0,1],[1,1]], "quad_order": 2}}"#;
        let err = SpectralMeasure::from_json(bad).unwrap_err();
        assert!(err.to_string().contains("density.kind"));
    }

    proptest! {
        /// [f(x_i, x_j)] is a Gram matrix of the vectors sqrt(b_n) cos(k_n x_i),
        /// hence positive semidefinite.
        #[test]
        fn kernel_f_psd(
            lambdas in proptest::collection::vec(-6.0f64..4.0, 1..4),
            xs in proptest::collection::vec(0.0f64..2.5, 2..5),
        ) {
            let pairs: Vec<(f64, f64)> =
                lambdas.iter().enumerate().map(|(i, &l)| (l, 0.3 + 0.2 * i as f64)).collect();
            let m = SpectralMeasure::new(&pairs).unwrap();
            let n = xs.len();
            let g = DMatrix::from_fn(n, n, |i, j| kernel_f(&m, xs[i], xs[j]));
            let eig = g.symmetric_eigen();
            let scale = eig.eigenvalues.iter().cloned().fold(1.0f64, f64::max);
            prop_assert!(eig.eigenvalues.iter().all(|&e| e >= -1e-10 * scale));
        }
    }
}
