//! Subcommand implementations: CSV tables, the JSON verification report,
//! and the shared pass/fail gating logic.
//!
//! Every table is assembled in memory in a fixed order and written in one
//! shot, so a rerun with the same configuration is byte-identical.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::PathBuf;

use anyhow::Context;
use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::Serialize;
use vessel_core::kdv::{self, EvolvedState};
use vessel_core::nls::{self, NlsVessel};
use vessel_core::sample;
use vessel_core::{gl, sl};
use vessel_core::{FiniteVessel, SpectralMeasure};

use crate::config::{self, ConfigError, RunConfig};
use crate::{GridArgs, VerifyArgs};

type C64 = Complex64;

const POTENTIAL_FD_STEP: f64 = 1e-3;
const POTENTIAL_TOL: f64 = 1e-5;
const POTENTIAL_QUAD_POINTS: usize = 64;
const EVOLVE_FD_STEP: f64 = 1e-2;
const EVOLVE_TOL: f64 = 1e-3;
const GL_COMPARE_TOL: f64 = 1e-7;
const GL_COMPARE_QUAD_POINTS: usize = 64;

/// The flow residual is measured with plain central stencils; within a
/// couple of steps of the quarter-plane edge those stencils sample x < 0 or
/// t < 0, where the continued solution is still defined but its derivatives
/// are no longer small, and the default step cannot hold the bound there.
/// The pass gate therefore scores only points with both coordinates at
/// least this large; every row still reports its residual.
const EVOLVE_GATE_MARGIN: f64 = 0.2;

/// Below this floor both halving measurements sit at rounding level and an
/// order-of-convergence ratio is meaningless; such a pair counts as passing.
const RATIO_FLOOR: f64 = 1e-13;

// ---------------------------------------------------------------------------
// Output plumbing
// ---------------------------------------------------------------------------

/// RFC-4180 style CSV accumulator: comma separators, CRLF line endings, one
/// header row, numbers in 17-significant-digit scientific form so the table
/// parses losslessly and reruns are byte-identical.
struct Csv {
    buf: String,
}

impl Csv {
    fn new(header: &[&str]) -> Self {
        let mut buf = String::new();
        buf.push_str(&header.join(","));
        buf.push_str("\r\n");
        Csv { buf }
    }

    fn row(&mut self, values: &[f64]) {
        for (i, v) in values.iter().enumerate() {
            if i > 0 {
                self.buf.push(',');
            }
            self.buf.push_str(&format!("{v:.16e}"));
        }
        self.buf.push_str("\r\n");
    }
}

/// Write a finished document to `--out` or standard output.
fn emit(text: &str, out: &Option<PathBuf>) -> anyhow::Result<()> {
    match out {
        Some(path) => {
            fs::write(path, text).with_context(|| format!("writing {}", path.display()))?
        }
        None => std::io::stdout().lock().write_all(text.as_bytes())?,
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Shared setup
// ---------------------------------------------------------------------------

struct Run {
    cfg: RunConfig,
    measure: SpectralMeasure,
    vessel: FiniteVessel,
}

fn load_run(args: &GridArgs, invoked: &str) -> anyhow::Result<Run> {
    let (cfg, base) = config::load(&args.config)?;
    config::check_command_tag(&cfg, invoked)?;
    let source = cfg.measure.as_ref().ok_or_else(|| {
        ConfigError("measure: missing (provide a path or an inline object)".into())
    })?;
    let measure = config::resolve_measure(source, &base)?;
    let vessel = FiniteVessel::from_measure(&measure)?;
    Ok(Run {
        cfg,
        measure,
        vessel,
    })
}

// ---------------------------------------------------------------------------
// potential
// ---------------------------------------------------------------------------

pub fn cmd_potential(args: &GridArgs) -> anyhow::Result<i32> {
    let run = load_run(args, "potential")?;
    let grid = config::require_range("x_range", &run.cfg.x_range)?;
    let fd_step =
        config::validate_fd_step(args.fd_step.or(run.cfg.fd_step).unwrap_or(POTENTIAL_FD_STEP))?;
    let n_points = config::validate_quad_points(
        args.quad_points
            .or(run.cfg.quad_points)
            .unwrap_or(POTENTIAL_QUAD_POINTS),
    )?;
    let tol = config::validate_tol(args.tol.or(run.cfg.tol).unwrap_or(POTENTIAL_TOL))?;
    if grid.min < fd_step {
        return Err(ConfigError(format!(
            "x_range: the integral-equation reconstruction differentiates on \
             [x - fd_step, x + fd_step] and needs x - fd_step >= 0 \
             (got min = {}, fd_step = {})",
            grid.min, fd_step
        ))
        .into());
    }

    let mut csv = Csv::new(&["x", "q_vessel", "q_gl", "abs_diff"]);
    let mut max_diff: f64 = 0.0;
    for x in grid.points() {
        let q_vessel = sl::potential(&run.vessel, x)?;
        let q_gl = gl::q_at(&run.measure, x, n_points, fd_step)?;
        let diff = (q_vessel - q_gl).abs();
        max_diff = max_diff.max(diff);
        csv.row(&[x, q_vessel, q_gl, diff]);
    }
    emit(&csv.buf, &args.out)?;

    let pass = max_diff <= tol;
    eprintln!(
        "potential: {} points, max |q_vessel - q_gl| = {max_diff:.3e} (tol {tol:.1e}) -> {}",
        grid.steps,
        if pass { "pass" } else { "FAIL" }
    );
    Ok(if pass { 0 } else { 1 })
}

// ---------------------------------------------------------------------------
// evolve
// ---------------------------------------------------------------------------

pub fn cmd_evolve(args: &GridArgs) -> anyhow::Result<i32> {
    let run = load_run(args, "evolve")?;
    let grid_x = config::require_range("x_range", &run.cfg.x_range)?;
    let grid_t = config::require_range("t_range", &run.cfg.t_range)?;
    let fd_step =
        config::validate_fd_step(args.fd_step.or(run.cfg.fd_step).unwrap_or(EVOLVE_FD_STEP))?;
    let tol = config::validate_tol(args.tol.or(run.cfg.tol).unwrap_or(EVOLVE_TOL))?;

    let xs = grid_x.points();
    let ts = grid_t.points();
    let mut csv = Csv::new(&["x", "t", "q", "kdv_residual"]);
    let mut gated_max: f64 = 0.0;
    let mut gated_rows = 0usize;
    for &x in &xs {
        for &t in &ts {
            let q = kdv::q_xt(&run.vessel, x, t)?;
            let residual = kdv::kdv_residual(&run.vessel, x, t, fd_step)?;
            if x >= EVOLVE_GATE_MARGIN && t >= EVOLVE_GATE_MARGIN {
                gated_max = gated_max.max(residual);
                gated_rows += 1;
            }
            csv.row(&[x, t, q, residual]);
        }
    }
    emit(&csv.buf, &args.out)?;

    // Informational cross-check of the x = 0 rows against the spectral
    // boundary series; reported, never gated (the columns agree only in the
    // t -> 0 limit; see the boundary subcommand).
    if xs.iter().any(|&x| x.abs() <= 1e-12) {
        let mut max_gap: f64 = 0.0;
        for &t in &ts {
            let gap =
                (kdv::q_xt(&run.vessel, 0.0, t)? - kdv::boundary_trace(&run.measure, t)).abs();
            max_gap = max_gap.max(gap);
        }
        eprintln!(
            "evolve: x = 0 rows: max |q(0,t) - spectral trace| = {max_gap:.3e} (informational)"
        );
    }

    let pass = gated_max <= tol;
    eprintln!(
        "evolve: {} rows ({gated_rows} inside the gate x,t >= {EVOLVE_GATE_MARGIN}), \
         max gated residual = {gated_max:.3e} (tol {tol:.1e}) -> {}",
        xs.len() * ts.len(),
        if pass { "pass" } else { "FAIL" }
    );
    Ok(if pass { 0 } else { 1 })
}

// ---------------------------------------------------------------------------
// gl-compare
// ---------------------------------------------------------------------------

pub fn cmd_gl_compare(args: &GridArgs) -> anyhow::Result<i32> {
    let run = load_run(args, "gl-compare")?;
    let grid = config::require_range("x_range", &run.cfg.x_range)?;
    let n_points = config::validate_quad_points(
        args.quad_points
            .or(run.cfg.quad_points)
            .unwrap_or(GL_COMPARE_QUAD_POINTS),
    )?;
    let tol = config::validate_tol(args.tol.or(run.cfg.tol).unwrap_or(GL_COMPARE_TOL))?;
    if grid.min < 0.0 {
        return Err(ConfigError(format!(
            "x_range: kernel comparison requires x >= 0 (got min = {})",
            grid.min
        ))
        .into());
    }

    let points = grid.points();
    let mut csv = Csv::new(&["x", "y", "k_vessel", "k_gl", "abs_diff"]);
    let mut max_diff: f64 = 0.0;
    let mut rows = 0usize;
    for &x in &points {
        let row = gl::solve_row(&run.measure, x, n_points)?;
        for &y in points.iter().filter(|&&y| y <= x + 1e-12) {
            let k_vessel = sl::k_kernel(&run.vessel, x, y)?;
            let k_gl = row.extend(&run.measure, y);
            let diff = (k_vessel - k_gl).abs();
            max_diff = max_diff.max(diff);
            csv.row(&[x, y, k_vessel, k_gl, diff]);
            rows += 1;
        }
    }
    emit(&csv.buf, &args.out)?;

    let pass = max_diff <= tol;
    eprintln!(
        "gl-compare: {rows} kernel points on y <= x, max |k_vessel - k_gl| = {max_diff:.3e} \
         (tol {tol:.1e}) -> {}",
        if pass { "pass" } else { "FAIL" }
    );
    Ok(if pass { 0 } else { 1 })
}

// ---------------------------------------------------------------------------
// boundary
// ---------------------------------------------------------------------------

pub fn cmd_boundary(args: &GridArgs) -> anyhow::Result<i32> {
    let run = load_run(args, "boundary")?;
    let grid = config::require_range("t_range", &run.cfg.t_range)?;

    let mut csv = Csv::new(&["t", "q0_vessel", "spectral_trace", "abs_diff"]);
    let mut max_diff: f64 = 0.0;
    for t in grid.points() {
        let q0 = kdv::q_xt(&run.vessel, 0.0, t)?;
        let trace = kdv::boundary_trace(&run.measure, t);
        let diff = (q0 - trace).abs();
        max_diff = max_diff.max(diff);
        csv.row(&[t, q0, trace, diff]);
    }
    emit(&csv.buf, &args.out)?;

    eprintln!(
        "boundary: {} rows, max |q(0,t) - trace| = {max_diff:.3e}; the columns agree in the \
         t -> 0 limit and the difference is reported, not gated",
        grid.steps
    );
    Ok(0)
}

// ---------------------------------------------------------------------------
// verify
// ---------------------------------------------------------------------------

/// One entry of the verification report.
#[derive(Serialize)]
struct Check {
    max_residual: f64,
    tolerance: f64,
    pass: bool,
}

fn record(report: &mut BTreeMap<&'static str, Check>, name: &'static str, residual: f64, tol: f64) {
    report.insert(
        name,
        Check {
            max_residual: residual,
            tolerance: tol,
            pass: residual <= tol,
        },
    );
}

/// Defect of a second-order halving pair: |coarse/fine - 4|, with a floor
/// for pairs that are both at rounding level.
fn order_defect(coarse: f64, fine: f64) -> f64 {
    if coarse <= RATIO_FLOOR && fine <= RATIO_FLOOR {
        return 0.0;
    }
    if fine <= 0.0 {
        return f64::MAX;
    }
    (coarse / fine - 4.0).abs()
}

fn max_norm<'a, I: IntoIterator<Item = &'a C64>>(entries: I) -> f64 {
    entries
        .into_iter()
        .map(|e| e.norm())
        .fold(0.0f64, f64::max)
}

/// Weighted generator block at (x, t): row n is sqrt(w_n) times the evolved
/// generator row.
fn c_rows(vessel: &FiniteVessel, state: &EvolvedState, x: f64) -> anyhow::Result<DMatrix<C64>> {
    let n = vessel.rank();
    let mut c = DMatrix::zeros(n, 2);
    for i in 0..n {
        let row = state.b_row_t(i, x)?;
        let w = vessel.weights()[i].sqrt();
        c[(i, 0)] = row[0] * w;
        c[(i, 1)] = row[1] * w;
    }
    Ok(c)
}

pub fn cmd_verify(args: &VerifyArgs) -> anyhow::Result<i32> {
    let (cfg, base) = match &args.config {
        Some(path) => config::load(path)?,
        None => (RunConfig::default(), PathBuf::from(".")),
    };
    config::check_command_tag(&cfg, "verify")?;
    let seed = args.seed.or(cfg.seed).unwrap_or(42);
    let measure = match &cfg.measure {
        Some(source) => config::resolve_measure(source, &base)?,
        None => sample::seeded_measure(seed),
    };
    let vessel = FiniteVessel::from_measure(&measure)?;

    // Negative-control hook: scale the first weight on the *left* factor of
    // the transfer-symmetry product only, so exactly that check trips.
    let left_vessel = if args.corrupt_x && !measure.is_empty() {
        let pairs: Vec<(f64, f64)> = measure
            .atoms()
            .iter()
            .enumerate()
            .map(|(i, a)| (a.lambda, if i == 0 { a.weight * 1.001 } else { a.weight }))
            .collect();
        FiniteVessel::from_measure(&SpectralMeasure::new(&pairs)?)?
    } else {
        vessel.clone()
    };

    let report = build_report(&measure, &vessel, &left_vessel)?;
    let mut text = serde_json::to_string_pretty(&report)?;
    text.push('\n');
    emit(&text, &args.out)?;

    let failed: Vec<&str> = report
        .iter()
        .filter(|(_, c)| !c.pass)
        .map(|(name, _)| *name)
        .collect();
    if failed.is_empty() {
        eprintln!(
            "verify: all {} checks pass (measure rank {})",
            report.len(),
            vessel.rank()
        );
        Ok(0)
    } else {
        eprintln!("verify: FAILED checks: {}", failed.join(", "));
        Ok(1)
    }
}

fn build_report(
    measure: &SpectralMeasure,
    vessel: &FiniteVessel,
    left_vessel: &FiniteVessel,
) -> anyhow::Result<BTreeMap<&'static str, Check>> {
    let mut report = BTreeMap::new();
    let sigma1 = vessel.params().sigma1;
    let sigma2 = vessel.params().sigma2;
    let gamma = vessel.params().gamma;
    let i_unit = C64::new(0.0, 1.0);

    let xs = [0.0, 0.3, 0.6, 0.9, 1.2, 1.5];
    let ts = [0.0, 0.25, 0.5];
    let lambdas = [
        C64::new(2.0, 0.0),
        C64::new(-3.0, 0.0),
        C64::new(1.0, 2.0),
        C64::new(0.5, -1.5),
        C64::new(-2.5, -1.0),
    ];

    // Bounded-form Lyapunov identity along both flows. The defect is an
    // absolute max entry while the Gram matrix itself grows exponentially in
    // x and t, so the check scores it relative to the matrix magnitude.
    let mut lyapunov = 0.0f64;
    for &t in &ts {
        let state = EvolvedState::new(vessel, t);
        for &x in &xs {
            let scale = 1.0 + max_norm(state.x_matrix_t(x).iter());
            lyapunov = lyapunov.max(state.lyapunov_residual(x) / scale);
        }
    }
    record(&mut report, "lyapunov_bounded", lyapunov, 1e-10);

    // Resolvent-form Lyapunov identity.
    let mut resolvent = 0.0f64;
    for &lambda in &lambdas {
        for &x in &[0.0, 0.75, 1.5] {
            resolvent = resolvent.max(vessel.lyapunov_resolvent_residual(lambda, x)?);
        }
    }
    record(&mut report, "lyapunov_resolvent", resolvent, 1e-10);

    // Transfer-function symmetry S(-conj(lambda))^* sigma1 S(lambda) = sigma1.
    let mut symmetry = 0.0f64;
    for &lambda in &lambdas {
        for &x in &[0.0, 0.75, 1.5] {
            let s_right = vessel.transfer(lambda, x)?;
            let s_left = left_vessel.transfer(-lambda.conj(), x)?;
            let product = s_left.adjoint() * sigma1 * s_right - sigma1;
            symmetry = symmetry.max(max_norm(product.iter()));
        }
    }
    record(&mut report, "symmetry", symmetry, 1e-9);

    // Translation flow of the generator rows: d/dt row = -lambda_n d/dx row.
    let h = 1e-4;
    let mut wave = 0.0f64;
    for n in 0..vessel.rank() {
        let lambda_n = vessel.lambdas()[n];
        for &(x, t) in &[(0.3, 0.2), (0.9, 0.4)] {
            let plus_t = EvolvedState::new(vessel, t + h).b_row_t(n, x)?;
            let minus_t = EvolvedState::new(vessel, t - h).b_row_t(n, x)?;
            let state = EvolvedState::new(vessel, t);
            let plus_x = state.b_row_t(n, x + h)?;
            let minus_x = state.b_row_t(n, x - h)?;
            let two_h = C64::new(2.0 * h, 0.0);
            let dt = (plus_t - minus_t) / two_h;
            let dx = (plus_x - minus_x) / two_h;
            let defect = dt - dx * C64::new(-lambda_n, 0.0);
            let scale = 1.0 + max_norm(plus_x.iter());
            wave = wave.max(max_norm(defect.iter()) / scale);
        }
    }
    record(&mut report, "generator_translation", wave, 1e-5);

    // Gram derivative identity X'(x) = C(x) sigma2 C(x)^*.
    let mut gram_dx = 0.0f64;
    for &(x, t) in &[(0.5, 0.0), (1.0, 0.3)] {
        let state = EvolvedState::new(vessel, t);
        let fd = (state.x_matrix_t(x + h) - state.x_matrix_t(x - h)) / C64::new(2.0 * h, 0.0);
        let c = c_rows(vessel, &state, x)?;
        let rhs = &c * sigma2 * c.adjoint();
        let scale = 1.0 + max_norm(state.x_matrix_t(x).iter());
        gram_dx = gram_dx.max(max_norm((fd - rhs).iter()) / scale);
    }
    record(&mut report, "gram_derivative", gram_dx, 1e-5);

    // Time-flow derivative identity:
    // dX/dt = i A C sigma2 C^* - i C sigma2 C^* A^* + i C gamma C^*.
    let time_flow = {
        let (x, t) = (0.8, 0.3);
        let ht = 1e-5;
        let plus = EvolvedState::new(vessel, t + ht).x_matrix_t(x);
        let minus = EvolvedState::new(vessel, t - ht).x_matrix_t(x);
        let fd = (plus - minus) / C64::new(2.0 * ht, 0.0);
        let state = EvolvedState::new(vessel, t);
        let c = c_rows(vessel, &state, x)?;
        let n = vessel.rank();
        let a = DMatrix::from_fn(n, n, |i, j| {
            if i == j {
                C64::new(0.0, vessel.lambdas()[i])
            } else {
                C64::new(0.0, 0.0)
            }
        });
        let core = &c * sigma2 * c.adjoint();
        let rhs = (&a * &core - &core * a.adjoint() + &c * gamma * c.adjoint()) * i_unit;
        let scale = 1.0 + max_norm(state.x_matrix_t(x).iter());
        max_norm((fd - rhs).iter()) / scale
    };
    record(&mut report, "time_flow_derivative", time_flow, 1e-5);

    // Tau normalization, lower bound, and logarithmic derivative.
    record(
        &mut report,
        "tau_initial_value",
        (vessel.tau(0.0) - 1.0).abs(),
        1e-15,
    );
    let mut tau_defect = 0.0f64;
    for i in 0..=20 {
        let x = 2.0 * i as f64 / 20.0;
        tau_defect = tau_defect.max(1.0 - vessel.tau(x));
    }
    record(&mut report, "tau_lower_bound", tau_defect.max(0.0), 1e-12);

    let mut log_tau = 0.0f64;
    for i in 0..9 {
        let x = 0.2 + 0.2 * i as f64;
        let hh = 1e-5;
        let fd = (vessel.tau(x + hh).ln() - vessel.tau(x - hh).ln()) / (2.0 * hh);
        let h0 = vessel.h0(x)?;
        log_tau = log_tau.max((fd - h0[(0, 0)].re).abs());
    }
    record(&mut report, "log_tau_derivative", log_tau, 1e-6);

    // Linkage structure of gamma*.
    let mut linkage = 0.0f64;
    for &x in &[0.4, 1.2] {
        let g = vessel.gamma_star(x)?;
        let h0 = vessel.h0(x)?;
        let scale = 1.0 + max_norm(h0.iter());
        let defect = (g[(0, 1)] - h0[(0, 0)])
            .norm()
            .max((g[(1, 0)] + h0[(0, 0)]).norm())
            .max((g[(1, 1)] - i_unit).norm());
        linkage = linkage.max(defect / scale);
    }
    record(&mut report, "linkage_structure", linkage, 1e-10);

    // Potential reconstructed through the vessel vs the integral equation.
    let mut cross = 0.0f64;
    for i in 0..8 {
        let x = 0.1 + (2.0 - 0.1) * i as f64 / 7.0;
        let q_vessel = sl::potential(vessel, x)?;
        let q_gl = gl::q_at(measure, x, 128, 1e-4)?;
        cross = cross.max((q_vessel - q_gl).abs());
    }
    record(&mut report, "potential_cross_method", cross, 1e-5);

    // Second-order convergence of the intertwining-equation residual.
    {
        let bx = [0.3, 0.7, 1.1];
        let lambda = C64::new(2.0, 0.0);
        let coarse = sl::backlund_residual(vessel, lambda, &bx, 1e-3)?;
        let fine = sl::backlund_residual(vessel, lambda, &bx, 5e-4)?;
        record(
            &mut report,
            "backlund_order",
            order_defect(coarse, fine),
            0.75,
        );
    }

    // Second-order convergence of the KdV flow residual.
    {
        let coarse = kdv::kdv_residual(vessel, 0.8, 0.3, 1e-2)?;
        let fine = kdv::kdv_residual(vessel, 0.8, 0.3, 5e-3)?;
        record(
            &mut report,
            "kdv_flow_order",
            order_defect(coarse, fine),
            0.75,
        );
    }

    // Built-in NLS vessels: linkage diagonal and field-equation order.
    let one = C64::new(1.0, 0.0);
    let n1 = NlsVessel::new(vec![one], DMatrix::from_row_slice(1, 2, &[one, one]))?;
    let n2 = NlsVessel::new(
        vec![C64::new(1.0, 0.5), C64::new(-1.0, 0.5)],
        DMatrix::from_row_slice(
            2,
            2,
            &[one, C64::new(0.0, 0.5), C64::new(0.0, 0.5), one],
        ),
    )?;
    {
        let coarse = nls::enls_residual(&n1, 0.3, 0.2, 1e-2)?;
        let fine = nls::enls_residual(&n1, 0.3, 0.2, 5e-3)?;
        record(
            &mut report,
            "nls_order_rank1",
            order_defect(coarse, fine),
            0.75,
        );
    }
    {
        let coarse = nls::enls_residual(&n2, 0.5, 0.5, 1e-2)?;
        let fine = nls::enls_residual(&n2, 0.5, 0.5, 5e-3)?;
        record(
            &mut report,
            "nls_order_rank2",
            order_defect(coarse, fine),
            0.75,
        );
    }
    let mut nls_diag = 0.0f64;
    for v in [&n1, &n2] {
        for &(x, t) in &[(0.3, 0.2), (0.7, 0.5)] {
            let g = v.gamma_star(x, t)?;
            let h0 = v.h0(x, t)?;
            let scale = 1.0 + max_norm(h0.iter());
            nls_diag = nls_diag.max(g[(0, 0)].norm().max(g[(1, 1)].norm()) / scale);
        }
    }
    record(&mut report, "nls_linkage_diagonal", nls_diag, 1e-10);

    Ok(report)
}
