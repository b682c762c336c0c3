//! Continuous problem description, its discretization onto grids, and the
//! validation battery.
//!
//! The continuous model is
//!
//! ```text
//! u_t + A(q)u = f_0 + Σ_{i>r} q_i(t) f_i      in (0,T) x G
//! γ·∇u + σ u = g                               on (0,T) x Γ
//! u(0) = u_0                                   in G
//! ∫_Γ u φ_j dΓ = ψ_j(t)                        j = 1..s
//! ```
//!
//! with `A(q) = A_0 + Σ_{i<=r} q_i(t) A_i`, where `A_0` is second order
//! (leading part `-Σ a_kl ∂_k∂_l`, drift, reaction) and each `A_i` is first
//! order. The `s` functions `q_i(t)` are the unknowns of the inverse
//! problem; the forward solver treats them as data.
//!
//! Validation collects every violation rather than stopping at the first:
//! ellipticity of the leading part, non-tangency of the conormal field,
//! initial compatibility of `u_0` with the boundary condition, data
//! compatibility `ψ_j(0) = <u_0, φ_j>`, plus a warning-only pre-check of the
//! alternative solvability matrix built from `u_0`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::expr::{FieldSpec, Var};
use crate::field::{sample_field, sample_nodes_at, sample_on_boundary, sample_time_series};
use crate::grid::{SpatialGrid, TimeGrid};
use crate::linalg::SmallMat;
use crate::trace;

/// One first-order operator `A_i = Σ_k a^i_k ∂_k + a^i_0`.
#[derive(Debug, Clone)]
pub struct FirstOrderOp {
    /// Derivative coefficients, one per spatial dimension.
    pub coeffs: Vec<FieldSpec>,
    /// Zeroth-order coefficient.
    pub zeroth: FieldSpec,
}

/// Conormal Robin boundary condition `γ·∇u + σu = g`.
#[derive(Debug, Clone)]
pub struct BoundarySpec {
    /// Conormal direction components, one per spatial dimension.
    pub gamma: Vec<FieldSpec>,
    pub sigma: FieldSpec,
    pub g: FieldSpec,
}

/// Measurement setup: weights, optional measured series, tolerance for the
/// two compatibility families.
#[derive(Debug, Clone)]
pub struct MeasurementSpec {
    /// Weight fields φ_j(x) on Γ, length s. Spatial only.
    pub weights: Vec<FieldSpec>,
    /// Measured series ψ_j(t), length s; absent when data is yet to be
    /// generated.
    pub psi: Option<Vec<FieldSpec>>,
    pub compat_tol: f64,
}

pub const DEFAULT_COMPAT_TOL: f64 = 1e-6;

/// Full continuous problem.
#[derive(Debug, Clone)]
pub struct ProblemSpec {
    pub dim: usize,
    pub extents: [f64; 2],
    /// Number of unknown operator coefficients (first r of the q_i).
    pub r: usize,
    /// Total number of unknowns; the last s-r multiply source modes.
    pub s: usize,
    pub a11: FieldSpec,
    /// Off-diagonal leading coefficient (2-D only; the leading matrix is
    /// symmetric by construction, a21 = a12).
    pub a12: Option<FieldSpec>,
    pub a22: Option<FieldSpec>,
    /// Drift coefficients a_k, one per dimension.
    pub drift: Vec<FieldSpec>,
    /// Reaction coefficient a_0.
    pub reaction: FieldSpec,
    /// The r first-order operators A_i.
    pub first_order_ops: Vec<FirstOrderOp>,
    /// Base source f_0.
    pub f0: FieldSpec,
    /// Source modes f_i, i = r+1..s (length s-r).
    pub source_modes: Vec<FieldSpec>,
    /// Initial datum u_0(x).
    pub u0: FieldSpec,
    pub bc: BoundarySpec,
    pub measurement: MeasurementSpec,
}

/// One failed validation check.
#[derive(Debug, Clone, Serialize)]
pub struct Violation {
    /// Which check failed (stable machine-readable name).
    pub check: String,
    /// Where: component index, node, or time level.
    pub location: String,
    /// Residual or offending value.
    pub magnitude: f64,
    pub message: String,
}

/// Outcome of the validation battery. Violations reject the configuration;
/// warnings do not.
#[derive(Debug, Clone, Default, Serialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
    pub warnings: Vec<String>,
    /// Minimum eigenvalue of the leading coefficient matrix over all
    /// samples (ellipticity constant δ₀).
    pub delta0: Option<f64>,
    /// Minimum of |γ·ν| over all boundary samples (non-tangency ε₀).
    pub eps0: Option<f64>,
    /// Minimum |det| of the u_0-based solvability pre-check matrix over
    /// time levels (warning-only diagnostic).
    pub min_abs_det_b_initial: Option<f64>,
    /// Largest residual of the initial boundary compatibility
    /// |γ(0)·∇u_0 + σ(0)u_0 − g(0)| over boundary nodes.
    pub max_ic_compat_residual: Option<f64>,
    /// Largest |ψ_j(0) − <u_0, φ_j>| over j (when ψ is present).
    pub max_data_compat_residual: Option<f64>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }

    fn violation(&mut self, check: &str, location: String, magnitude: f64, message: String) {
        self.violations.push(Violation {
            check: check.into(),
            location,
            magnitude,
            message,
        });
    }
}

impl std::fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        for v in &self.violations {
            writeln!(f, "- [{}] {}: {} (magnitude {:.6e})", v.check, v.location, v.message, v.magnitude)?;
        }
        for w in &self.warnings {
            writeln!(f, "- warning: {w}")?;
        }
        Ok(())
    }
}

/// The problem with every field pre-sampled on the grids. Space-time arrays
/// are `[level*nodes + node]`; boundary arrays `[level*nb + k]` in
/// `grid.boundary()` order. In 1-D the y-direction arrays are empty.
#[derive(Debug, Clone)]
pub struct DiscreteProblem {
    pub grid: SpatialGrid,
    pub tg: TimeGrid,
    pub dim: usize,
    pub r: usize,
    pub s: usize,
    pub compat_tol: f64,
    pub a11: Vec<f64>,
    pub a12: Vec<f64>,
    pub a22: Vec<f64>,
    pub ax: Vec<f64>,
    pub ay: Vec<f64>,
    pub a0: Vec<f64>,
    pub ops: Vec<DiscreteFirstOp>,
    pub f0: Vec<f64>,
    /// Source modes f_{r+1}..f_s.
    pub modes: Vec<Vec<f64>>,
    pub u0: Vec<f64>,
    pub gamma_x: Vec<f64>,
    pub gamma_y: Vec<f64>,
    pub sigma: Vec<f64>,
    pub g: Vec<f64>,
    /// Measurement weights φ_j at boundary nodes, s rows.
    pub phi: Vec<Vec<f64>>,
    /// Measured data, `[j*num_levels + n]`; absent before generation.
    pub psi: Option<Vec<f64>>,
    /// The validation outcome this problem passed.
    pub validation: ValidationReport,
}

/// First-order operator with pre-sampled coefficients.
#[derive(Debug, Clone)]
pub struct DiscreteFirstOp {
    pub ax: Vec<f64>,
    pub ay: Vec<f64>,
    pub a0: Vec<f64>,
}

impl DiscreteProblem {
    #[inline]
    pub fn num_nodes(&self) -> usize {
        self.grid.num_nodes()
    }

    #[inline]
    pub fn num_levels(&self) -> usize {
        self.tg.num_levels()
    }

    /// Value of a space-time array at (level, node).
    #[inline]
    pub fn at(&self, arr: &[f64], level: usize, node: usize) -> f64 {
        arr[level * self.num_nodes() + node]
    }

    /// Value of a boundary array at (level, boundary-node k).
    #[inline]
    pub fn at_boundary(&self, arr: &[f64], level: usize, k: usize) -> f64 {
        arr[level * self.grid.boundary().len() + k]
    }

    /// Extract the boundary-node samples of a space-time array at a level.
    pub fn boundary_samples(&self, arr: &[f64], level: usize) -> Vec<f64> {
        let nodes = self.num_nodes();
        self.grid
            .boundary()
            .iter()
            .map(|b| arr[level * nodes + b.index])
            .collect()
    }

    /// Measured ψ_j at a level; panics when ψ is absent.
    pub fn psi_at(&self, j: usize, level: usize) -> f64 {
        let psi = self.psi.as_ref().expect("measured data present");
        psi[j * self.num_levels() + level]
    }
}

/// Validate and sample. Returns the full report and, when no violation was
/// found, the discrete problem.
pub fn analyze(
    spec: &ProblemSpec,
    grid: &SpatialGrid,
    tg: &TimeGrid,
) -> (Option<DiscreteProblem>, ValidationReport) {
    let mut report = ValidationReport::default();
    structural_checks(spec, grid, &mut report);
    if !report.is_ok() {
        return (None, report);
    }

    let dp = match sample_all(spec, grid, tg, &mut report) {
        Some(dp) => dp,
        None => return (None, report),
    };

    check_ellipticity(&dp, &mut report);
    check_non_tangency(&dp, &mut report);
    check_ic_compatibility(&dp, &mut report);
    check_data_compatibility(&dp, &mut report);
    precheck_b_initial(&dp, &mut report);

    if report.is_ok() {
        let mut dp = dp;
        dp.validation = report.clone();
        (Some(dp), report)
    } else {
        (None, report)
    }
}

/// `analyze` collapsed to a hard error listing every violation.
pub fn discretize(spec: &ProblemSpec, grid: &SpatialGrid, tg: &TimeGrid) -> Result<DiscreteProblem> {
    let (dp, report) = analyze(spec, grid, tg);
    match dp {
        Some(dp) => Ok(dp),
        None => Err(Error::Validation(report.to_string())),
    }
}

fn structural_checks(spec: &ProblemSpec, grid: &SpatialGrid, report: &mut ValidationReport) {
    let dim = spec.dim;
    if dim != 1 && dim != 2 {
        report.violation("structure", "dim".into(), dim as f64, "dim must be 1 or 2".into());
        return;
    }
    if grid.dim() != dim {
        report.violation(
            "structure",
            "grid".into(),
            grid.dim() as f64,
            format!("grid dimension {} does not match problem dimension {dim}", grid.dim()),
        );
    }
    if spec.s < 1 {
        report.violation("structure", "s".into(), spec.s as f64, "need s >= 1 unknowns".into());
    }
    if spec.r > spec.s {
        report.violation(
            "structure",
            "r".into(),
            spec.r as f64,
            format!("r = {} exceeds s = {}", spec.r, spec.s),
        );
    }
    if spec.drift.len() != dim {
        report.violation(
            "structure",
            "drift".into(),
            spec.drift.len() as f64,
            format!("expected {dim} drift coefficients, got {}", spec.drift.len()),
        );
    }
    if spec.bc.gamma.len() != dim {
        report.violation(
            "structure",
            "gamma".into(),
            spec.bc.gamma.len() as f64,
            format!("expected {dim} conormal components, got {}", spec.bc.gamma.len()),
        );
    }
    if dim == 2 && (spec.a12.is_none() || spec.a22.is_none()) {
        report.violation(
            "structure",
            "leading".into(),
            0.0,
            "2-D problems need a12 and a22".into(),
        );
    }
    if spec.first_order_ops.len() != spec.r {
        report.violation(
            "structure",
            "first_order_ops".into(),
            spec.first_order_ops.len() as f64,
            format!("expected r = {} first-order operators, got {}", spec.r, spec.first_order_ops.len()),
        );
    }
    for (i, op) in spec.first_order_ops.iter().enumerate() {
        if op.coeffs.len() != dim {
            report.violation(
                "structure",
                format!("first_order_ops[{i}]"),
                op.coeffs.len() as f64,
                format!("expected {dim} derivative coefficients"),
            );
        }
    }
    if spec.s >= spec.r && spec.source_modes.len() != spec.s - spec.r {
        report.violation(
            "structure",
            "source_modes".into(),
            spec.source_modes.len() as f64,
            format!("expected s - r = {} source modes, got {}", spec.s - spec.r, spec.source_modes.len()),
        );
    }
    if spec.measurement.weights.len() != spec.s {
        report.violation(
            "structure",
            "weights".into(),
            spec.measurement.weights.len() as f64,
            format!("expected s = {} measurement weights, got {}", spec.s, spec.measurement.weights.len()),
        );
    }
    for (j, w) in spec.measurement.weights.iter().enumerate() {
        if w.uses_var(Var::T) {
            report.violation(
                "structure",
                format!("weights[{j}]"),
                0.0,
                "measurement weight must not depend on t".into(),
            );
        }
    }
    if let Some(psi) = &spec.measurement.psi {
        if psi.len() != spec.s {
            report.violation(
                "structure",
                "psi".into(),
                psi.len() as f64,
                format!("expected s = {} measured series, got {}", spec.s, psi.len()),
            );
        }
    }
    if !(spec.measurement.compat_tol > 0.0) {
        report.violation(
            "structure",
            "compat_tol".into(),
            spec.measurement.compat_tol,
            "compatibility tolerance must be positive".into(),
        );
    }
    if dim == 1 {
        for (field, name) in [(&spec.a11, "a11"), (&spec.f0, "f0"), (&spec.u0, "u0")] {
            if field.uses_var(Var::Y) {
                report.violation(
                    "structure",
                    name.into(),
                    0.0,
                    "y referenced in a 1-D problem".into(),
                );
            }
        }
    }
}

/// Sample every field; sampling failures (syntax was already caught at
/// parse time; here it is coverage/domain errors) become violations.
fn sample_all(
    spec: &ProblemSpec,
    grid: &SpatialGrid,
    tg: &TimeGrid,
    report: &mut ValidationReport,
) -> Option<DiscreteProblem> {
    let dim = spec.dim;
    let mut ok = true;
    let mut grab = |f: &FieldSpec, name: &str, report: &mut ValidationReport| -> Vec<f64> {
        match sample_field(f, grid, tg) {
            Ok(v) => v,
            Err(e) => {
                report.violation("sampling", name.into(), f64::NAN, e.to_string());
                ok = false;
                Vec::new()
            }
        }
    };

    let a11 = grab(&spec.a11, "a11", report);
    let a12 = if dim == 2 {
        spec.a12.as_ref().map(|f| grab(f, "a12", report)).unwrap_or_default()
    } else {
        Vec::new()
    };
    let a22 = if dim == 2 {
        spec.a22.as_ref().map(|f| grab(f, "a22", report)).unwrap_or_default()
    } else {
        Vec::new()
    };
    let ax = grab(&spec.drift[0], "drift_x", report);
    let ay = if dim == 2 { grab(&spec.drift[1], "drift_y", report) } else { Vec::new() };
    let a0 = grab(&spec.reaction, "reaction", report);
    let f0 = grab(&spec.f0, "f0", report);

    let mut ops = Vec::with_capacity(spec.r);
    for (i, op) in spec.first_order_ops.iter().enumerate() {
        let oax = grab(&op.coeffs[0], &format!("op[{i}].ax"), report);
        let oay = if dim == 2 { grab(&op.coeffs[1], &format!("op[{i}].ay"), report) } else { Vec::new() };
        let oa0 = grab(&op.zeroth, &format!("op[{i}].a0"), report);
        ops.push(DiscreteFirstOp { ax: oax, ay: oay, a0: oa0 });
    }

    let mut modes = Vec::with_capacity(spec.source_modes.len());
    for (k, f) in spec.source_modes.iter().enumerate() {
        modes.push(grab(f, &format!("f{}", spec.r + k + 1), report));
    }

    let mut grab_b = |f: &FieldSpec, name: &str, report: &mut ValidationReport| -> Vec<f64> {
        match sample_on_boundary(f, grid, tg) {
            Ok(v) => v,
            Err(e) => {
                report.violation("sampling", name.into(), f64::NAN, e.to_string());
                ok = false;
                Vec::new()
            }
        }
    };
    let gamma_x = grab_b(&spec.bc.gamma[0], "gamma_x", report);
    let gamma_y = if dim == 2 { grab_b(&spec.bc.gamma[1], "gamma_y", report) } else { Vec::new() };
    let sigma = grab_b(&spec.bc.sigma, "sigma", report);
    let g = grab_b(&spec.bc.g, "g", report);

    let u0 = match sample_nodes_at(&spec.u0, grid, 0.0) {
        Ok(v) => v,
        Err(e) => {
            report.violation("sampling", "u0".into(), f64::NAN, e.to_string());
            ok = false;
            Vec::new()
        }
    };

    let mut phi = Vec::with_capacity(spec.s);
    for (j, w) in spec.measurement.weights.iter().enumerate() {
        match sample_phi_on_boundary(w, grid) {
            Ok(v) => phi.push(v),
            Err(e) => {
                report.violation("sampling", format!("phi[{}]", j + 1), f64::NAN, e.to_string());
                ok = false;
            }
        }
    }

    let psi = match &spec.measurement.psi {
        None => None,
        Some(series) => {
            let mut flat = Vec::with_capacity(series.len() * tg.num_levels());
            for (j, f) in series.iter().enumerate() {
                match sample_time_series(f, tg, &format!("psi[{}]", j + 1)) {
                    Ok(v) => flat.extend(v),
                    Err(e) => {
                        report.violation("sampling", format!("psi[{}]", j + 1), f64::NAN, e.to_string());
                        ok = false;
                    }
                }
            }
            Some(flat)
        }
    };

    if !ok || !report.is_ok() {
        return None;
    }
    Some(DiscreteProblem {
        grid: grid.clone(),
        tg: tg.clone(),
        dim,
        r: spec.r,
        s: spec.s,
        compat_tol: spec.measurement.compat_tol,
        a11,
        a12,
        a22,
        ax,
        ay,
        a0,
        ops,
        f0,
        modes,
        u0,
        gamma_x,
        gamma_y,
        sigma,
        g,
        phi,
        psi,
        validation: ValidationReport::default(),
    })
}

/// Sample a weight field at the boundary nodes (spatial, t pinned at 0).
pub fn sample_phi_on_boundary(w: &FieldSpec, grid: &SpatialGrid) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(grid.boundary().len());
    for b in grid.boundary() {
        let (x, y) = grid.coords(b.index);
        out.push(w.eval(crate::expr::Point::new(0.0, x, y))?);
    }
    Ok(out)
}

fn check_ellipticity(dp: &DiscreteProblem, report: &mut ValidationReport) {
    let mut delta0 = f64::INFINITY;
    let mut worst = (0usize, 0usize);
    let total = dp.num_levels() * dp.num_nodes();
    for idx in 0..total {
        let lam = if dp.dim == 1 {
            dp.a11[idx]
        } else {
            // smaller eigenvalue of [[a11, a12], [a12, a22]]
            let (a, b, c) = (dp.a11[idx], dp.a12[idx], dp.a22[idx]);
            let tr = a + c;
            let disc = ((a - c) * (a - c) + 4.0 * b * b).sqrt();
            0.5 * (tr - disc)
        };
        if lam < delta0 {
            delta0 = lam;
            worst = (idx / dp.num_nodes(), idx % dp.num_nodes());
        }
    }
    report.delta0 = Some(delta0);
    if !(delta0 > 0.0) {
        report.violation(
            "ellipticity",
            format!("level {} node {}", worst.0, worst.1),
            delta0,
            format!("leading coefficient matrix is not uniformly positive definite: δ₀ = {delta0:.6e} ≤ 0"),
        );
    }
}

/// Floor below which |γ·ν| counts as tangential. The condition is
/// qualitative (> 0); exact zeros are the engineered failure mode, and
/// anything at roundoff scale is indistinguishable from one.
pub const NON_TANGENCY_FLOOR: f64 = 1e-10;

fn check_non_tangency(dp: &DiscreteProblem, report: &mut ValidationReport) {
    let nb = dp.grid.boundary().len();
    let mut eps0 = f64::INFINITY;
    let mut worst = (0usize, 0usize);
    for n in 0..dp.num_levels() {
        for (k, b) in dp.grid.boundary().iter().enumerate() {
            let gx = dp.gamma_x[n * nb + k];
            let gy = if dp.dim == 2 { dp.gamma_y[n * nb + k] } else { 0.0 };
            let dot = (gx * b.normal[0] + gy * b.normal[1]).abs();
            if dot < eps0 {
                eps0 = dot;
                worst = (n, k);
            }
        }
    }
    report.eps0 = Some(eps0);
    if eps0 < NON_TANGENCY_FLOOR {
        let b = dp.grid.boundary()[worst.1];
        report.violation(
            "non_tangency",
            format!("level {} boundary node ({}, {})", worst.0, b.i, b.j),
            eps0,
            format!("conormal field is tangential to the boundary: min |γ·ν| = {eps0:.6e}"),
        );
    }
}

fn check_ic_compatibility(dp: &DiscreteProblem, report: &mut ValidationReport) {
    let derivs = match trace::boundary_first_derivatives(&dp.grid, &dp.u0) {
        Ok(d) => d,
        Err(e) => {
            report.violation("ic_compatibility", "grid".into(), f64::NAN, e.to_string());
            return;
        }
    };
    let nb = dp.grid.boundary().len();
    let mut max_res = 0.0f64;
    for k in 0..nb {
        let gx = dp.gamma_x[k];
        let gy = if dp.dim == 2 { dp.gamma_y[k] } else { 0.0 };
        let lhs = gx * derivs.ux[k] + gy * derivs.uy[k] + dp.sigma[k] * derivs.u[k];
        let res = (lhs - dp.g[k]).abs();
        max_res = max_res.max(res);
        if res > dp.compat_tol {
            let b = dp.grid.boundary()[k];
            report.violation(
                "ic_compatibility",
                format!("boundary node ({}, {})", b.i, b.j),
                res,
                format!(
                    "initial datum violates the boundary condition at t=0: |γ·∇u_0 + σu_0 − g(0)| = {res:.6e} > {:.1e}",
                    dp.compat_tol
                ),
            );
        }
    }
    report.max_ic_compat_residual = Some(max_res);
}

fn check_data_compatibility(dp: &DiscreteProblem, report: &mut ValidationReport) {
    let Some(psi) = &dp.psi else { return };
    let u0_trace = dp
        .grid
        .boundary()
        .iter()
        .map(|b| dp.u0[b.index])
        .collect::<Vec<_>>();
    let mut max_res = 0.0f64;
    for j in 0..dp.s {
        let pairing = dp
            .grid
            .boundary_integral(&u0_trace, &dp.phi[j])
            .expect("lengths match by construction");
        let res = (psi[j * dp.num_levels()] - pairing).abs();
        max_res = max_res.max(res);
        if res > dp.compat_tol {
            report.violation(
                "data_compatibility",
                format!("j = {}", j + 1),
                res,
                format!(
                    "measured series is inconsistent with the initial datum: |ψ_{}(0) − <u_0, φ_{}>| = {res:.6e} > {:.1e}",
                    j + 1,
                    j + 1,
                    dp.compat_tol
                ),
            );
        }
    }
    report.max_data_compat_residual = Some(max_res);
}

/// The u_0-based solvability pre-check: row j of the matrix at level n is
/// `(−<A_1 u_0, φ_j>, ..., −<A_r u_0, φ_j>, <f_{r+1}, φ_j>, ..., <f_s, φ_j>)`
/// with coefficients sampled at t_n. Cheap (no PDE solve); singularity is a
/// warning, the Φ-based matrix remains authoritative.
pub fn build_b_initial(dp: &DiscreteProblem) -> Result<Vec<SmallMat>> {
    let derivs = trace::boundary_first_derivatives(&dp.grid, &dp.u0)?;
    let nb = dp.grid.boundary().len();
    let mut out = Vec::with_capacity(dp.num_levels());
    for n in 0..dp.num_levels() {
        let mut m = SmallMat::zeros(dp.s);
        for j in 0..dp.s {
            for i in 0..dp.r {
                let op = &dp.ops[i];
                let mut tr = vec![0.0; nb];
                for (k, b) in dp.grid.boundary().iter().enumerate() {
                    let cax = dp.at(&op.ax, n, b.index);
                    let cay = if dp.dim == 2 { dp.at(&op.ay, n, b.index) } else { 0.0 };
                    let ca0 = dp.at(&op.a0, n, b.index);
                    tr[k] = cax * derivs.ux[k] + cay * derivs.uy[k] + ca0 * derivs.u[k];
                }
                m.set(j, i, -dp.grid.boundary_integral(&tr, &dp.phi[j])?);
            }
            for (kk, mode) in dp.modes.iter().enumerate() {
                let tr = dp.boundary_samples(mode, n);
                m.set(j, dp.r + kk, dp.grid.boundary_integral(&tr, &dp.phi[j])?);
            }
        }
        out.push(m);
    }
    Ok(out)
}

/// Relative floor factor for determinant degeneracy checks: the floor is
/// `DET_FLOOR_FACTOR * (max_n ||B(t_n)||_inf)^s`, which scales like a
/// determinant.
pub const DET_FLOOR_FACTOR: f64 = 1e-8;

fn precheck_b_initial(dp: &DiscreteProblem, report: &mut ValidationReport) {
    let mats = match build_b_initial(dp) {
        Ok(m) => m,
        Err(e) => {
            report
                .warnings
                .push(format!("solvability pre-check could not be evaluated: {e}"));
            return;
        }
    };
    let max_norm = mats.iter().map(|m| m.norm_inf()).fold(0.0, f64::max);
    let mut min_det = f64::INFINITY;
    let mut at = 0usize;
    for (n, m) in mats.iter().enumerate() {
        let d = m.det().abs();
        if d < min_det {
            min_det = d;
            at = n;
        }
    }
    report.min_abs_det_b_initial = Some(min_det);
    let floor = DET_FLOOR_FACTOR * max_norm.powi(dp.s as i32);
    if max_norm == 0.0 || min_det < floor {
        report.warnings.push(format!(
            "u_0-based solvability pre-check is (near-)singular: min |det| = {min_det:.6e} at time level {at} (floor {floor:.6e}); the Φ-based matrix may still be regular"
        ));
    }
}

/// Standalone compatibility audit (both families) as a list of violations.
pub fn check_compatibility(dp: &DiscreteProblem) -> Vec<Violation> {
    let mut report = ValidationReport::default();
    check_ic_compatibility(dp, &mut report);
    check_data_compatibility(dp, &mut report);
    report.violations
}
