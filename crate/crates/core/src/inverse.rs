//! Recovery of the unknown time functions from boundary integral data.
//!
//! The reduction: with Φ the auxiliary solution (forward problem with
//! q ≡ 0) and v = u − Φ, the unknowns satisfy the fixed-point equation
//!
//! ```text
//! q(t) = B_0(t)^{-1} H(q)(t) = R(q)(t),
//! H_j(q) = ψ̃_j' + <A(q)v(q), φ_j>,     ψ̃_j = ψ_j − <Φ, φ_j>,
//! ```
//!
//! where row j of `B_0(t)` is
//! `(−<A_1Φ, φ_j>, ..., −<A_rΦ, φ_j>, <f_{r+1}, φ_j>, ..., <f_s, φ_j>)`
//! and `v(q)` solves the homogenized problem (zero initial and boundary
//! data) with source `Σ_{i>r} q_i f_i − Σ_{i<=r} q_i A_iΦ`.
//!
//! Picard iteration starts from `q⁰ = R(0)` and is contractive on short
//! enough time windows; the windowed driver extends a solve to all of
//! `[0, T]` by continuation, restarting Φ and B_0 from each window's final
//! state. The homogenized source uses the same interior stencils as the
//! system matrix, so `u = v + Φ` holds at the discrete level to solver
//! roundoff.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::field::{QTrajectory, StateField};
use crate::forward::{
    first_order_image, scheme_residual, solve_on_window, solve_phi_on_window, SourceTerm, Theta,
};
use crate::linalg::SmallMat;
use crate::problem::{DiscreteProblem, DET_FLOOR_FACTOR};
use crate::trace::{operator_trace, trace_value, OperatorKind};

/// How `[0, T]` is partitioned for continuation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum WindowPolicy {
    /// One window covering all of `[0, T]`.
    Single,
    /// A fixed number of near-equal windows.
    Fixed(usize),
    /// Start from one window; halve a window that fails to contract, up to
    /// `max_halvings` times, then continue from its end.
    Adaptive,
}

impl std::str::FromStr for WindowPolicy {
    type Err = Error;

    fn from_str(s: &str) -> Result<WindowPolicy> {
        if s == "single" {
            Ok(WindowPolicy::Single)
        } else if s == "adaptive" {
            Ok(WindowPolicy::Adaptive)
        } else if let Some(k) = s.strip_prefix("fixed:") {
            let k: usize = k
                .parse()
                .map_err(|_| Error::Config(format!("bad window count in policy '{s}'")))?;
            if k == 0 {
                return Err(Error::Config("window count must be >= 1".into()));
            }
            Ok(WindowPolicy::Fixed(k))
        } else {
            Err(Error::Config(format!(
                "unknown window policy '{s}' (expected single, fixed:K, or adaptive)"
            )))
        }
    }
}

impl std::fmt::Display for WindowPolicy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            WindowPolicy::Single => write!(f, "single"),
            WindowPolicy::Fixed(k) => write!(f, "fixed:{k}"),
            WindowPolicy::Adaptive => write!(f, "adaptive"),
        }
    }
}

pub const DEFAULT_TOL: f64 = 1e-8;
pub const DEFAULT_MAX_ITER: usize = 50;
/// Increment-ratio ceiling for accepting an adaptive window: a window whose
/// observed contraction is this weak is halved instead.
pub const DEFAULT_RATIO_CAP: f64 = 0.9;
pub const DEFAULT_MAX_HALVINGS: usize = 6;

/// Knobs of the inverse solve.
#[derive(Debug, Clone)]
pub struct SolverOptions {
    pub theta: Theta,
    /// Relative stop: ‖q^{k+1} − q^k‖ ≤ tol · max(1, ‖q^{k+1}‖).
    pub tol: f64,
    /// Iteration budget per window (fixed-point updates after q⁰ = R(0)).
    pub max_iter: usize,
    /// Exponent of the discrete L_p window norm; even.
    pub norm_p: u32,
    /// Odd moving-average width applied to ψ̃ before differentiation.
    pub smoothing_width: Option<usize>,
    pub window_policy: WindowPolicy,
    pub ratio_cap: f64,
    pub max_halvings: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            theta: Theta::BackwardEuler,
            tol: DEFAULT_TOL,
            max_iter: DEFAULT_MAX_ITER,
            norm_p: 2,
            smoothing_width: None,
            window_policy: WindowPolicy::Adaptive,
            ratio_cap: DEFAULT_RATIO_CAP,
            max_halvings: DEFAULT_MAX_HALVINGS,
        }
    }
}

impl SolverOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0) {
            return Err(Error::Config("tolerance must be positive".into()));
        }
        if self.max_iter == 0 {
            return Err(Error::Config("need at least one iteration".into()));
        }
        if self.norm_p < 2 || self.norm_p % 2 != 0 {
            return Err(Error::Config(format!(
                "window norm exponent must be an even integer >= 2, got {}",
                self.norm_p
            )));
        }
        if let Some(w) = self.smoothing_width {
            if w % 2 == 0 || w < 3 {
                return Err(Error::Config(format!(
                    "smoothing width must be odd and >= 3, got {w}"
                )));
            }
        }
        if !(self.ratio_cap > 0.0) {
            return Err(Error::Config("ratio cap must be positive".into()));
        }
        Ok(())
    }
}

/// Discrete L_p norm of a trajectory over its levels: trapezoid weights in
/// time, summed over components.
pub fn window_norm(q: &QTrajectory, dt: f64, p: u32) -> f64 {
    let len = q.num_levels();
    let mut acc = 0.0;
    for comp in 0..q.s() {
        let row = q.component(comp);
        for (k, v) in row.iter().enumerate() {
            let w = if k == 0 || k == len - 1 { 0.5 * dt } else { dt };
            acc += w * v.abs().powi(p as i32);
        }
    }
    acc.powf(1.0 / p as f64)
}

fn window_norm_diff(a: &QTrajectory, b: &QTrajectory, dt: f64, p: u32) -> f64 {
    assert_eq!(a.s(), b.s());
    assert_eq!(a.first_level(), b.first_level());
    assert_eq!(a.num_levels(), b.num_levels());
    let len = a.num_levels();
    let mut acc = 0.0;
    for comp in 0..a.s() {
        let (ra, rb) = (a.component(comp), b.component(comp));
        for k in 0..len {
            let w = if k == 0 || k == len - 1 { 0.5 * dt } else { dt };
            acc += w * (ra[k] - rb[k]).abs().powi(p as i32);
        }
    }
    acc.powf(1.0 / p as f64)
}

/// The time-indexed s x s solvability matrix over a window, with
/// per-level determinant and conditioning diagnostics.
#[derive(Debug, Clone)]
pub struct B0Matrix {
    pub first_level: usize,
    pub mats: Vec<SmallMat>,
    pub dets: Vec<f64>,
    pub conds: Vec<f64>,
    pub min_abs_det: f64,
    pub min_abs_det_level: usize,
    pub max_cond: f64,
    pub det_floor: f64,
}

impl B0Matrix {
    pub fn at_level(&self, level: usize) -> &SmallMat {
        &self.mats[level - self.first_level]
    }
}

/// Assemble B_0 on the levels covered by the auxiliary solution and reject
/// degeneracy: `min_n |det B_0(t_n)|` must clear a floor that scales like a
/// determinant of the matrix's own magnitude.
pub fn build_b0(dp: &DiscreteProblem, phi: &StateField) -> Result<B0Matrix> {
    let first = phi.first_level();
    let len = phi.num_levels();
    let mut mats = Vec::with_capacity(len);
    for n in first..first + len {
        let mut m = SmallMat::zeros(dp.s);
        // columns for the operator coefficients: −<A_i Φ, φ_j>
        for i in 0..dp.r {
            let tr = operator_trace(dp, OperatorKind::First(i), phi.level(n), n)?;
            for j in 0..dp.s {
                m.set(j, i, -dp.grid.boundary_integral(&tr, &dp.phi[j])?);
            }
        }
        // columns for the source amplitudes: <f_i, φ_j>
        for (k, mode) in dp.modes.iter().enumerate() {
            let tr = dp.boundary_samples(mode, n);
            for j in 0..dp.s {
                m.set(j, dp.r + k, dp.grid.boundary_integral(&tr, &dp.phi[j])?);
            }
        }
        mats.push(m);
    }

    let max_norm = mats.iter().map(|m| m.norm_inf()).fold(0.0, f64::max);
    let det_floor = DET_FLOOR_FACTOR * max_norm.powi(dp.s as i32);
    let dets: Vec<f64> = mats.iter().map(|m| m.det()).collect();
    let conds: Vec<f64> = mats.iter().map(|m| m.cond_inf()).collect();
    let mut min_abs_det = f64::INFINITY;
    let mut min_level = first;
    for (k, d) in dets.iter().enumerate() {
        if d.abs() < min_abs_det {
            min_abs_det = d.abs();
            min_level = first + k;
        }
    }
    let max_cond = conds.iter().fold(0.0f64, |a, &c| a.max(c));
    if max_norm == 0.0 || min_abs_det < det_floor {
        return Err(Error::DegenerateSystem {
            level: min_level,
            det: min_abs_det,
            floor: det_floor,
        });
    }
    Ok(B0Matrix {
        first_level: first,
        mats,
        dets,
        conds,
        min_abs_det,
        min_abs_det_level: min_level,
        max_cond,
        det_floor,
    })
}

/// ψ̃_j(t_n) = ψ_j(t_n) − <Φ(t_n), φ_j> over the auxiliary solution's
/// window; `[j * len + k]` with k relative to the window start.
pub fn psi_tilde(dp: &DiscreteProblem, phi: &StateField) -> Result<Vec<f64>> {
    let first = phi.first_level();
    let len = phi.num_levels();
    let mut out = vec![0.0; dp.s * len];
    for k in 0..len {
        let n = first + k;
        let tr = trace_value(&dp.grid, phi.level(n));
        for j in 0..dp.s {
            let pairing = dp.grid.boundary_integral(&tr, &dp.phi[j])?;
            out[j * len + k] = dp.psi_at(j, n) - pairing;
        }
    }
    Ok(out)
}

/// Time derivative of ψ̃: centered second-order differences inside the
/// window, one-sided second-order at both ends, after an optional odd
/// moving average (the averaging window shrinks symmetrically near the
/// ends, so the t = 0 sample is never altered).
pub fn psi_tilde_derivative(
    dp: &DiscreteProblem,
    phi: &StateField,
    smoothing_width: Option<usize>,
) -> Result<Vec<f64>> {
    let len = phi.num_levels();
    if len < 3 {
        return Err(Error::Config(
            "differentiating the reduced data needs at least 3 time levels per window".into(),
        ));
    }
    let mut tilde = psi_tilde(dp, phi)?;
    if let Some(w) = smoothing_width {
        let half_max = w / 2;
        let mut smooth = tilde.clone();
        for j in 0..dp.s {
            let row = &tilde[j * len..(j + 1) * len];
            for k in 0..len {
                let half = half_max.min(k).min(len - 1 - k);
                let mut acc = 0.0;
                for kk in k - half..=k + half {
                    acc += row[kk];
                }
                smooth[j * len + k] = acc / (2 * half + 1) as f64;
            }
        }
        tilde = smooth;
    }
    let dt = dp.tg.dt();
    let mut out = vec![0.0; dp.s * len];
    for j in 0..dp.s {
        let row = &tilde[j * len..(j + 1) * len];
        out[j * len] = (-3.0 * row[0] + 4.0 * row[1] - row[2]) / (2.0 * dt);
        for k in 1..len - 1 {
            out[j * len + k] = (row[k + 1] - row[k - 1]) / (2.0 * dt);
        }
        out[j * len + len - 1] =
            (3.0 * row[len - 1] - 4.0 * row[len - 2] + row[len - 3]) / (2.0 * dt);
    }
    Ok(out)
}

/// Everything that stays fixed across Picard iterations on one window.
pub struct WindowContext<'a> {
    pub dp: &'a DiscreteProblem,
    pub start: usize,
    pub end: usize,
    pub theta: Theta,
    pub phi: StateField,
    pub b0: B0Matrix,
    /// ψ̃' over the window, `[j * len + k]`.
    pub psi_tilde_prime: Vec<f64>,
    /// Interior images A_iΦ per first-order operator,
    /// `[ (level-start) * nodes + node ]`.
    a_i_phi: Vec<Vec<f64>>,
}

impl<'a> WindowContext<'a> {
    /// Solve Φ on `[start, end]` from the given initial state and assemble
    /// the window-fixed quantities.
    pub fn build(
        dp: &'a DiscreteProblem,
        start: usize,
        end: usize,
        initial: &[f64],
        opts: &SolverOptions,
    ) -> Result<WindowContext<'a>> {
        if dp.psi.is_none() {
            return Err(Error::Config(
                "inverse solve requires measured data ψ, none present".into(),
            ));
        }
        let phi = solve_phi_on_window(dp, start, end, initial, opts.theta)?;
        let b0 = build_b0(dp, &phi)?;
        let psi_tilde_prime = psi_tilde_derivative(dp, &phi, opts.smoothing_width)?;
        let nodes = dp.num_nodes();
        let len = end - start + 1;
        let mut a_i_phi = Vec::with_capacity(dp.r);
        for i in 0..dp.r {
            let mut arr = vec![0.0; len * nodes];
            for n in start..=end {
                let img = first_order_image(dp, i, phi.level(n), n);
                arr[(n - start) * nodes..(n - start + 1) * nodes].copy_from_slice(&img);
            }
            a_i_phi.push(arr);
        }
        Ok(WindowContext {
            dp,
            start,
            end,
            theta: opts.theta,
            phi,
            b0,
            psi_tilde_prime,
            a_i_phi,
        })
    }

    fn len(&self) -> usize {
        self.end - self.start + 1
    }

    /// Interior source of the homogenized problem for a given iterate:
    /// `Σ_{i>r} q_i f_i − Σ_{i<=r} q_i A_iΦ`.
    fn homogenized_source(&self, q: &QTrajectory) -> Vec<f64> {
        let dp = self.dp;
        let nodes = dp.num_nodes();
        let len = self.len();
        let mut src = vec![0.0; len * nodes];
        for k in 0..len {
            let n = self.start + k;
            let base = n * nodes;
            let rel = k * nodes;
            for (m, mode) in dp.modes.iter().enumerate() {
                let qi = q.get(dp.r + m, n);
                if qi == 0.0 {
                    continue;
                }
                for node in 0..nodes {
                    src[rel + node] += qi * mode[base + node];
                }
            }
            for i in 0..dp.r {
                let qi = q.get(i, n);
                if qi == 0.0 {
                    continue;
                }
                let img = &self.a_i_phi[i][rel..rel + nodes];
                for node in 0..nodes {
                    src[rel + node] -= qi * img[node];
                }
            }
        }
        src
    }
}

/// One application of the fixed-point map: solve the homogenized problem
/// for v(q), form `H_j = ψ̃_j' + <A(q)v, φ_j>` per level, and return
/// `B_0^{-1} H` along with v.
pub fn evaluate_r(ctx: &WindowContext, q: &QTrajectory) -> Result<(QTrajectory, StateField)> {
    let dp = ctx.dp;
    let len = ctx.len();
    let src = ctx.homogenized_source(q);
    let zero_init = vec![0.0; dp.num_nodes()];
    let v = solve_on_window(
        dp,
        q,
        ctx.start,
        ctx.end,
        &zero_init,
        ctx.theta,
        SourceTerm::Custom(&src),
    )?;

    let mut out = QTrajectory::zeros(dp.s, ctx.start, len);
    for k in 0..len {
        let n = ctx.start + k;
        let vals = v.level(n);
        let mut h = vec![0.0; dp.s];
        let a0v = operator_trace(dp, OperatorKind::Zeroth, vals, n)?;
        let mut total = a0v;
        for i in 0..dp.r {
            let qi = q.get(i, n);
            if qi == 0.0 {
                continue;
            }
            let aiv = operator_trace(dp, OperatorKind::First(i), vals, n)?;
            for (tk, av) in total.iter_mut().zip(aiv) {
                *tk += qi * av;
            }
        }
        for (j, hj) in h.iter_mut().enumerate() {
            *hj = ctx.psi_tilde_prime[j * len + k]
                + dp.grid.boundary_integral(&total, &dp.phi[j])?;
        }
        let qn = ctx.b0.at_level(n).solve(&h).ok_or(Error::DegenerateSystem {
            level: n,
            det: ctx.b0.dets[k],
            floor: ctx.b0.det_floor,
        })?;
        for (i, qi) in qn.into_iter().enumerate() {
            out.set(i, n, qi);
        }
    }
    Ok((out, v))
}

/// Diagnostics of one window's Picard run.
#[derive(Debug, Clone, Serialize)]
pub struct WindowReport {
    pub start_level: usize,
    pub end_level: usize,
    /// Number of times this window was halved before it was accepted.
    pub halvings: usize,
    /// Fixed-point map applications, including the initial q⁰ = R(0).
    pub iterations: usize,
    /// ‖q^{k+1} − q^k‖ in the window norm, in iteration order.
    pub increment_norms: Vec<f64>,
    /// Consecutive increment ratios (empty with fewer than two increments).
    pub increment_ratios: Vec<f64>,
    pub min_abs_det_b0: f64,
    pub max_cond_b0: f64,
    pub det_floor: f64,
    pub converged: bool,
}

/// Full diagnostics of an inverse solve. Serialized as the core of the
/// driver's JSON report; wall time is carried for display but excluded from
/// serialization so reports are bit-identical across runs.
#[derive(Debug, Clone, Serialize)]
pub struct InverseReport {
    pub schema_version: u32,
    pub converged: bool,
    /// Total fixed-point map applications across windows.
    pub iterations_total: usize,
    pub window_policy: String,
    pub theta: f64,
    pub tol: f64,
    pub norm_p: u32,
    pub smoothing_width: Option<usize>,
    pub windows: Vec<WindowReport>,
    /// Realized window boundaries (time-level indices).
    pub window_boundaries: Vec<usize>,
    pub min_abs_det_b0: f64,
    pub max_cond_b0: f64,
    /// max over j, t_n of |<u, φ_j>(t_n) − ψ_j(t_n)| for the returned u.
    pub final_overdetermination_residual: f64,
    /// Max-norm θ-scheme residual of the returned u under the recovered q.
    pub final_pde_residual: f64,
    /// Ellipticity and non-tangency constants from validation.
    pub delta0: Option<f64>,
    pub eps0: Option<f64>,
    #[serde(skip)]
    pub wall_time_seconds: f64,
}

/// Why a window attempt failed, for halving decisions.
enum Attempt {
    Done {
        q: QTrajectory,
        v: StateField,
        iterations: usize,
        increments: Vec<f64>,
    },
    /// Retryable on a shorter window.
    NoContraction(Error),
}

fn picard_attempt(ctx: &WindowContext, opts: &SolverOptions) -> Result<Attempt> {
    let dp = ctx.dp;
    let dt = dp.tg.dt();
    let len = ctx.len();
    let zero_q = QTrajectory::zeros(dp.s, ctx.start, len);
    let (mut q_prev, _) = evaluate_r(ctx, &zero_q)?;
    let mut iterations = 1usize;
    let mut increments: Vec<f64> = Vec::new();
    let mut growth_streak = 0usize;

    loop {
        if iterations > opts.max_iter {
            return Ok(Attempt::NoContraction(Error::NotConverged {
                window_start: ctx.start,
                window_end: ctx.end,
                max_iterations: opts.max_iter,
                last_increment: increments.last().copied().unwrap_or(f64::NAN),
                increments,
            }));
        }
        let (q_next, v_next) = evaluate_r(ctx, &q_prev)?;
        iterations += 1;
        let delta = window_norm_diff(&q_next, &q_prev, dt, opts.norm_p);
        if let Some(&prev) = increments.last() {
            if delta > prev {
                growth_streak += 1;
            } else {
                growth_streak = 0;
            }
        }
        increments.push(delta);
        if delta <= opts.tol * window_norm(&q_next, dt, opts.norm_p).max(1.0) {
            return Ok(Attempt::Done {
                q: q_next,
                v: v_next,
                iterations,
                increments,
            });
        }
        if growth_streak >= 3 {
            return Ok(Attempt::NoContraction(Error::Diverged {
                window_start: ctx.start,
                window_end: ctx.end,
                increments,
            }));
        }
        q_prev = q_next;
    }
}

fn ratios(increments: &[f64]) -> Vec<f64> {
    increments.windows(2).map(|w| w[1] / w[0]).collect()
}

/// Run Picard iteration on one window (no halving, no continuation): the
/// single-window driver. Returns the iterate, its homogenized solution, and
/// the window diagnostics; non-convergence and divergence are errors
/// carrying the increment history.
pub fn picard_solve(
    dp: &DiscreteProblem,
    start: usize,
    end: usize,
    initial: &[f64],
    opts: &SolverOptions,
) -> Result<(QTrajectory, StateField, WindowReport)> {
    opts.validate()?;
    let ctx = WindowContext::build(dp, start, end, initial, opts)?;
    match picard_attempt(&ctx, opts)? {
        Attempt::Done {
            q,
            v,
            iterations,
            increments,
        } => {
            let report = WindowReport {
                start_level: start,
                end_level: end,
                halvings: 0,
                iterations,
                increment_ratios: ratios(&increments),
                increment_norms: increments,
                min_abs_det_b0: ctx.b0.min_abs_det,
                max_cond_b0: ctx.b0.max_cond,
                det_floor: ctx.b0.det_floor,
                converged: true,
            };
            Ok((q, v, report))
        }
        Attempt::NoContraction(e) => Err(e),
    }
}

/// Residual summary of a recovered solution.
#[derive(Debug, Clone, Serialize)]
pub struct ResidualSummary {
    /// max over j, t_n of |<u, φ_j>(t_n) − ψ_j(t_n)|.
    pub overdetermination_max: f64,
    /// Max-norm θ-scheme residual of u under q. At the junction levels of a
    /// multi-window solve this reflects the convention that the earlier
    /// window's q is kept there.
    pub pde_residual: f64,
}

/// Check a recovered (u, q) pair against the measured data and the scheme.
pub fn verify_solution(
    dp: &DiscreteProblem,
    u: &StateField,
    q: &QTrajectory,
    theta: Theta,
) -> Result<ResidualSummary> {
    let mut overdet = 0.0f64;
    for n in u.first_level()..=u.last_level() {
        let tr = trace_value(&dp.grid, u.level(n));
        for j in 0..dp.s {
            let pairing = dp.grid.boundary_integral(&tr, &dp.phi[j])?;
            overdet = overdet.max((pairing - dp.psi_at(j, n)).abs());
        }
    }
    Ok(ResidualSummary {
        overdetermination_max: overdet,
        pde_residual: scheme_residual(dp, u, q, theta),
    })
}

/// Solve the inverse problem on all of `[0, T]` with the configured window
/// policy. Returns the recovered trajectory, the assembled solution
/// u = v + Φ, and the full report.
pub fn windowed_solve(
    dp: &DiscreteProblem,
    opts: &SolverOptions,
) -> Result<(QTrajectory, StateField, InverseReport)> {
    opts.validate()?;
    if dp.psi.is_none() {
        return Err(Error::Config(
            "inverse solve requires measured data ψ, none present".into(),
        ));
    }
    let t0 = std::time::Instant::now();
    let steps = dp.tg.steps();
    let nodes = dp.num_nodes();

    // planned boundaries for non-adaptive policies
    let planned: Option<Vec<usize>> = match opts.window_policy {
        WindowPolicy::Single => Some(vec![0, steps]),
        WindowPolicy::Fixed(k) => {
            if 2 * k > steps {
                return Err(Error::Config(format!(
                    "{k} windows need at least {} time steps (2 per window), grid has {steps}",
                    2 * k
                )));
            }
            let mut b: Vec<usize> = (0..=k).map(|i| i * steps / k).collect();
            b.dedup();
            Some(b)
        }
        WindowPolicy::Adaptive => None,
    };

    let mut q_full = QTrajectory::zeros(dp.s, 0, steps + 1);
    let mut u_full = StateField::zeros(0, steps + 1, nodes);
    let mut boundaries = vec![0usize];
    let mut windows: Vec<WindowReport> = Vec::new();
    let mut iterations_total = 0usize;
    let mut initial = dp.u0.clone();
    let mut start = 0usize;
    // adaptive: tentative length carried over from the last accepted window
    let mut adaptive_len = steps;
    let mut planned_idx = 1usize;

    while start < steps {
        let (mut end, halvable) = match &planned {
            Some(b) => (b[planned_idx], false),
            None => ((start + adaptive_len).min(steps), true),
        };
        let mut halvings = 0usize;
        let accepted = loop {
            let ctx = WindowContext::build(dp, start, end, &initial, opts)?;
            let attempt = picard_attempt(&ctx, opts)?;
            let failure = match attempt {
                Attempt::Done {
                    q,
                    v,
                    iterations,
                    increments,
                } => {
                    let rs = ratios(&increments);
                    let weak = halvable && rs.iter().any(|&r| !(r < opts.ratio_cap));
                    if !weak {
                        break (ctx, q, v, iterations, increments, rs);
                    }
                    Error::NotConverged {
                        window_start: start,
                        window_end: end,
                        max_iterations: opts.max_iter,
                        last_increment: increments.last().copied().unwrap_or(f64::NAN),
                        increments,
                    }
                }
                Attempt::NoContraction(e) => e,
            };
            if !halvable {
                return Err(failure);
            }
            if halvings >= opts.max_halvings || end - start <= 2 {
                return Err(Error::WindowAborted {
                    window_start: start,
                    halvings,
                    detail: failure.to_string(),
                });
            }
            halvings += 1;
            end = start + (end - start).div_ceil(2).max(2);
        };
        let (ctx, q_win, v_win, iterations, increments, increment_ratios) = accepted;

        iterations_total += iterations;
        windows.push(WindowReport {
            start_level: start,
            end_level: end,
            halvings,
            iterations,
            increment_norms: increments,
            increment_ratios,
            min_abs_det_b0: ctx.b0.min_abs_det,
            max_cond_b0: ctx.b0.max_cond,
            det_floor: ctx.b0.det_floor,
            converged: true,
        });

        // assemble u = v + Φ on the window; the junction level is
        // identical from both sides (v = 0, Φ = carried state there)
        for n in start..=end {
            let (phi_level, v_level) = (ctx.phi.level(n), v_win.level(n));
            let dst = u_full.level_mut(n);
            for i in 0..nodes {
                dst[i] = phi_level[i] + v_level[i];
            }
        }
        q_full.splice(&q_win, start > 0);

        initial = u_full.level(end).to_vec();
        boundaries.push(end);
        if planned.is_some() {
            planned_idx += 1;
        } else {
            adaptive_len = (end - start).max(2);
        }
        start = end;
    }

    let min_abs_det_b0 = windows.iter().map(|w| w.min_abs_det_b0).fold(f64::INFINITY, f64::min);
    let max_cond_b0 = windows.iter().map(|w| w.max_cond_b0).fold(0.0f64, f64::max);
    let residuals = verify_solution(dp, &u_full, &q_full, opts.theta)?;

    let report = InverseReport {
        schema_version: 1,
        converged: true,
        iterations_total,
        window_policy: opts.window_policy.to_string(),
        theta: opts.theta.value(),
        tol: opts.tol,
        norm_p: opts.norm_p,
        smoothing_width: opts.smoothing_width,
        windows,
        window_boundaries: boundaries,
        min_abs_det_b0,
        max_cond_b0,
        final_overdetermination_residual: residuals.overdetermination_max,
        final_pde_residual: residuals.pde_residual,
        delta0: dp.validation.delta0,
        eps0: dp.validation.eps0,
        wall_time_seconds: t0.elapsed().as_secs_f64(),
    };
    Ok((q_full, u_full, report))
}
