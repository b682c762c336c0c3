//! Forward solver: assembly of the spatial operator and conormal boundary
//! rows, the implicit θ-scheme, and the initial-boundary value solves.
//!
//! Interior rows discretize `A(q) = A_0 + Σ_{i<=r} q_i A_i` with centered
//! second-order differences (cross stencil for the mixed term, no
//! upwinding). Boundary rows discretize `γ·∇u + σu = g` with the trace
//! module's one-sided stencils in each boundary-crossing direction and
//! centered differences tangentially; they are enforced fully implicitly at
//! the new time level regardless of θ.
//!
//! Each step solves a banded system by direct LU with partial pivoting and
//! verifies the relative residual against [`RESIDUAL_LIMIT`].

use crate::error::{Error, Result};
use crate::field::{QTrajectory, StateField};
use crate::linalg::BandMatrix;
use crate::problem::DiscreteProblem;
use crate::trace::ONE_SIDED_FIRST;

/// Relative residual ceiling for every linear solve.
pub const RESIDUAL_LIMIT: f64 = 1e-10;

/// Time-stepping scheme weight.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Theta {
    /// θ = 1, backward Euler: first order, unconditionally robust.
    BackwardEuler,
    /// θ = 1/2, Crank-Nicolson: second order in time.
    CrankNicolson,
}

impl Theta {
    pub fn value(self) -> f64 {
        match self {
            Theta::BackwardEuler => 1.0,
            Theta::CrankNicolson => 0.5,
        }
    }
}

fn band_widths(dp: &DiscreteProblem) -> (usize, usize) {
    if dp.dim == 1 {
        (2, 2)
    } else {
        let w = 2 * dp.grid.nx();
        (w, w)
    }
}

/// Assemble the spatial operator at one time level: interior rows carry
/// `A_0 + Σ_{i<=r} q_i A_i`, boundary rows carry the conormal operator
/// `γ·∇ + σ`.
pub fn assemble_matrix(dp: &DiscreteProblem, q_at_level: &[f64], level: usize) -> BandMatrix {
    assert_eq!(q_at_level.len(), dp.s);
    let grid = &dp.grid;
    let (nx, ny) = (grid.nx(), grid.ny());
    let (hx, hy) = (grid.hx(), grid.hy());
    let nodes = grid.num_nodes();
    let base = level * nodes;
    let nb = grid.boundary().len();
    let bbase = level * nb;
    let (kl, ku) = band_widths(dp);
    let mut m = BandMatrix::new(nodes, kl, ku);

    // boundary rows
    for (k, b) in grid.boundary().iter().enumerate() {
        let row = b.index;
        let gx = dp.gamma_x[bbase + k];
        let gy = if dp.dim == 2 { dp.gamma_y[bbase + k] } else { 0.0 };
        m.add(row, row, dp.sigma[bbase + k]);
        add_first_derivative_row(&mut m, grid, row, b.i, b.j, nx, hx, Axis::X, gx);
        if dp.dim == 2 {
            add_first_derivative_row(&mut m, grid, row, b.i, b.j, ny, hy, Axis::Y, gy);
        }
    }

    // interior rows
    for j in 0..ny {
        for i in 0..nx {
            if grid.is_boundary(i, j) {
                continue;
            }
            let row = grid.idx(i, j);
            let idx = base + row;
            // effective first- and zeroth-order coefficients at this sample
            let mut cx = dp.ax[idx];
            let mut cy = if dp.dim == 2 { dp.ay[idx] } else { 0.0 };
            let mut c0 = dp.a0[idx];
            for (qi, op) in q_at_level.iter().zip(&dp.ops) {
                cx += qi * op.ax[idx];
                if dp.dim == 2 {
                    cy += qi * op.ay[idx];
                }
                c0 += qi * op.a0[idx];
            }

            let a11 = dp.a11[idx];
            m.add(row, grid.idx(i - 1, j), -a11 / (hx * hx) - cx / (2.0 * hx));
            m.add(row, row, 2.0 * a11 / (hx * hx) + c0);
            m.add(row, grid.idx(i + 1, j), -a11 / (hx * hx) + cx / (2.0 * hx));

            if dp.dim == 2 {
                let a22 = dp.a22[idx];
                m.add(row, grid.idx(i, j - 1), -a22 / (hy * hy) - cy / (2.0 * hy));
                m.add(row, row, 2.0 * a22 / (hy * hy));
                m.add(row, grid.idx(i, j + 1), -a22 / (hy * hy) + cy / (2.0 * hy));

                let c12 = -2.0 * dp.a12[idx] / (4.0 * hx * hy);
                m.add(row, grid.idx(i + 1, j + 1), c12);
                m.add(row, grid.idx(i - 1, j - 1), c12);
                m.add(row, grid.idx(i + 1, j - 1), -c12);
                m.add(row, grid.idx(i - 1, j + 1), -c12);
            }
        }
    }
    m
}

enum Axis {
    X,
    Y,
}

/// Add `coeff * ∂u/∂axis` to a matrix row: one-sided at a boundary-crossing
/// position, centered otherwise (same weights as the trace module).
fn add_first_derivative_row(
    m: &mut BandMatrix,
    grid: &crate::grid::SpatialGrid,
    row: usize,
    i: usize,
    j: usize,
    n_axis: usize,
    h: f64,
    axis: Axis,
    coeff: f64,
) {
    if coeff == 0.0 {
        return;
    }
    let pos = match axis {
        Axis::X => i,
        Axis::Y => j,
    };
    let col = |o: isize| -> usize {
        match axis {
            Axis::X => grid.idx((i as isize + o) as usize, j),
            Axis::Y => grid.idx(i, (j as isize + o) as usize),
        }
    };
    let d = 2.0 * h;
    if pos == 0 {
        for (o, w) in ONE_SIDED_FIRST.iter().enumerate() {
            m.add(row, col(o as isize), coeff * w / d);
        }
    } else if pos == n_axis - 1 {
        for (o, w) in ONE_SIDED_FIRST.iter().enumerate() {
            m.add(row, col(-(o as isize)), -coeff * w / d);
        }
    } else {
        m.add(row, col(-1), -coeff / d);
        m.add(row, col(1), coeff / d);
    }
}

/// Source vector at one level: `f_0 + Σ_{i>r} q_i f_i` at interior nodes,
/// the boundary datum `g` at boundary nodes.
pub fn assemble_source(dp: &DiscreteProblem, q_at_level: &[f64], level: usize) -> Vec<f64> {
    let nodes = dp.num_nodes();
    let base = level * nodes;
    let mut f = vec![0.0; nodes];
    for node in 0..nodes {
        let mut v = dp.f0[base + node];
        for (k, mode) in dp.modes.iter().enumerate() {
            v += q_at_level[dp.r + k] * mode[base + node];
        }
        f[node] = v;
    }
    let nb = dp.grid.boundary().len();
    for (k, b) in dp.grid.boundary().iter().enumerate() {
        f[b.index] = dp.g[level * nb + k];
    }
    f
}

/// Interior-node image of the first-order operator `A_i u` using the same
/// centered stencils as the assembled matrix; boundary entries are 0. Used
/// to build the homogenized problem's source, so that the change of
/// variables u = v + Φ holds exactly at the discrete level.
pub fn first_order_image(
    dp: &DiscreteProblem,
    op_index: usize,
    values: &[f64],
    level: usize,
) -> Vec<f64> {
    let grid = &dp.grid;
    let (nx, ny) = (grid.nx(), grid.ny());
    let (hx, hy) = (grid.hx(), grid.hy());
    let nodes = grid.num_nodes();
    let base = level * nodes;
    let op = &dp.ops[op_index];
    let mut out = vec![0.0; nodes];
    for j in 0..ny {
        for i in 0..nx {
            if grid.is_boundary(i, j) {
                continue;
            }
            let node = grid.idx(i, j);
            let idx = base + node;
            let mut v = op.ax[idx] * (values[grid.idx(i + 1, j)] - values[grid.idx(i - 1, j)])
                / (2.0 * hx)
                + op.a0[idx] * values[node];
            if dp.dim == 2 {
                v += op.ay[idx] * (values[grid.idx(i, j + 1)] - values[grid.idx(i, j - 1)])
                    / (2.0 * hy);
            }
            out[node] = v;
        }
    }
    out
}

/// Where the step's source comes from.
pub enum SourceTerm<'a> {
    /// The problem's own data: `f_0 + Σ q_i f_i` and boundary datum g.
    Standard,
    /// Caller-built interior source, homogeneous boundary datum. Layout
    /// `[(level - start) * nodes + node]` over the window being solved.
    Custom(&'a [f64]),
}

/// One θ-step: given `u_n` and the assembled operator at both levels, solve
///
/// ```text
/// (I/Δt + θ L_{n+1}) u_{n+1} = u_n/Δt − (1−θ) L_n u_n + θF_{n+1} + (1−θ)F_n
/// ```
///
/// on interior rows with the boundary rows of level n+1 enforced exactly.
pub fn step_theta(
    dp: &DiscreteProblem,
    mat_n: &BandMatrix,
    mat_n1: &BandMatrix,
    f_n: &[f64],
    f_n1: &[f64],
    u_n: &[f64],
    theta: f64,
    level_n1: usize,
    mask: &[bool],
) -> Result<Vec<f64>> {
    let dt = dp.tg.dt();
    let nodes = dp.num_nodes();

    let mut m = mat_n1.clone();
    m.scale_rows(|i| if mask[i] { 1.0 } else { theta });
    for i in 0..nodes {
        if !mask[i] {
            m.add(i, i, 1.0 / dt);
        }
    }

    let mut rhs = vec![0.0; nodes];
    let lu_n = if theta < 1.0 { mat_n.matvec(u_n) } else { Vec::new() };
    for i in 0..nodes {
        if mask[i] {
            rhs[i] = f_n1[i];
        } else {
            let mut v = u_n[i] / dt + theta * f_n1[i];
            if theta < 1.0 {
                v += (1.0 - theta) * (f_n[i] - lu_n[i]);
            }
            rhs[i] = v;
        }
    }

    let lu = m.factor().map_err(|e| match e {
        Error::SingularSystem { detail, .. } => Error::SingularSystem {
            level: level_n1,
            detail,
        },
        other => other,
    })?;
    let mut x = rhs.clone();
    lu.solve_in_place(&mut x).map_err(|e| match e {
        Error::SingularSystem { detail, .. } => Error::SingularSystem {
            level: level_n1,
            detail,
        },
        other => other,
    })?;

    // backward-error check of the solve itself
    let ax = m.matvec(&x);
    let mut res = 0.0f64;
    let mut rhs_inf = 0.0f64;
    let mut x_inf = 0.0f64;
    for i in 0..nodes {
        res = res.max((ax[i] - rhs[i]).abs());
        rhs_inf = rhs_inf.max(rhs[i].abs());
        x_inf = x_inf.max(x[i].abs());
    }
    let denom = (m.norm_inf() * x_inf).max(rhs_inf).max(f64::MIN_POSITIVE);
    let rel = res / denom;
    if rel > RESIDUAL_LIMIT {
        return Err(Error::ResidualTooLarge {
            level: level_n1,
            residual: rel,
            limit: RESIDUAL_LIMIT,
        });
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::SingularSystem {
            level: level_n1,
            detail: "non-finite entries in step solution".into(),
        });
    }
    Ok(x)
}

/// Advance from `start` to `end` (absolute levels) with the given initial
/// node values at `start`. `q` must cover the window.
pub fn solve_on_window(
    dp: &DiscreteProblem,
    q: &QTrajectory,
    start: usize,
    end: usize,
    initial: &[f64],
    theta: Theta,
    source: SourceTerm,
) -> Result<StateField> {
    assert!(end > start && end <= dp.tg.steps());
    assert_eq!(initial.len(), dp.num_nodes());
    if q.s() != dp.s {
        return Err(Error::Config(format!(
            "coefficient trajectory has {} components, problem has {}",
            q.s(),
            dp.s
        )));
    }
    if q.first_level() > start || q.last_level() < end {
        return Err(Error::Config(format!(
            "coefficient trajectory covers levels [{}, {}], window needs [{start}, {end}]",
            q.first_level(),
            q.last_level()
        )));
    }
    if !q.is_finite() {
        return Err(Error::Config("coefficient trajectory has non-finite entries".into()));
    }
    let nodes = dp.num_nodes();
    let theta_v = theta.value();
    let mask = dp.grid.boundary_mask();

    let mut u = StateField::zeros(start, end - start + 1, nodes);
    u.level_mut(start).copy_from_slice(initial);

    let source_at = |level: usize, q_at: &[f64]| -> Vec<f64> {
        match &source {
            SourceTerm::Standard => assemble_source(dp, q_at, level),
            SourceTerm::Custom(arr) => {
                let off = (level - start) * nodes;
                let mut f = arr[off..off + nodes].to_vec();
                for b in dp.grid.boundary() {
                    f[b.index] = 0.0;
                }
                f
            }
        }
    };

    let q_start = q.at_level(start);
    let mut mat_n = assemble_matrix(dp, &q_start, start);
    let mut f_n = source_at(start, &q_start);
    for n in start..end {
        let q_n1 = q.at_level(n + 1);
        let mat_n1 = assemble_matrix(dp, &q_n1, n + 1);
        let f_n1 = source_at(n + 1, &q_n1);
        let u_next = step_theta(dp, &mat_n, &mat_n1, &f_n, &f_n1, u.level(n), theta_v, n + 1, &mask)?;
        u.level_mut(n + 1).copy_from_slice(&u_next);
        mat_n = mat_n1;
        f_n = f_n1;
    }
    Ok(u)
}

/// Solve the full initial-boundary value problem from the initial datum.
pub fn solve_forward(dp: &DiscreteProblem, q: &QTrajectory, theta: Theta) -> Result<StateField> {
    solve_on_window(dp, q, 0, dp.tg.steps(), &dp.u0, theta, SourceTerm::Standard)
}

/// The auxiliary solution: the same solve with q ≡ 0 (operator A_0, source
/// f_0 only). Same code path as `solve_forward` by construction.
pub fn solve_auxiliary_phi(dp: &DiscreteProblem, theta: Theta) -> Result<StateField> {
    let q0 = QTrajectory::zeros(dp.s, 0, dp.num_levels());
    solve_forward(dp, &q0, theta)
}

/// Auxiliary solve restricted to a window with a caller-supplied initial
/// state (continuation re-solves Φ per window).
pub fn solve_phi_on_window(
    dp: &DiscreteProblem,
    start: usize,
    end: usize,
    initial: &[f64],
    theta: Theta,
) -> Result<StateField> {
    let q0 = QTrajectory::zeros(dp.s, start, end - start + 1);
    solve_on_window(dp, &q0, start, end, initial, theta, SourceTerm::Standard)
}

/// Max-norm residual of the θ-scheme over a solved trajectory: interior
/// rows measure the stepped PDE, boundary rows the conormal condition at
/// each new level. Diagnostic for `verify_solution`.
pub fn scheme_residual(dp: &DiscreteProblem, u: &StateField, q: &QTrajectory, theta: Theta) -> f64 {
    let dt = dp.tg.dt();
    let theta_v = theta.value();
    let nodes = dp.num_nodes();
    let mask = dp.grid.boundary_mask();
    let mut worst = 0.0f64;

    let q_start = q.at_level(u.first_level());
    let mut mat_n = assemble_matrix(dp, &q_start, u.first_level());
    let mut f_n = assemble_source(dp, &q_start, u.first_level());
    for n in u.first_level()..u.last_level() {
        let q_n1 = q.at_level(n + 1);
        let mat_n1 = assemble_matrix(dp, &q_n1, n + 1);
        let f_n1 = assemble_source(dp, &q_n1, n + 1);
        let lu_n = mat_n.matvec(u.level(n));
        let lu_n1 = mat_n1.matvec(u.level(n + 1));
        let (un, un1) = (u.level(n), u.level(n + 1));
        for i in 0..nodes {
            let r = if mask[i] {
                lu_n1[i] - f_n1[i]
            } else {
                (un1[i] - un[i]) / dt + theta_v * (lu_n1[i] - f_n1[i])
                    + (1.0 - theta_v) * (lu_n[i] - f_n[i])
            };
            worst = worst.max(r.abs());
        }
        mat_n = mat_n1;
        f_n = f_n1;
    }
    worst
}
