//! Convergence and analytic-solution checks for the forward solver.

mod common;

use common::*;
use parinv::expr::Point;
use parinv::field::QTrajectory;
use parinv::forward::{solve_forward, Theta};
use parinv::problem::{discretize, ProblemSpec};

/// Max-norm error against an analytic solution at the final time.
fn final_error(spec: &ProblemSpec, n: usize, t_end: f64, steps: usize, theta: Theta, exact: &str) -> f64 {
    let grid = grid_1d(n);
    let tg = tgrid(t_end, steps);
    let dp = discretize(spec, &grid, &tg).unwrap();
    let q = QTrajectory::zeros(spec.s, 0, tg.num_levels());
    let u = solve_forward(&dp, &q, theta).unwrap();
    let exact = fs(exact);
    let mut err = 0.0f64;
    for i in 0..grid.num_nodes() {
        let want = exact.eval(Point::new(t_end, grid.x(i), None)).unwrap();
        err = err.max((u.level(steps)[i] - want).abs());
    }
    err
}

/// Decaying profile that is quadratic in space, so every spatial stencil is
/// exact and the measured error is purely the time discretization:
/// u* = e^{-t}(1 - x + x²/3) under A_0 = -∂_xx + 1, Robin γ = σ = 1.
fn time_only_spec() -> ProblemSpec {
    let mut spec = base_spec_1d();
    spec.reaction = fs("1");
    // f0 = u*_t + A_0 u* = e^{-t}(-w - 2/3 + w) with w = 1 - x + x²/3
    spec.f0 = fs("-(2/3)*exp(-t)");
    spec.u0 = fs("1 - x + x^2/3");
    spec.bc.sigma = fs("1");
    spec.bc.g = fs("0");
    spec
}

#[test]
fn backward_euler_is_first_order_in_time() {
    let spec = time_only_spec();
    let exact = "exp(-t)*(1 - x + x^2/3)";
    let e1 = final_error(&spec, 41, 0.5, 10, Theta::BackwardEuler, exact);
    let e2 = final_error(&spec, 41, 0.5, 20, Theta::BackwardEuler, exact);
    let e3 = final_error(&spec, 41, 0.5, 40, Theta::BackwardEuler, exact);
    let p12 = (e1 / e2).log2();
    let p23 = (e2 / e3).log2();
    assert!(
        p12 > 0.9 && p12 < 1.2 && p23 > 0.9 && p23 < 1.2,
        "observed orders {p12:.3}, {p23:.3} (errors {e1:.3e}, {e2:.3e}, {e3:.3e})"
    );
}

#[test]
fn crank_nicolson_is_second_order_in_time() {
    let spec = time_only_spec();
    let exact = "exp(-t)*(1 - x + x^2/3)";
    let e1 = final_error(&spec, 41, 0.5, 10, Theta::CrankNicolson, exact);
    let e2 = final_error(&spec, 41, 0.5, 20, Theta::CrankNicolson, exact);
    let e3 = final_error(&spec, 41, 0.5, 40, Theta::CrankNicolson, exact);
    let p12 = (e1 / e2).log2();
    let p23 = (e2 / e3).log2();
    assert!(
        p12 > 1.9 && p12 < 2.2 && p23 > 1.9 && p23 < 2.2,
        "observed orders {p12:.3}, {p23:.3} (errors {e1:.3e}, {e2:.3e}, {e3:.3e})"
    );
}

/// Fully non-polynomial manufactured solution u* = e^{-t}cos(πx) with
/// Δt ∝ h and θ = 1/2: both error sources are second order, so the total
/// should contract by about 4 per refinement.
#[test]
fn joint_space_time_refinement_is_second_order() {
    let mut spec = base_spec_1d();
    // f0 = u*_t - u*_xx = e^{-t}cos(πx)(π² - 1)
    spec.f0 = fs("exp(-t)*cos(pi*x)*(pi^2 - 1)");
    spec.u0 = fs("cos(pi*x)");
    spec.bc.sigma = fs("1");
    spec.bc.g = fs("exp(-t)*(cos(pi*x) - pi*sin(pi*x))");
    // the one-sided stencil applied to cos(πx) leaves an O(h²) residual at
    // t = 0; admit it on the coarsest grid
    spec.measurement.compat_tol = 0.05;
    let exact = "exp(-t)*cos(pi*x)";

    // pre-asymptotic below N ~ 100: the Robin rows contribute a localized
    // O(h^2) term with a large constant that settles late
    let e1 = final_error(&spec, 101, 0.5, 100, Theta::CrankNicolson, exact);
    let e2 = final_error(&spec, 201, 0.5, 200, Theta::CrankNicolson, exact);
    let e3 = final_error(&spec, 401, 0.5, 400, Theta::CrankNicolson, exact);
    let p12 = (e1 / e2).log2();
    let p23 = (e2 / e3).log2();
    assert!(
        p12 > 1.8 && p23 > 1.8,
        "observed orders {p12:.3}, {p23:.3} (errors {e1:.3e}, {e2:.3e}, {e3:.3e})"
    );
}

/// Insulated heat equation with analytic modal decay, the classical oracle:
/// u = e^{-π²t}cos(πx) under homogeneous Neumann data.
#[test]
fn insulated_rod_matches_modal_decay() {
    let mut spec = base_spec_1d();
    spec.u0 = fs("cos(pi*x)");
    // the one-sided derivative of cos(πx) at the ends is O(h³) but not 0
    spec.measurement.compat_tol = 1e-4;
    let err = final_error(
        &spec,
        201,
        0.1,
        1000,
        Theta::CrankNicolson,
        "exp(-pi^2*t)*cos(pi*x)",
    );
    assert!(err <= 1e-3, "max error {err:.3e} vs analytic modal decay");
}

/// Dissipativity smoke test: insulated, unforced, so the sup norm of the
/// decaying mode must not grow under either scheme.
#[test]
fn unforced_solution_does_not_grow() {
    let mut spec = base_spec_1d();
    spec.u0 = fs("cos(pi*x)");
    spec.measurement.compat_tol = 1e-2;
    let grid = grid_1d(31);
    let tg = tgrid(1.0, 40);
    let dp = discretize(&spec, &grid, &tg).unwrap();
    let q = QTrajectory::zeros(1, 0, tg.num_levels());
    for theta in [Theta::BackwardEuler, Theta::CrankNicolson] {
        let u = solve_forward(&dp, &q, theta).unwrap();
        let sup0 = dp.u0.iter().fold(0.0f64, |a, &v| a.max(v.abs()));
        for n in 1..tg.num_levels() {
            let sup = u.level(n).iter().fold(0.0f64, |a, &v| a.max(v.abs()));
            assert!(sup <= sup0 * (1.0 + 1e-12), "sup norm grew at level {n}: {sup} > {sup0}");
        }
    }
}
