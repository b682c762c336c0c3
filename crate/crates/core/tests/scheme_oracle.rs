//! Independent oracles for the time stepper: the sequential banded solve is
//! checked against one monolithic dense space-time system, and the
//! homogenization identity u = v + Φ is verified at solver roundoff.

mod common;

use common::*;
use nalgebra::{DMatrix, DVector};
use parinv::field::{sample_time_series, QTrajectory};
use parinv::forward::{
    assemble_matrix, assemble_source, first_order_image, solve_auxiliary_phi, solve_forward,
    solve_on_window, SourceTerm, Theta,
};
use parinv::grid::TimeGrid;
use parinv::linalg::BandMatrix;
use parinv::problem::{build_b_initial, discretize, DiscreteProblem, FirstOrderOp, ProblemSpec};

fn qtraj(exprs: &[&str], tg: &TimeGrid) -> QTrajectory {
    let mut q = QTrajectory::zeros(exprs.len(), 0, tg.num_levels());
    for (i, e) in exprs.iter().enumerate() {
        let series = sample_time_series(&fs(e), tg, "test trajectory").unwrap();
        for (n, v) in series.into_iter().enumerate() {
            q.set(i, n, v);
        }
    }
    q
}

fn dense(m: &BandMatrix, n: usize) -> DMatrix<f64> {
    DMatrix::from_fn(n, n, |i, j| m.get(i, j))
}

/// Assemble the whole θ-scheme trajectory as one dense linear system over
/// the unknowns (u¹, ..., u^{N_t}) and solve it monolithically.
fn monolithic_solve(dp: &DiscreteProblem, q: &QTrajectory, theta: f64) -> Vec<Vec<f64>> {
    let nodes = dp.num_nodes();
    let steps = dp.tg.steps();
    let dt = dp.tg.dt();
    let mask = dp.grid.boundary_mask();
    let dim = steps * nodes;
    let mut a = DMatrix::<f64>::zeros(dim, dim);
    let mut rhs = DVector::<f64>::zeros(dim);

    let mats: Vec<DMatrix<f64>> = (0..=steps)
        .map(|n| dense(&assemble_matrix(dp, &q.at_level(n), n), nodes))
        .collect();
    let srcs: Vec<Vec<f64>> = (0..=steps)
        .map(|n| assemble_source(dp, &q.at_level(n), n))
        .collect();

    for n in 0..steps {
        let row0 = n * nodes;
        // unknown block for u^{n+1} starts at column n*nodes; u^n lives at
        // (n-1)*nodes, or is the known initial state for n = 0
        for i in 0..nodes {
            let r = row0 + i;
            if mask[i] {
                for j in 0..nodes {
                    a[(r, row0 + j)] = mats[n + 1][(i, j)];
                }
                rhs[r] = srcs[n + 1][i];
                continue;
            }
            a[(r, row0 + i)] += 1.0 / dt;
            for j in 0..nodes {
                a[(r, row0 + j)] += theta * mats[n + 1][(i, j)];
            }
            rhs[r] = theta * srcs[n + 1][i] + (1.0 - theta) * srcs[n][i];
            if n == 0 {
                rhs[r] += dp.u0[i] / dt;
                for j in 0..nodes {
                    rhs[r] -= (1.0 - theta) * mats[0][(i, j)] * dp.u0[j];
                }
            } else {
                let prev = (n - 1) * nodes;
                a[(r, prev + i)] -= 1.0 / dt;
                for j in 0..nodes {
                    a[(r, prev + j)] += (1.0 - theta) * mats[n][(i, j)];
                }
            }
        }
    }

    let sol = a.lu().solve(&rhs).expect("monolithic system is regular");
    (0..steps)
        .map(|n| sol.as_slice()[n * nodes..(n + 1) * nodes].to_vec())
        .collect()
}

fn assert_matches_monolithic(spec: &ProblemSpec, grid: parinv::grid::SpatialGrid, q_exprs: &[&str]) {
    let tg = tgrid(0.3, 3);
    let dp = discretize(spec, &grid, &tg).unwrap();
    let q = qtraj(q_exprs, &tg);
    for (theta, theta_v) in [(Theta::BackwardEuler, 1.0), (Theta::CrankNicolson, 0.5)] {
        let u = solve_forward(&dp, &q, theta).unwrap();
        let reference = monolithic_solve(&dp, &q, theta_v);
        for n in 1..=tg.steps() {
            let got = u.level(n);
            let want = &reference[n - 1];
            for i in 0..dp.num_nodes() {
                let scale = 1.0f64.max(want[i].abs());
                assert!(
                    (got[i] - want[i]).abs() <= 1e-10 * scale,
                    "level {n} node {i} (theta {theta_v}): stepped {} vs monolithic {}",
                    got[i],
                    want[i]
                );
            }
        }
    }
}

#[test]
fn stepped_solve_matches_monolithic_dense_1d() {
    let mut spec = base_spec_1d();
    spec.r = 1;
    spec.s = 2;
    spec.a11 = fs("1 + 0.5*sin(3*x)");
    spec.drift = vec![fs("0.3*cos(x)")];
    spec.reaction = fs("0.2 + 0.1*x");
    spec.first_order_ops = vec![FirstOrderOp {
        coeffs: vec![fs("0.4 + 0.2*x")],
        zeroth: fs("0.1"),
    }];
    spec.f0 = fs("sin(pi*x)*(1 + t)");
    spec.source_modes = vec![fs("1 + x")];
    spec.bc.gamma = vec![fs("1 + 0.2*x")];
    spec.bc.sigma = fs("0.5");
    spec.bc.g = fs("t*(1 - x)");
    spec.measurement.weights = vec![fs("1"), fs("x")];
    assert_matches_monolithic(&spec, grid_1d(5), &["0.7 + 0.3*sin(2*t)", "1 + t"]);
}

#[test]
fn stepped_solve_matches_monolithic_dense_2d() {
    let mut spec = base_spec_1d();
    spec.dim = 2;
    spec.extents = [1.0, 0.8];
    spec.r = 1;
    spec.s = 2;
    spec.a11 = fs("1 + 0.2*x");
    spec.a12 = Some(fs("0.15"));
    spec.a22 = Some(fs("0.9 + 0.1*y"));
    spec.drift = vec![fs("0.1"), fs("-0.2")];
    spec.reaction = fs("0.05");
    spec.first_order_ops = vec![FirstOrderOp {
        coeffs: vec![fs("0.3"), fs("0.1*y")],
        zeroth: fs("0.2"),
    }];
    spec.f0 = fs("sin(pi*x)*(0.5 + t) + y");
    spec.source_modes = vec![fs("1 + x*y")];
    spec.bc.gamma = vec![fs("1"), fs("0.5")];
    spec.bc.sigma = fs("0.3");
    spec.bc.g = fs("t*x*y");
    spec.measurement.weights = vec![fs("1"), fs("x + y")];
    assert_matches_monolithic(&spec, grid_2d(5, 4, 1.0, 0.8), &["0.5 + 0.2*cos(t)", "1 - 0.5*t"]);
}

/// The homogenized problem's solution plus the auxiliary solution must
/// reproduce the direct solve exactly at the discrete level: the source
/// images A_iΦ use the same interior stencils as the system matrix, so the
/// change of variables cancels to roundoff.
#[test]
fn direct_solve_equals_homogenized_plus_auxiliary() {
    let spec = gradient_pair_spec();
    let grid = grid_1d(31);
    let tg = tgrid(0.5, 24);
    let dp = discretize(&spec, &grid, &tg).unwrap();
    let q = qtraj(&["0.3*sin(3*t)", "1 + 0.5*cos(2*t)"], &tg);

    for theta in [Theta::BackwardEuler, Theta::CrankNicolson] {
        let u = solve_forward(&dp, &q, theta).unwrap();
        let phi = solve_auxiliary_phi(&dp, theta).unwrap();

        let nodes = dp.num_nodes();
        let levels = tg.num_levels();
        let mut src = vec![0.0; levels * nodes];
        for n in 0..levels {
            let img = first_order_image(&dp, 0, phi.level(n), n);
            let q1 = q.get(0, n);
            let q2 = q.get(1, n);
            for i in 0..nodes {
                src[n * nodes + i] = q2 * dp.at(&dp.modes[0], n, i) - q1 * img[i];
            }
        }
        let zero = vec![0.0; nodes];
        let v = solve_on_window(&dp, &q, 0, tg.steps(), &zero, theta, SourceTerm::Custom(&src))
            .unwrap();

        let mut scale = 0.0f64;
        for n in 0..levels {
            for i in 0..nodes {
                scale = scale.max(u.level(n)[i].abs());
            }
        }
        for n in 0..levels {
            for i in 0..nodes {
                let sum = v.level(n)[i] + phi.level(n)[i];
                assert!(
                    (u.level(n)[i] - sum).abs() <= 1e-11 * scale.max(1.0),
                    "u != v + phi at level {n} node {i}: {} vs {sum}",
                    u.level(n)[i]
                );
            }
        }
    }
}

/// The solve is affine in (f_0, g): splitting the data splits the solution.
#[test]
fn solution_superposes_in_source_and_boundary_data() {
    let mut full = base_spec_1d();
    full.f0 = fs("sin(pi*x)*(1 + t)");
    full.bc.g = fs("t*(2 - x)");
    let mut src_only = full.clone();
    src_only.bc.g = fs("0");
    let mut bc_only = full.clone();
    bc_only.f0 = fs("0");

    let grid = grid_1d(17);
    let tg = tgrid(0.4, 10);
    let q = QTrajectory::zeros(1, 0, tg.num_levels());
    let u_full =
        solve_forward(&discretize(&full, &grid, &tg).unwrap(), &q, Theta::CrankNicolson).unwrap();
    let u_src =
        solve_forward(&discretize(&src_only, &grid, &tg).unwrap(), &q, Theta::CrankNicolson)
            .unwrap();
    let u_bc =
        solve_forward(&discretize(&bc_only, &grid, &tg).unwrap(), &q, Theta::CrankNicolson)
            .unwrap();

    for n in 0..tg.num_levels() {
        for i in 0..grid.num_nodes() {
            let sum = u_src.level(n)[i] + u_bc.level(n)[i];
            assert!(
                (u_full.level(n)[i] - sum).abs() <= 1e-12,
                "superposition violated at level {n} node {i}"
            );
        }
    }
}

/// With no unknown operator coefficients the u_0-based pre-check matrix and
/// the Φ-based solvability matrix have identical source columns (both pair
/// the modes with the weights), so they agree entry for entry.
#[test]
fn precheck_matrix_equals_b0_without_operator_unknowns() {
    let mut spec = base_spec_1d();
    spec.s = 2;
    spec.source_modes = vec![fs("1 + x"), fs("cos(pi*x)")];
    spec.measurement.weights = vec![fs("1"), fs("x")];
    spec.f0 = fs("1");
    let grid = grid_1d(21);
    let tg = tgrid(0.2, 8);
    let dp = discretize(&spec, &grid, &tg).unwrap();

    let b_init = build_b_initial(&dp).unwrap();
    let phi = solve_auxiliary_phi(&dp, Theta::CrankNicolson).unwrap();
    let b0 = parinv::inverse::build_b0(&dp, &phi).unwrap();

    for n in 0..tg.num_levels() {
        for j in 0..dp.s {
            for i in 0..dp.s {
                assert_eq!(
                    b0.mats[n].get(j, i),
                    b_init[n].get(j, i),
                    "entry ({j}, {i}) at level {n}"
                );
            }
        }
    }
}
