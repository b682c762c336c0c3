//! Shared fixtures: small valid problems that individual tests then bend.
#![allow(dead_code)]

use parinv::expr::FieldSpec;
use parinv::grid::{build_grid, SpatialGrid, TimeGrid};
use parinv::problem::{
    BoundarySpec, FirstOrderOp, MeasurementSpec, ProblemSpec, DEFAULT_COMPAT_TOL,
};

pub fn fs(text: &str) -> FieldSpec {
    FieldSpec::parse(text).unwrap_or_else(|e| panic!("bad fixture expression '{text}': {e}"))
}

pub fn grid_1d(n: usize) -> SpatialGrid {
    build_grid(1, [1.0, 0.0], [n, 0]).unwrap()
}

pub fn grid_2d(nx: usize, ny: usize, lx: f64, ly: f64) -> SpatialGrid {
    build_grid(2, [lx, ly], [nx, ny]).unwrap()
}

pub fn tgrid(t_end: f64, steps: usize) -> TimeGrid {
    TimeGrid::new(t_end, steps).unwrap()
}

/// Base 1-D problem: pure heat operator, Robin boundary with unit conormal,
/// one inactive source mode, unit weight. Everything is consistent at t = 0
/// (zero initial state, zero boundary datum). Tests override fields.
pub fn base_spec_1d() -> ProblemSpec {
    ProblemSpec {
        dim: 1,
        extents: [1.0, 0.0],
        r: 0,
        s: 1,
        a11: fs("1"),
        a12: None,
        a22: None,
        drift: vec![fs("0")],
        reaction: fs("0"),
        first_order_ops: vec![],
        f0: fs("0"),
        source_modes: vec![fs("0")],
        u0: fs("0"),
        bc: BoundarySpec {
            gamma: vec![fs("1")],
            sigma: fs("0"),
            g: fs("0"),
        },
        measurement: MeasurementSpec {
            weights: vec![fs("1")],
            psi: None,
            compat_tol: DEFAULT_COMPAT_TOL,
        },
    }
}

/// The drifting-gradient fixture: steady auxiliary state x², one gradient
/// operator and one source amplitude unknown. Its solvability matrix is
/// [[-2, 2], [-2, 1]] at every time level (determinant 2).
pub fn gradient_pair_spec() -> ProblemSpec {
    let mut spec = base_spec_1d();
    spec.r = 1;
    spec.s = 2;
    spec.first_order_ops = vec![FirstOrderOp {
        coeffs: vec![fs("1")],
        zeroth: fs("0"),
    }];
    spec.f0 = fs("-2");
    spec.source_modes = vec![fs("1")];
    spec.u0 = fs("x^2");
    spec.bc.g = fs("2*x");
    spec.measurement.weights = vec![fs("1"), fs("x")];
    spec
}

/// Fixture whose discrete solution is exactly polynomial: the profile
/// w(x) = 1 - x + x²/3 satisfies w' + w = 0 at both ends and is annihilated
/// by A_0 = -∂_xx + (2/3)/w at every node under both the centered interior
/// and one-sided boundary stencils. With source mode w and auxiliary state
/// (1+t)(1+x²/2), the recovered amplitude is q*(t) = 1 + t to roundoff on
/// any grid.
pub fn polynomial_exact_spec() -> ProblemSpec {
    let mut spec = base_spec_1d();
    spec.r = 0;
    spec.s = 1;
    spec.reaction = fs("(2/3)/(1 - x + x^2/3)");
    spec.source_modes = vec![fs("1 - x + x^2/3")];
    spec.f0 = fs("(1 + x^2/2) + (1+t)*((2/3)/(1 - x + x^2/3)*(1 + x^2/2) - 1)");
    spec.u0 = fs("1 + x^2/2");
    spec.bc.sigma = fs("1");
    spec.bc.g = fs("(1+t)*(x + 1 + x^2/2)");
    spec.measurement.psi = Some(vec![fs("(4/3)*(t + t^2/2) + 2.5*(1+t)")]);
    spec
}

/// True amplitude hidden in `polynomial_exact_spec` data.
pub fn polynomial_exact_truth() -> FieldSpec {
    fs("1 + t")
}
