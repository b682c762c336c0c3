//! Recovery of time-dependent coefficients and source amplitudes in a
//! parabolic initial-boundary value problem from boundary integral
//! measurements.
//!
//! The forward model is `u_t + A(q)u = f_0 + Σ_{i>r} q_i f_i` on a 1-D or
//! 2-D box with conormal Robin boundary conditions, where
//! `A(q) = A_0 + Σ_{i<=r} q_i A_i` carries unknown time-dependent lower
//! order coefficients. The data are s boundary integrals
//! `ψ_j(t) = <u(t), φ_j>` over the spatial boundary, one per unknown:
//! r operator coefficients plus s − r source amplitudes. The solver
//! reduces the inverse problem to a fixed-point equation for `q(t)` and
//! runs Picard iteration over time windows; see the module docs for the
//! pieces:
//!
//! - [`expr`]: the expression grammar for problem fields and tabulated data
//! - [`grid`]: tensor-product grids, boundary quadrature, time grids
//! - [`field`]: sampling of fields, state and trajectory containers
//! - [`linalg`]: banded LU and small dense kernels
//! - [`problem`]: problem description, validation, discretization
//! - [`trace`]: one-sided boundary derivative stencils and operator traces
//! - [`forward`]: θ-scheme time stepping
//! - [`inverse`]: the fixed-point map, Picard iteration, windowing
//! - [`synth`]: synthetic data generation, noise, scoring

pub mod error;
pub mod expr;
pub mod field;
pub mod forward;
pub mod grid;
pub mod inverse;
pub mod linalg;
pub mod problem;
pub mod synth;
pub mod trace;

pub use error::{Error, Result};
pub use expr::{Expr, FieldSpec, Point, Table, Var};
pub use field::{QTrajectory, StateField};
pub use forward::{solve_auxiliary_phi, solve_forward, Theta};
pub use grid::{build_grid, SpatialGrid, TimeGrid};
pub use inverse::{
    build_b0, evaluate_r, picard_solve, psi_tilde_derivative, verify_solution, windowed_solve,
    InverseReport, SolverOptions, WindowContext, WindowPolicy,
};
pub use problem::{
    analyze, check_compatibility, discretize, DiscreteProblem, ProblemSpec, ValidationReport,
    Violation,
};
pub use synth::{add_noise, generate_measurements, score, SynthConfig, SynthOutput};
