//! Crate-wide error type.
//!
//! Failure carries enough structure for a driver to choose an exit code:
//! configuration and validation problems are distinct from iteration
//! failures, which are distinct from I/O.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Expression syntax error at a byte offset within the source string.
    #[error("parse error at byte {offset}: {message}")]
    Parse { offset: usize, message: String },

    /// Expression or table evaluation failure (division by zero, domain
    /// violation, non-finite intermediate, missing variable).
    #[error("evaluation error: {0}")]
    Eval(String),

    /// Malformed tabulated field or field sampled outside its range.
    #[error("field error: {0}")]
    Field(String),

    /// Malformed grid request.
    #[error("grid error: {0}")]
    Grid(String),

    /// Problem validation failed; the message lists every violation found.
    #[error("invalid problem:\n{0}")]
    Validation(String),

    /// The time-stepping matrix could not be factorized.
    #[error("time level {level}: singular system matrix ({detail})")]
    SingularSystem { level: usize, detail: String },

    /// A linear solve finished but its relative residual is above the
    /// acceptance threshold, so the step result cannot be trusted.
    #[error("time level {level}: linear solve residual {residual:.3e} exceeds {limit:.1e}")]
    ResidualTooLarge {
        level: usize,
        residual: f64,
        limit: f64,
    },

    /// The solvability matrix is numerically singular at some time level.
    #[error(
        "solvability matrix is degenerate at time level {level}: |det| = {det:.6e} < floor {floor:.6e}"
    )]
    DegenerateSystem { level: usize, det: f64, floor: f64 },

    /// Fixed-point iteration exhausted its iteration budget.
    #[error(
        "fixed-point iteration did not converge within {max_iterations} iterations on window [{window_start}, {window_end}] (last increment {last_increment:.3e})"
    )]
    NotConverged {
        window_start: usize,
        window_end: usize,
        max_iterations: usize,
        last_increment: f64,
        increments: Vec<f64>,
    },

    /// Fixed-point increments grew over several consecutive iterations.
    #[error(
        "fixed-point iteration diverging on window [{window_start}, {window_end}] (increments {increments:?})"
    )]
    Diverged {
        window_start: usize,
        window_end: usize,
        increments: Vec<f64>,
    },

    /// Window subdivision hit its limit without producing a convergent
    /// window; diagnostics describe the final attempt.
    #[error(
        "continuation aborted at time level {window_start} after {halvings} window halvings: {detail}"
    )]
    WindowAborted {
        window_start: usize,
        halvings: usize,
        detail: String,
    },

    /// Bad solver or driver configuration (not the problem data itself).
    #[error("config error: {0}")]
    Config(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Process exit code a command-line driver should map this error to.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Parse { .. }
            | Error::Eval(_)
            | Error::Field(_)
            | Error::Grid(_)
            | Error::Validation(_)
            | Error::Config(_) => 1,
            Error::SingularSystem { .. }
            | Error::ResidualTooLarge { .. }
            | Error::DegenerateSystem { .. }
            | Error::NotConverged { .. }
            | Error::Diverged { .. }
            | Error::WindowAborted { .. } => 2,
            Error::Io(_) => 3,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
