//! Problem files and their translation to library types.
//!
//! A problem file is JSON. Every function-valued field is either an
//! expression string in the exprfield grammar or an inline table
//! `{"table": {"var": "t", "points": [[0, 1], [0.5, 2]]}}`. Loading
//! collects every complaint it can find (schema, expressions, validation)
//! instead of stopping at the first.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::Deserialize;
use serde_json::Value;

use parinv::expr::{FieldSpec, Table, Var};
use parinv::forward::Theta;
use parinv::grid::{build_grid, SpatialGrid, TimeGrid};
use parinv::inverse::{SolverOptions, WindowPolicy};
use parinv::problem::{
    BoundarySpec, FirstOrderOp, MeasurementSpec, ProblemSpec, DEFAULT_COMPAT_TOL,
};
use parinv::{Error, Result};

/// A function-valued field as it appears in JSON.
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum FieldJson {
    Expr(String),
    Table { table: TableJson },
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TableJson {
    /// Interpolation variable: "t", "x", or "y".
    pub var: String,
    /// Sorted (var, value) pairs.
    pub points: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct LeadingJson {
    pub a11: Option<FieldJson>,
    pub a12: Option<FieldJson>,
    pub a22: Option<FieldJson>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FirstOrderOpJson {
    pub coeffs: Vec<FieldJson>,
    pub zeroth: Option<FieldJson>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BcJson {
    pub gamma: Vec<FieldJson>,
    pub sigma: Option<FieldJson>,
    pub g: Option<FieldJson>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeasurementJson {
    pub weights: Vec<FieldJson>,
    pub psi: Option<Vec<FieldJson>>,
    pub compat_tol: Option<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridJson {
    /// Node counts per dimension (length = dim).
    pub nodes: Vec<usize>,
    pub t_end: f64,
    pub steps: usize,
}

#[derive(Debug, Clone, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct SolverJson {
    /// 1 (implicit) or 0.5 (trapezoidal). Default 1.
    pub theta: Option<f64>,
    pub tol: Option<f64>,
    pub max_iter: Option<usize>,
    /// "single", "fixed:K", or "adaptive".
    pub window_policy: Option<String>,
    pub norm_p: Option<u32>,
    /// Odd moving-average width for the data derivative; absent = off.
    pub smoothing: Option<usize>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthJson {
    /// Generating trajectories q*_i(t), length s.
    pub q_true: Vec<FieldJson>,
    pub oversample: Option<usize>,
    pub noise: Option<f64>,
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StudyJson {
    /// Number of factor-2 refinement levels, starting from the base grid.
    pub levels: usize,
}

/// The problem file as written.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemFile {
    pub dim: usize,
    /// Domain extents per dimension (length = dim).
    pub extents: Vec<f64>,
    /// Number of unknown operator coefficients.
    #[serde(default)]
    pub r: usize,
    /// Total number of unknowns (r operator coefficients, then s - r
    /// source amplitudes).
    pub s: usize,
    #[serde(default)]
    pub leading: LeadingJson,
    pub drift: Option<Vec<FieldJson>>,
    pub reaction: Option<FieldJson>,
    #[serde(default)]
    pub first_order_ops: Vec<FirstOrderOpJson>,
    pub f0: Option<FieldJson>,
    #[serde(default)]
    pub source_modes: Vec<FieldJson>,
    pub u0: FieldJson,
    pub bc: BcJson,
    pub measurement: MeasurementJson,
    pub grid: GridJson,
    #[serde(default)]
    pub solver: SolverJson,
    pub synth: Option<SynthJson>,
    pub exact_solution: Option<FieldJson>,
    pub study: Option<StudyJson>,
}

/// Command-line overrides shared by every subcommand; `None` keeps the
/// problem-file value.
#[derive(Debug, Clone, Default, clap::Args)]
pub struct Overrides {
    /// Problem description file (JSON)
    #[arg(long, value_name = "PATH")]
    pub config: PathBuf,
    /// Directory for artifacts (CSV, JSON reports)
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// Grid nodes: NX or NX,NY
    #[arg(long, value_name = "NX[,NY]")]
    pub grid: Option<String>,
    /// Number of time steps
    #[arg(long, value_name = "NT")]
    pub nt: Option<usize>,
    /// Scheme parameter: 1 (implicit) or 0.5 (trapezoidal)
    #[arg(long)]
    pub theta: Option<f64>,
    /// Fixed-point convergence tolerance
    #[arg(long)]
    pub tol: Option<f64>,
    /// Fixed-point iteration budget per window
    #[arg(long = "max-iter", value_name = "N")]
    pub max_iter: Option<usize>,
    /// Window policy: single, fixed:K, or adaptive
    #[arg(long = "window-policy", value_name = "POLICY")]
    pub window_policy: Option<String>,
    /// Relative noise level for synthetic data
    #[arg(long)]
    pub noise: Option<f64>,
    /// Noise seed
    #[arg(long)]
    pub seed: Option<u64>,
    /// Refinement factor for synthetic data generation
    #[arg(long)]
    pub oversample: Option<usize>,
    /// Also write the full space-time solution (u_full.csv)
    #[arg(long = "emit-solution")]
    pub emit_solution: bool,
}

/// Synthetic-data plan after overrides.
#[derive(Debug, Clone)]
pub struct ResolvedSynth {
    pub q_true: Vec<FieldSpec>,
    pub oversample: usize,
    pub noise: f64,
    pub seed: u64,
}

/// Everything a command needs, resolved and validated for shape (problem
/// validation proper happens at discretization).
pub struct Loaded {
    pub spec: ProblemSpec,
    pub grid: SpatialGrid,
    pub tg: TimeGrid,
    pub solver: SolverOptions,
    pub synth: Option<ResolvedSynth>,
    pub exact: Option<FieldSpec>,
    pub study_levels: Option<usize>,
    /// Resolved configuration for report echoes: the problem file content
    /// plus effective scalar settings. Never contains file-system paths,
    /// so reports stay byte-identical across output locations.
    pub echo: Value,
}

/// Accumulates field-compilation complaints with their JSON paths.
struct Compiler {
    errors: Vec<String>,
}

impl Compiler {
    fn new() -> Compiler {
        Compiler { errors: Vec::new() }
    }

    fn field(&mut self, f: &FieldJson, name: &str) -> FieldSpec {
        match self.try_field(f, name) {
            Ok(spec) => spec,
            Err(e) => {
                self.errors.push(format!("{name}: {e}"));
                FieldSpec::constant(0.0)
            }
        }
    }

    fn try_field(&mut self, f: &FieldJson, name: &str) -> Result<FieldSpec> {
        match f {
            FieldJson::Expr(text) => FieldSpec::parse(text),
            FieldJson::Table { table } => {
                let var = match table.var.as_str() {
                    "t" => Var::T,
                    "x" => Var::X,
                    "y" => Var::Y,
                    other => {
                        return Err(Error::Config(format!(
                            "{name}: table variable must be t, x, or y, got {other:?}"
                        )))
                    }
                };
                Ok(FieldSpec::Table(Table::new(var, table.points.clone())?))
            }
        }
    }

    fn opt_field(&mut self, f: &Option<FieldJson>, name: &str, default: f64) -> FieldSpec {
        match f {
            Some(f) => self.field(f, name),
            None => FieldSpec::constant(default),
        }
    }

    fn fields(&mut self, fs: &[FieldJson], name: &str) -> Vec<FieldSpec> {
        fs.iter()
            .enumerate()
            .map(|(i, f)| self.field(f, &format!("{name}[{i}]")))
            .collect()
    }
}

fn parse_theta(v: f64) -> Result<Theta> {
    if v == 1.0 {
        Ok(Theta::BackwardEuler)
    } else if v == 0.5 {
        Ok(Theta::CrankNicolson)
    } else {
        Err(Error::Config(format!(
            "theta must be 1 or 0.5, got {v}"
        )))
    }
}

fn theta_value(theta: Theta) -> f64 {
    match theta {
        Theta::BackwardEuler => 1.0,
        Theta::CrankNicolson => 0.5,
    }
}

/// Parse `--grid NX[,NY]`.
fn parse_grid_override(text: &str) -> Result<Vec<usize>> {
    let parts: Vec<&str> = text.split(',').collect();
    if parts.is_empty() || parts.len() > 2 {
        return Err(Error::Config(format!(
            "--grid expects NX or NX,NY, got {text:?}"
        )));
    }
    parts
        .iter()
        .map(|p| {
            p.trim()
                .parse::<usize>()
                .map_err(|_| Error::Config(format!("--grid: bad node count {p:?}")))
        })
        .collect()
}

/// Read and parse the problem file; shape errors only. Also returns the
/// raw JSON for report echoes.
pub fn read_problem_file(path: &Path) -> Result<(ProblemFile, Value)> {
    let text = std::fs::read_to_string(path)?;
    let file = serde_json::from_str(&text)
        .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    let raw = serde_json::from_str(&text).unwrap_or(Value::Null);
    Ok((file, raw))
}

/// Build the resolved run from a parsed file plus command-line overrides.
///
/// Every problem found (bad expressions, inconsistent lengths, bad knobs)
/// is reported in a single Config error.
pub fn resolve(file: &ProblemFile, raw: Value, ov: &Overrides) -> Result<Loaded> {
    let mut c = Compiler::new();

    if file.dim != 1 && file.dim != 2 {
        c.errors.push(format!("dim must be 1 or 2, got {}", file.dim));
    }
    let dim = file.dim.clamp(1, 2);
    if file.extents.len() != dim {
        c.errors.push(format!(
            "extents must have {dim} entries, got {}",
            file.extents.len()
        ));
    }
    let mut extents = [0.0f64; 2];
    for (k, v) in file.extents.iter().take(2).enumerate() {
        extents[k] = *v;
    }

    let a11 = c.opt_field(&file.leading.a11, "leading.a11", 1.0);
    let a12 = file.leading.a12.as_ref().map(|f| c.field(f, "leading.a12"));
    let a22 = file.leading.a22.as_ref().map(|f| c.field(f, "leading.a22"));
    let drift = match &file.drift {
        Some(d) => c.fields(d, "drift"),
        None => vec![FieldSpec::constant(0.0); dim],
    };
    let reaction = c.opt_field(&file.reaction, "reaction", 0.0);
    let first_order_ops: Vec<FirstOrderOp> = file
        .first_order_ops
        .iter()
        .enumerate()
        .map(|(i, op)| FirstOrderOp {
            coeffs: c.fields(&op.coeffs, &format!("first_order_ops[{i}].coeffs")),
            zeroth: c.opt_field(&op.zeroth, &format!("first_order_ops[{i}].zeroth"), 0.0),
        })
        .collect();
    let f0 = c.opt_field(&file.f0, "f0", 0.0);
    let source_modes = c.fields(&file.source_modes, "source_modes");
    let u0 = c.field(&file.u0, "u0");
    let bc = BoundarySpec {
        gamma: c.fields(&file.bc.gamma, "bc.gamma"),
        sigma: c.opt_field(&file.bc.sigma, "bc.sigma", 0.0),
        g: c.opt_field(&file.bc.g, "bc.g", 0.0),
    };
    let measurement = MeasurementSpec {
        weights: c.fields(&file.measurement.weights, "measurement.weights"),
        psi: file
            .measurement
            .psi
            .as_ref()
            .map(|p| c.fields(p, "measurement.psi")),
        compat_tol: file.measurement.compat_tol.unwrap_or(DEFAULT_COMPAT_TOL),
    };

    // grid, with overrides
    let mut nodes = file.grid.nodes.clone();
    if let Some(g) = &ov.grid {
        match parse_grid_override(g) {
            Ok(n) => nodes = n,
            Err(e) => c.errors.push(e.to_string()),
        }
    }
    if nodes.len() != dim {
        c.errors.push(format!(
            "grid.nodes must have {dim} entries, got {}",
            nodes.len()
        ));
        nodes.resize(dim, 3);
    }
    let steps = ov.nt.unwrap_or(file.grid.steps);

    // solver knobs, with overrides
    let mut solver = SolverOptions::default();
    match parse_theta(ov.theta.or(file.solver.theta).unwrap_or(1.0)) {
        Ok(t) => solver.theta = t,
        Err(e) => c.errors.push(e.to_string()),
    }
    if let Some(tol) = ov.tol.or(file.solver.tol) {
        solver.tol = tol;
    }
    if let Some(mi) = ov.max_iter.or(file.solver.max_iter) {
        solver.max_iter = mi;
    }
    if let Some(p) = file.solver.norm_p {
        solver.norm_p = p;
    }
    solver.smoothing_width = file.solver.smoothing;
    let policy_text = ov
        .window_policy
        .clone()
        .or_else(|| file.solver.window_policy.clone());
    if let Some(p) = &policy_text {
        match p.parse::<WindowPolicy>() {
            Ok(wp) => solver.window_policy = wp,
            Err(e) => c.errors.push(e.to_string()),
        }
    }
    if let Err(e) = solver.validate() {
        c.errors.push(e.to_string());
    }

    // synthetic-data plan, with overrides
    let synth = match &file.synth {
        Some(sy) => Some(ResolvedSynth {
            q_true: c.fields(&sy.q_true, "synth.q_true"),
            oversample: ov.oversample.or(sy.oversample).unwrap_or(1),
            noise: ov.noise.or(sy.noise).unwrap_or(0.0),
            seed: ov.seed.or(sy.seed).unwrap_or(0),
        }),
        None if ov.noise.is_some() || ov.seed.is_some() || ov.oversample.is_some() => {
            c.errors.push(
                "--noise/--seed/--oversample need a synth section in the problem file".into(),
            );
            None
        }
        None => None,
    };

    let exact = file
        .exact_solution
        .as_ref()
        .map(|f| c.field(f, "exact_solution"));
    let study_levels = file.study.as_ref().map(|s| s.levels);

    if !c.errors.is_empty() {
        let mut msg = String::from("problem file is not usable:");
        for e in &c.errors {
            let _ = write!(msg, "\n- {e}");
        }
        return Err(Error::Config(msg));
    }

    let grid = build_grid(dim, extents, [nodes[0], nodes.get(1).copied().unwrap_or(0)])?;
    let tg = TimeGrid::new(file.grid.t_end, steps)?;

    let spec = ProblemSpec {
        dim,
        extents,
        r: file.r,
        s: file.s,
        a11,
        a12,
        a22,
        drift,
        reaction,
        first_order_ops,
        f0,
        source_modes,
        u0,
        bc,
        measurement,
    };

    let echo = build_echo(file, raw, &nodes, steps, &solver, synth.as_ref());

    Ok(Loaded {
        spec,
        grid,
        tg,
        solver,
        synth,
        exact,
        study_levels,
        echo,
    })
}

/// The configuration as actually used: the problem file's JSON with the
/// effective grid/solver/synth scalars substituted in.
fn build_echo(
    file: &ProblemFile,
    mut v: Value,
    nodes: &[usize],
    steps: usize,
    solver: &SolverOptions,
    synth: Option<&ResolvedSynth>,
) -> Value {
    // Value maps serialize with sorted keys, so the echo is deterministic.
    if let Value::Object(map) = &mut v {
        map.insert(
            "grid".into(),
            serde_json::json!({
                "nodes": nodes,
                "t_end": file.grid.t_end,
                "steps": steps,
            }),
        );
        map.insert(
            "solver".into(),
            serde_json::json!({
                "theta": theta_value(solver.theta),
                "tol": solver.tol,
                "max_iter": solver.max_iter,
                "window_policy": solver.window_policy.to_string(),
                "norm_p": solver.norm_p,
                "smoothing": solver.smoothing_width,
            }),
        );
        if let Some(sy) = synth {
            // q_true stays as written in the file; only the knobs resolve.
            let q_true = map
                .get("synth")
                .and_then(|s| s.get("q_true"))
                .cloned()
                .unwrap_or(Value::Null);
            map.insert(
                "synth".into(),
                serde_json::json!({
                    "q_true": q_true,
                    "oversample": sy.oversample,
                    "noise": sy.noise,
                    "seed": sy.seed,
                }),
            );
        }
    }
    v
}

/// One-step load: read, parse, resolve.
pub fn load(ov: &Overrides) -> Result<Loaded> {
    let (file, raw) = read_problem_file(&ov.config)?;
    resolve(&file, raw, ov)
}
