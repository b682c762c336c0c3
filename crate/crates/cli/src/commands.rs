//! The five subcommands: check, forward, synth, invert, study.
//!
//! Exit codes: 0 success, 1 configuration or validation failure, 2 the
//! iteration failed (did not converge, diverged, degenerate data matrix),
//! 3 I/O. `check` is the exception: findings are its output, so it exits 0
//! whenever it can produce a report.

use std::path::Path;
use std::time::Instant;

use serde::Serialize;
use serde_json::Value;

use parinv::expr::{FieldSpec, Point};
use parinv::field::{sample_time_series, QTrajectory};
use parinv::forward::solve_forward;
use parinv::inverse::{windowed_solve, InverseReport};
use parinv::problem::{analyze, discretize, DiscreteProblem, ValidationReport};
use parinv::synth::{add_noise, generate_measurements, score, ScoreReport, SynthConfig};
use parinv::trace::trace_value;
use parinv::{Error, Result};

use crate::artifacts::{
    fmt_f64, write_csv, write_full_state_csv, write_json, write_psi_csv, write_state_csv,
    write_trajectory_csv,
};
use crate::config::{load, read_problem_file, resolve, Loaded, Overrides};

fn tool_version() -> String {
    format!("parinv {}", env!("CARGO_PKG_VERSION"))
}

fn require_out(ov: &Overrides) -> Result<&Path> {
    let out = ov
        .out
        .as_deref()
        .ok_or_else(|| Error::Config("this command requires --out DIR".into()))?;
    std::fs::create_dir_all(out)?;
    Ok(out)
}

/// Sample time-only trajectories onto the time grid.
fn sample_q(exprs: &[FieldSpec], tg: &parinv::grid::TimeGrid) -> Result<QTrajectory> {
    let mut q = QTrajectory::zeros(exprs.len(), 0, tg.num_levels());
    for (i, f) in exprs.iter().enumerate() {
        let series = sample_time_series(f, tg, &format!("synth.q_true[{i}]"))?;
        for (n, v) in series.into_iter().enumerate() {
            q.set(i, n, v);
        }
    }
    Ok(q)
}

/// Boundary data of a solved state: `[j*levels + n]`.
fn pair_solution(dp: &DiscreteProblem, u: &parinv::field::StateField) -> Result<Vec<f64>> {
    let levels = dp.num_levels();
    let mut psi = vec![0.0; dp.s * levels];
    for n in 0..levels {
        let tr = trace_value(&dp.grid, u.level(n));
        for j in 0..dp.s {
            psi[j * levels + n] = dp.grid.boundary_integral(&tr, &dp.phi[j])?;
        }
    }
    Ok(psi)
}

// ---------------------------------------------------------------- check --

#[derive(Serialize)]
struct CheckReport {
    schema_version: u32,
    tool: String,
    command: String,
    /// False when the file could not even be parsed and compiled.
    loadable: bool,
    load_errors: Vec<String>,
    /// Present when the file was loadable.
    validation: Option<ValidationReport>,
    /// Whether measured data was present to check `ψ_j(0)` against.
    data_compat_checked: bool,
    config: Value,
}

/// Audit a problem file. Violations are report content, not process
/// failure: exits 0 whenever a report could be produced.
pub fn run_check(ov: &Overrides) -> Result<i32> {
    let mut report = CheckReport {
        schema_version: 1,
        tool: tool_version(),
        command: "check".into(),
        loadable: false,
        load_errors: Vec::new(),
        validation: None,
        data_compat_checked: false,
        config: Value::Null,
    };

    match read_problem_file(&ov.config) {
        // Unreadable file: no report is possible.
        Err(Error::Io(e)) => return Err(Error::Io(e)),
        Err(e) => report.load_errors.push(e.to_string()),
        Ok((file, raw)) => match resolve(&file, raw, ov) {
            Err(e) => report.load_errors.push(e.to_string()),
            Ok(loaded) => {
                report.loadable = true;
                report.data_compat_checked = loaded.spec.measurement.psi.is_some();
                report.config = loaded.echo.clone();
                let (_, vr) = analyze(&loaded.spec, &loaded.grid, &loaded.tg);
                report.validation = Some(vr);
            }
        },
    }

    let summary = match &report.validation {
        Some(vr) => format!(
            "check: {} violation(s), {} warning(s)",
            vr.violations.len(),
            vr.warnings.len()
        ),
        None => format!("check: file not loadable ({} error(s))", report.load_errors.len()),
    };
    if let Some(out) = &ov.out {
        std::fs::create_dir_all(out)?;
        write_json(&out.join("check.json"), &report)?;
        println!("{summary}");
    } else {
        let text = serde_json::to_string_pretty(&report)
            .map_err(|e| Error::Config(format!("report serialization failed: {e}")))?;
        println!("{text}");
        eprintln!("{summary}");
    }
    for e in &report.load_errors {
        eprintln!("- {e}");
    }
    if let Some(vr) = &report.validation {
        eprint!("{vr}");
    }
    Ok(0)
}

// -------------------------------------------------------------- forward --

#[derive(Serialize)]
struct ForwardReport {
    schema_version: u32,
    tool: String,
    command: String,
    config: Value,
    validation: ValidationReport,
    /// Sup norm of the final time level.
    sup_final: f64,
    /// Max-norm error at the final time against `exact_solution`, when one
    /// is configured.
    error_vs_exact: Option<f64>,
}

/// Solve the forward problem; the trajectory comes from `synth.q_true` when
/// present, otherwise all unknowns are zero.
pub fn run_forward(ov: &Overrides) -> Result<i32> {
    let loaded = load(ov)?;
    let out = require_out(ov)?;
    let dp = discretize(&loaded.spec, &loaded.grid, &loaded.tg)?;
    let q = match &loaded.synth {
        Some(sy) => sample_q(&sy.q_true, &loaded.tg)?,
        None => QTrajectory::zeros(loaded.spec.s, 0, loaded.tg.num_levels()),
    };

    let t0 = Instant::now();
    let u = solve_forward(&dp, &q, loaded.solver.theta)?;
    eprintln!("forward solve: {:.3}s", t0.elapsed().as_secs_f64());

    let last = u.last_level();
    let final_level = u.level(last);
    let sup_final = final_level.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let error_vs_exact = match &loaded.exact {
        Some(exact) => {
            let t = loaded.tg.t(last);
            let mut err = 0.0f64;
            for idx in 0..loaded.grid.num_nodes() {
                let (x, y) = loaded.grid.coords(idx);
                let want = exact.eval(Point::new(t, x, y))?;
                err = err.max((final_level[idx] - want).abs());
            }
            Some(err)
        }
        None => None,
    };

    write_state_csv(&out.join("u_final.csv"), &loaded.grid, final_level)?;
    let psi = pair_solution(&dp, &u)?;
    write_psi_csv(&out.join("psi_forward.csv"), &loaded.tg, &psi, dp.s)?;
    if ov.emit_solution {
        write_full_state_csv(&out.join("u_full.csv"), &loaded.grid, &loaded.tg, &u)?;
    }
    let report = ForwardReport {
        schema_version: 1,
        tool: tool_version(),
        command: "forward".into(),
        config: loaded.echo.clone(),
        validation: dp.validation.clone(),
        sup_final,
        error_vs_exact,
    };
    write_json(&out.join("forward.json"), &report)?;

    match error_vs_exact {
        Some(e) => println!("forward: sup |u(T)| = {sup_final:.6e}, error vs exact = {e:.6e}"),
        None => println!("forward: sup |u(T)| = {sup_final:.6e}"),
    }
    Ok(0)
}

// ---------------------------------------------------------------- synth --

#[derive(Serialize)]
struct SynthReport {
    schema_version: u32,
    tool: String,
    command: String,
    config: Value,
    validation: ValidationReport,
    oversample: usize,
    noise: f64,
    seed: u64,
}

/// Generate boundary measurements from `synth.q_true`.
pub fn run_synth(ov: &Overrides) -> Result<i32> {
    let loaded = load(ov)?;
    let out = require_out(ov)?;
    let sy = loaded.synth.as_ref().ok_or_else(|| {
        Error::Config("synth requires a synth section with q_true in the problem file".into())
    })?;

    let cfg = SynthConfig {
        q_true: sy.q_true.clone(),
        oversample: sy.oversample,
        theta: loaded.solver.theta,
    };
    let t0 = Instant::now();
    let mut generated = generate_measurements(&loaded.spec, &loaded.grid, &loaded.tg, &cfg)?;
    add_noise(
        &mut generated.psi,
        loaded.tg.num_levels(),
        sy.noise,
        sy.seed,
    )?;
    eprintln!("synthesis: {:.3}s", t0.elapsed().as_secs_f64());

    // Validation for the report comes from the inversion-grid problem.
    let dp = discretize(&loaded.spec, &loaded.grid, &loaded.tg)?;
    write_psi_csv(
        &out.join("psi_generated.csv"),
        &loaded.tg,
        &generated.psi,
        loaded.spec.s,
    )?;
    write_trajectory_csv(&out.join("q_true.csv"), &loaded.tg, &generated.q_true)?;
    let report = SynthReport {
        schema_version: 1,
        tool: tool_version(),
        command: "synth".into(),
        config: loaded.echo.clone(),
        validation: dp.validation.clone(),
        oversample: sy.oversample,
        noise: sy.noise,
        seed: sy.seed,
    };
    write_json(&out.join("synth.json"), &report)?;
    println!(
        "synth: wrote {} series of {} samples (oversample {}, noise {:e}, seed {})",
        loaded.spec.s,
        loaded.tg.num_levels(),
        sy.oversample,
        sy.noise,
        sy.seed
    );
    Ok(0)
}

// --------------------------------------------------------------- invert --

#[derive(Serialize)]
struct InvertRunReport {
    schema_version: u32,
    tool: String,
    command: String,
    config: Value,
    /// "measured" (ψ from the problem file) or "synthesized".
    data_source: String,
    validation: ValidationReport,
    outcome: String,
    /// Failure description when the iteration failed.
    error: Option<String>,
    inverse: Option<InverseReport>,
    /// Recovery quality; present when a generating trajectory is known.
    score: Option<ScoreReport>,
}

/// Attach data to the problem: measured ψ wins, synthetic generation is the
/// fallback. Returns the problem, the data source label, and the truth for
/// scoring when one is known.
fn resolve_data(loaded: &Loaded) -> Result<(DiscreteProblem, String, Option<QTrajectory>)> {
    if loaded.spec.measurement.psi.is_some() {
        let dp = discretize(&loaded.spec, &loaded.grid, &loaded.tg)?;
        let truth = match &loaded.synth {
            Some(sy) => Some(sample_q(&sy.q_true, &loaded.tg)?),
            None => None,
        };
        return Ok((dp, "measured".into(), truth));
    }
    let Some(sy) = &loaded.synth else {
        return Err(Error::Config(
            "nothing to invert: no measurement.psi and no synth section to generate data from"
                .into(),
        ));
    };
    let cfg = SynthConfig {
        q_true: sy.q_true.clone(),
        oversample: sy.oversample,
        theta: loaded.solver.theta,
    };
    let mut generated = generate_measurements(&loaded.spec, &loaded.grid, &loaded.tg, &cfg)?;
    add_noise(
        &mut generated.psi,
        loaded.tg.num_levels(),
        sy.noise,
        sy.seed,
    )?;
    let mut dp = discretize(&loaded.spec, &loaded.grid, &loaded.tg)?;
    dp.psi = Some(generated.psi);
    Ok((dp, "synthesized".into(), Some(generated.q_true)))
}

/// Recover the unknown trajectory from boundary data. On iteration failure
/// the report is still written and the exit code is 2.
pub fn run_invert(ov: &Overrides) -> Result<i32> {
    let loaded = load(ov)?;
    let out = require_out(ov)?;
    let (dp, data_source, truth) = resolve_data(&loaded)?;

    let mut report = InvertRunReport {
        schema_version: 1,
        tool: tool_version(),
        command: "invert".into(),
        config: loaded.echo.clone(),
        data_source,
        validation: dp.validation.clone(),
        outcome: String::new(),
        error: None,
        inverse: None,
        score: None,
    };

    let t0 = Instant::now();
    match windowed_solve(&dp, &loaded.solver) {
        Ok((q, u, inv)) => {
            eprintln!("inversion: {:.3}s", t0.elapsed().as_secs_f64());
            let sc = match &truth {
                Some(tr) => Some(score(&q, tr, dp.tg.dt())?),
                None => None,
            };
            write_trajectory_csv(&out.join("q_recovered.csv"), &loaded.tg, &q)?;
            write_state_csv(&out.join("u_final.csv"), &loaded.grid, u.level(u.last_level()))?;
            if ov.emit_solution {
                write_full_state_csv(&out.join("u_full.csv"), &loaded.grid, &loaded.tg, &u)?;
            }
            println!(
                "invert: converged, {} iterations over {} window(s){}",
                inv.iterations_total,
                inv.windows.len(),
                match &sc {
                    Some(sc) => format!(", aggregate relative L2 error {:.3e}", sc.aggregate.rel_l2),
                    None => String::new(),
                }
            );
            report.outcome = "converged".into();
            report.inverse = Some(inv);
            report.score = sc;
            write_json(&out.join("report.json"), &report)?;
            Ok(0)
        }
        Err(e) if e.exit_code() == 2 => {
            eprintln!("inversion failed: {e}");
            report.outcome = "failed".into();
            report.error = Some(e.to_string());
            write_json(&out.join("report.json"), &report)?;
            Ok(2)
        }
        Err(e) => Err(e),
    }
}

// ---------------------------------------------------------------- study --

/// One refinement level's measurements.
struct LevelRow {
    level: usize,
    h: f64,
    dt: f64,
    forward_error: Option<f64>,
    recon_error: Option<f64>,
}

fn study_level(loaded: &Loaded, factor: usize) -> Result<LevelRow> {
    let spec = &loaded.spec;
    let nx = (loaded.grid.nx() - 1) * factor + 1;
    let ny = if spec.dim == 2 {
        (loaded.grid.ny() - 1) * factor + 1
    } else {
        0
    };
    let grid = parinv::grid::build_grid(spec.dim, spec.extents, [nx, ny])?;
    let tg = parinv::grid::TimeGrid::new(loaded.tg.t_end(), loaded.tg.steps() * factor)?;
    let dp = discretize(spec, &grid, &tg)?;

    let forward_error = match &loaded.exact {
        Some(exact) => {
            let q = match &loaded.synth {
                Some(sy) => sample_q(&sy.q_true, &tg)?,
                None => QTrajectory::zeros(spec.s, 0, tg.num_levels()),
            };
            let u = solve_forward(&dp, &q, loaded.solver.theta)?;
            let last = u.last_level();
            let t = tg.t(last);
            let mut err = 0.0f64;
            for idx in 0..grid.num_nodes() {
                let (x, y) = grid.coords(idx);
                err = err.max((u.level(last)[idx] - exact.eval(Point::new(t, x, y))?).abs());
            }
            Some(err)
        }
        None => None,
    };

    let recon_error = match &loaded.synth {
        Some(sy) => {
            let cfg = SynthConfig {
                q_true: sy.q_true.clone(),
                oversample: sy.oversample,
                theta: loaded.solver.theta,
            };
            let mut generated = generate_measurements(spec, &grid, &tg, &cfg)?;
            add_noise(&mut generated.psi, tg.num_levels(), sy.noise, sy.seed)?;
            let mut dp = dp.clone();
            dp.psi = Some(generated.psi);
            let (q, _, _) = windowed_solve(&dp, &loaded.solver)?;
            let sc = score(&q, &generated.q_true, tg.dt())?;
            Some(sc.aggregate.rel_l2)
        }
        None => None,
    };

    Ok(LevelRow {
        level: 0,
        h: grid.hx(),
        dt: tg.dt(),
        forward_error,
        recon_error,
    })
}

/// Factor-2 refinement study: per-level errors and observed orders between
/// consecutive levels. A failing level still leaves the partial table.
pub fn run_study(ov: &Overrides) -> Result<i32> {
    let loaded = load(ov)?;
    let out = require_out(ov)?;
    let levels = loaded.study_levels.ok_or_else(|| {
        Error::Config("study requires a study section with a levels count".into())
    })?;
    if levels < 3 {
        return Err(Error::Config(format!(
            "observed orders need at least 3 refinement levels, got {levels}"
        )));
    }
    if loaded.exact.is_none() && loaded.synth.is_none() {
        return Err(Error::Config(
            "study needs exact_solution (forward error) or synth (reconstruction error)".into(),
        ));
    }

    let header = [
        "level",
        "h",
        "dt",
        "forward_error",
        "forward_order",
        "recon_error",
        "recon_order",
    ];
    let mut rows: Vec<Vec<String>> = Vec::new();
    let mut prev: Option<LevelRow> = None;
    let mut failure: Option<Error> = None;
    let cell = |v: Option<f64>| v.map(fmt_f64).unwrap_or_default();
    let order = |prev: Option<f64>, cur: Option<f64>| match (prev, cur) {
        (Some(p), Some(c)) if p > 0.0 && c > 0.0 => Some((p / c).log2()),
        _ => None,
    };

    for k in 0..levels {
        let t0 = Instant::now();
        match study_level(&loaded, 1usize << k) {
            Ok(mut row) => {
                row.level = k;
                eprintln!(
                    "level {k}: h = {:.3e}, dt = {:.3e}, {:.3}s",
                    row.h,
                    row.dt,
                    t0.elapsed().as_secs_f64()
                );
                let fo = order(prev.as_ref().and_then(|p| p.forward_error), row.forward_error);
                let ro = order(prev.as_ref().and_then(|p| p.recon_error), row.recon_error);
                rows.push(vec![
                    k.to_string(),
                    fmt_f64(row.h),
                    fmt_f64(row.dt),
                    cell(row.forward_error),
                    cell(fo),
                    cell(row.recon_error),
                    cell(ro),
                ]);
                prev = Some(row);
            }
            Err(e) => {
                eprintln!("level {k} failed: {e}");
                failure = Some(e);
                break;
            }
        }
    }

    write_csv(&out.join("study.csv"), &header, &rows)?;
    match failure {
        Some(e) => Err(e),
        None => {
            println!("study: {} level(s) written", rows.len());
            Ok(0)
        }
    }
}
