//! Drivers behind the `sgfem` binary: single solves with profile output,
//! convergence studies, conservation studies, and interpolation studies.
//!
//! Grid cells (degree, mesh size) run in parallel; the `SGFEM_THREADS`
//! environment variable caps the worker count (default: available cores).
//! Output files are written once, by one writer, after all cells finish, in
//! a fixed order, so CSV output is byte-for-byte deterministic for a given
//! configuration.

use crate::analysis::{
    enriched_interpolant, error_norms, fit_slope, lambda_corrected_l2, lce, standard_interpolant,
    AnalysisError,
};
use crate::assembly::DiscreteSolution;
use crate::basis::{EnrichedSpace, Method};
use crate::config::{MethodSelection, RunConfig};
use crate::mesh::{build_control_volumes, Mesh, Side};
use crate::problem::{Problem, ReferenceSolution};
use crate::report::{fmt_f64, loglog_svg, CsvTable, Series};
use crate::solver::{constrained_newton, newton_solve, SolveOptions, SolverError};
use rayon::prelude::*;
use std::path::PathBuf;
use std::sync::Arc;
use thiserror::Error;

/// Process exit codes: configuration problems exit 2, numerical or output
/// failures exit 3.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Config(#[from] crate::config::ConfigError),
    #[error("{0}")]
    Mesh(#[from] crate::mesh::MeshError),
    #[error("InvalidConfig: {0}")]
    Usage(String),
    #[error("{0}")]
    Solver(#[from] SolverError),
    #[error("{0}")]
    Analysis(#[from] AnalysisError),
    #[error("{0}")]
    Assembly(#[from] crate::assembly::AssemblyError),
    #[error("Io: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Mesh(_) | CliError::Usage(_) => 2,
            // an underfilled study grid is a configuration problem
            CliError::Analysis(AnalysisError::InsufficientData { .. }) => 2,
            CliError::Solver(_)
            | CliError::Analysis(_)
            | CliError::Assembly(_)
            | CliError::Io(_) => 3,
        }
    }
}

fn thread_pool() -> rayon::ThreadPool {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Ok(v) = std::env::var("SGFEM_THREADS") {
        if let Ok(n) = v.trim().parse::<usize>() {
            if n > 0 {
                builder = builder.num_threads(n);
            }
        }
    }
    builder.build().expect("thread pool")
}

fn solve_options(config: &RunConfig) -> SolveOptions {
    SolveOptions {
        tol: config.tol,
        rel_tol: config.tol.max(1e-14),
        max_iter: config.max_iter,
        ..SolveOptions::default()
    }
}

fn make_space(
    problem: &Problem,
    n: usize,
    degree: usize,
    method: Method,
) -> Result<Arc<EnrichedSpace>, CliError> {
    let mesh = Mesh::uniform(problem.domain_length, n, &problem.interfaces)?;
    Ok(EnrichedSpace::new(mesh, degree, method))
}

/// View a discrete solution as a reference for error measurement against
/// finer surrogates (custom problems without a closed form).
fn discrete_as_reference(u: DiscreteSolution, interfaces: &[f64]) -> ReferenceSolution {
    let shared = Arc::new(u);
    let pieces = (0..=interfaces.len())
        .map(|_| {
            let u = shared.clone();
            Arc::new(move |x: f64| u.eval_with_deriv(x, Side::Left)) as crate::problem::PieceEval
        })
        .collect();
    ReferenceSolution::from_pieces(interfaces.to_vec(), pieces)
}

fn ensure_output_dir(config: &RunConfig) -> Result<PathBuf, CliError> {
    std::fs::create_dir_all(&config.output_dir)?;
    Ok(config.output_dir.clone())
}

fn single_method(config: &RunConfig) -> Result<Method, CliError> {
    match config.method {
        MethodSelection::Fem => Ok(Method::Fem),
        MethodSelection::Sgfem => Ok(Method::Sgfem),
        MethodSelection::Both => Err(CliError::Usage(
            "this command needs a single method (fem or sgfem), not both".into(),
        )),
    }
}

/// Solve one configuration cell and write `solution.csv` (the profile,
/// sampled at 1000 uniform points plus all nodes and both one-sided rows at
/// each interface) and `report.txt` (iteration count, final residual,
/// condition estimate).
pub fn cmd_solve(config: &RunConfig) -> Result<(), CliError> {
    config.validate()?;
    if config.orders.len() != 1 || config.mesh_sizes.len() != 1 {
        return Err(CliError::Usage(format!(
            "solve needs exactly one order and one mesh size, got {:?} and {:?}",
            config.orders, config.mesh_sizes
        )));
    }
    let method = single_method(config)?;
    let problem = config.build_problem()?;
    let degree = config.orders[0];
    let n = config.mesh_sizes[0];
    let space = make_space(&problem, n, degree, method)?;
    let mut options = solve_options(config);
    options.estimate_condition = true;

    let (solution, multipliers, report) = if config.constrained {
        let cvs = build_control_volumes(space.mesh(), config.volumes)?;
        let out = constrained_newton(&space, &problem.model, &problem.source, &cvs, &options)?;
        (out.solution, Some(out.multipliers), out.report)
    } else {
        let (u, report) = newton_solve(&space, &problem.model, &problem.source, &options)?;
        (u, None, report)
    };

    let dir = ensure_output_dir(config)?;

    // profile samples: uniform, nodes, duplicated one-sided interface rows
    let l = problem.domain_length;
    let mut samples: Vec<(f64, Side)> = (0..1000)
        .map(|k| (l * k as f64 / 999.0, Side::Left))
        .collect();
    samples.extend(space.mesh().nodes().iter().map(|&x| (x, Side::Left)));
    for &g in space.mesh().interfaces() {
        samples.push((g, Side::Left));
        samples.push((g, Side::Right));
    }
    samples.sort_by(|a, b| {
        a.0.partial_cmp(&b.0)
            .unwrap()
            .then_with(|| side_rank(a.1).cmp(&side_rank(b.1)))
    });
    samples.dedup_by(|a, b| a.0 == b.0 && a.1 == b.1);

    let has_reference = problem.reference.is_some();
    let mut table = if has_reference {
        CsvTable::new(["x", "u_h", "u_ref"])
    } else {
        CsvTable::new(["x", "u_h"])
    };
    for (x, side) in samples {
        let uh = solution.eval_with_deriv(x, side).0;
        if let Some(reference) = &problem.reference {
            let ur = reference.eval_side(x, side).0;
            table.push_row([fmt_f64(x), fmt_f64(uh), fmt_f64(ur)]);
        } else {
            table.push_row([fmt_f64(x), fmt_f64(uh)]);
        }
    }
    table.write(&dir.join("solution.csv"))?;

    let mut rpt = String::new();
    rpt.push_str(&format!("method={}\n", method.as_str()));
    rpt.push_str(&format!("degree={degree}\n"));
    rpt.push_str(&format!("mesh_elements={n}\n"));
    rpt.push_str(&format!("dimension={}\n", space.dim()));
    rpt.push_str(&format!("constrained={}\n", config.constrained));
    rpt.push_str(&format!("iterations={}\n", report.iterations));
    rpt.push_str(&format!(
        "final_residual_inf={}\n",
        fmt_f64(report.final_residual_inf)
    ));
    rpt.push_str(&format!("converged={}\n", report.converged));
    if let Some(c) = report.condition_estimate {
        rpt.push_str(&format!("condition_estimate={}\n", fmt_f64(c)));
    }
    if let Some(ms) = &multipliers {
        rpt.push_str(&format!("multipliers={}\n", ms.len()));
    }
    if let Some(reference) = &problem.reference {
        let err = error_norms(&solution, reference);
        rpt.push_str(&format!("err_l2={}\n", fmt_f64(err.l2)));
        rpt.push_str(&format!("err_h1={}\n", fmt_f64(err.h1_semi)));
    }
    std::fs::write(dir.join("report.txt"), rpt)?;
    Ok(())
}

fn side_rank(s: Side) -> u8 {
    match s {
        Side::Left => 0,
        Side::Right => 1,
    }
}

struct ConvergenceCell {
    method: Method,
    degree: usize,
    n: usize,
    h: f64,
    err_l2: f64,
    err_h1: f64,
}

/// Reference for error measurement: the closed form when available,
/// otherwise a surrogate from a finer enriched solve.
fn study_reference(problem: &Problem, config: &RunConfig) -> Result<ReferenceSolution, CliError> {
    if let Some(reference) = &problem.reference {
        return Ok(reference.clone());
    }
    let n_fine = 4 * config.mesh_sizes.last().copied().unwrap_or(40);
    let degree = (*config.orders.iter().max().unwrap_or(&1)).min(4);
    let space = make_space(problem, n_fine, degree, Method::Sgfem)?;
    let (u, _) = newton_solve(
        &space,
        &problem.model,
        &problem.source,
        &solve_options(config),
    )?;
    Ok(discrete_as_reference(u, &problem.interfaces))
}

/// Convergence study over (method, degree, mesh size): writes `rates.csv`
/// plus `h1.svg` and `l2.svg` log-log plots with fitted slopes.
pub fn cmd_convergence(config: &RunConfig) -> Result<(), CliError> {
    config.validate()?;
    if config.mesh_sizes.len() < 3 {
        return Err(CliError::Analysis(AnalysisError::InsufficientData {
            needed: 3,
            got: config.mesh_sizes.len(),
        }));
    }
    let problem = config.build_problem()?;
    let reference = study_reference(&problem, config)?;
    let methods = config.method.methods();
    let options = solve_options(config);

    let mut cells: Vec<(Method, usize, usize)> = Vec::new();
    for &method in &methods {
        for &p in &config.orders {
            for &n in &config.mesh_sizes {
                cells.push((method, p, n));
            }
        }
    }
    let pool = thread_pool();
    let results: Result<Vec<ConvergenceCell>, CliError> = pool.install(|| {
        cells
            .par_iter()
            .map(|&(method, degree, n)| {
                let space = make_space(&problem, n, degree, method)?;
                let (u, _) = newton_solve(&space, &problem.model, &problem.source, &options)?;
                let err = error_norms(&u, &reference);
                Ok(ConvergenceCell {
                    method,
                    degree,
                    n,
                    h: problem.domain_length / n as f64,
                    err_l2: err.l2,
                    err_h1: err.h1_semi,
                })
            })
            .collect()
    });
    let results = results?;

    let dir = ensure_output_dir(config)?;
    let mut table = CsvTable::new([
        "method", "p", "N", "h", "err_l2", "err_h1", "slope_l2", "slope_h1",
    ]);
    let mut h1_series = Vec::new();
    let mut l2_series = Vec::new();
    for &method in &methods {
        for &p in &config.orders {
            let series: Vec<&ConvergenceCell> = results
                .iter()
                .filter(|c| c.method == method && c.degree == p)
                .collect();
            let hs: Vec<f64> = series.iter().map(|c| c.h).collect();
            let l2s: Vec<f64> = series.iter().map(|c| c.err_l2).collect();
            let h1s: Vec<f64> = series.iter().map(|c| c.err_h1).collect();
            let slope_l2 = fit_slope(&hs, &l2s)?;
            let slope_h1 = fit_slope(&hs, &h1s)?;
            for (k, cell) in series.iter().enumerate() {
                let last = k + 1 == series.len();
                table.push_row([
                    cell.method.as_str().to_string(),
                    cell.degree.to_string(),
                    cell.n.to_string(),
                    fmt_f64(cell.h),
                    fmt_f64(cell.err_l2),
                    fmt_f64(cell.err_h1),
                    if last {
                        fmt_f64(slope_l2)
                    } else {
                        String::new()
                    },
                    if last {
                        fmt_f64(slope_h1)
                    } else {
                        String::new()
                    },
                ]);
            }
            let label = format!("{} p={}", method.as_str(), p);
            h1_series.push(Series {
                label: label.clone(),
                xs: hs.clone(),
                ys: h1s,
                annotation: Some(format!("slope {slope_h1:.2}")),
            });
            l2_series.push(Series {
                label,
                xs: hs,
                ys: l2s,
                annotation: Some(format!("slope {slope_l2:.2}")),
            });
        }
    }
    table.write(&dir.join("rates.csv"))?;
    std::fs::write(
        dir.join("h1.svg"),
        loglog_svg("H1-seminorm error vs h", "h", "|u - u_h|_1", &h1_series),
    )?;
    std::fs::write(
        dir.join("l2.svg"),
        loglog_svg("L2 error vs h", "h", "||u - u_h||", &l2_series),
    )?;
    Ok(())
}

struct ConservationCell {
    degree: usize,
    n: usize,
    h: f64,
    volumes: Vec<(f64, f64)>,
    lce_unconstrained: Vec<f64>,
    lce_constrained: Vec<f64>,
    mean_unconstrained: f64,
    mean_constrained: f64,
    err_h1: Option<f64>,
    err_l2: Option<f64>,
    err_l2_corrected: Option<f64>,
}

/// Conservation study: per-volume conservation errors for unconstrained and
/// constrained solves, mean errors vs h, and the multiplier-corrected L2
/// series. Writes `lce.csv`, `lce_mean.csv`, `rates_lc.csv`, and plots.
pub fn cmd_conservation(config: &RunConfig) -> Result<(), CliError> {
    config.validate()?;
    if !config.constrained {
        return Err(CliError::Usage(
            "conservation study requires constrained=true".into(),
        ));
    }
    let method = single_method(config)?;
    let problem = config.build_problem()?;
    let options = solve_options(config);

    let mut cells: Vec<(usize, usize)> = Vec::new();
    for &p in &config.orders {
        for &n in &config.mesh_sizes {
            cells.push((p, n));
        }
    }
    let pool = thread_pool();
    let results: Result<Vec<ConservationCell>, CliError> = pool.install(|| {
        cells
            .par_iter()
            .map(|&(degree, n)| {
                let space = make_space(&problem, n, degree, method)?;
                let cvs = build_control_volumes(space.mesh(), config.volumes)?;
                let (plain, _) = newton_solve(&space, &problem.model, &problem.source, &options)?;
                let constrained =
                    constrained_newton(&space, &problem.model, &problem.source, &cvs, &options)?;
                let (lce_u, mean_u) = lce(&problem.model, &problem.source, &plain, &cvs)?;
                let (lce_c, mean_c) =
                    lce(&problem.model, &problem.source, &constrained.solution, &cvs)?;
                let (err_h1, err_l2, err_l2_corrected) = match &problem.reference {
                    Some(reference) => {
                        let err = error_norms(&constrained.solution, reference);
                        let corrected = lambda_corrected_l2(
                            &constrained.solution,
                            &constrained.multipliers,
                            &cvs,
                            reference,
                        )?;
                        (Some(err.h1_semi), Some(err.l2), Some(corrected))
                    }
                    None => (None, None, None),
                };
                Ok(ConservationCell {
                    degree,
                    n,
                    h: problem.domain_length / n as f64,
                    volumes: cvs
                        .volumes()
                        .iter()
                        .map(|v| (v.left(), v.right()))
                        .collect(),
                    lce_unconstrained: lce_u,
                    lce_constrained: lce_c,
                    mean_unconstrained: mean_u,
                    mean_constrained: mean_c,
                    err_h1,
                    err_l2,
                    err_l2_corrected,
                })
            })
            .collect()
    });
    let results = results?;
    let dir = ensure_output_dir(config)?;

    let mut lce_table = CsvTable::new([
        "p",
        "N",
        "volume",
        "t_left",
        "t_right",
        "lce_unconstrained",
        "lce_constrained",
    ]);
    for cell in &results {
        for (i, &(tl, tr)) in cell.volumes.iter().enumerate() {
            lce_table.push_row([
                cell.degree.to_string(),
                cell.n.to_string(),
                i.to_string(),
                fmt_f64(tl),
                fmt_f64(tr),
                fmt_f64(cell.lce_unconstrained[i]),
                fmt_f64(cell.lce_constrained[i]),
            ]);
        }
    }
    lce_table.write(&dir.join("lce.csv"))?;

    let mut mean_table = CsvTable::new([
        "p",
        "N",
        "h",
        "mean_abs_lce_unconstrained",
        "mean_abs_lce_constrained",
    ]);
    for cell in &results {
        mean_table.push_row([
            cell.degree.to_string(),
            cell.n.to_string(),
            fmt_f64(cell.h),
            fmt_f64(cell.mean_unconstrained),
            fmt_f64(cell.mean_constrained),
        ]);
    }
    mean_table.write(&dir.join("lce_mean.csv"))?;

    let mut rates_table = CsvTable::new([
        "p",
        "N",
        "h",
        "err_h1",
        "err_l2",
        "err_l2_corrected",
        "slope_h1",
        "slope_l2",
        "slope_l2_corrected",
    ]);
    let mut mean_series = Vec::new();
    let mut corrected_series = Vec::new();
    for &p in &config.orders {
        let series: Vec<&ConservationCell> = results.iter().filter(|c| c.degree == p).collect();
        let hs: Vec<f64> = series.iter().map(|c| c.h).collect();
        // slope fits only when errors exist (reference present)
        let fits = if series.iter().all(|c| c.err_h1.is_some()) && hs.len() >= 3 {
            let h1s: Vec<f64> = series.iter().map(|c| c.err_h1.unwrap()).collect();
            let l2s: Vec<f64> = series.iter().map(|c| c.err_l2.unwrap()).collect();
            let cor: Vec<f64> = series.iter().map(|c| c.err_l2_corrected.unwrap()).collect();
            Some((
                fit_slope(&hs, &h1s)?,
                fit_slope(&hs, &l2s)?,
                fit_slope(&hs, &cor)?,
                h1s,
                l2s,
                cor,
            ))
        } else {
            None
        };
        for (k, cell) in series.iter().enumerate() {
            let last = k + 1 == series.len();
            let fmt_opt = |v: Option<f64>| v.map(fmt_f64).unwrap_or_default();
            let (s1, s2, s3) = match (&fits, last) {
                (Some((a, b, c, ..)), true) => (fmt_f64(*a), fmt_f64(*b), fmt_f64(*c)),
                _ => (String::new(), String::new(), String::new()),
            };
            rates_table.push_row([
                cell.degree.to_string(),
                cell.n.to_string(),
                fmt_f64(cell.h),
                fmt_opt(cell.err_h1),
                fmt_opt(cell.err_l2),
                fmt_opt(cell.err_l2_corrected),
                s1,
                s2,
                s3,
            ]);
        }
        mean_series.push(Series {
            label: format!("unconstrained p={p}"),
            xs: hs.clone(),
            ys: series.iter().map(|c| c.mean_unconstrained).collect(),
            annotation: None,
        });
        mean_series.push(Series {
            label: format!("constrained p={p}"),
            xs: hs.clone(),
            ys: series
                .iter()
                .map(|c| c.mean_constrained.max(1e-18))
                .collect(),
            annotation: None,
        });
        if let Some((_, slope_l2, slope_cor, _, l2s, cor)) = fits {
            corrected_series.push(Series {
                label: format!("l2 constrained p={p}"),
                xs: hs.clone(),
                ys: l2s,
                annotation: Some(format!("slope {slope_l2:.2}")),
            });
            corrected_series.push(Series {
                label: format!("l2 corrected p={p}"),
                xs: hs,
                ys: cor,
                annotation: Some(format!("slope {slope_cor:.2}")),
            });
        }
    }
    rates_table.write(&dir.join("rates_lc.csv"))?;
    std::fs::write(
        dir.join("lce_mean.svg"),
        loglog_svg("mean |LCE| vs h", "h", "mean |LCE|", &mean_series),
    )?;
    std::fs::write(
        dir.join("rates_lc.svg"),
        loglog_svg("constrained L2 error vs h", "h", "error", &corrected_series),
    )?;
    Ok(())
}

struct InterpCell {
    degree: usize,
    n: usize,
    h: f64,
    std_h1: f64,
    enr_h1: f64,
    std_w16: f64,
    enr_w16: f64,
}

/// Interpolation study: H1 and W^{1,6} seminorm errors of the standard and
/// enriched interpolants of the reference solution. Writes
/// `interp_rates.csv`.
pub fn cmd_interp_study(config: &RunConfig) -> Result<(), CliError> {
    config.validate()?;
    let problem = config.build_problem()?;
    let reference = problem.reference.clone().ok_or_else(|| {
        CliError::Usage("interpolation study needs a problem with a reference solution".into())
    })?;

    let mut cells: Vec<(usize, usize)> = Vec::new();
    for &p in &config.orders {
        for &n in &config.mesh_sizes {
            cells.push((p, n));
        }
    }
    let pool = thread_pool();
    let results: Result<Vec<InterpCell>, CliError> = pool.install(|| {
        cells
            .par_iter()
            .map(|&(degree, n)| {
                let space = make_space(&problem, n, degree, Method::Sgfem)?;
                let std_interp = standard_interpolant(&space, |x| reference.value(x));
                let enr_interp = enriched_interpolant(&space, |x| reference.value(x))?;
                let std_err = error_norms(&std_interp, &reference);
                let enr_err = error_norms(&enr_interp, &reference);
                Ok(InterpCell {
                    degree,
                    n,
                    h: problem.domain_length / n as f64,
                    std_h1: std_err.h1_semi,
                    enr_h1: enr_err.h1_semi,
                    std_w16: std_err.w16_semi,
                    enr_w16: enr_err.w16_semi,
                })
            })
            .collect()
    });
    let results = results?;
    let dir = ensure_output_dir(config)?;

    let mut table = CsvTable::new([
        "p",
        "N",
        "h",
        "std_h1",
        "enr_h1",
        "std_w16",
        "enr_w16",
        "slope_std_h1",
        "slope_enr_h1",
        "slope_std_w16",
        "slope_enr_w16",
    ]);
    for &p in &config.orders {
        let series: Vec<&InterpCell> = results.iter().filter(|c| c.degree == p).collect();
        let hs: Vec<f64> = series.iter().map(|c| c.h).collect();
        let slopes = if hs.len() >= 3 {
            Some((
                fit_slope(&hs, &series.iter().map(|c| c.std_h1).collect::<Vec<_>>())?,
                fit_slope(&hs, &series.iter().map(|c| c.enr_h1).collect::<Vec<_>>())?,
                fit_slope(&hs, &series.iter().map(|c| c.std_w16).collect::<Vec<_>>())?,
                fit_slope(&hs, &series.iter().map(|c| c.enr_w16).collect::<Vec<_>>())?,
            ))
        } else {
            None
        };
        for (k, cell) in series.iter().enumerate() {
            let last = k + 1 == series.len();
            let (s1, s2, s3, s4) = match (&slopes, last) {
                (Some((a, b, c, d)), true) => (fmt_f64(*a), fmt_f64(*b), fmt_f64(*c), fmt_f64(*d)),
                _ => Default::default(),
            };
            table.push_row([
                cell.degree.to_string(),
                cell.n.to_string(),
                fmt_f64(cell.h),
                fmt_f64(cell.std_h1),
                fmt_f64(cell.enr_h1),
                fmt_f64(cell.std_w16),
                fmt_f64(cell.enr_w16),
                s1,
                s2,
                s3,
                s4,
            ]);
        }
    }
    table.write(&dir.join("interp_rates.csv"))?;
    Ok(())
}
