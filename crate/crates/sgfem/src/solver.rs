//! Nonlinear solvers: Newton iteration for the unconstrained Galerkin
//! problem and two Lagrange-multiplier iterations that enforce local
//! conservation over a set of control volumes.
//!
//! Newton iterates `u <- u + d` with `(A + B) d = r`, `r_g = l_g -
//! a(u; u, phi_g)`, declaring convergence when `||r||_inf` drops below the
//! absolute tolerance (1e-10 by default).
//!
//! The constrained solves seek a stationary point of the linearized energy
//! augmented with multipliers, i.e.
//!
//! ```text
//!     a(u; u, w) + sum_i lambda_i C_i(u; w) = l(w)    for all w,
//!     C_i(u; u) = l_i                                 for every volume i.
//! ```
//!
//! * [`constrained_fixed_point`] freezes the coefficient at the previous
//!   iterate and solves the resulting linear saddle system each pass,
//!   stopping on the step-change norm.
//! * [`constrained_newton`] updates `(u, lambda)` by a modified Newton step
//!   whose matrix uses the constraint linearization `Q` in both off-diagonal
//!   blocks and `A + B` in the leading block; the residual is exact, so the
//!   fixed points are exactly the solutions of the system above. It stops
//!   once the stacked residual norm has fallen by a relative factor
//!   (1e-10 by default) from its initial value.
//!
//! Both saddle systems are solved monolithically by dense LU.

use crate::assembly::{
    assemble_a, assemble_load, constraint_linearized_row, constraint_load, constraint_row,
    constraint_value, jacobian, residual, AssemblyError, DiscreteSolution,
};
use crate::basis::EnrichedSpace;
use crate::linalg::{self, inf_norm, lu_factor, Matrix};
use crate::mesh::ControlVolumeSet;
use crate::problem::{CoefficientModel, SourceFn};
use std::sync::Arc;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SolverError {
    #[error(
        "MaxIterationsExceeded: no convergence in {iterations} iterations, residual {residual:.3e}"
    )]
    MaxIterationsExceeded {
        iterations: usize,
        residual: f64,
        best: Box<(DiscreteSolution, SolveReport)>,
    },
    #[error("SingularJacobian: {0}")]
    SingularJacobian(#[source] linalg::LinalgError),
    #[error("SingularSaddleSystem: {0}")]
    SingularSaddleSystem(#[source] linalg::LinalgError),
    #[error("SingularMatrix: {0}")]
    SingularMatrix(#[source] linalg::LinalgError),
    #[error("ConstraintCountExceedsDimension: {constraints} constraints for {dimension} unknowns")]
    ConstraintCountExceedsDimension {
        constraints: usize,
        dimension: usize,
    },
    #[error(transparent)]
    Assembly(#[from] AssemblyError),
}

/// Iteration controls. `tol` is the absolute residual tolerance of [`newton_solve`]
/// and the step-change tolerance of [`constrained_fixed_point`]; `rel_tol` is
/// the residual reduction factor of [`constrained_newton`].
#[derive(Debug, Clone)]
pub struct SolveOptions {
    pub tol: f64,
    pub rel_tol: f64,
    pub max_iter: usize,
    pub initial: Option<Vec<f64>>,
    pub estimate_condition: bool,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            tol: 1e-10,
            rel_tol: 1e-10,
            max_iter: 50,
            initial: None,
            estimate_condition: false,
        }
    }
}

/// Residual growth factor over its running minimum that aborts an iteration.
const DIVERGENCE_GUARD: f64 = 1e4;
/// Fixed-point passes allowed before giving up.
const FIXED_POINT_MAX_PASSES: usize = 200;

/// What an iteration did. `history` holds the per-iteration residual norms
/// (step-change norms for the fixed-point iteration).
#[derive(Debug, Clone)]
pub struct SolveReport {
    pub iterations: usize,
    pub final_residual_inf: f64,
    pub converged: bool,
    pub condition_estimate: Option<f64>,
    pub history: Vec<f64>,
}

/// A constrained solve result: the solution, one multiplier per control
/// volume, and the iteration report.
#[derive(Debug, Clone)]
pub struct ConstrainedSolution {
    pub solution: DiscreteSolution,
    pub multipliers: Vec<f64>,
    pub report: SolveReport,
}

fn initial_iterate(space: &Arc<EnrichedSpace>, options: &SolveOptions) -> DiscreteSolution {
    match &options.initial {
        Some(c) => DiscreteSolution::from_coefficients(space.clone(), c.clone())
            .expect("initial guess has space dimension"),
        None => DiscreteSolution::zeros(space.clone()),
    }
}

/// Newton iteration for the unconstrained problem from the zero initial
/// guess (unless overridden). On `MaxIterationsExceeded` the error carries
/// the best iterate seen.
pub fn newton_solve(
    space: &Arc<EnrichedSpace>,
    model: &CoefficientModel,
    f: &SourceFn,
    options: &SolveOptions,
) -> Result<(DiscreteSolution, SolveReport), SolverError> {
    let mut u = initial_iterate(space, options);
    let mut r = residual(space, model, f, &u);
    let mut rnorm = inf_norm(&r);
    let mut history = vec![rnorm];
    let mut best = (u.clone(), rnorm);
    let mut min_norm = rnorm;
    let mut iterations = 0;
    let mut last_matrix: Option<Matrix> = None;

    while rnorm > options.tol {
        if iterations >= options.max_iter || rnorm > DIVERGENCE_GUARD * min_norm {
            let report = SolveReport {
                iterations,
                final_residual_inf: best.1,
                converged: false,
                condition_estimate: None,
                history,
            };
            return Err(SolverError::MaxIterationsExceeded {
                iterations,
                residual: best.1,
                best: Box::new((best.0, report)),
            });
        }
        let j = jacobian(space, model, &u);
        let lu = lu_factor(&j).map_err(SolverError::SingularJacobian)?;
        let delta = lu.solve(&r).map_err(SolverError::SingularJacobian)?;
        for (c, d) in u.coefficients_mut().iter_mut().zip(&delta) {
            *c += d;
        }
        iterations += 1;
        r = residual(space, model, f, &u);
        rnorm = inf_norm(&r);
        history.push(rnorm);
        if rnorm < best.1 {
            best = (u.clone(), rnorm);
        }
        min_norm = min_norm.min(rnorm);
        last_matrix = Some(j);
    }

    let condition_estimate = if options.estimate_condition {
        let m = match last_matrix {
            Some(m) => m,
            None => jacobian(space, model, &u),
        };
        Some(linalg::condition_estimate(&m).map_err(SolverError::SingularMatrix)?)
    } else {
        None
    };
    let report = SolveReport {
        iterations,
        final_residual_inf: rnorm,
        converged: true,
        condition_estimate,
        history,
    };
    Ok((u, report))
}

fn check_constraint_count(
    space: &EnrichedSpace,
    cvs: &ControlVolumeSet,
) -> Result<(), SolverError> {
    if cvs.len() >= space.dim() {
        return Err(SolverError::ConstraintCountExceedsDimension {
            constraints: cvs.len(),
            dimension: space.dim(),
        });
    }
    Ok(())
}

/// Assemble and solve the frozen-coefficient saddle system
/// `[A(v), C(v)^T; C(v), 0] [u; lambda] = [l; l*]`.
fn saddle_solve(
    space: &Arc<EnrichedSpace>,
    model: &CoefficientModel,
    load: &[f64],
    loads_cv: &[f64],
    v: &DiscreteSolution,
    cvs: &ControlVolumeSet,
) -> Result<(Vec<f64>, Vec<f64>), SolverError> {
    let n = space.dim();
    let m = cvs.len();
    let a = assemble_a(space, model, v);
    let mut kkt = Matrix::zeros(n + m, n + m);
    for i in 0..n {
        for j in 0..n {
            kkt[(i, j)] = a[(i, j)];
        }
    }
    for (i, volume) in cvs.volumes().iter().enumerate() {
        let row = constraint_row(space, model, v, volume)?;
        for (g, &c) in row.iter().enumerate() {
            kkt[(n + i, g)] = c;
            kkt[(g, n + i)] = c;
        }
    }
    let mut rhs = Vec::with_capacity(n + m);
    rhs.extend_from_slice(load);
    rhs.extend_from_slice(loads_cv);
    let lu = lu_factor(&kkt).map_err(SolverError::SingularSaddleSystem)?;
    let sol = lu.solve(&rhs).map_err(SolverError::SingularSaddleSystem)?;
    Ok((sol[..n].to_vec(), sol[n..].to_vec()))
}

/// Fixed-point iteration on the frozen-coefficient saddle system, stopping
/// when the iterate stops moving (`||u_new - u_old||_inf <= tol`).
pub fn constrained_fixed_point(
    space: &Arc<EnrichedSpace>,
    model: &CoefficientModel,
    f: &SourceFn,
    cvs: &ControlVolumeSet,
    options: &SolveOptions,
) -> Result<ConstrainedSolution, SolverError> {
    check_constraint_count(space, cvs)?;
    let load = assemble_load(space, f);
    let loads_cv: Vec<f64> = cvs
        .volumes()
        .iter()
        .map(|vol| constraint_load(space, f, vol))
        .collect();

    let mut v = initial_iterate(space, options);
    let mut history = Vec::new();
    for pass in 1..=FIXED_POINT_MAX_PASSES {
        let (u_new, lambda) = saddle_solve(space, model, &load, &loads_cv, &v, cvs)?;
        let step = u_new
            .iter()
            .zip(v.coefficients())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0f64, f64::max);
        history.push(step);
        v.coefficients_mut().copy_from_slice(&u_new);
        if step <= options.tol {
            return Ok(ConstrainedSolution {
                solution: v,
                multipliers: lambda,
                report: SolveReport {
                    iterations: pass,
                    final_residual_inf: step,
                    converged: true,
                    condition_estimate: None,
                    history,
                },
            });
        }
    }
    let final_step = *history.last().unwrap_or(&f64::INFINITY);
    let report = SolveReport {
        iterations: FIXED_POINT_MAX_PASSES,
        final_residual_inf: final_step,
        converged: false,
        condition_estimate: None,
        history,
    };
    Err(SolverError::MaxIterationsExceeded {
        iterations: FIXED_POINT_MAX_PASSES,
        residual: final_step,
        best: Box::new((v, report)),
    })
}

/// Stacked residual of the constrained stationarity system at `(u, lambda)`:
/// `[l - a(u;u,.) - sum lambda_i C_i(u; .); l* - C(u; u)]`.
fn constrained_residual(
    space: &Arc<EnrichedSpace>,
    model: &CoefficientModel,
    f: &SourceFn,
    u: &DiscreteSolution,
    lambda: &[f64],
    cvs: &ControlVolumeSet,
    loads_cv: &[f64],
) -> Result<Vec<f64>, SolverError> {
    let n = space.dim();
    let mut stacked = residual(space, model, f, u);
    stacked.resize(n + cvs.len(), 0.0);
    for (i, volume) in cvs.volumes().iter().enumerate() {
        let row = constraint_row(space, model, u, volume)?;
        for (g, &c) in row.iter().enumerate() {
            stacked[g] -= lambda[i] * c;
        }
        let cuu = constraint_value(model, u, u, volume)?;
        stacked[n + i] = loads_cv[i] - cuu;
    }
    Ok(stacked)
}

/// Modified Newton iteration on the constrained stationarity system. The
/// initial guess is one unconstrained Newton step from zero with zero
/// multipliers; with no constraints this reduces to plain Newton.
pub fn constrained_newton(
    space: &Arc<EnrichedSpace>,
    model: &CoefficientModel,
    f: &SourceFn,
    cvs: &ControlVolumeSet,
    options: &SolveOptions,
) -> Result<ConstrainedSolution, SolverError> {
    check_constraint_count(space, cvs)?;
    let n = space.dim();
    let m = cvs.len();
    let load = assemble_load(space, f);
    let loads_cv: Vec<f64> = cvs
        .volumes()
        .iter()
        .map(|vol| constraint_load(space, f, vol))
        .collect();

    // Warm start: one unconstrained Newton step from zero.
    let mut u = match &options.initial {
        Some(c) => DiscreteSolution::from_coefficients(space.clone(), c.clone())
            .expect("initial guess has space dimension"),
        None => {
            let zero = DiscreteSolution::zeros(space.clone());
            let j = jacobian(space, model, &zero);
            let lu = lu_factor(&j).map_err(SolverError::SingularJacobian)?;
            let r0 = residual(space, model, f, &zero);
            let delta = lu.solve(&r0).map_err(SolverError::SingularJacobian)?;
            DiscreteSolution::from_coefficients(space.clone(), delta).expect("dimension preserved")
        }
    };
    let mut lambda = vec![0.0; m];

    let mut stacked = constrained_residual(space, model, f, &u, &lambda, cvs, &loads_cv)?;
    let mut rnorm = inf_norm(&stacked);
    let r0norm = rnorm;
    // absolute floor: the warm start may already sit at machine precision
    let floor = 1e-14 * (1.0 + inf_norm(&load));
    let target = (options.rel_tol * r0norm).max(floor);
    let mut history = vec![rnorm];
    let mut min_norm = rnorm;
    let mut best: Option<(Vec<f64>, Vec<f64>, f64)> = None;
    let mut stalled = 0usize;
    let mut iterations = 0;
    let mut last_matrix: Option<Matrix> = None;
    // the matrix entries scale like kappa/h, so at fine meshes the smallest
    // representable residual can exceed rel_tol * r0 when a warm start makes
    // r0 tiny; a residual parked within a few orders of the target that no
    // longer improves is machine-converged
    let stagnation_ceiling = 1e3 * target;

    let take_step =
        |u: &mut DiscreteSolution, lambda: &mut Vec<f64>| -> Result<Matrix, SolverError> {
            // KKT update matrix: [A + B, Q^T; Q, 0]
            let j = jacobian(space, model, u);
            let mut kkt = Matrix::zeros(n + m, n + m);
            for i in 0..n {
                for jj in 0..n {
                    kkt[(i, jj)] = j[(i, jj)];
                }
            }
            for (i, volume) in cvs.volumes().iter().enumerate() {
                let q = constraint_linearized_row(space, model, u, volume)?;
                for (g, &c) in q.iter().enumerate() {
                    kkt[(n + i, g)] = c;
                    kkt[(g, n + i)] = c;
                }
            }
            let stacked = constrained_residual(space, model, f, u, lambda, cvs, &loads_cv)?;
            let lu = lu_factor(&kkt).map_err(SolverError::SingularSaddleSystem)?;
            let delta = lu
                .solve(&stacked)
                .map_err(SolverError::SingularSaddleSystem)?;
            for (c, d) in u.coefficients_mut().iter_mut().zip(&delta[..n]) {
                *c += d;
            }
            for (l, d) in lambda.iter_mut().zip(&delta[n..]) {
                *l += d;
            }
            Ok(kkt)
        };

    while rnorm > target {
        // machine-converged plateau: accept the best iterate seen
        if stalled >= 4 && min_norm <= stagnation_ceiling {
            if let Some((uc, lc, _)) = best.take() {
                u.coefficients_mut().copy_from_slice(&uc);
                lambda = lc;
                stacked = constrained_residual(space, model, f, &u, &lambda, cvs, &loads_cv)?;
                rnorm = inf_norm(&stacked);
            }
            break;
        }
        if iterations >= options.max_iter || rnorm > DIVERGENCE_GUARD * (min_norm + floor) {
            let report = SolveReport {
                iterations,
                final_residual_inf: rnorm,
                converged: false,
                condition_estimate: None,
                history,
            };
            return Err(SolverError::MaxIterationsExceeded {
                iterations,
                residual: rnorm,
                best: Box::new((u, report)),
            });
        }
        last_matrix = Some(take_step(&mut u, &mut lambda)?);
        iterations += 1;
        stacked = constrained_residual(space, model, f, &u, &lambda, cvs, &loads_cv)?;
        rnorm = inf_norm(&stacked);
        history.push(rnorm);
        if rnorm < min_norm {
            min_norm = rnorm;
            best = Some((u.coefficients().to_vec(), lambda.clone(), rnorm));
            stalled = 0;
        } else {
            stalled += 1;
        }
    }

    // One final correction when the constraint rows have not yet reached the
    // arithmetic floor: conservation is exact in theory, so leave it at
    // machine precision rather than at the stopping target.
    let constraint_scale = 1.0 + inf_norm(&loads_cv);
    let constraint_norm = inf_norm(&stacked[n..]);
    if m > 0 && constraint_norm > 1e-13 * constraint_scale && iterations < options.max_iter {
        last_matrix = Some(take_step(&mut u, &mut lambda)?);
        iterations += 1;
        stacked = constrained_residual(space, model, f, &u, &lambda, cvs, &loads_cv)?;
        rnorm = inf_norm(&stacked);
        history.push(rnorm);
    }

    let condition_estimate = if options.estimate_condition {
        match last_matrix {
            Some(m) => Some(linalg::condition_estimate(&m).map_err(SolverError::SingularMatrix)?),
            None => None,
        }
    } else {
        None
    };
    Ok(ConstrainedSolution {
        solution: u,
        multipliers: lambda,
        report: SolveReport {
            iterations,
            final_residual_inf: rnorm,
            converged: true,
            condition_estimate,
            history,
        },
    })
}

/// 1-norm condition estimate of a diagonally rescaled matrix; see
/// [`linalg::condition_estimate`].
pub fn condition_estimate(matrix: &Matrix) -> Result<f64, SolverError> {
    linalg::condition_estimate(matrix).map_err(SolverError::SingularMatrix)
}
