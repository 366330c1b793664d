//! Coefficient models, sources, and reference solutions.
//!
//! A coefficient model is a family of per-subdomain functions
//! `kappa_j(x, u)` together with their partial derivatives in `u`. Two
//! built-in benchmarks with exponential coefficients come with closed-form
//! solutions, assembled from the flux being an explicit antiderivative of the
//! source on each subdomain:
//!
//! * [`example1`]: three subdomains split at 1/3 and 2/3, pieces
//!   `exp(a_j u)`, source `f(x) = 5x`. The two free integration constants
//!   satisfy a 2x2 nonlinear continuity system solved here by damped Newton
//!   with a bisection fallback on a single-variable reduction.
//! * [`example2`]: four subdomains split at 1/3, 2/3 and 8/9, pieces
//!   `a_j exp(-u)`, source `f(x) = sin(pi x)`. All constants have closed
//!   forms.
//!
//! [`custom_problem`] wraps arbitrary user pieces for which no reference
//! solution is known.

use crate::mesh::Side;
use std::f64::consts::PI;
use std::sync::Arc;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ProblemError {
    #[error(
        "ConstantSolveFailed: nonlinear constant solve stagnated, final residual {residual:.3e}"
    )]
    ConstantSolveFailed { residual: f64 },
    #[error("DegenerateConstants: denominator r = {r:.3e} vanishes")]
    DegenerateConstants { r: f64 },
    #[error("PieceCountMismatch: {pieces} coefficient pieces for {interfaces} interfaces (need {expected})")]
    PieceCountMismatch {
        pieces: usize,
        interfaces: usize,
        expected: usize,
    },
    #[error(
        "NonpositiveCoefficient: piece {piece} evaluates to {value:.3e} at (x, u) = ({x}, {u})"
    )]
    NonpositiveCoefficient {
        piece: usize,
        x: f64,
        u: f64,
        value: f64,
    },
    #[error("InvalidParameter: {0}")]
    InvalidParameter(String),
}

pub type CoefficientFn = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;
pub type SourceFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Piecewise coefficient `kappa(x, u)` with its `u`-derivative per subdomain.
#[derive(Clone)]
pub struct CoefficientModel {
    interfaces: Vec<f64>,
    pieces: Vec<CoefficientFn>,
    derivative_pieces: Vec<CoefficientFn>,
    bounds: Option<(f64, f64)>,
}

impl CoefficientModel {
    pub fn new(
        interfaces: Vec<f64>,
        pieces: Vec<CoefficientFn>,
        derivative_pieces: Vec<CoefficientFn>,
    ) -> Result<Self, ProblemError> {
        let expected = interfaces.len() + 1;
        if pieces.len() != expected || derivative_pieces.len() != expected {
            return Err(ProblemError::PieceCountMismatch {
                pieces: pieces.len().min(derivative_pieces.len()),
                interfaces: interfaces.len(),
                expected,
            });
        }
        Ok(CoefficientModel {
            interfaces,
            pieces,
            derivative_pieces,
            bounds: None,
        })
    }

    pub fn subdomain_count(&self) -> usize {
        self.pieces.len()
    }

    pub fn interfaces(&self) -> &[f64] {
        &self.interfaces
    }

    /// kappa_j(x, u).
    pub fn kappa(&self, subdomain: usize, x: f64, u: f64) -> f64 {
        (self.pieces[subdomain])(x, u)
    }

    /// d kappa_j / du at (x, u).
    pub fn d2_kappa(&self, subdomain: usize, x: f64, u: f64) -> f64 {
        (self.derivative_pieces[subdomain])(x, u)
    }

    /// Sampled (min, max) of kappa over the expected solution range, when
    /// known. Diagnostic only.
    pub fn bounds(&self) -> Option<(f64, f64)> {
        self.bounds
    }

    fn with_bounds(mut self, bounds: (f64, f64)) -> Self {
        self.bounds = Some(bounds);
        self
    }
}

impl std::fmt::Debug for CoefficientModel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("CoefficientModel")
            .field("interfaces", &self.interfaces)
            .field("bounds", &self.bounds)
            .finish()
    }
}

pub type PieceEval = Arc<dyn Fn(f64) -> (f64, f64) + Send + Sync>;

/// A piecewise closed-form solution with analytic derivatives.
#[derive(Clone)]
pub struct ReferenceSolution {
    interfaces: Vec<f64>,
    pieces: Vec<PieceEval>,
    constants: Vec<(&'static str, f64)>,
}

impl ReferenceSolution {
    /// Wrap explicit piecewise evaluators (each returning `(u, u')`) split at
    /// the given interfaces. Useful for manufactured solutions.
    pub fn from_pieces(interfaces: Vec<f64>, pieces: Vec<PieceEval>) -> Self {
        assert_eq!(pieces.len(), interfaces.len() + 1);
        ReferenceSolution {
            interfaces,
            pieces,
            constants: Vec::new(),
        }
    }

    pub fn interfaces(&self) -> &[f64] {
        &self.interfaces
    }

    /// Named integration constants of the closed form.
    pub fn constants(&self) -> &[(&'static str, f64)] {
        &self.constants
    }

    pub fn constant(&self, name: &str) -> Option<f64> {
        self.constants
            .iter()
            .find(|(n, _)| *n == name)
            .map(|(_, v)| *v)
    }

    /// (u, u') inside subdomain `j`; the closure of the subdomain is allowed.
    pub fn eval_in(&self, j: usize, x: f64) -> (f64, f64) {
        (self.pieces[j])(x)
    }

    /// (u, u') with interface points resolved to the left subdomain.
    pub fn eval(&self, x: f64) -> (f64, f64) {
        let j = self.interfaces.partition_point(|&g| g < x);
        (self.pieces[j])(x)
    }

    /// One-sided evaluation where u' may kink.
    pub fn eval_side(&self, x: f64, side: Side) -> (f64, f64) {
        let j = match side {
            Side::Left => self.interfaces.partition_point(|&g| g < x),
            Side::Right => self.interfaces.partition_point(|&g| g <= x),
        };
        (self.pieces[j.min(self.pieces.len() - 1)])(x)
    }

    pub fn value(&self, x: f64) -> f64 {
        self.eval(x).0
    }
}

impl std::fmt::Debug for ReferenceSolution {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ReferenceSolution")
            .field("interfaces", &self.interfaces)
            .field("constants", &self.constants)
            .finish()
    }
}

/// A complete problem statement: geometry, coefficient, source, and (for the
/// built-in benchmarks) the reference solution.
#[derive(Clone)]
pub struct Problem {
    pub domain_length: f64,
    pub interfaces: Vec<f64>,
    pub model: CoefficientModel,
    pub source: SourceFn,
    pub reference: Option<ReferenceSolution>,
}

impl std::fmt::Debug for Problem {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Problem")
            .field("domain_length", &self.domain_length)
            .field("interfaces", &self.interfaces)
            .field("has_reference", &self.reference.is_some())
            .finish()
    }
}

/// Benchmark with pieces `exp(a_j u)` on (0, 1/3), (1/3, 2/3), (2/3, 1) and
/// source `f(x) = 5x`.
pub fn example1(a: [f64; 3]) -> Result<Problem, ProblemError> {
    if a.iter().any(|v| !v.is_finite()) {
        return Err(ProblemError::InvalidParameter(
            "parameters must be finite".into(),
        ));
    }
    let gammas = [1.0 / 3.0, 2.0 / 3.0];
    let (c1, b1) = example1_constants(a, gammas)?;
    let shifts = [0.0, b1, 5.0 / 6.0 - c1];

    // Feasibility: the log arguments stay positive across each subdomain.
    for j in 0..3 {
        let (lo, hi) = subdomain_span(1.0, &gammas, j);
        for k in 0..=200 {
            let x = lo + (hi - lo) * k as f64 / 200.0;
            if a[j] != 0.0 && 1.0 + a[j] * ex1_s_at(x, c1, shifts[j]) <= 0.0 {
                return Err(ProblemError::ConstantSolveFailed { residual: f64::NAN });
            }
        }
    }

    // u_j = Ginv_j(-5x^3/6 + C1 x + B_j) with Ginv_j(s) = ln(1 + a_j s)/a_j,
    // hence u' = (-5x^2/2 + C1) / (1 + a_j s) and kappa u' = -5x^2/2 + C1.
    let piece = |aj: f64, bj: f64| -> PieceEval {
        Arc::new(move |x: f64| {
            let s = ex1_s_at(x, c1, bj);
            let sp = -2.5 * x * x + c1;
            if aj == 0.0 {
                (s, sp)
            } else {
                let arg = 1.0 + aj * s;
                (arg.ln() / aj, sp / arg)
            }
        })
    };
    let reference = ReferenceSolution {
        interfaces: gammas.to_vec(),
        pieces: (0..3).map(|j| piece(a[j], shifts[j])).collect(),
        constants: vec![
            ("C1", c1),
            // constant of the middle piece in its log form; for a_1 = 0 the
            // additive shift itself is the natural constant
            ("C2", if a[1] != 0.0 { b1 + 1.0 / a[1] } else { b1 }),
            ("B1", b1),
        ],
    };

    let kappa_piece = |aj: f64| -> (CoefficientFn, CoefficientFn) {
        (
            Arc::new(move |_x: f64, u: f64| (aj * u).exp()),
            Arc::new(move |_x: f64, u: f64| aj * (aj * u).exp()),
        )
    };
    let (pieces, derivative_pieces) = a.iter().map(|&aj| kappa_piece(aj)).unzip();
    let model = CoefficientModel::new(gammas.to_vec(), pieces, derivative_pieces)?;
    let bounds = sample_graph_bounds(&model, &reference, 1.0);
    let model = model.with_bounds(bounds);

    Ok(Problem {
        domain_length: 1.0,
        interfaces: gammas.to_vec(),
        model,
        source: Arc::new(|x| 5.0 * x),
        reference: Some(reference),
    })
}

/// Benchmark with pieces `a_j exp(-u)` on the subdomains split at 1/3, 2/3,
/// 8/9 and source `f(x) = sin(pi x)`. All four integration constants have
/// closed forms.
pub fn example2(a: [f64; 4]) -> Result<Problem, ProblemError> {
    if a.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
        return Err(ProblemError::InvalidParameter(
            "parameters must be finite and positive".into(),
        ));
    }
    let g = [1.0 / 3.0, 2.0 / 3.0, 8.0 / 9.0];
    let [c1, c2, c3, c4] = example2_constants(a, g)?;

    // e^{-u} = E_j(x) piecewise; u = -ln E_j, u' = -E_j'/E_j, and the flux
    // relation reads kappa u' = cos(pi x)/pi + (1/pi + a_3 C2).
    let flux_const = 1.0 / PI + a[3] * c2;
    let make_piece = move |j: usize| -> PieceEval {
        let aj = a[j];
        let a3 = a[3];
        let (g1, g2) = (g[0], g[1]);
        Arc::new(move |x: f64| {
            let s = (PI * x).sin();
            let e = match j {
                0 => -s / (aj * PI * PI) + x / (aj * PI) - c1 * x + 1.0,
                1 => {
                    ((PI * g1).sin() - s) / (aj * PI * PI)
                        + (1.0 + a3 * PI * c2) * (g1 - x) / (aj * PI)
                        + c3
                }
                2 => {
                    ((PI * g2).sin() - s) / (aj * PI * PI)
                        + (1.0 + a3 * PI * c2) * (g2 - x) / (aj * PI)
                        + c4
                }
                _ => -s / (aj * PI * PI) + (1.0 - x) / (aj * PI) + c2 * (1.0 - x) + 1.0,
            };
            let ep = -(PI * x).cos() / (aj * PI) - flux_const / aj;
            (-e.ln(), -ep / e)
        })
    };

    let reference = ReferenceSolution {
        interfaces: g.to_vec(),
        pieces: (0..4).map(make_piece).collect(),
        constants: vec![("C1", c1), ("C2", c2), ("C3", c3), ("C4", c4)],
    };

    let kappa_piece = |aj: f64| -> (CoefficientFn, CoefficientFn) {
        (
            Arc::new(move |_x: f64, u: f64| aj * (-u).exp()),
            Arc::new(move |_x: f64, u: f64| -aj * (-u).exp()),
        )
    };
    let (pieces, derivative_pieces) = a.iter().map(|&aj| kappa_piece(aj)).unzip();
    let model = CoefficientModel::new(g.to_vec(), pieces, derivative_pieces)?;
    let bounds = sample_graph_bounds(&model, &reference, 1.0);
    let model = model.with_bounds(bounds);

    Ok(Problem {
        domain_length: 1.0,
        interfaces: g.to_vec(),
        model,
        source: Arc::new(|x| (PI * x).sin()),
        reference: Some(reference),
    })
}

/// A user-supplied piecewise problem with no reference solution. Pieces are
/// sampled for positivity over the declared `u` range before acceptance.
pub fn custom_problem(
    interfaces: Vec<f64>,
    pieces: Vec<CoefficientFn>,
    derivative_pieces: Vec<CoefficientFn>,
    source: SourceFn,
    domain_length: f64,
    u_range: (f64, f64),
) -> Result<Problem, ProblemError> {
    let model = CoefficientModel::new(interfaces.clone(), pieces, derivative_pieces)?;
    let mut kmin = f64::INFINITY;
    let mut kmax = f64::NEG_INFINITY;
    for j in 0..model.subdomain_count() {
        let (lo, hi) = subdomain_span(domain_length, &interfaces, j);
        for ix in 0..=20 {
            let x = lo + (hi - lo) * ix as f64 / 20.0;
            for iu in 0..=20 {
                let u = u_range.0 + (u_range.1 - u_range.0) * iu as f64 / 20.0;
                let v = model.kappa(j, x, u);
                if !(v > 0.0) {
                    return Err(ProblemError::NonpositiveCoefficient {
                        piece: j,
                        x,
                        u,
                        value: v,
                    });
                }
                kmin = kmin.min(v);
                kmax = kmax.max(v);
            }
        }
    }
    Ok(Problem {
        domain_length,
        interfaces,
        model: model.with_bounds((kmin, kmax)),
        source,
        reference: None,
    })
}

/// Shorthand for a piecewise-constant coefficient (a linear problem).
pub fn piecewise_constant_problem(
    interfaces: Vec<f64>,
    values: Vec<f64>,
    source: SourceFn,
    domain_length: f64,
) -> Result<Problem, ProblemError> {
    let pieces: Vec<CoefficientFn> = values
        .iter()
        .map(|&k| -> CoefficientFn { Arc::new(move |_, _| k) })
        .collect();
    let derivative_pieces: Vec<CoefficientFn> = values
        .iter()
        .map(|_| -> CoefficientFn { Arc::new(|_, _| 0.0) })
        .collect();
    custom_problem(
        interfaces,
        pieces,
        derivative_pieces,
        source,
        domain_length,
        (-1.0, 1.0),
    )
}

/// max/min of kappa over the graph of the reference solution, sampled at
/// `samples + 1` uniformly spaced points.
pub fn contrast_ratio(problem: &Problem, samples: usize) -> Option<f64> {
    let reference = problem.reference.as_ref()?;
    let m = &problem.model;
    let mut kmin = f64::INFINITY;
    let mut kmax = f64::NEG_INFINITY;
    for k in 0..=samples {
        let x = problem.domain_length * k as f64 / samples as f64;
        let j = problem.interfaces.partition_point(|&g| g < x);
        let (u, _) = reference.eval_in(j, x);
        let v = m.kappa(j, x, u);
        kmin = kmin.min(v);
        kmax = kmax.max(v);
    }
    Some(kmax / kmin)
}

fn sample_graph_bounds(
    model: &CoefficientModel,
    reference: &ReferenceSolution,
    length: f64,
) -> (f64, f64) {
    let mut kmin = f64::INFINITY;
    let mut kmax = f64::NEG_INFINITY;
    for k in 0..=10_000 {
        let x = length * k as f64 / 10_000.0;
        let j = reference.interfaces.partition_point(|&g| g < x);
        let (u, _) = reference.eval_in(j, x);
        let v = model.kappa(j, x, u);
        kmin = kmin.min(v);
        kmax = kmax.max(v);
    }
    (kmin, kmax)
}

fn subdomain_span(length: f64, interfaces: &[f64], j: usize) -> (f64, f64) {
    let lo = if j == 0 { 0.0 } else { interfaces[j - 1] };
    let hi = if j == interfaces.len() {
        length
    } else {
        interfaces[j]
    };
    (lo, hi)
}

// ---------------------------------------------------------------------------
// Integration constants of the closed-form solutions
// ---------------------------------------------------------------------------

/// G_j(u) = (e^{a u} - 1)/a (u itself for a = 0). The flux relation
/// kappa u' = -5x^2/2 + C1 integrates to G_j(u) = -5x^3/6 + C1 x + B_j on
/// each subdomain, so continuity at the two interfaces pins (C1, B1); the
/// boundary conditions give B_0 = 0 and B_2 = 5/6 - C1.
fn g_fwd(a: f64, u: f64) -> f64 {
    if a == 0.0 {
        u
    } else {
        (a * u).exp_m1() / a
    }
}

fn g_inv(a: f64, s: f64) -> Option<f64> {
    if a == 0.0 {
        Some(s)
    } else {
        let arg = 1.0 + a * s;
        (arg > 0.0).then(|| arg.ln() / a)
    }
}

fn ex1_s_at(x: f64, c1: f64, b: f64) -> f64 {
    -5.0 * x.powi(3) / 6.0 + c1 * x + b
}

/// Residual of the two continuity conditions in the (C1, B1) parametrization;
/// `None` when a log argument leaves its domain.
fn ex1_residual(a: [f64; 3], g: [f64; 2], c1: f64, b1: f64) -> Option<[f64; 2]> {
    let b2 = 5.0 / 6.0 - c1;
    let r1 = g_inv(a[0], ex1_s_at(g[0], c1, 0.0))? - g_inv(a[1], ex1_s_at(g[0], c1, b1))?;
    let r2 = g_inv(a[1], ex1_s_at(g[1], c1, b1))? - g_inv(a[2], ex1_s_at(g[1], c1, b2))?;
    Some([r1, r2])
}

fn ex1_jacobian(a: [f64; 3], g: [f64; 2], c1: f64, b1: f64) -> Option<[[f64; 2]; 2]> {
    let b2 = 5.0 / 6.0 - c1;
    let d = |aj: f64, s: f64| -> Option<f64> {
        if aj == 0.0 {
            Some(1.0)
        } else {
            let arg = 1.0 + aj * s;
            (arg > 0.0).then_some(1.0 / arg)
        }
    };
    let d00 = d(a[0], ex1_s_at(g[0], c1, 0.0))?;
    let d10 = d(a[1], ex1_s_at(g[0], c1, b1))?;
    let d11 = d(a[1], ex1_s_at(g[1], c1, b1))?;
    let d21 = d(a[2], ex1_s_at(g[1], c1, b2))?;
    Some([
        [g[0] * d00 - g[0] * d10, -d10],
        [g[1] * d11 - (g[1] - 1.0) * d21, d11],
    ])
}

/// Damped Newton on (C1, B1) from a given start; residual target 1e-13.
fn ex1_newton(a: [f64; 3], g: [f64; 2], start: (f64, f64)) -> Result<(f64, f64), ProblemError> {
    let (mut c1, mut b1) = start;
    let mut r = ex1_residual(a, g, c1, b1)
        .ok_or(ProblemError::ConstantSolveFailed { residual: f64::NAN })?;
    let mut rnorm = r[0].abs().max(r[1].abs());
    for _ in 0..100 {
        if rnorm <= 1e-13 {
            return Ok((c1, b1));
        }
        let j = ex1_jacobian(a, g, c1, b1)
            .ok_or(ProblemError::ConstantSolveFailed { residual: rnorm })?;
        let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
        if det.abs() < 1e-300 {
            return Err(ProblemError::ConstantSolveFailed { residual: rnorm });
        }
        let dc = (-r[0] * j[1][1] + r[1] * j[0][1]) / det;
        let db = (-j[0][0] * r[1] + j[1][0] * r[0]) / det;
        // backtrack until feasible and decreasing
        let mut advanced = false;
        let mut t = 1.0;
        while t > 1e-12 {
            let (cn, bn) = (c1 + t * dc, b1 + t * db);
            if let Some(rn) = ex1_residual(a, g, cn, bn) {
                let rn_norm = rn[0].abs().max(rn[1].abs());
                if rn_norm < rnorm {
                    c1 = cn;
                    b1 = bn;
                    r = rn;
                    rnorm = rn_norm;
                    advanced = true;
                    break;
                }
            }
            t *= 0.5;
        }
        if !advanced {
            return Err(ProblemError::ConstantSolveFailed { residual: rnorm });
        }
    }
    if rnorm <= 1e-13 {
        Ok((c1, b1))
    } else {
        Err(ProblemError::ConstantSolveFailed { residual: rnorm })
    }
}

/// B1 implied by continuity at the first interface for a given C1.
fn ex1_b1_of_c1(a: [f64; 3], g: [f64; 2], c1: f64) -> Option<f64> {
    let u_left = g_inv(a[0], ex1_s_at(g[0], c1, 0.0))?;
    Some(g_fwd(a[1], u_left) - ex1_s_at(g[0], c1, 0.0))
}

/// Remaining scalar equation (continuity at the second interface) after
/// eliminating B1 through the first.
fn ex1_phi(a: [f64; 3], g: [f64; 2], c1: f64) -> Option<f64> {
    let b1 = ex1_b1_of_c1(a, g, c1)?;
    let b2 = 5.0 / 6.0 - c1;
    let lhs = g_inv(a[1], ex1_s_at(g[1], c1, b1))?;
    let rhs = g_inv(a[2], ex1_s_at(g[1], c1, b2))?;
    Some(lhs - rhs)
}

pub(crate) fn example1_constants(a: [f64; 3], g: [f64; 2]) -> Result<(f64, f64), ProblemError> {
    example1_constants_from(a, g, (5.0 / 6.0, 0.0))
}

/// Solve the continuity system from an explicit Newton start. Falls back to
/// scanning for a sign change of the single-variable reduction and bisecting
/// when Newton cannot make progress (including an infeasible start).
pub(crate) fn example1_constants_from(
    a: [f64; 3],
    g: [f64; 2],
    start: (f64, f64),
) -> Result<(f64, f64), ProblemError> {
    if let Ok(found) = ex1_newton(a, g, start) {
        return Ok(found);
    }
    let (lo, hi, steps) = (-20.0, 20.0, 40_000usize);
    let mut prev: Option<(f64, f64)> = None;
    let mut bracket = None;
    for k in 0..=steps {
        let c = lo + (hi - lo) * k as f64 / steps as f64;
        match ex1_phi(a, g, c) {
            Some(v) => {
                if let Some((cp, vp)) = prev {
                    if vp * v <= 0.0 {
                        bracket = Some((cp, c));
                        break;
                    }
                }
                prev = Some((c, v));
            }
            None => prev = None,
        }
    }
    let (mut cl, mut cr) = bracket.ok_or(ProblemError::ConstantSolveFailed {
        residual: f64::INFINITY,
    })?;
    let mut fl = ex1_phi(a, g, cl).unwrap();
    for _ in 0..200 {
        let cm = 0.5 * (cl + cr);
        let fm = ex1_phi(a, g, cm).ok_or(ProblemError::ConstantSolveFailed {
            residual: f64::INFINITY,
        })?;
        if fl * fm <= 0.0 {
            cr = cm;
        } else {
            cl = cm;
            fl = fm;
        }
        if (cr - cl).abs() < 1e-16 * cl.abs().max(1.0) {
            break;
        }
    }
    let c1 = 0.5 * (cl + cr);
    let b1 = ex1_b1_of_c1(a, g, c1).ok_or(ProblemError::ConstantSolveFailed {
        residual: f64::INFINITY,
    })?;
    // The bisection output sits deep inside the feasible region; the damped
    // Newton polish reaches 1e-13 in a couple of steps.
    ex1_newton(a, g, (c1, b1))
}

pub(crate) fn example2_constants(a: [f64; 4], g: [f64; 3]) -> Result<[f64; 4], ProblemError> {
    let s = |x: f64| (PI * x).sin();
    let p = s(g[2]) / (a[3] * PI * PI)
        + (s(g[1]) - s(g[2])) / (a[2] * PI * PI)
        + (s(g[0]) - s(g[1])) / (a[1] * PI * PI)
        - s(g[0]) / (a[0] * PI * PI);
    let q = -g[0] / (a[0] * PI)
        + (g[0] - g[1]) / (a[1] * PI)
        + (g[1] - g[2]) / (a[2] * PI)
        + (g[2] - 1.0) / (a[3] * PI);
    let r =
        1.0 - g[2] + a[3] * g[0] / a[0] + a[3] * (g[1] - g[0]) / a[1] + a[3] * (g[2] - g[1]) / a[2];
    if r == 0.0 {
        return Err(ProblemError::DegenerateConstants { r });
    }
    let c2 = (p + q) / r;
    let c1 = 2.0 / (a[0] * PI) + a[3] * c2 / a[0];
    let c3 = -s(g[0]) / (a[0] * PI * PI) + g[0] / (a[0] * PI) + 1.0 - g[0] * c1;
    let c4 = (s(g[0]) - s(g[1])) / (a[1] * PI * PI)
        + (1.0 / (a[1] * PI) + a[3] * c2 / a[1]) * (g[0] - g[1])
        + c3;
    Ok([c1, c2, c3, c4])
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::{assert_abs_diff_eq, assert_relative_eq};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn reference_invariants(problem: &Problem) {
        let reference = problem.reference.as_ref().unwrap();
        let l = problem.domain_length;
        // boundary values
        assert_abs_diff_eq!(reference.eval_in(0, 0.0).0, 0.0, epsilon = 1e-10);
        let last = problem.interfaces.len();
        assert_abs_diff_eq!(reference.eval_in(last, l).0, 0.0, epsilon = 1e-10);
        for (j, &g) in problem.interfaces.iter().enumerate() {
            let (ul, dl) = reference.eval_in(j, g);
            let (ur, dr) = reference.eval_in(j + 1, g);
            assert_abs_diff_eq!(ul, ur, epsilon = 1e-10);
            let fl = problem.model.kappa(j, g, ul) * dl;
            let fr = problem.model.kappa(j + 1, g, ur) * dr;
            assert_abs_diff_eq!(fl, fr, epsilon = 1e-8);
        }
    }

    /// Substitute the reference into -(kappa(x,u) u')' - f with 5-point
    /// stencils on the flux.
    fn strong_form_residual(problem: &Problem) -> f64 {
        let reference = problem.reference.as_ref().unwrap();
        let mut worst = 0.0f64;
        for j in 0..problem.model.subdomain_count() {
            let (lo, hi) = subdomain_span(problem.domain_length, &problem.interfaces, j);
            let span = hi - lo;
            let h = span * 1e-4;
            let flux = |x: f64| {
                let (u, d) = reference.eval_in(j, x);
                -problem.model.kappa(j, x, u) * d
            };
            for k in 1..=50 {
                let x = lo + span * k as f64 / 51.0;
                // 5-point first-derivative stencil
                let d = (flux(x - 2.0 * h) - 8.0 * flux(x - h) + 8.0 * flux(x + h)
                    - flux(x + 2.0 * h))
                    / (12.0 * h);
                worst = worst.max((d - (problem.source)(x)).abs());
            }
        }
        worst
    }

    #[test]
    fn example1_linear_limit_has_closed_form() {
        let p = example1([0.0, 0.0, 0.0]).unwrap();
        let reference = p.reference.as_ref().unwrap();
        assert_relative_eq!(
            reference.constant("C1").unwrap(),
            5.0 / 6.0,
            epsilon = 1e-12
        );
        for k in 0..=20 {
            let x = k as f64 / 20.0;
            let expect = 5.0 / 6.0 * (x - x.powi(3));
            assert_abs_diff_eq!(reference.value(x), expect, epsilon = 1e-12);
        }
    }

    #[test]
    fn example1_reference_satisfies_problem() {
        let p = example1([0.01, -6.0, 1.0]).unwrap();
        reference_invariants(&p);
        assert!(strong_form_residual(&p) < 1e-6);
    }

    #[test]
    fn example1_constants_match_independent_solve() {
        // frozen from a bracketing + bisection solve of the continuity
        // system, cross-checked against boundary/continuity/flux invariants
        let (c1, b1) = example1_constants([0.01, -6.0, 1.0], [1.0 / 3.0, 2.0 / 3.0]).unwrap();
        assert_relative_eq!(c1, 0.7107705640558448, epsilon = 1e-10);
        assert_relative_eq!(b1, -0.08786105200698617, epsilon = 1e-10);
    }

    #[test]
    fn example1_contrast_ratio_near_reported_value() {
        let p = example1([0.01, -6.0, 1.0]).unwrap();
        let ratio = contrast_ratio(&p, 10_000).unwrap();
        assert!((ratio / 120.0 - 1.0).abs() < 0.01, "ratio = {ratio}");
    }

    #[test]
    fn example1_constant_solve_is_unique_from_random_starts() {
        let (c1_ref, b1_ref) =
            example1_constants([0.01, -6.0, 1.0], [1.0 / 3.0, 2.0 / 3.0]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut converged = 0;
        for _ in 0..10 {
            let start = (rng.gen_range(-5.0..5.0), rng.gen_range(-5.0..5.0));
            match example1_constants_from([0.01, -6.0, 1.0], [1.0 / 3.0, 2.0 / 3.0], start) {
                Ok((c1, b1)) => {
                    converged += 1;
                    assert_abs_diff_eq!(c1, c1_ref, epsilon = 1e-10);
                    assert_abs_diff_eq!(b1, b1_ref, epsilon = 1e-10);
                }
                Err(ProblemError::ConstantSolveFailed { .. }) => {}
                Err(other) => panic!("unexpected error {other:?}"),
            }
        }
        assert!(converged > 0);
    }

    #[test]
    fn example2_reference_satisfies_problem() {
        let p = example2([1.0, 0.05, 100.0, 0.1]).unwrap();
        reference_invariants(&p);
        assert!(strong_form_residual(&p) < 1e-6);
    }

    #[test]
    fn example2_single_material_limit() {
        let p = example2([1.0, 1.0, 1.0, 1.0]).unwrap();
        reference_invariants(&p);
        assert!(strong_form_residual(&p) < 1e-6);
    }

    #[test]
    fn example2_contrast_ratio_near_reported_value() {
        let p = example2([1.0, 0.05, 100.0, 0.1]).unwrap();
        let ratio = contrast_ratio(&p, 10_000).unwrap();
        assert!((ratio / 2684.0 - 1.0).abs() < 0.01, "ratio = {ratio}");
    }

    #[test]
    fn example2_rejects_nonpositive_parameters() {
        assert!(matches!(
            example2([1.0, -0.05, 100.0, 0.1]),
            Err(ProblemError::InvalidParameter(_))
        ));
    }

    #[test]
    fn example2_degenerate_denominator_is_caught() {
        // unreachable through the public constructor (positive parameters
        // keep r > 0); exercised directly on the raw constants routine
        let err = example2_constants([1.0, 1.0, -9.0, 1.0], [1.0 / 3.0, 2.0 / 3.0, 8.0 / 9.0]);
        // r = 1 - 8/9 + 1/3 + 1/3 - 2/9... pick parameters that zero it out
        // exactly: r = 1/9 + g1 + (g2-g1) + a3(g3-g2)/a2 with a3 = 1
        //        = 1/9 + 2/3 + (8/9 - 2/3)/a2; a2 = -(2/9)/(7/9) = -2/7
        let err2 = example2_constants(
            [1.0, 1.0, -2.0 / 7.0, 1.0],
            [1.0 / 3.0, 2.0 / 3.0, 8.0 / 9.0],
        );
        assert!(err.is_ok() || matches!(err, Err(ProblemError::DegenerateConstants { .. })));
        assert!(matches!(
            err2,
            Err(ProblemError::DegenerateConstants { .. })
        ));
    }

    #[test]
    fn custom_problem_validates_pieces() {
        let ok = piecewise_constant_problem(vec![0.5], vec![1.0, 2.0], Arc::new(|_| 1.0), 1.0);
        assert!(ok.is_ok());

        let mismatch =
            piecewise_constant_problem(vec![0.3, 0.7], vec![1.0, 2.0], Arc::new(|_| 1.0), 1.0);
        assert!(matches!(
            mismatch,
            Err(ProblemError::PieceCountMismatch { .. })
        ));

        let negative =
            piecewise_constant_problem(vec![0.5], vec![1.0, -1.0], Arc::new(|_| 1.0), 1.0);
        assert!(matches!(
            negative,
            Err(ProblemError::NonpositiveCoefficient { .. })
        ));
    }

    #[test]
    fn coefficient_derivative_matches_finite_differences() {
        for problem in [
            example1([0.01, -6.0, 1.0]).unwrap(),
            example2([1.0, 0.05, 100.0, 0.1]).unwrap(),
        ] {
            let m = &problem.model;
            let delta = 1e-5;
            for j in 0..m.subdomain_count() {
                let (lo, hi) = subdomain_span(1.0, &problem.interfaces, j);
                let x = 0.5 * (lo + hi);
                for &u in &[-0.3, 0.0, 0.4, 0.7] {
                    let fd = (m.kappa(j, x, u + delta) - m.kappa(j, x, u - delta)) / (2.0 * delta);
                    assert_relative_eq!(fd, m.d2_kappa(j, x, u), max_relative = 1e-8);
                }
            }
        }
    }

    #[test]
    fn kappa_stays_within_recorded_bounds() {
        for problem in [
            example1([0.01, -6.0, 1.0]).unwrap(),
            example2([1.0, 0.05, 100.0, 0.1]).unwrap(),
        ] {
            let (kmin, kmax) = problem.model.bounds().unwrap();
            assert!(kmin > 0.0 && kmin <= kmax);
            let reference = problem.reference.as_ref().unwrap();
            for k in 0..=777 {
                let x = k as f64 / 777.0;
                let j = problem.interfaces.partition_point(|&g| g < x);
                let (u, _) = reference.eval_in(j, x);
                let v = problem.model.kappa(j, x, u);
                assert!(v >= kmin * (1.0 - 1e-12) && v <= kmax * (1.0 + 1e-12));
            }
        }
    }
}
