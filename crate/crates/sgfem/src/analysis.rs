//! Error norms against reference solutions, standard and enriched
//! interpolants, local conservation error metrics, and convergence-rate
//! estimation.
//!
//! The enriched interpolant is the workhorse for rate studies: on elements
//! without an interface it is plain nodal interpolation, and on an interface
//! element `(x_l, x_r)` with kink at `gamma` it matches the unique
//! continuous piecewise polynomial of degree `p` interpolating at the
//! `2p + 1` points `x_l + i (gamma - x_l)/p` and `gamma + i (x_r - gamma)/p`.
//! Its coefficients `(alpha, beta)` in the basis `{phi_j, w phi_j}` solve a
//! `(2p + 2)` square system: the interpolation conditions plus one row that
//! annihilates the `x^{p+1}` term of `sum beta_j w phi_j`. Because `w` is
//! linear on each half, that top coefficient is (slope of w) times the
//! leading coefficient of `phi_j`, so a single annihilation row serves both
//! halves at once; the solver asserts the other half's leading term also
//! vanishes.

use crate::assembly::{conservation_errors, DiscreteSolution};
use crate::basis::{EnrichedSpace, LagrangeBasis};
use crate::linalg::{condition_estimate, lu_factor, Matrix};
use crate::mesh::{ControlVolumeSet, Interval};
use crate::problem::{CoefficientModel, ReferenceSolution, SourceFn};
use crate::quadrature::QuadRule;
use std::sync::Arc;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum AnalysisError {
    #[error("SingularLocalSystem: enriched interpolation system is singular on element ({left}, {right})")]
    SingularLocalSystem { left: f64, right: f64 },
    #[error("InsufficientData: need at least {needed} rows, got {got}")]
    InsufficientData { needed: usize, got: usize },
    #[error("DimensionMismatch: {what}: expected {expected}, got {got}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("NonpositiveError: error value {0} cannot enter a log-log fit")]
    NonpositiveError(f64),
}

/// Extra quadrature points for error integration, above the space degree.
const NORM_EXTRA_POINTS: usize = 5;

/// Error norms of `u - u_h`, whole-domain and per subdomain.
#[derive(Debug, Clone)]
pub struct ErrorReport {
    pub l2: f64,
    pub h1_semi: f64,
    pub w16_semi: f64,
    pub per_subdomain: Vec<SubdomainError>,
}

#[derive(Debug, Clone)]
pub struct SubdomainError {
    pub l2: f64,
    pub h1_semi: f64,
}

/// L2, H1-seminorm, and W^{1,6}-seminorm errors by interface-split Gauss
/// quadrature with `p + 5` points per (sub)interval.
pub fn error_norms(u_h: &DiscreteSolution, reference: &ReferenceSolution) -> ErrorReport {
    let space = u_h.space();
    let mesh = space.mesh();
    let rule = QuadRule::gauss(space.degree() + NORM_EXTRA_POINTS).expect("supported order");
    let m = mesh.subdomain_count();
    let mut l2_sq = vec![0.0; m];
    let mut h1_sq = vec![0.0; m];
    let mut w16_pow = vec![0.0; m];
    for e in 0..mesh.num_elements() {
        for (seg, side) in mesh.element_segments(e) {
            let j = mesh.subdomain_of(seg.midpoint()).expect("inside domain");
            let len = seg.length();
            for (&t, &wq) in rule.points().iter().zip(rule.weights()) {
                let x = seg.left() + t * len;
                let (uv, ud) = reference.eval_in(j, x);
                let (hv, hd) = u_h.eval_in_element(e, x, side);
                let scale = wq * len;
                l2_sq[j] += scale * (uv - hv) * (uv - hv);
                h1_sq[j] += scale * (ud - hd) * (ud - hd);
                w16_pow[j] += scale * (ud - hd).powi(6);
            }
        }
    }
    let per_subdomain = (0..m)
        .map(|j| SubdomainError {
            l2: l2_sq[j].sqrt(),
            h1_semi: h1_sq[j].sqrt(),
        })
        .collect();
    ErrorReport {
        l2: l2_sq.iter().sum::<f64>().sqrt(),
        h1_semi: h1_sq.iter().sum::<f64>().sqrt(),
        w16_semi: w16_pow.iter().sum::<f64>().powf(1.0 / 6.0),
        per_subdomain,
    }
}

/// Nodal interpolant: standard dofs take the nodal values, enriched dofs are
/// zero.
pub fn standard_interpolant(
    space: &Arc<EnrichedSpace>,
    v: impl Fn(f64) -> f64,
) -> DiscreteSolution {
    let mut out = DiscreteSolution::zeros(space.clone());
    for g in 0..space.dofs().standard_count() {
        out.coefficients_mut()[g] = v(space.node_position(g + 1));
    }
    out
}

/// Coefficients `(alpha, beta)` of the local enriched interpolant of `v` on
/// one interface element.
pub fn local_enriched_interpolation(
    element: Interval,
    gamma: f64,
    basis: &LagrangeBasis,
    v: impl Fn(f64) -> f64,
) -> Result<(Vec<f64>, Vec<f64>), AnalysisError> {
    let p = basis.degree();
    let (xl, xr) = (element.left(), element.right());
    let h = element.length();
    let w = crate::basis::EnrichmentFunction::new(element, gamma);

    // 2p + 1 interpolation points: p + 1 on the left half including gamma,
    // p more strictly right of gamma
    let mut points = Vec::with_capacity(2 * p + 1);
    for i in 0..=p {
        points.push(xl + i as f64 * (gamma - xl) / p as f64);
    }
    for i in 1..=p {
        points.push(gamma + i as f64 * (xr - gamma) / p as f64);
    }

    // The enrichment columns scale like the element size; equilibrate them
    // so the conditioning monitor sees the intrinsic geometry (it degrades
    // only when gamma crowds an endpoint), not the mesh size.
    let wscale = w.peak();
    let dim = 2 * p + 2;
    let mut a = Matrix::zeros(dim, dim);
    let mut rhs = vec![0.0; dim];
    for (row, &x) in points.iter().enumerate() {
        let xi = (x - xl) / h;
        let (wv, _) = w.eval(x);
        for jcol in 0..=p {
            let (phi, _) = basis.eval(jcol, xi).expect("index in range");
            a[(row, jcol)] = phi;
            a[(row, p + 1 + jcol)] = wv / wscale * phi;
        }
        rhs[row] = v(x);
    }
    // Annihilation of the x^{p+1} term: the product of the (linear) left
    // piece of w with phi_j has top coefficient slope_left * lead(phi_j).
    let leads = basis.leading_coefficients();
    let xi_gamma = (gamma - xl) / h;
    let slope_left = 2.0 * (1.0 - xi_gamma);
    let slope_right = -2.0 * xi_gamma;
    for jcol in 0..=p {
        a[(2 * p + 1, p + 1 + jcol)] = slope_left * leads[jcol] / wscale;
    }

    let lu = lu_factor(&a).map_err(|_| AnalysisError::SingularLocalSystem {
        left: xl,
        right: xr,
    })?;
    if let Ok(cond) = condition_estimate(&a) {
        if cond > 1e12 {
            eprintln!(
                "sgfem: warning: enriched interpolation system on ({xl}, {xr}) has condition estimate {cond:.3e}"
            );
        }
    }
    let mut q = lu.solve(&rhs).expect("dimensions match");
    for c in q[p + 1..].iter_mut() {
        *c /= wscale;
    }
    let (alpha, beta) = q.split_at(p + 1);

    // the right half's top-degree term must vanish under the same beta
    let right_lead: f64 = beta
        .iter()
        .zip(&leads)
        .map(|(b, l)| b * slope_right * l)
        .sum();
    let scale = beta.iter().fold(1.0f64, |m, b| m.max(b.abs()));
    debug_assert!(
        right_lead.abs() <= 1e-10 * scale.max(1.0),
        "right-half leading term {right_lead:.3e} did not vanish"
    );

    Ok((alpha.to_vec(), beta.to_vec()))
}

/// Global enriched interpolant: nodal interpolation away from interfaces,
/// the local kink interpolant on interface elements.
pub fn enriched_interpolant(
    space: &Arc<EnrichedSpace>,
    v: impl Fn(f64) -> f64,
) -> Result<DiscreteSolution, AnalysisError> {
    let mut out = standard_interpolant(space, &v);
    let mesh = space.mesh();
    for e in mesh.enriched_elements() {
        let gamma = mesh.interface_in(e).expect("enriched element");
        let iv = mesh.element(e);
        let (alpha, beta) = local_enriched_interpolation(iv, gamma, space.basis(), &v)?;
        let p = space.degree();
        for i in 0..=p {
            if let Some(g) = space.dofs().standard_global(e, i) {
                // shared endpoint dofs must agree with the nodal value the
                // neighbors already wrote
                if i == 0 || i == p {
                    let nodal = out.coefficients()[g];
                    debug_assert!(
                        (alpha[i] - nodal).abs() <= 1e-9 * nodal.abs().max(1.0),
                        "endpoint coefficient {} differs from nodal value {}",
                        alpha[i],
                        nodal
                    );
                }
                out.coefficients_mut()[g] = alpha[i];
            }
            if let Some(g) = space.dofs().enriched_global(e, i) {
                out.coefficients_mut()[g] = beta[i];
            }
        }
    }
    Ok(out)
}

/// Local conservation errors `C(w; w) - l_volume` per volume and their mean
/// absolute value.
pub fn lce(
    model: &CoefficientModel,
    f: &SourceFn,
    u_h: &DiscreteSolution,
    cvs: &ControlVolumeSet,
) -> Result<(Vec<f64>, f64), crate::assembly::AssemblyError> {
    conservation_errors(u_h.space(), model, f, u_h, cvs)
}

/// L2 norm of `u - u_h - lambda_hat`, where `lambda_hat` is piecewise
/// constant, equal to `lambda_i` on volume `i` and zero outside all volumes.
pub fn lambda_corrected_l2(
    u_h: &DiscreteSolution,
    lambda: &[f64],
    cvs: &ControlVolumeSet,
    reference: &ReferenceSolution,
) -> Result<f64, AnalysisError> {
    if lambda.len() != cvs.len() {
        return Err(AnalysisError::DimensionMismatch {
            what: "multiplier vector vs control volumes",
            expected: cvs.len(),
            got: lambda.len(),
        });
    }
    let space = u_h.space();
    let mesh = space.mesh();
    let rule = QuadRule::gauss(space.degree() + NORM_EXTRA_POINTS).expect("supported order");
    let mut total = 0.0;
    for e in 0..mesh.num_elements() {
        for (seg, side) in mesh.element_segments(e) {
            // further split at control-volume boundaries inside the segment
            let mut cuts = vec![seg.left()];
            for vol in cvs.volumes() {
                for t in [vol.left(), vol.right()] {
                    if t > seg.left() && t < seg.right() {
                        cuts.push(t);
                    }
                }
            }
            cuts.push(seg.right());
            cuts.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let j = mesh.subdomain_of(seg.midpoint()).expect("inside domain");
            for pair in cuts.windows(2).filter(|w| w[1] > w[0]) {
                let len = pair[1] - pair[0];
                let mid = 0.5 * (pair[0] + pair[1]);
                let shift = cvs.volume_containing(mid).map(|i| lambda[i]).unwrap_or(0.0);
                for (&t, &wq) in rule.points().iter().zip(rule.weights()) {
                    let x = pair[0] + t * len;
                    let (uv, _) = reference.eval_in(j, x);
                    let (hv, _) = u_h.eval_in_element(e, x, side);
                    total += wq * len * (uv - hv - shift) * (uv - hv - shift);
                }
            }
        }
    }
    Ok(total.sqrt())
}

/// One measured error at one grid cell.
#[derive(Debug, Clone)]
pub struct RateRow {
    pub degree: usize,
    pub n: usize,
    pub h: f64,
    pub kind: &'static str,
    pub value: f64,
}

/// Rows of (degree, N, h, error kind, error) plus slope queries.
#[derive(Debug, Clone, Default)]
pub struct RateTable {
    pub rows: Vec<RateRow>,
}

impl RateTable {
    pub fn push(&mut self, degree: usize, n: usize, h: f64, kind: &'static str, value: f64) {
        self.rows.push(RateRow {
            degree,
            n,
            h,
            kind,
            value,
        });
    }

    fn series(&self, degree: usize, kind: &str) -> (Vec<f64>, Vec<f64>) {
        let mut hs = Vec::new();
        let mut errs = Vec::new();
        for r in &self.rows {
            if r.degree == degree && r.kind == kind {
                hs.push(r.h);
                errs.push(r.value);
            }
        }
        (hs, errs)
    }

    /// Least-squares slope of log(error) vs log(h) for one series.
    pub fn slope(&self, degree: usize, kind: &str) -> Result<f64, AnalysisError> {
        let (hs, errs) = self.series(degree, kind);
        fit_slope(&hs, &errs)
    }

    /// Slopes between consecutive rows of one series.
    pub fn pairwise_slopes(&self, degree: usize, kind: &str) -> Result<Vec<f64>, AnalysisError> {
        let (hs, errs) = self.series(degree, kind);
        if hs.len() < 2 {
            return Err(AnalysisError::InsufficientData {
                needed: 2,
                got: hs.len(),
            });
        }
        let mut out = Vec::with_capacity(hs.len() - 1);
        for k in 1..hs.len() {
            if errs[k - 1] <= 0.0 || errs[k] <= 0.0 {
                return Err(AnalysisError::NonpositiveError(errs[k].min(errs[k - 1])));
            }
            out.push((errs[k].ln() - errs[k - 1].ln()) / (hs[k].ln() - hs[k - 1].ln()));
        }
        Ok(out)
    }
}

/// Least-squares slope of log(error) against log(h); needs at least three
/// points.
pub fn fit_slope(hs: &[f64], errors: &[f64]) -> Result<f64, AnalysisError> {
    if hs.len() < 3 || errors.len() != hs.len() {
        return Err(AnalysisError::InsufficientData {
            needed: 3,
            got: hs.len().min(errors.len()),
        });
    }
    for &e in errors {
        if e <= 0.0 {
            return Err(AnalysisError::NonpositiveError(e));
        }
    }
    let xs: Vec<f64> = hs.iter().map(|h| h.ln()).collect();
    let ys: Vec<f64> = errors.iter().map(|e| e.ln()).collect();
    let n = xs.len() as f64;
    let sx: f64 = xs.iter().sum();
    let sy: f64 = ys.iter().sum();
    let sxx: f64 = xs.iter().map(|x| x * x).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| x * y).sum();
    Ok((n * sxy - sx * sy) / (n * sxx - sx * sx))
}

/// Interpolation-rate study: H1- and W^{1,6}-seminorm errors of the standard
/// and enriched interpolants of `reference` across mesh sizes.
pub fn interpolation_rate_table(
    reference: &ReferenceSolution,
    interfaces: &[f64],
    domain_length: f64,
    degree: usize,
    mesh_sizes: &[usize],
    method: crate::basis::Method,
) -> Result<RateTable, AnalysisError> {
    let mut table = RateTable::default();
    for &n in mesh_sizes {
        let mesh = crate::mesh::Mesh::uniform(domain_length, n, interfaces)
            .expect("admissible study mesh");
        let space = EnrichedSpace::new(mesh, degree, method);
        let interp = match method {
            crate::basis::Method::Sgfem => enriched_interpolant(&space, |x| reference.value(x))?,
            crate::basis::Method::Fem => standard_interpolant(&space, |x| reference.value(x)),
        };
        let err = error_norms(&interp, reference);
        let h = domain_length / n as f64;
        table.push(degree, n, h, "h1", err.h1_semi);
        table.push(degree, n, h, "w16", err.w16_semi);
        table.push(degree, n, h, "l2", err.l2);
    }
    Ok(table)
}
