//! Discrete forms of the variational problem and the flux-balance constraint
//! functionals.
//!
//! With `u_h = sum_g c_g phi_g` over the (possibly enriched) space, the
//! assembled objects are, for test index `g` (rows) and trial index `g'`
//! (columns):
//!
//! ```text
//!     load:      l_g           = int f phi_g
//!     a-matrix:  A[g][g']      = int kappa(x, v) phi_g'' ... phi'_{g'} phi'_g
//!     b-matrix:  B[g][g']      = int D2kappa(x, v) v' phi_{g'} phi'_g
//!     residual:  r_g           = l_g - int kappa(x, v) v' phi'_g
//! ```
//!
//! The trial argument of the b-form enters undifferentiated, the test one
//! differentiated, so `A + B` is the Frechet derivative of the residual and
//! is what a Newton step factors. All element integrals split at the
//! element's interface so every integrand is smooth on each subinterval, and
//! the coefficient subdomain is resolved per subinterval.
//!
//! Conservation works with control volumes `(t_l, t_r)`:
//!
//! ```text
//!     C(v; w)   = -kappa(x, v) w'(x)                        evaluated t_l -> t_r
//!     Q(z)(w)   = -kappa(x, z) w' - D2kappa(x, z) z' w      evaluated t_l -> t_r
//!     l_volume  = int_{t_l}^{t_r} f
//! ```
//!
//! Derivatives at the endpoints are one-sided limits from inside the volume.
//! Endpoints that coincide with an interface are rejected: the discrete flux
//! jumps there and the functional would be ambiguous.

use crate::basis::EnrichedSpace;
use crate::linalg::Matrix;
use crate::mesh::{ControlVolumeSet, Interval, Side};
use crate::problem::{CoefficientModel, SourceFn};
use crate::quadrature::QuadRule;
use std::sync::Arc;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum AssemblyError {
    #[error("EndpointOnInterface: control volume endpoint {endpoint} sits on an interface")]
    EndpointOnInterface { endpoint: f64 },
    #[error("DimensionMismatch: coefficient vector length {got}, space dimension {expected}")]
    DimensionMismatch { expected: usize, got: usize },
}

/// Extra quadrature points beyond the polynomial degree for assembly. The
/// coefficient is generally non-polynomial, so exactness is unattainable;
/// this margin keeps quadrature error well below discretization error.
const ASSEMBLY_EXTRA_POINTS: usize = 3;

/// A coefficient vector over the enriched space, with point evaluation.
#[derive(Debug, Clone)]
pub struct DiscreteSolution {
    space: Arc<EnrichedSpace>,
    coefficients: Vec<f64>,
}

impl DiscreteSolution {
    pub fn zeros(space: Arc<EnrichedSpace>) -> Self {
        let n = space.dim();
        DiscreteSolution {
            space,
            coefficients: vec![0.0; n],
        }
    }

    pub fn from_coefficients(
        space: Arc<EnrichedSpace>,
        coefficients: Vec<f64>,
    ) -> Result<Self, AssemblyError> {
        if coefficients.len() != space.dim() {
            return Err(AssemblyError::DimensionMismatch {
                expected: space.dim(),
                got: coefficients.len(),
            });
        }
        Ok(DiscreteSolution {
            space,
            coefficients,
        })
    }

    pub fn space(&self) -> &Arc<EnrichedSpace> {
        &self.space
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coefficients
    }

    pub fn coefficients_mut(&mut self) -> &mut [f64] {
        &mut self.coefficients
    }

    /// Value at `x` (continuous, side-independent).
    pub fn eval(&self, x: f64) -> f64 {
        self.eval_with_deriv(x, Side::Left).0
    }

    /// One-sided derivative at `x`.
    pub fn deriv(&self, x: f64, side: Side) -> f64 {
        self.eval_with_deriv(x, side).1
    }

    /// (value, one-sided derivative) at `x`; zero outside [0, L].
    pub fn eval_with_deriv(&self, x: f64, side: Side) -> (f64, f64) {
        let mesh = self.space.mesh();
        let e = match mesh.element_at(x, side) {
            Ok(e) => e,
            Err(_) => return (0.0, 0.0),
        };
        self.eval_in_element(e, x, side)
    }

    /// (value, derivative) taking limits within element `e`.
    pub(crate) fn eval_in_element(&self, e: usize, x: f64, side: Side) -> (f64, f64) {
        let space = &self.space;
        let iv = space.mesh().element(e);
        let h = iv.length();
        let xi = (x - iv.left()) / h;
        let p = space.degree();
        let mut value = 0.0;
        let mut deriv = 0.0;
        let mut phis = vec![0.0; p + 1];
        let mut dphis = vec![0.0; p + 1];
        space.basis().eval_all(xi, &mut phis, &mut dphis);
        for i in 0..=p {
            if let Some(g) = space.dofs().standard_global(e, i) {
                let c = self.coefficients[g];
                value += c * phis[i];
                deriv += c * dphis[i] / h;
            }
        }
        if let Some(w) = space.enrichment(e) {
            let (wv, _) = w.eval(x);
            let wd = w.deriv(x, side);
            for i in 0..=p {
                if let Some(g) = space.dofs().enriched_global(e, i) {
                    let c = self.coefficients[g];
                    value += c * (wv * phis[i]);
                    deriv += c * (wd * phis[i] + wv * dphis[i] / h);
                }
            }
        }
        (value, deriv)
    }

    /// Discrete flux `-kappa(x, u_h) u_h'` with one-sided limits.
    pub fn flux(&self, model: &CoefficientModel, x: f64, side: Side) -> f64 {
        let mesh = self.space.mesh();
        let j = match side {
            Side::Left => mesh.subdomain_of(x).unwrap_or(0),
            Side::Right => mesh
                .interfaces()
                .partition_point(|&g| g <= x)
                .min(model.subdomain_count() - 1),
        };
        let (u, d) = self.eval_with_deriv(x, side);
        -model.kappa(j, x, u) * d
    }
}

/// An assembled linear system (matrix plus right-hand side).
#[derive(Debug, Clone)]
pub struct AssembledSystem {
    pub matrix: Matrix,
    pub rhs: Vec<f64>,
}

impl AssembledSystem {
    pub fn dim(&self) -> usize {
        self.rhs.len()
    }
}

fn default_rule(space: &EnrichedSpace) -> QuadRule {
    QuadRule::gauss(space.degree() + ASSEMBLY_EXTRA_POINTS).expect("supported order")
}

/// Per-quadrature-point basis table for one element.
struct ElementBasis {
    /// (global index, value, derivative) per local dof, at one point.
    entries: Vec<(usize, f64, f64)>,
}

fn tabulate(
    space: &EnrichedSpace,
    e: usize,
    x: f64,
    side: Side,
    phis: &mut [f64],
    dphis: &mut [f64],
) -> ElementBasis {
    let iv = space.mesh().element(e);
    let h = iv.length();
    let xi = (x - iv.left()) / h;
    let p = space.degree();
    space.basis().eval_all(xi, phis, dphis);
    let mut entries = Vec::with_capacity(2 * (p + 1));
    for i in 0..=p {
        if let Some(g) = space.dofs().standard_global(e, i) {
            entries.push((g, phis[i], dphis[i] / h));
        }
    }
    if let Some(w) = space.enrichment(e) {
        let (wv, _) = w.eval(x);
        let wd = w.deriv(x, side);
        for i in 0..=p {
            if let Some(g) = space.dofs().enriched_global(e, i) {
                entries.push((g, wv * phis[i], wd * phis[i] + wv * dphis[i] / h));
            }
        }
    }
    ElementBasis { entries }
}

/// Load vector `l_g = int f phi_g`, by interface-split quadrature.
pub fn assemble_load(space: &EnrichedSpace, f: &SourceFn) -> Vec<f64> {
    let rule = default_rule(space);
    let mesh = space.mesh();
    let p = space.degree();
    let mut out = vec![0.0; space.dim()];
    let mut phis = vec![0.0; p + 1];
    let mut dphis = vec![0.0; p + 1];
    for e in 0..mesh.num_elements() {
        for (seg, side) in mesh.element_segments(e) {
            let len = seg.length();
            for (&t, &wq) in rule.points().iter().zip(rule.weights()) {
                let x = seg.left() + t * len;
                let basis = tabulate(space, e, x, side, &mut phis, &mut dphis);
                let scale = wq * len * f(x);
                for &(g, v, _) in &basis.entries {
                    out[g] += scale * v;
                }
            }
        }
    }
    out
}

/// Stiffness-like matrix `A[g][g'] = int kappa(x, v) phi'_{g'} phi'_g`,
/// symmetric by construction.
pub fn assemble_a(space: &EnrichedSpace, model: &CoefficientModel, v: &DiscreteSolution) -> Matrix {
    assemble_a_ordered(space, model, v, None)
}

pub(crate) fn assemble_a_ordered(
    space: &EnrichedSpace,
    model: &CoefficientModel,
    v: &DiscreteSolution,
    order: Option<&[usize]>,
) -> Matrix {
    let rule = default_rule(space);
    let mesh = space.mesh();
    let p = space.degree();
    let mut m = Matrix::zeros(space.dim(), space.dim());
    let mut phis = vec![0.0; p + 1];
    let mut dphis = vec![0.0; p + 1];
    let default_order: Vec<usize> = (0..mesh.num_elements()).collect();
    let elements = order.unwrap_or(&default_order);
    for &e in elements {
        for (seg, side) in mesh.element_segments(e) {
            let j = mesh
                .subdomain_of(seg.midpoint())
                .expect("segment inside domain");
            let len = seg.length();
            for (&t, &wq) in rule.points().iter().zip(rule.weights()) {
                let x = seg.left() + t * len;
                let (uv, _) = v.eval_in_element(e, x, side);
                let k = model.kappa(j, x, uv);
                let basis = tabulate(space, e, x, side, &mut phis, &mut dphis);
                let scale = wq * len * k;
                for &(g_row, _, d_row) in &basis.entries {
                    for &(g_col, _, d_col) in &basis.entries {
                        m[(g_row, g_col)] += scale * d_row * d_col;
                    }
                }
            }
        }
    }
    m
}

/// Frechet coupling matrix `B[g][g'] = int D2kappa(x, v) v' phi_{g'} phi'_g`
/// (trial undifferentiated, test differentiated; not symmetric).
pub fn assemble_b(space: &EnrichedSpace, model: &CoefficientModel, v: &DiscreteSolution) -> Matrix {
    let rule = default_rule(space);
    let mesh = space.mesh();
    let p = space.degree();
    let mut m = Matrix::zeros(space.dim(), space.dim());
    let mut phis = vec![0.0; p + 1];
    let mut dphis = vec![0.0; p + 1];
    for e in 0..mesh.num_elements() {
        for (seg, side) in mesh.element_segments(e) {
            let j = mesh
                .subdomain_of(seg.midpoint())
                .expect("segment inside domain");
            let len = seg.length();
            for (&t, &wq) in rule.points().iter().zip(rule.weights()) {
                let x = seg.left() + t * len;
                let (uv, ud) = v.eval_in_element(e, x, side);
                let dk = model.d2_kappa(j, x, uv);
                let basis = tabulate(space, e, x, side, &mut phis, &mut dphis);
                let scale = wq * len * dk * ud;
                for &(g_row, _, d_row) in &basis.entries {
                    for &(g_col, v_col, _) in &basis.entries {
                        m[(g_row, g_col)] += scale * d_row * v_col;
                    }
                }
            }
        }
    }
    m
}

/// Residual `r_g = l_g - int kappa(x, v) v' phi'_g`.
pub fn residual(
    space: &EnrichedSpace,
    model: &CoefficientModel,
    f: &SourceFn,
    v: &DiscreteSolution,
) -> Vec<f64> {
    let rule = default_rule(space);
    let mesh = space.mesh();
    let p = space.degree();
    let mut out = assemble_load(space, f);
    let mut phis = vec![0.0; p + 1];
    let mut dphis = vec![0.0; p + 1];
    for e in 0..mesh.num_elements() {
        for (seg, side) in mesh.element_segments(e) {
            let j = mesh
                .subdomain_of(seg.midpoint())
                .expect("segment inside domain");
            let len = seg.length();
            for (&t, &wq) in rule.points().iter().zip(rule.weights()) {
                let x = seg.left() + t * len;
                let (uv, ud) = v.eval_in_element(e, x, side);
                let k = model.kappa(j, x, uv);
                let basis = tabulate(space, e, x, side, &mut phis, &mut dphis);
                let scale = wq * len * k * ud;
                for &(g, _, d) in &basis.entries {
                    out[g] -= scale * d;
                }
            }
        }
    }
    out
}

/// Newton matrix `A + B` at the iterate `v`.
pub fn jacobian(space: &EnrichedSpace, model: &CoefficientModel, v: &DiscreteSolution) -> Matrix {
    let a = assemble_a(space, model, v);
    let mut b = assemble_b(space, model, v);
    for i in 0..a.rows() {
        for j in 0..a.cols() {
            b[(i, j)] += a[(i, j)];
        }
    }
    b
}

fn check_endpoints(space: &EnrichedSpace, volume: &Interval) -> Result<(), AssemblyError> {
    for t in [volume.left(), volume.right()] {
        if space.mesh().is_interface(t) {
            return Err(AssemblyError::EndpointOnInterface { endpoint: t });
        }
    }
    Ok(())
}

fn subdomain_at(space: &EnrichedSpace, x: f64) -> usize {
    space.mesh().subdomain_of(x).expect("inside domain")
}

/// C(v; w) = -kappa(t_r, v) w'(t_r^-) + kappa(t_l, v) w'(t_l^+),
/// the net outflow of the linear-in-w flux across the volume boundary.
pub fn constraint_value(
    model: &CoefficientModel,
    v: &DiscreteSolution,
    w: &DiscreteSolution,
    volume: &Interval,
) -> Result<f64, AssemblyError> {
    check_endpoints(v.space(), volume)?;
    let (tl, tr) = (volume.left(), volume.right());
    let kl = model.kappa(subdomain_at(v.space(), tl), tl, v.eval(tl));
    let kr = model.kappa(subdomain_at(v.space(), tr), tr, v.eval(tr));
    Ok(-kr * w.deriv(tr, Side::Left) + kl * w.deriv(tl, Side::Right))
}

/// Row of C(v; phi_g) over every global dof.
pub fn constraint_row(
    space: &EnrichedSpace,
    model: &CoefficientModel,
    v: &DiscreteSolution,
    volume: &Interval,
) -> Result<Vec<f64>, AssemblyError> {
    check_endpoints(space, volume)?;
    let (tl, tr) = (volume.left(), volume.right());
    let kl = model.kappa(subdomain_at(space, tl), tl, v.eval(tl));
    let kr = model.kappa(subdomain_at(space, tr), tr, v.eval(tr));
    let mut row = vec![0.0; space.dim()];
    accumulate_endpoint(space, tr, Side::Left, &mut row, |_, d| -kr * d);
    accumulate_endpoint(space, tl, Side::Right, &mut row, |_, d| kl * d);
    Ok(row)
}

/// l_volume = int_{t_l}^{t_r} f, split at mesh nodes and interfaces.
pub fn constraint_load(space: &EnrichedSpace, f: &SourceFn, volume: &Interval) -> f64 {
    let rule = default_rule(space);
    let mesh = space.mesh();
    let mut cuts = vec![volume.left()];
    for &x in mesh.nodes() {
        if x > volume.left() && x < volume.right() {
            cuts.push(x);
        }
    }
    for &g in mesh.interfaces() {
        if g > volume.left() && g < volume.right() {
            cuts.push(g);
        }
    }
    cuts.push(volume.right());
    cuts.sort_by(|a, b| a.partial_cmp(b).unwrap());
    cuts.windows(2)
        .filter(|w| w[1] > w[0])
        .map(|w| rule.integrate(w[0], w[1], |x| f(x)))
        .sum()
}

/// [Q(z)](w) = [-kappa(x, z) w' - D2kappa(x, z) z' w] evaluated t_l -> t_r,
/// the linearization of v -> C(v; v) at z in the direction w.
pub fn constraint_linearized(
    model: &CoefficientModel,
    z: &DiscreteSolution,
    w: &DiscreteSolution,
    volume: &Interval,
) -> Result<f64, AssemblyError> {
    check_endpoints(z.space(), volume)?;
    let term = |t: f64, side: Side| {
        let j = subdomain_at(z.space(), t);
        let (zv, zd) = z.eval_with_deriv(t, side);
        let (wv, wd) = w.eval_with_deriv(t, side);
        -model.kappa(j, t, zv) * wd - model.d2_kappa(j, t, zv) * zd * wv
    };
    Ok(term(volume.right(), Side::Left) - term(volume.left(), Side::Right))
}

/// Row of [Q(z)](phi_g) over every global dof.
pub fn constraint_linearized_row(
    space: &EnrichedSpace,
    model: &CoefficientModel,
    z: &DiscreteSolution,
    volume: &Interval,
) -> Result<Vec<f64>, AssemblyError> {
    check_endpoints(space, volume)?;
    let mut row = vec![0.0; space.dim()];
    for (t, side, sign) in [
        (volume.right(), Side::Left, 1.0),
        (volume.left(), Side::Right, -1.0),
    ] {
        let j = subdomain_at(space, t);
        let (zv, zd) = z.eval_with_deriv(t, side);
        let k = model.kappa(j, t, zv);
        let dk = model.d2_kappa(j, t, zv);
        accumulate_endpoint(space, t, side, &mut row, |v, d| {
            sign * (-k * d - dk * zd * v)
        });
    }
    Ok(row)
}

/// Add `weight(phi_g, phi_g')` at a point to a dof-indexed row. Only dofs of
/// the element on the requested side have support there.
fn accumulate_endpoint(
    space: &EnrichedSpace,
    x: f64,
    side: Side,
    row: &mut [f64],
    weight: impl Fn(f64, f64) -> f64,
) {
    let mesh = space.mesh();
    let e = mesh.element_at(x, side).expect("endpoint inside domain");
    let iv = mesh.element(e);
    let h = iv.length();
    let xi = (x - iv.left()) / h;
    let p = space.degree();
    let mut phis = vec![0.0; p + 1];
    let mut dphis = vec![0.0; p + 1];
    space.basis().eval_all(xi, &mut phis, &mut dphis);
    for i in 0..=p {
        if let Some(g) = space.dofs().standard_global(e, i) {
            row[g] += weight(phis[i], dphis[i] / h);
        }
    }
    if let Some(w) = space.enrichment(e) {
        let (wv, _) = w.eval(x);
        let wd = w.deriv(x, side);
        for i in 0..=p {
            if let Some(g) = space.dofs().enriched_global(e, i) {
                row[g] += weight(wv * phis[i], wd * phis[i] + wv * dphis[i] / h);
            }
        }
    }
}

/// Local conservation error of `w`: C(w; w) - l_volume per volume, plus the
/// mean absolute value.
pub fn conservation_errors(
    space: &EnrichedSpace,
    model: &CoefficientModel,
    f: &SourceFn,
    w: &DiscreteSolution,
    cvs: &ControlVolumeSet,
) -> Result<(Vec<f64>, f64), AssemblyError> {
    let mut values = Vec::with_capacity(cvs.len());
    for volume in cvs.volumes() {
        let c = constraint_value(model, w, w, volume)?;
        values.push(c - constraint_load(space, f, volume));
    }
    let mean = values.iter().map(|v| v.abs()).sum::<f64>() / values.len().max(1) as f64;
    Ok((values, mean))
}
