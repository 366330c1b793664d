//! Reference-element Lagrange shape functions of arbitrary order, the stable
//! kink enrichment, and the global degree-of-freedom map of the enriched
//! space.
//!
//! The enrichment attached to an element `tau = (x_l, x_r)` containing an
//! interface `gamma` is
//!
//! ```text
//!     w_tau(x) = (linear interpolant of |x - gamma| on tau) - |x - gamma|,
//! ```
//!
//! a continuous piecewise-linear bump supported on `tau`, vanishing at both
//! element endpoints, with its single kink at `gamma` and peak value
//! `2 (gamma - x_l)(x_r - gamma) / (x_r - x_l)`. Multiplying `w_tau` by each
//! of the `p + 1` local shape functions yields the enriched basis; subtracting
//! the interpolant is what keeps the stiffness conditioning comparable to the
//! unenriched space.

use crate::mesh::{Interval, Mesh, Side};
use std::sync::Arc;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum BasisError {
    #[error("IndexOutOfRange: index {index} not valid for {what} of size {size}")]
    IndexOutOfRange {
        index: usize,
        what: &'static str,
        size: usize,
    },
}

/// Whether the space carries interface enrichments.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    /// Standard continuous Galerkin space.
    Fem,
    /// Standard space plus kink enrichments on interface elements.
    Sgfem,
}

impl Method {
    pub fn as_str(&self) -> &'static str {
        match self {
            Method::Fem => "fem",
            Method::Sgfem => "sgfem",
        }
    }
}

/// Nodal Lagrange basis of degree `p` on [0, 1] with equispaced nodes.
#[derive(Debug, Clone)]
pub struct LagrangeBasis {
    degree: usize,
    nodes: Vec<f64>,
}

impl LagrangeBasis {
    pub fn new(degree: usize) -> Self {
        assert!(degree >= 1, "degree must be at least 1");
        let nodes = (0..=degree).map(|i| i as f64 / degree as f64).collect();
        LagrangeBasis { degree, nodes }
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn node_count(&self) -> usize {
        self.degree + 1
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    /// Value and derivative of shape function `i` at reference coordinate
    /// `xi`, by the product formula (exact at nodes, no barycentric
    /// singularities).
    pub fn eval(&self, i: usize, xi: f64) -> Result<(f64, f64), BasisError> {
        if i > self.degree {
            return Err(BasisError::IndexOutOfRange {
                index: i,
                what: "shape function",
                size: self.degree + 1,
            });
        }
        let ti = self.nodes[i];
        let mut value = 1.0;
        for (j, &tj) in self.nodes.iter().enumerate() {
            if j != i {
                value *= (xi - tj) / (ti - tj);
            }
        }
        let mut deriv = 0.0;
        for (k, &tk) in self.nodes.iter().enumerate() {
            if k == i {
                continue;
            }
            let mut term = 1.0 / (ti - tk);
            for (j, &tj) in self.nodes.iter().enumerate() {
                if j != i && j != k {
                    term *= (xi - tj) / (ti - tj);
                }
            }
            deriv += term;
        }
        Ok((value, deriv))
    }

    /// Tabulate all shape values and derivatives at `xi`.
    pub fn eval_all(&self, xi: f64, values: &mut [f64], derivs: &mut [f64]) {
        debug_assert_eq!(values.len(), self.node_count());
        debug_assert_eq!(derivs.len(), self.node_count());
        for i in 0..=self.degree {
            let (v, d) = self.eval(i, xi).expect("index in range");
            values[i] = v;
            derivs[i] = d;
        }
    }

    /// Coefficient of `xi^p` in each shape function: `1 / prod_{j != i}
    /// (t_i - t_j)`. Used to annihilate the top-degree term of products with
    /// the (linear) enrichment.
    pub fn leading_coefficients(&self) -> Vec<f64> {
        (0..=self.degree)
            .map(|i| {
                let ti = self.nodes[i];
                let denom: f64 = self
                    .nodes
                    .iter()
                    .enumerate()
                    .filter(|&(j, _)| j != i)
                    .map(|(_, &tj)| ti - tj)
                    .product();
                1.0 / denom
            })
            .collect()
    }
}

/// The stable kink enrichment supported on one element.
#[derive(Debug, Clone, Copy)]
pub struct EnrichmentFunction {
    element: Interval,
    gamma: f64,
}

impl EnrichmentFunction {
    pub fn new(element: Interval, gamma: f64) -> Self {
        assert!(
            element.left() < gamma && gamma < element.right(),
            "interface must lie strictly inside the element"
        );
        EnrichmentFunction { element, gamma }
    }

    pub fn element(&self) -> Interval {
        self.element
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    /// Peak value, attained at the interface.
    pub fn peak(&self) -> f64 {
        let dl = self.gamma - self.element.left();
        let dr = self.element.right() - self.gamma;
        2.0 * dl * dr / self.element.length()
    }

    /// Value and the (left, right) one-sided derivatives of the globally
    /// extended function (zero outside the element). The pair differs at the
    /// interface kink and at the element endpoints where the support ends.
    pub fn eval(&self, x: f64) -> (f64, (f64, f64)) {
        let (xl, xr) = (self.element.left(), self.element.right());
        if x < xl || x > xr {
            return (0.0, (0.0, 0.0));
        }
        let h = self.element.length();
        let dl = self.gamma - xl;
        let dr = xr - self.gamma;
        // linear interpolant of |x - gamma| through (xl, dl) and (xr, dr)
        let line = dl + (dr - dl) * (x - xl) / h;
        let line_slope = (dr - dl) / h;
        let value = line - (x - self.gamma).abs();
        let slope_left_of_gamma = line_slope + 1.0; // = 2 dr / h
        let slope_right_of_gamma = line_slope - 1.0; // = -2 dl / h
        let left = if x == xl {
            0.0
        } else if x <= self.gamma {
            slope_left_of_gamma
        } else {
            slope_right_of_gamma
        };
        let right = if x == xr {
            0.0
        } else if x < self.gamma {
            slope_left_of_gamma
        } else {
            slope_right_of_gamma
        };
        (value, (left, right))
    }

    /// One-sided derivative picked by `side`.
    pub fn deriv(&self, x: f64, side: Side) -> f64 {
        let (_, (l, r)) = self.eval(x);
        match side {
            Side::Left => l,
            Side::Right => r,
        }
    }
}

/// Global indexing of standard and enriched degrees of freedom.
///
/// Standard dofs are the interior Lagrange nodes `1 ..= pN - 1` (the two
/// boundary nodes are excluded by the homogeneous Dirichlet condition).
/// Enriched dofs, `p + 1` per interface element, are appended after the
/// standard block.
#[derive(Debug, Clone)]
pub struct DofMap {
    degree: usize,
    n_elements: usize,
    standard_count: usize,
    enriched_count: usize,
    enriched_slot: Vec<Option<usize>>,
    slot_element: Vec<usize>,
}

impl DofMap {
    fn new(mesh: &Mesh, degree: usize, method: Method) -> Self {
        let n = mesh.num_elements();
        let mut enriched_slot = vec![None; n];
        let mut slot_element = Vec::new();
        if method == Method::Sgfem {
            for e in mesh.enriched_elements() {
                enriched_slot[e] = Some(slot_element.len());
                slot_element.push(e);
            }
        }
        DofMap {
            degree,
            n_elements: n,
            standard_count: degree * n - 1,
            enriched_count: slot_element.len() * (degree + 1),
            enriched_slot,
            slot_element,
        }
    }

    pub fn dim(&self) -> usize {
        self.standard_count + self.enriched_count
    }

    pub fn standard_count(&self) -> usize {
        self.standard_count
    }

    pub fn enriched_count(&self) -> usize {
        self.enriched_count
    }

    /// Global index of local Lagrange node `local` of element `element`, or
    /// `None` for the two boundary nodes.
    pub fn standard_global(&self, element: usize, local: usize) -> Option<usize> {
        debug_assert!(local <= self.degree);
        let node = element * self.degree + local;
        if node == 0 || node == self.degree * self.n_elements {
            None
        } else {
            Some(node - 1)
        }
    }

    /// Global index of enriched dof `local` of element `element`, or `None`
    /// when the element carries no enrichment.
    pub fn enriched_global(&self, element: usize, local: usize) -> Option<usize> {
        debug_assert!(local <= self.degree);
        self.enriched_slot[element].map(|s| self.standard_count + s * (self.degree + 1) + local)
    }

    /// Element owning the enriched block `slot`.
    pub fn slot_element(&self, slot: usize) -> usize {
        self.slot_element[slot]
    }
}

/// The discrete space: mesh, reference basis, dof map, and per-element
/// enrichments. Immutable after construction; share it with [`Arc`].
#[derive(Debug, Clone)]
pub struct EnrichedSpace {
    mesh: Mesh,
    basis: LagrangeBasis,
    dofs: DofMap,
    enrichments: Vec<Option<EnrichmentFunction>>,
    method: Method,
}

impl EnrichedSpace {
    pub fn new(mesh: Mesh, degree: usize, method: Method) -> Arc<Self> {
        let basis = LagrangeBasis::new(degree);
        let dofs = DofMap::new(&mesh, degree, method);
        let enrichments = (0..mesh.num_elements())
            .map(|e| match method {
                Method::Sgfem => mesh
                    .interface_in(e)
                    .map(|g| EnrichmentFunction::new(mesh.element(e), g)),
                Method::Fem => None,
            })
            .collect();
        Arc::new(EnrichedSpace {
            mesh,
            basis,
            dofs,
            enrichments,
            method,
        })
    }

    pub fn mesh(&self) -> &Mesh {
        &self.mesh
    }

    pub fn basis(&self) -> &LagrangeBasis {
        &self.basis
    }

    pub fn dofs(&self) -> &DofMap {
        &self.dofs
    }

    pub fn method(&self) -> Method {
        self.method
    }

    pub fn degree(&self) -> usize {
        self.basis.degree()
    }

    pub fn dim(&self) -> usize {
        self.dofs.dim()
    }

    pub fn enrichment(&self, element: usize) -> Option<&EnrichmentFunction> {
        self.enrichments[element].as_ref()
    }

    /// Physical coordinate of global standard node `k` (0 ..= pN).
    pub fn node_position(&self, k: usize) -> f64 {
        let p = self.degree();
        let e = (k / p).min(self.mesh.num_elements() - 1);
        let i = k - e * p;
        let iv = self.mesh.element(e);
        iv.left() + i as f64 * iv.length() / p as f64
    }

    /// Value and one-sided derivative of global basis function `g` at `x`.
    ///
    /// Standard dofs return the hat-like Lagrange function, enriched dofs the
    /// product `w_tau * phi_k` with product-rule derivatives. Outside the
    /// support both are zero.
    pub fn eval_dof(&self, g: usize, x: f64, side: Side) -> Result<(f64, f64), BasisError> {
        if g >= self.dim() {
            return Err(BasisError::IndexOutOfRange {
                index: g,
                what: "global dof",
                size: self.dim(),
            });
        }
        let p = self.degree();
        if g < self.dofs.standard_count() {
            let node = g + 1;
            let e = match self.mesh.element_at(x, side) {
                Ok(e) => e,
                Err(_) => return Ok((0.0, 0.0)),
            };
            if node < e * p || node > e * p + p {
                return Ok((0.0, 0.0));
            }
            let local = node - e * p;
            let iv = self.mesh.element(e);
            let xi = (x - iv.left()) / iv.length();
            let (v, d) = self.basis.eval(local, xi)?;
            Ok((v, d / iv.length()))
        } else {
            let rel = g - self.dofs.standard_count();
            let slot = rel / (p + 1);
            let local = rel % (p + 1);
            let e = self.dofs.slot_element(slot);
            let w = self.enrichments[e].as_ref().expect("enriched element");
            let iv = self.mesh.element(e);
            if x < iv.left() || x > iv.right() {
                return Ok((0.0, 0.0));
            }
            let xi = (x - iv.left()) / iv.length();
            let (phi, dphi) = self.basis.eval(local, xi)?;
            let (wv, _) = w.eval(x);
            let wd = w.deriv(x, side);
            Ok((wv * phi, wd * phi + wv * dphi / iv.length()))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::{assert_abs_diff_eq, assert_relative_eq};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn linear_hat_values() {
        let b = LagrangeBasis::new(1);
        let (v, d) = b.eval(0, 0.25).unwrap();
        assert_relative_eq!(v, 0.75);
        assert_relative_eq!(d, -1.0);
    }

    #[test]
    fn quadratic_bubble_at_center() {
        let b = LagrangeBasis::new(2);
        let (v, d) = b.eval(1, 0.5).unwrap();
        assert_relative_eq!(v, 1.0);
        assert_abs_diff_eq!(d, 0.0, epsilon = 1e-14);
    }

    #[test]
    fn cubic_vanishes_at_foreign_node() {
        let b = LagrangeBasis::new(3);
        let (v, _) = b.eval(2, 1.0 / 3.0).unwrap();
        assert_abs_diff_eq!(v, 0.0, epsilon = 1e-14);
    }

    #[test]
    fn nodal_delta_property() {
        for p in 1..=4 {
            let b = LagrangeBasis::new(p);
            for i in 0..=p {
                for j in 0..=p {
                    let (v, _) = b.eval(i, b.nodes()[j]).unwrap();
                    let expect = if i == j { 1.0 } else { 0.0 };
                    assert_abs_diff_eq!(v, expect, epsilon = 1e-13);
                }
            }
        }
    }

    #[test]
    fn partition_of_unity_at_random_points() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for p in 1..=4 {
            let b = LagrangeBasis::new(p);
            for _ in 0..100 {
                let xi: f64 = rng.gen();
                let mut vsum = 0.0;
                let mut dsum = 0.0;
                for i in 0..=p {
                    let (v, d) = b.eval(i, xi).unwrap();
                    vsum += v;
                    dsum += d;
                }
                assert_abs_diff_eq!(vsum, 1.0, epsilon = 1e-12);
                assert_abs_diff_eq!(dsum, 0.0, epsilon = 1e-11);
            }
        }
    }

    #[test]
    fn shape_index_out_of_range() {
        let b = LagrangeBasis::new(2);
        assert!(matches!(
            b.eval(3, 0.5),
            Err(BasisError::IndexOutOfRange { .. })
        ));
    }

    #[test]
    fn enrichment_value_at_symmetric_kink() {
        let w = EnrichmentFunction::new(Interval::new(0.0, 1.0), 0.5);
        let (v, _) = w.eval(0.5);
        assert_relative_eq!(v, 0.5);
        assert_relative_eq!(w.peak(), 0.5);
    }

    #[test]
    fn enrichment_value_at_offset_kink() {
        // interpolant of |x - 1/4| runs from 0.25 to 0.75; at the kink the
        // function value is the interpolant value itself
        let w = EnrichmentFunction::new(Interval::new(0.0, 1.0), 0.25);
        let (v, _) = w.eval(0.25);
        assert_relative_eq!(v, 0.375);
    }

    #[test]
    fn enrichment_vanishes_at_endpoints_and_outside() {
        let w = EnrichmentFunction::new(Interval::new(0.0, 1.0), 0.5);
        assert_eq!(w.eval(0.0).0, 0.0);
        assert_eq!(w.eval(1.0).0, 0.0);
        assert_eq!(w.eval(1.5), (0.0, (0.0, 0.0)));
        assert_eq!(w.eval(-0.5), (0.0, (0.0, 0.0)));
    }

    #[test]
    fn enrichment_one_sided_slopes() {
        let w = EnrichmentFunction::new(Interval::new(1.0, 3.0), 1.5);
        // dl = 0.5, dr = 1.5, h = 2: slopes 2*dr/h = 1.5 and -2*dl/h = -0.5
        let (_, (l, r)) = w.eval(1.5);
        assert_relative_eq!(l, 1.5);
        assert_relative_eq!(r, -0.5);
        // away from the kink the two sides agree
        let (_, (l2, r2)) = w.eval(2.2);
        assert_relative_eq!(l2, r2);
        assert_relative_eq!(l2, -0.5);
    }

    #[test]
    fn enrichment_degenerates_gracefully() {
        // kink at midpoint -> peak h/2; kink toward an endpoint -> peak -> 0
        let h = 0.125;
        let mid = EnrichmentFunction::new(Interval::new(0.0, h), 0.5 * h);
        assert_relative_eq!(mid.peak(), 0.5 * h);
        let near = EnrichmentFunction::new(Interval::new(0.0, h), 1e-9 * h);
        assert!(near.peak() < 1e-8 * h);
    }

    fn space(n: usize, p: usize, gammas: &[f64], m: Method) -> Arc<EnrichedSpace> {
        EnrichedSpace::new(Mesh::uniform(1.0, n, gammas).unwrap(), p, m)
    }

    #[test]
    fn dof_counts() {
        let s = space(10, 2, &[1.0 / 3.0, 2.0 / 3.0], Method::Sgfem);
        assert_eq!(s.dofs().standard_count(), 19);
        assert_eq!(s.dofs().enriched_count(), 6);
        assert_eq!(s.dim(), 25);
        let f = space(10, 2, &[1.0 / 3.0, 2.0 / 3.0], Method::Fem);
        assert_eq!(f.dim(), 19);
        let no_gamma = space(10, 3, &[], Method::Sgfem);
        assert_eq!(no_gamma.dim(), 29);
    }

    #[test]
    fn boundary_nodes_have_no_dof() {
        let s = space(4, 3, &[], Method::Sgfem);
        assert_eq!(s.dofs().standard_global(0, 0), None);
        assert_eq!(s.dofs().standard_global(3, 3), None);
        assert_eq!(s.dofs().standard_global(0, 1), Some(0));
        assert_eq!(s.dofs().standard_global(3, 2), Some(10));
    }

    #[test]
    fn enriched_basis_is_product_of_factors() {
        let s = space(2, 2, &[0.25], Method::Sgfem);
        let w = s.enrichment(0).unwrap();
        let g = s.dofs().enriched_global(0, 1).unwrap();
        let x = 0.25;
        let (v, _) = s.eval_dof(g, x, Side::Left).unwrap();
        let (phi, _) = s.basis().eval(1, 0.5).unwrap();
        assert_relative_eq!(v, w.eval(x).0 * phi, epsilon = 1e-14);
    }

    #[test]
    fn enriched_basis_has_compact_support() {
        let s = space(5, 1, &[0.31], Method::Sgfem);
        let g = s.dofs().enriched_global(1, 0).unwrap();
        for &x in &[0.05, 0.55, 0.95] {
            assert_eq!(s.eval_dof(g, x, Side::Left).unwrap(), (0.0, 0.0));
        }
    }

    #[test]
    fn enriched_basis_continuous_across_interface_and_conforming() {
        let s = space(5, 2, &[0.31], Method::Sgfem);
        let eps = 1e-9;
        for local in 0..=2 {
            let g = s.dofs().enriched_global(1, local).unwrap();
            let (vl, _) = s.eval_dof(g, 0.31 - eps, Side::Left).unwrap();
            let (vr, _) = s.eval_dof(g, 0.31 + eps, Side::Right).unwrap();
            assert_abs_diff_eq!(vl, vr, epsilon = 1e-7);
            // vanishes at element endpoints, hence conforming in H^1_0
            let (v0, _) = s.eval_dof(g, 0.2, Side::Right).unwrap();
            let (v1, _) = s.eval_dof(g, 0.4, Side::Left).unwrap();
            assert_abs_diff_eq!(v0, 0.0, epsilon = 1e-14);
            assert_abs_diff_eq!(v1, 0.0, epsilon = 1e-14);
        }
    }

    #[test]
    fn standard_dof_derivative_is_one_sided_at_shared_nodes() {
        let s = space(4, 1, &[], Method::Sgfem);
        // global dof 0 is the hat at node 0.25
        let (_, dl) = s.eval_dof(0, 0.25, Side::Left).unwrap();
        let (_, dr) = s.eval_dof(0, 0.25, Side::Right).unwrap();
        assert_relative_eq!(dl, 4.0);
        assert_relative_eq!(dr, -4.0);
    }
}
