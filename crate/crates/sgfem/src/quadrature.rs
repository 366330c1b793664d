//! Gauss-Legendre rules on [0, 1] and interface-splitting element
//! integration.
//!
//! Integrands here routinely have a kink at an interface point inside an
//! element (the coefficient jumps, the enrichment function bends), so element
//! integrals are always computed piecewise over the open halves on either
//! side of the interface. Quadrature nodes are strictly interior to each
//! (sub)interval and therefore never land on the interface itself.

use crate::mesh::{Mesh, Side};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum QuadratureError {
    #[error("UnsupportedOrder: point count {0} outside 1..=32")]
    UnsupportedOrder(usize),
}

/// A quadrature rule on the reference interval [0, 1] with positive weights
/// summing to one.
#[derive(Debug, Clone)]
pub struct QuadRule {
    points: Vec<f64>,
    weights: Vec<f64>,
}

impl QuadRule {
    /// n-point Gauss-Legendre rule, exact for polynomials of degree 2n - 1.
    pub fn gauss(n: usize) -> Result<Self, QuadratureError> {
        if !(1..=32).contains(&n) {
            return Err(QuadratureError::UnsupportedOrder(n));
        }
        let mut points = Vec::with_capacity(n);
        let mut weights = Vec::with_capacity(n);
        for i in 0..n {
            // Newton iteration on P_n over [-1, 1], cosine initial guess.
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            for _ in 0..100 {
                let (p, d) = legendre_with_derivative(n, x);
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, dp) = legendre_with_derivative(n, x);
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            points.push(0.5 * (1.0 - x)); // descending roots map to ascending points
            weights.push(0.5 * w);
        }
        Ok(QuadRule { points, weights })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Integrate `f` over [a, b].
    pub fn integrate<F: FnMut(f64) -> f64>(&self, a: f64, b: f64, mut f: F) -> f64 {
        let len = b - a;
        self.points
            .iter()
            .zip(&self.weights)
            .map(|(&t, &w)| w * len * f(a + t * len))
            .sum()
    }
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Integrate a callback over element `e`, splitting at the element's
/// interface when present. The callback receives the physical coordinate and
/// the side of the interface the current subinterval lies on (`Side::Left`
/// for whole elements).
pub fn integrate_element<F>(mesh: &Mesh, e: usize, rule: &QuadRule, mut f: F) -> f64
where
    F: FnMut(f64, Side) -> f64,
{
    mesh.element_segments(e)
        .into_iter()
        .map(|(seg, side)| rule.integrate(seg.left(), seg.right(), |x| f(x, side)))
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn one_point_rule_is_midpoint() {
        let r = QuadRule::gauss(1).unwrap();
        assert_eq!(r.len(), 1);
        assert_relative_eq!(r.points()[0], 0.5, epsilon = 1e-15);
        assert_relative_eq!(r.weights()[0], 1.0, epsilon = 1e-15);
    }

    #[test]
    fn two_point_rule_has_analytic_nodes() {
        let r = QuadRule::gauss(2).unwrap();
        let d = 1.0 / 3.0f64.sqrt();
        assert_relative_eq!(r.points()[0], 0.5 * (1.0 - d), epsilon = 1e-15);
        assert_relative_eq!(r.points()[1], 0.5 * (1.0 + d), epsilon = 1e-15);
    }

    #[test]
    fn quartic_is_exact_with_three_points() {
        let r = QuadRule::gauss(3).unwrap();
        let v = r.integrate(0.0, 1.0, |x| x.powi(4));
        assert_relative_eq!(v, 0.2, epsilon = 1e-14);
    }

    #[test]
    fn weights_positive_and_normalized() {
        for n in 1..=32 {
            let r = QuadRule::gauss(n).unwrap();
            assert!(r.weights().iter().all(|&w| w > 0.0));
            let s: f64 = r.weights().iter().sum();
            assert_relative_eq!(s, 1.0, epsilon = 1e-14);
            assert!(r.points().iter().all(|&p| 0.0 < p && p < 1.0));
        }
    }

    #[test]
    fn rules_reach_design_degree() {
        // exactness for degree 2n-1 monomials, relative 1e-13
        for n in [1usize, 2, 4, 8, 16, 32] {
            let r = QuadRule::gauss(n).unwrap();
            for k in [2 * n - 2, 2 * n - 1] {
                let v = r.integrate(0.0, 1.0, |x| x.powi(k as i32));
                let exact = 1.0 / (k as f64 + 1.0);
                assert_relative_eq!(v, exact, max_relative = 1e-13);
            }
        }
    }

    #[test]
    fn order_out_of_range_is_rejected() {
        assert!(matches!(
            QuadRule::gauss(0),
            Err(QuadratureError::UnsupportedOrder(0))
        ));
        assert!(matches!(
            QuadRule::gauss(33),
            Err(QuadratureError::UnsupportedOrder(33))
        ));
    }

    #[test]
    fn split_integration_is_exact_for_kinked_integrands() {
        let rule = QuadRule::gauss(2).unwrap();
        let mesh = crate::mesh::Mesh::from_nodes(vec![0.0, 1.0, 2.0], &[0.5]).unwrap();
        let v = integrate_element(&mesh, 0, &rule, |x, _| (x - 0.5).abs());
        assert_relative_eq!(v, 0.25, epsilon = 1e-15);

        let mesh2 = crate::mesh::Mesh::from_nodes(vec![0.0, 1.0, 2.0], &[0.25]).unwrap();
        let v2 = integrate_element(&mesh2, 0, &rule, |x, _| (x - 0.25).abs());
        assert_relative_eq!(v2, 0.3125, epsilon = 1e-15);
    }

    #[test]
    fn constant_integrand_gives_element_length() {
        let mesh = crate::mesh::Mesh::uniform(2.0, 5, &[0.51]).unwrap();
        let rule = QuadRule::gauss(3).unwrap();
        for e in 0..mesh.num_elements() {
            let v = integrate_element(&mesh, e, &rule, |_, _| 1.0);
            assert_relative_eq!(v, mesh.element(e).length(), epsilon = 1e-14);
        }
    }

    #[test]
    fn splitting_leaves_smooth_integrals_unchanged() {
        // same smooth integrand over (0,1) as one piece and as split pieces
        let rule = QuadRule::gauss(8).unwrap();
        let plain = Mesh::from_nodes(vec![0.0, 1.0, 2.0], &[]).unwrap();
        let split = Mesh::from_nodes(vec![0.0, 1.0, 2.0], &[0.37]).unwrap();
        let f = |x: f64| (3.0 * x).sin() * (-x).exp();
        let a = integrate_element(&plain, 0, &rule, |x, _| f(x));
        let b = integrate_element(&split, 0, &rule, |x, _| f(x));
        assert_relative_eq!(a, b, max_relative = 1e-12);
    }
}
