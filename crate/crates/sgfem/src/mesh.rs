//! Partitions of (0, L) that deliberately do not conform to the coefficient
//! interfaces, plus control-volume collections for local conservation.
//!
//! Conventions:
//!
//! * Interfaces must fall strictly inside elements; a mesh whose node hits an
//!   interface (within `1e-14 * L`) is rejected rather than perturbed.
//! * An element may contain at most one interface.
//! * At an interface point itself, subdomain membership resolves to the left
//!   subdomain; computations that need one-sided values pass a [`Side`].

use thiserror::Error;

/// Absolute coincidence tolerance, relative to the domain length.
pub(crate) const COINCIDENCE_REL_TOL: f64 = 1e-14;

#[derive(Debug, Error)]
pub enum MeshError {
    #[error(
        "InterfaceOnNode: interface {gamma} coincides with mesh node {node} (tolerance {tol:.2e})"
    )]
    InterfaceOnNode { gamma: f64, node: f64, tol: f64 },
    #[error("TwoInterfacesInElement: element ({left}, {right}) would contain interfaces {gamma1} and {gamma2}")]
    TwoInterfacesInElement {
        left: f64,
        right: f64,
        gamma1: f64,
        gamma2: f64,
    },
    #[error("OutOfDomain: coordinate {x} lies outside [0, {length}]")]
    OutOfDomain { x: f64, length: f64 },
    #[error("InvalidPartition: {0}")]
    InvalidPartition(String),
    #[error("InvalidInterfaces: {0}")]
    InvalidInterfaces(String),
    #[error(
        "VolumeEndpointOnInterface: control volume endpoint {endpoint} coincides with interface {gamma}"
    )]
    VolumeEndpointOnInterface { endpoint: f64, gamma: f64 },
}

/// Which one-sided limit to take at a point where a quantity may jump.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Left,
    Right,
}

/// A nonempty open interval (a, b).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    left: f64,
    right: f64,
}

impl Interval {
    pub fn new(left: f64, right: f64) -> Self {
        assert!(left < right, "interval requires left < right");
        Interval { left, right }
    }

    pub fn left(&self) -> f64 {
        self.left
    }

    pub fn right(&self) -> f64 {
        self.right
    }

    pub fn length(&self) -> f64 {
        self.right - self.left
    }

    pub fn midpoint(&self) -> f64 {
        0.5 * (self.left + self.right)
    }

    pub fn contains(&self, x: f64) -> bool {
        self.left <= x && x <= self.right
    }
}

/// A partition of (0, L) with an interface registry.
#[derive(Debug, Clone)]
pub struct Mesh {
    nodes: Vec<f64>,
    domain_length: f64,
    interfaces: Vec<f64>,
    element_interface: Vec<Option<f64>>,
}

impl Mesh {
    /// Uniform partition of (0, `length`) into `n` elements.
    pub fn uniform(length: f64, n: usize, interfaces: &[f64]) -> Result<Self, MeshError> {
        if !(length > 0.0) {
            return Err(MeshError::InvalidPartition(format!(
                "domain length must be positive, got {length}"
            )));
        }
        if n < 2 {
            return Err(MeshError::InvalidPartition(format!(
                "need at least 2 elements, got {n}"
            )));
        }
        let nodes = (0..=n).map(|i| i as f64 * length / n as f64).collect();
        Mesh::from_nodes(nodes, interfaces)
    }

    /// Partition from an explicit strictly increasing node list starting at 0.
    pub fn from_nodes(nodes: Vec<f64>, interfaces: &[f64]) -> Result<Self, MeshError> {
        if nodes.len() < 2 {
            return Err(MeshError::InvalidPartition(
                "need at least two nodes".into(),
            ));
        }
        if nodes[0] != 0.0 {
            return Err(MeshError::InvalidPartition(format!(
                "first node must be 0, got {}",
                nodes[0]
            )));
        }
        if !nodes.windows(2).all(|w| w[0] < w[1]) {
            return Err(MeshError::InvalidPartition(
                "nodes must be strictly increasing".into(),
            ));
        }
        let length = *nodes.last().unwrap();
        if !interfaces.windows(2).all(|w| w[0] < w[1]) {
            return Err(MeshError::InvalidInterfaces(
                "interfaces must be strictly increasing".into(),
            ));
        }
        if interfaces.iter().any(|&g| g <= 0.0 || g >= length) {
            return Err(MeshError::InvalidInterfaces(format!(
                "interfaces must lie strictly inside (0, {length})"
            )));
        }
        let tol = COINCIDENCE_REL_TOL * length;
        for &g in interfaces {
            if let Some(&node) = nodes.iter().find(|&&x| (x - g).abs() <= tol) {
                return Err(MeshError::InterfaceOnNode {
                    gamma: g,
                    node,
                    tol,
                });
            }
        }
        let mut element_interface = vec![None; nodes.len() - 1];
        for &g in interfaces {
            let e = nodes.partition_point(|&x| x < g) - 1;
            if let Some(prev) = element_interface[e] {
                return Err(MeshError::TwoInterfacesInElement {
                    left: nodes[e],
                    right: nodes[e + 1],
                    gamma1: prev,
                    gamma2: g,
                });
            }
            element_interface[e] = Some(g);
        }
        Ok(Mesh {
            nodes,
            domain_length: length,
            interfaces: interfaces.to_vec(),
            element_interface,
        })
    }

    pub fn num_elements(&self) -> usize {
        self.nodes.len() - 1
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn domain_length(&self) -> f64 {
        self.domain_length
    }

    pub fn interfaces(&self) -> &[f64] {
        &self.interfaces
    }

    /// Number of subdomains, i.e. interface count + 1.
    pub fn subdomain_count(&self) -> usize {
        self.interfaces.len() + 1
    }

    pub fn element(&self, e: usize) -> Interval {
        Interval::new(self.nodes[e], self.nodes[e + 1])
    }

    /// Interface located inside element `e`, when present.
    pub fn interface_in(&self, e: usize) -> Option<f64> {
        self.element_interface[e]
    }

    /// Indices of elements that contain an interface.
    pub fn enriched_elements(&self) -> Vec<usize> {
        self.element_interface
            .iter()
            .enumerate()
            .filter_map(|(e, g)| g.map(|_| e))
            .collect()
    }

    pub fn h_max(&self) -> f64 {
        self.nodes
            .windows(2)
            .map(|w| w[1] - w[0])
            .fold(0.0, f64::max)
    }

    /// Element whose closure contains `x`, resolving node hits to the right
    /// element (except at x = L, which belongs to the last element).
    pub fn element_containing(&self, x: f64) -> Result<usize, MeshError> {
        if x < 0.0 || x > self.domain_length {
            return Err(MeshError::OutOfDomain {
                x,
                length: self.domain_length,
            });
        }
        let e = self.nodes.partition_point(|&v| v <= x);
        Ok(e.saturating_sub(1).min(self.num_elements() - 1))
    }

    /// Element providing the one-sided limit from `side` at `x`.
    pub fn element_at(&self, x: f64, side: Side) -> Result<usize, MeshError> {
        let e = self.element_containing(x)?;
        if side == Side::Left && e > 0 && x == self.nodes[e] {
            Ok(e - 1)
        } else {
            Ok(e)
        }
    }

    /// Subdomain index j with x in the closure of Omega_j; x equal to an
    /// interface resolves to the left subdomain.
    pub fn subdomain_of(&self, x: f64) -> Result<usize, MeshError> {
        if x < 0.0 || x > self.domain_length {
            return Err(MeshError::OutOfDomain {
                x,
                length: self.domain_length,
            });
        }
        Ok(self.interfaces.partition_point(|&g| g < x))
    }

    /// True when `x` coincides with an interface within the mesh tolerance.
    pub fn is_interface(&self, x: f64) -> bool {
        let tol = COINCIDENCE_REL_TOL * self.domain_length;
        self.interfaces.iter().any(|&g| (x - g).abs() <= tol)
    }

    /// Integration segments of element `e`: the element itself, or the two
    /// open halves split at its interface. `side` tags the position of a
    /// segment relative to that interface (`Left` for whole elements).
    pub fn element_segments(&self, e: usize) -> Vec<(Interval, Side)> {
        let iv = self.element(e);
        match self.element_interface[e] {
            Some(g) => vec![
                (Interval::new(iv.left(), g), Side::Left),
                (Interval::new(g, iv.right()), Side::Right),
            ],
            None => vec![(iv, Side::Left)],
        }
    }
}

/// Families of control volumes over which conservation is enforced.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CvKind {
    /// The whole domain as a single volume.
    WholeDomain,
    /// One volume per subdomain between consecutive interfaces.
    PerSubdomain,
    /// Volumes connecting midpoints of consecutive elements (N - 1 volumes).
    DualMidpoint,
}

impl CvKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            CvKind::WholeDomain => "whole-domain",
            CvKind::PerSubdomain => "per-subdomain",
            CvKind::DualMidpoint => "dual-midpoint",
        }
    }
}

/// An ordered, non-overlapping collection of control volumes.
#[derive(Debug, Clone)]
pub struct ControlVolumeSet {
    volumes: Vec<Interval>,
    kind: CvKind,
}

impl ControlVolumeSet {
    /// A set with no volumes; constrained solves degenerate to plain ones.
    pub fn empty() -> Self {
        ControlVolumeSet {
            volumes: Vec::new(),
            kind: CvKind::WholeDomain,
        }
    }

    pub fn volumes(&self) -> &[Interval] {
        &self.volumes
    }

    pub fn kind(&self) -> CvKind {
        self.kind
    }

    pub fn len(&self) -> usize {
        self.volumes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.volumes.is_empty()
    }

    /// Index of the volume containing `x`, if any.
    pub fn volume_containing(&self, x: f64) -> Option<usize> {
        self.volumes.iter().position(|v| v.contains(x))
    }
}

/// Build the control-volume family of the given kind.
///
/// Dual-midpoint endpoints may never coincide with an interface; such a
/// configuration is rejected because the flux there would be side-dependent.
pub fn build_control_volumes(mesh: &Mesh, kind: CvKind) -> Result<ControlVolumeSet, MeshError> {
    let volumes = match kind {
        CvKind::WholeDomain => vec![Interval::new(0.0, mesh.domain_length())],
        CvKind::PerSubdomain => {
            let mut cut = vec![0.0];
            cut.extend_from_slice(mesh.interfaces());
            cut.push(mesh.domain_length());
            cut.windows(2).map(|w| Interval::new(w[0], w[1])).collect()
        }
        CvKind::DualMidpoint => {
            let mids: Vec<f64> = (0..mesh.num_elements())
                .map(|e| mesh.element(e).midpoint())
                .collect();
            for &t in &mids {
                if mesh.is_interface(t) {
                    let gamma = *mesh
                        .interfaces()
                        .iter()
                        .min_by(|a, b| (*a - t).abs().partial_cmp(&(*b - t).abs()).unwrap())
                        .unwrap();
                    return Err(MeshError::VolumeEndpointOnInterface { endpoint: t, gamma });
                }
            }
            mids.windows(2).map(|w| Interval::new(w[0], w[1])).collect()
        }
    };
    Ok(ControlVolumeSet { volumes, kind })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn rejects_interface_on_node() {
        let err = Mesh::uniform(1.0, 3, &[1.0 / 3.0, 2.0 / 3.0]).unwrap_err();
        assert!(matches!(err, MeshError::InterfaceOnNode { .. }));
        assert!(err.to_string().contains("InterfaceOnNode"));
    }

    #[test]
    fn rejects_interface_on_node_within_tolerance() {
        let err = Mesh::uniform(1.0, 2, &[0.5 + 1e-16]).unwrap_err();
        assert!(matches!(err, MeshError::InterfaceOnNode { .. }));
    }

    #[test]
    fn rejects_two_interfaces_in_one_element() {
        let err = Mesh::uniform(1.0, 2, &[0.3, 0.4]).unwrap_err();
        assert!(matches!(err, MeshError::TwoInterfacesInElement { .. }));
    }

    #[test]
    fn classifies_enriched_elements() {
        let mesh = Mesh::uniform(1.0, 10, &[1.0 / 3.0, 2.0 / 3.0]).unwrap();
        assert_eq!(mesh.enriched_elements(), vec![3, 6]);
        let e3 = mesh.element(3);
        assert_relative_eq!(e3.left(), 0.3);
        assert_relative_eq!(e3.right(), 0.4);
        let e6 = mesh.element(6);
        assert_relative_eq!(e6.left(), 0.6);
        assert_relative_eq!(e6.right(), 0.7);
    }

    #[test]
    fn no_interfaces_means_no_enrichment() {
        let mesh = Mesh::uniform(1.0, 10, &[]).unwrap();
        assert!(mesh.enriched_elements().is_empty());
    }

    #[test]
    fn subdomain_lookup_uses_left_convention() {
        let mesh = Mesh::uniform(1.0, 10, &[1.0 / 3.0, 2.0 / 3.0]).unwrap();
        assert_eq!(mesh.subdomain_of(0.1).unwrap(), 0);
        assert_eq!(mesh.subdomain_of(0.5).unwrap(), 1);
        assert_eq!(mesh.subdomain_of(1.0 / 3.0).unwrap(), 0);
        assert!(matches!(
            mesh.subdomain_of(1.5),
            Err(MeshError::OutOfDomain { .. })
        ));
        let mesh3 = Mesh::uniform(1.0, 10, &[1.0 / 3.0, 2.0 / 3.0, 8.0 / 9.0]).unwrap();
        assert_eq!(mesh3.subdomain_of(0.95).unwrap(), 3);
    }

    #[test]
    fn dual_midpoint_volumes_connect_element_midpoints() {
        let mesh = Mesh::uniform(1.0, 4, &[]).unwrap();
        let cvs = build_control_volumes(&mesh, CvKind::DualMidpoint).unwrap();
        let expect = [(0.125, 0.375), (0.375, 0.625), (0.625, 0.875)];
        assert_eq!(cvs.len(), 3);
        for (v, (a, b)) in cvs.volumes().iter().zip(expect) {
            assert_relative_eq!(v.left(), a);
            assert_relative_eq!(v.right(), b);
        }
        // volumes tile (t_1, t_N) exactly
        for w in cvs.volumes().windows(2) {
            assert_eq!(w[0].right(), w[1].left());
        }
    }

    #[test]
    fn whole_domain_and_per_subdomain_volumes() {
        let mesh = Mesh::uniform(1.0, 10, &[1.0 / 3.0, 2.0 / 3.0, 8.0 / 9.0]).unwrap();
        let whole = build_control_volumes(&mesh, CvKind::WholeDomain).unwrap();
        assert_eq!(whole.len(), 1);
        assert_relative_eq!(whole.volumes()[0].left(), 0.0);
        assert_relative_eq!(whole.volumes()[0].right(), 1.0);
        let per = build_control_volumes(&mesh, CvKind::PerSubdomain).unwrap();
        assert_eq!(per.len(), 4);
    }

    #[test]
    fn dual_midpoint_rejects_interface_hit() {
        // element (0.25, 0.75) of the 2-element mesh has midpoint 0.5
        let mesh = Mesh::from_nodes(vec![0.0, 0.25, 0.75, 1.0], &[0.5]).unwrap();
        let err = build_control_volumes(&mesh, CvKind::DualMidpoint).unwrap_err();
        assert!(matches!(err, MeshError::VolumeEndpointOnInterface { .. }));
    }

    #[test]
    fn element_lengths_sum_to_domain() {
        for n in [2usize, 7, 33, 160] {
            let mesh = Mesh::uniform(1.0, n, &[std::f64::consts::FRAC_1_PI]).unwrap();
            let total: f64 = (0..mesh.num_elements())
                .map(|e| mesh.element(e).length())
                .sum();
            assert_relative_eq!(total, 1.0, max_relative = 1e-12);
        }
    }

    #[test]
    fn interfaces_strictly_inside_their_elements() {
        let mesh = Mesh::uniform(1.0, 160, &[1.0 / 3.0, 2.0 / 3.0, 8.0 / 9.0]).unwrap();
        for e in mesh.enriched_elements() {
            let iv = mesh.element(e);
            let g = mesh.interface_in(e).unwrap();
            assert!(iv.left() < g && g < iv.right());
        }
    }

    #[test]
    fn nonuniform_nodes_are_supported() {
        let mesh = Mesh::from_nodes(vec![0.0, 0.1, 0.5, 1.0], &[0.3]).unwrap();
        assert_eq!(mesh.num_elements(), 3);
        assert_eq!(mesh.interface_in(1), Some(0.3));
        assert_relative_eq!(mesh.h_max(), 0.5);
    }

    #[test]
    fn element_at_respects_one_sided_limits() {
        let mesh = Mesh::uniform(1.0, 4, &[]).unwrap();
        assert_eq!(mesh.element_at(0.5, Side::Left).unwrap(), 1);
        assert_eq!(mesh.element_at(0.5, Side::Right).unwrap(), 2);
        assert_eq!(mesh.element_at(0.0, Side::Right).unwrap(), 0);
        assert_eq!(mesh.element_at(1.0, Side::Left).unwrap(), 3);
    }
}
