//! Stable generalized finite elements (SGFEM) for one-dimensional quasilinear
//! elliptic two-point boundary value problems with coefficient interfaces.
//!
//! The equation solved is
//!
//! ```text
//!     -( kappa_j(x, u) u'(x) )' = f(x)   on each subdomain Omega_j,
//!     u(0) = u(L) = 0,
//! ```
//!
//! where the coefficient `kappa` jumps across a set of interior interface
//! points and may depend on the unknown `u` itself. Meshes deliberately do
//! not conform to the interfaces: every interface falls strictly inside an
//! element. A standard Lagrange space of arbitrary order is enriched on the
//! interface elements with products of a hat-like kink function and the local
//! shape functions, which restores optimal convergence rates without moving
//! mesh nodes, while keeping the conditioning comparable to plain FEM.
//!
//! What is here:
//!
//! * [`mesh`]: nonconforming partitions, interface bookkeeping, control
//!   volumes for local conservation.
//! * [`basis`]: arbitrary-order nodal Lagrange bases, the kink enrichment
//!   function, and the global degree-of-freedom map of the enriched space.
//! * [`quadrature`]: Gauss-Legendre rules and interface-splitting element
//!   integration.
//! * [`problem`]: coefficient models, two built-in exponential-coefficient
//!   benchmarks with closed-form solutions, and custom piecewise problems.
//! * [`assembly`]: the nonlinear form, its Frechet linearization, residuals,
//!   and the flux-balance constraint functionals.
//! * [`solver`]: Newton iteration, two constrained (Lagrange multiplier)
//!   iterations enforcing local conservation, dense LU, and a condition
//!   number estimator.
//! * [`analysis`]: error norms, standard and enriched interpolants, local
//!   conservation error metrics, and convergence-rate fitting.
//! * [`config`], [`report`], [`runner`]: the plain-text run configuration,
//!   CSV/SVG emission, and the study drivers behind the `sgfem` binary.
//!
//! The `examples/` directory has one runnable program per capability; start
//! with `solve_profile`.

pub mod analysis;
pub mod assembly;
pub mod basis;
pub mod config;
pub mod linalg;
pub mod mesh;
pub mod problem;
pub mod quadrature;
pub mod report;
pub mod runner;
pub mod solver;

pub use assembly::DiscreteSolution;
pub use basis::{EnrichedSpace, Method};
pub use mesh::{ControlVolumeSet, CvKind, Interval, Mesh, Side};
pub use problem::{CoefficientModel, Problem, ReferenceSolution};
pub use solver::{ConstrainedSolution, SolveOptions, SolveReport};
