//! Define a problem from scratch: piecewise coefficient functions with a
//! genuine u-dependence, solve it, and inspect solver diagnostics including
//! the condition estimate of the final Newton matrix.
//!
//! Run: `cargo run --release --example custom_interface_problem`

use sgfem::basis::Method;
use sgfem::mesh::Mesh;
use sgfem::problem::{custom_problem, CoefficientFn};
use sgfem::solver::{newton_solve, SolveOptions};
use sgfem::EnrichedSpace;
use std::sync::Arc;

fn main() {
    // kappa = 1 + 0.5 sin(u) left of the interface, 4 + u^2 right of it
    let pieces: Vec<CoefficientFn> = vec![
        Arc::new(|_x, u: f64| 1.0 + 0.5 * u.sin()),
        Arc::new(|_x, u: f64| 4.0 + u * u),
    ];
    let derivative_pieces: Vec<CoefficientFn> = vec![
        Arc::new(|_x, u: f64| 0.5 * u.cos()),
        Arc::new(|_x, u: f64| 2.0 * u),
    ];
    let problem = custom_problem(
        vec![0.61],
        pieces,
        derivative_pieces,
        Arc::new(|x| 10.0 * x * (1.0 - x)),
        1.0,
        (-2.0, 2.0),
    )
    .expect("valid problem");
    println!(
        "custom quasilinear problem, one interface at 0.61; sampled kappa range {:?}",
        problem.model.bounds().unwrap()
    );

    let mesh = Mesh::uniform(1.0, 50, &problem.interfaces).unwrap();
    let space = EnrichedSpace::new(mesh, 2, Method::Sgfem);
    let options = SolveOptions {
        estimate_condition: true,
        ..SolveOptions::default()
    };
    let (u, report) =
        newton_solve(&space, &problem.model, &problem.source, &options).expect("solve");

    println!(
        "dim {}, {} Newton iterations",
        space.dim(),
        report.iterations
    );
    println!("residual history: {:?}", report.history);
    println!(
        "condition estimate of the final Newton matrix (diagonally rescaled): {:.3e}",
        report.condition_estimate.unwrap()
    );
    println!("\nsolution sample:");
    for k in 0..=10 {
        let x = k as f64 / 10.0;
        println!("  u({x:.1}) = {:+.6}", u.eval(x));
    }
}
