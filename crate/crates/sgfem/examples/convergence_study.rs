//! Mesh-refinement study: H1 and L2 error slopes of the plain and enriched
//! methods on the second benchmark.
//!
//! Run: `cargo run --release --example convergence_study`

use sgfem::analysis::{error_norms, fit_slope};
use sgfem::basis::Method;
use sgfem::mesh::Mesh;
use sgfem::problem::example2;
use sgfem::solver::{newton_solve, SolveOptions};
use sgfem::EnrichedSpace;

fn main() {
    let problem = example2([1.0, 0.05, 100.0, 0.1]).expect("benchmark");
    let reference = problem.reference.as_ref().unwrap();
    let sizes = [10usize, 20, 40, 80, 160];

    println!(
        "{:<8} {:>2} {:>6} {:>12} {:>12}",
        "method", "p", "N", "err_h1", "err_l2"
    );
    for method in [Method::Fem, Method::Sgfem] {
        for degree in 1..=3usize {
            let mut hs = Vec::new();
            let mut h1 = Vec::new();
            let mut l2 = Vec::new();
            for &n in &sizes {
                let mesh = Mesh::uniform(1.0, n, &problem.interfaces).unwrap();
                let space = EnrichedSpace::new(mesh, degree, method);
                let (u, _) = newton_solve(
                    &space,
                    &problem.model,
                    &problem.source,
                    &SolveOptions::default(),
                )
                .expect("solve");
                let err = error_norms(&u, reference);
                println!(
                    "{:<8} {:>2} {:>6} {:>12.4e} {:>12.4e}",
                    method.as_str(),
                    degree,
                    n,
                    err.h1_semi,
                    err.l2
                );
                hs.push(1.0 / n as f64);
                h1.push(err.h1_semi);
                l2.push(err.l2);
            }
            println!(
                "{:<8} {:>2}   fitted slopes: H1 {:+.2}, L2 {:+.2}\n",
                method.as_str(),
                degree,
                fit_slope(&hs, &h1).unwrap(),
                fit_slope(&hs, &l2).unwrap()
            );
        }
    }
    println!("enrichment restores the order-p (H1) and order-(p+1) (L2) rates");
    println!("that the nonconforming mesh costs the plain method.");
}
