//! Enforce local conservation with Lagrange multipliers and compare the
//! per-volume flux-balance errors of the plain and constrained solves.
//!
//! Run: `cargo run --release --example local_conservation`

use sgfem::analysis::{error_norms, lce};
use sgfem::basis::Method;
use sgfem::mesh::{build_control_volumes, CvKind, Mesh};
use sgfem::problem::example2;
use sgfem::solver::{constrained_newton, newton_solve, SolveOptions};
use sgfem::EnrichedSpace;

fn main() {
    let problem = example2([1.0, 0.05, 100.0, 0.1]).expect("benchmark");
    let reference = problem.reference.as_ref().unwrap();
    let mesh = Mesh::uniform(1.0, 40, &problem.interfaces).unwrap();
    let space = EnrichedSpace::new(mesh, 2, Method::Sgfem);
    let cvs = build_control_volumes(space.mesh(), CvKind::DualMidpoint).unwrap();
    println!(
        "enriched space of degree 2 on 40 elements, {} control volumes between element midpoints\n",
        cvs.len()
    );

    let (plain, _) = newton_solve(
        &space,
        &problem.model,
        &problem.source,
        &SolveOptions::default(),
    )
    .expect("unconstrained solve");
    let constrained = constrained_newton(
        &space,
        &problem.model,
        &problem.source,
        &cvs,
        &SolveOptions::default(),
    )
    .expect("constrained solve");

    let (lce_plain, mean_plain) = lce(&problem.model, &problem.source, &plain, &cvs).unwrap();
    let (lce_cons, mean_cons) =
        lce(&problem.model, &problem.source, &constrained.solution, &cvs).unwrap();
    let max = |v: &[f64]| v.iter().fold(0.0f64, |m, x| m.max(x.abs()));

    println!("flux-balance error per volume (max / mean |LCE|):");
    println!(
        "  unconstrained: {:.3e} / {:.3e}",
        max(&lce_plain),
        mean_plain
    );
    println!(
        "  constrained:   {:.3e} / {:.3e}",
        max(&lce_cons),
        mean_cons
    );

    let err_plain = error_norms(&plain, reference);
    let err_cons = error_norms(&constrained.solution, reference);
    println!("\naccuracy cost of the constraints (H1 seminorm):");
    println!("  unconstrained: {:.4e}", err_plain.h1_semi);
    println!("  constrained:   {:.4e}", err_cons.h1_semi);
    println!(
        "\nmultiplier range: [{:.2e}, {:.2e}] over {} volumes",
        constrained
            .multipliers
            .iter()
            .cloned()
            .fold(f64::INFINITY, f64::min),
        constrained
            .multipliers
            .iter()
            .cloned()
            .fold(f64::NEG_INFINITY, f64::max),
        constrained.multipliers.len()
    );
}
