//! Look at the enrichment itself: the kink function on one element and the
//! enriched basis functions it generates, tabulated as plain text.
//!
//! Run: `cargo run --release --example enriched_basis`

use sgfem::basis::{EnrichmentFunction, Method};
use sgfem::mesh::{Interval, Mesh, Side};
use sgfem::EnrichedSpace;

fn main() {
    let w = EnrichmentFunction::new(Interval::new(0.3, 0.4), 1.0 / 3.0);
    println!(
        "kink enrichment on (0.3, 0.4) with the interface at 1/3: peak {:.4}",
        w.peak()
    );
    println!(
        "{:>6} {:>10} {:>10} {:>10}",
        "x", "w(x)", "w' left", "w' right"
    );
    for k in 0..=10 {
        let x = 0.3 + 0.01 * k as f64;
        let (v, (dl, dr)) = w.eval(x);
        println!("{x:>6.3} {v:>10.5} {dl:>10.4} {dr:>10.4}");
    }

    // the products with the local quadratic shape functions form the local
    // enriched block of the global space
    let mesh = Mesh::uniform(1.0, 10, &[1.0 / 3.0]).unwrap();
    let space = EnrichedSpace::new(mesh, 2, Method::Sgfem);
    println!(
        "\ndegree-2 space on 10 elements: {} standard + {} enriched dofs",
        space.dofs().standard_count(),
        space.dofs().enriched_count()
    );
    let g = space.dofs().enriched_global(3, 1).unwrap();
    println!("values of enriched dof {g} (kink times the middle bubble) across its element:");
    for k in 0..=10 {
        let x = 0.3 + 0.01 * k as f64;
        let (v, _) = space.eval_dof(g, x, Side::Right).unwrap();
        let bar = "#".repeat((v * 300.0).round().max(0.0) as usize);
        println!("{x:>6.3} {v:>9.5} {bar}");
    }
}
