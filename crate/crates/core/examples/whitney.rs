//! Whitney decomposition of the complement of a sine graph and the regions
//! `W_Q` attached to cubes.
//!
//! cargo run --release --example whitney

use std::f64::consts::TAU;

use urlab::lattice::{build_cubes, build_whitney, carleson_box, interior_cubes, BoundingBox};
use urlab::measures::{generate, DatasetSpec, GraphFunction};

fn main() -> urlab::Result<()> {
    let mu = generate(&DatasetSpec::LipschitzGraph {
        function: GraphFunction::Sine {
            amplitude: 0.3,
            frequency: 1.0,
        },
        a: 0.0,
        b: TAU,
        step: TAU / 2048.0,
        lipschitz: 0.3,
    })?;
    let tree = build_cubes(&mu, 0, 5)?;
    let bbox = BoundingBox::of(&mu).enlarged(2.0, 0.25 * mu.diameter());
    let w = build_whitney(&mu, &tree, &bbox, 6)?;
    println!(
        "{} cells, {} far-field, {} truncated at level {} (volume {:.2e})",
        w.cells.len(),
        w.unassociated().count(),
        w.truncated.len(),
        w.j_floor,
        w.truncated_volume()
    );
    println!(
        "measured engulfing M = {}, d(x, E)/l(W) in [{:.3}, {:.3}]",
        w.engulfing, w.comparability.0, w.comparability.1
    );
    let tree = tree.with_engulfing(w.engulfing);
    for j in 2..=5 {
        let Some(&r) = interior_cubes(&mu, &tree, j).first() else {
            continue;
        };
        let region = w.region(r);
        let boxed = carleson_box(r, &tree, &w)?;
        println!(
            "level {j} cube {}: W_Q has {} cells, Carleson box {} cells",
            tree.cubes()[r].generation_index,
            region.len(),
            boxed.len()
        );
    }
    Ok(())
}
