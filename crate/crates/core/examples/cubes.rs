//! Dyadic cube tree on a circle: counts per level and the shape statistics
//! the construction guarantees.
//!
//! cargo run --release --example cubes

use std::f64::consts::TAU;

use urlab::lattice::{build_cubes, interior_cubes};
use urlab::measures::{generate, DatasetSpec};

fn main() -> urlab::Result<()> {
    let mu = generate(&DatasetSpec::Sphere {
        n: 1,
        radius: 1.0,
        angular_step: TAU / 4096.0,
    })?;
    let tree = build_cubes(&mu, 0, 6)?;
    for j in tree.j_min()..=tree.j_max() {
        let ids = tree.level(j);
        let atoms: Vec<usize> = ids.iter().map(|&q| tree.cubes()[q].atom_count()).collect();
        println!(
            "level {j}: {:4} cubes, {:4} interior, atoms per cube {}..{}",
            ids.len(),
            interior_cubes(&mu, &tree, j).len(),
            atoms.iter().min().unwrap(),
            atoms.iter().max().unwrap()
        );
    }
    let s = tree.stats(mu.n());
    println!(
        "diam/l(Q) <= {:.3}, radius/l(Q) >= {:.3}, mu(Q)/l(Q) in [{:.3}, {:.3}]",
        s.max_radius_ratio, s.min_radius_ratio, s.min_mass_ratio, s.max_mass_ratio
    );

    // the leaf holding atom 0 and its chain of ancestors
    let mut q = Some(tree.leaf_of_atom(0));
    while let Some(id) = q {
        let c = &tree.cubes()[id];
        println!(
            "  level {} index {} centre ({:.4}, {:.4})",
            c.level, c.generation_index, c.center[0], c.center[1]
        );
        q = c.parent;
    }
    Ok(())
}
