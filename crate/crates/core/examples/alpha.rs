//! Localized transport distances and α-numbers: a two-atom case with a
//! closed form, then α̂ and the packing sum on a sine graph.
//!
//! cargo run --release --example alpha

use std::f64::consts::TAU;

use urlab::alpha::{alpha_numbers, alpha_packing, d_ball, AlphaOptions, AlphaTable};
use urlab::lattice::{build_cubes, interior_cubes};
use urlab::measures::{generate, AtomicMeasure, DatasetSpec, GraphFunction};

fn main() -> urlab::Result<()> {
    // moving mass m from a to b inside B(0,1) costs m min(|a-b|, d(a,∂B) + d(b,∂B))
    let (a, b) = ([0.2, 0.1], [-0.7, 0.3]);
    let d = d_ball(
        &AtomicMeasure::dirac(&a, 0.5),
        &AtomicMeasure::dirac(&b, 0.5),
        &[0.0, 0.0],
        1.0,
    )?;
    let na = (a[0] * a[0] + a[1] * a[1]).sqrt();
    let nb = (b[0] * b[0] + b[1] * b[1]).sqrt();
    let closed = 0.5 * ((a[0] - b[0]).hypot(a[1] - b[1])).min(2.0 - na - nb);
    println!(
        "d_B = {:.12} (certificate {:.12}), closed form {closed:.12}",
        d.value, d.dual
    );

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
    let tree = build_cubes(&mu, 0, 5)?.with_engulfing(4.0);
    let roots = interior_cubes(&mu, &tree, 2);
    let mut ids: Vec<usize> = roots.iter().flat_map(|&r| tree.descendants(r)).collect();
    ids.sort_unstable();
    ids.dedup();
    let mut table = AlphaTable::new(tree.len());
    for r in alpha_numbers(&ids, &mu, &tree, &AlphaOptions::default())? {
        table.insert(r);
    }
    for j in 2..=5 {
        let a: Vec<f64> = tree
            .level(j)
            .iter()
            .filter_map(|&q| table.get(q))
            .map(|r| r.alpha)
            .collect();
        let mean = a.iter().sum::<f64>() / a.len().max(1) as f64;
        // curvature: α̂ ~ l(Q), so α̂ 2^j settles
        println!(
            "level {j}: {} cubes, mean alpha {mean:.4}, mean alpha 2^j {:.3}",
            a.len(),
            mean * 2f64.powi(j)
        );
    }
    for &r in &roots {
        println!(
            "packing over root {}: {:.4}",
            tree.cubes()[r].generation_index,
            alpha_packing(r, &table, &tree, None)?
        );
    }
    Ok(())
}
