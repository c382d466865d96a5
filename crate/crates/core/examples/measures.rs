//! Generate the built-in datasets and estimate their Ahlfors-regularity
//! constants.
//!
//! cargo run --release --example measures

use std::f64::consts::TAU;

use urlab::measures::{estimate_adr, generate, DatasetSpec, GraphFunction};

fn main() -> urlab::Result<()> {
    let specs = [
        (
            "plane patch",
            DatasetSpec::Plane {
                n: 1,
                d: 2,
                side: 2.0,
                step: 1.0 / 256.0,
            },
        ),
        (
            "sine graph",
            DatasetSpec::LipschitzGraph {
                function: GraphFunction::Sine {
                    amplitude: 0.3,
                    frequency: 1.0,
                },
                a: 0.0,
                b: TAU,
                step: TAU / 2048.0,
                lipschitz: 0.3,
            },
        ),
        (
            "circle",
            DatasetSpec::Sphere {
                n: 1,
                radius: 1.0,
                angular_step: TAU / 2048.0,
            },
        ),
        (
            "cantor4",
            DatasetSpec::Cantor4 {
                generations: 5,
                side: 1.0,
            },
        ),
        (
            "two segments",
            DatasetSpec::ParallelSegments {
                length: 1.0,
                gap: 0.05,
                step: 1.0 / 512.0,
            },
        ),
    ];
    for (name, spec) in &specs {
        let mu = generate(spec)?;
        let dm = mu.diameter();
        let adr = estimate_adr(&mu, &[dm / 16.0, dm / 8.0, dm / 4.0])?;
        println!(
            "{name:13} {:6} atoms  resolution {:.2e}  diameter {:.3}  mass {:.3}  ADR constant {:.2} ({} balls)",
            mu.len(),
            mu.resolution(),
            mu.diameter(),
            mu.total_mass(),
            adr.constant(),
            adr.samples
        );
    }

    // point clouds round-trip through `x1,...,xd,w` files
    let mu = generate(&specs[1].1)?;
    let dir = tempfile::tempdir()?;
    let path = dir.path().join("sine.csv");
    mu.write_csv(&path)?;
    let back = urlab::measures::DiscreteMeasure::read_csv(&path, 1, None)?;
    println!(
        "csv round trip: {} atoms, mass {:.6}",
        back.len(),
        back.total_mass()
    );
    Ok(())
}
