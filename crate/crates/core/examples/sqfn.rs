//! Plane integrals, Carleson functionals and the square-function ratio on a
//! sine graph, staged through a cached [`Pipeline`].
//!
//! cargo run --release --example sqfn

use std::f64::consts::TAU;

use urlab::config::RunConfig;
use urlab::kernels::{power_kernel, riesz_gradient};
use urlab::measures::{DatasetSpec, GraphFunction, Plane};
use urlab::pipeline::{sign_vector, Pipeline};
use urlab::sqfn::{carleson_mod, carleson_t1, sqfn_norm, t_plane, QuadratureSpec};

fn main() -> urlab::Result<()> {
    let q = QuadratureSpec::default();
    let line = Plane::coordinate(2, &[0])?;
    let x = [0.3, 0.5];
    // odd kernels integrate to zero over a line; even ones do not
    println!(
        "riesz  T_L 1(x) = {:.3e}",
        t_plane(&riesz_gradient(1, 2, 1)?, &line, &x, &q)?.value
    );
    let p = t_plane(&power_kernel(1, 1.0)?, &line, &x, &q)?;
    println!(
        "power  T_L 1(x) = {:.6} (closed form pi/d = {:.6}, tail {:.1e})",
        p.value,
        std::f64::consts::PI / 0.5,
        p.tail_bound
    );

    let mut cfg = RunConfig::new(
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
        0,
        4,
    );
    cfg.levels.j_floor = Some(5);
    let dir = tempfile::tempdir()?;
    let pipe = Pipeline::new(cfg, Some(dir.path()))?;
    let g = pipe.geometry()?;
    let table = pipe.alpha(&g)?;
    let s = pipe.kernel(&g)?;
    let c = pipe.config();
    for j in 2..=4 {
        let Some(&r) = urlab::lattice::interior_cubes(&g.mu, &g.tree, j).first() else {
            continue;
        };
        let t1 = carleson_t1(r, &s, &g.mu, &g.tree, &g.whitney, &c.quadrature)?;
        let m = carleson_mod(
            r,
            &s,
            &g.mu,
            &g.tree,
            &g.whitney,
            Some(&table),
            &c.quadrature,
            &pipe.sup_options(),
        )?;
        println!(
            "level {j}: carleson_t1 {:.4e} (+{:.1e} below the floor), carleson_mod {:.1e}",
            t1.ratio, t1.truncation_bound, m.ratio
        );
    }
    for k in 0..3 {
        let f = sign_vector(g.mu.len(), c.seed, k);
        let r = sqfn_norm(&s, &g.mu, &f, &g.whitney, &c.quadrature)?;
        println!(
            "sign vector {k}: ||(sum_W |Theta f|^2)^1/2|| / ||f|| = {:.4} over {} nodes",
            r.ratio, r.nodes
        );
    }
    Ok(())
}
