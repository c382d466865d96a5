//! Full verification suite from a config file.
//!
//! cargo run --release --example verify -- configs/plane_riesz.json [out-dir]

use std::path::PathBuf;

use urlab::config::RunConfig;
use urlab::suite::run_suite;

fn main() -> urlab::Result<()> {
    let mut args = std::env::args().skip(1);
    let path = args
        .next()
        .map(PathBuf::from)
        .unwrap_or_else(|| "configs/plane_riesz.json".into());
    let cfg = RunConfig::load(&path, &[])?;
    let out = args.next().map(PathBuf::from);
    let r = run_suite(&cfg, out.as_deref())?;

    println!("{} atoms, M = {}", r.dataset.atoms, r.build.engulfing);
    for p in &r.packing {
        println!("C_pack to depth {}: {:.4e}", p.depth, p.value);
    }
    let k = &r.constants;
    for (name, c) in [
        ("C_main", k.c_main),
        ("C_triv", k.c_triv),
        ("C_t1", k.c_t1),
        ("C_mod", k.c_mod),
        ("C_SF", k.c_sf),
        ("C_bilat", k.c_bilat),
    ] {
        println!("{name:8} {:?} over {} samples", c.value, c.samples);
    }
    for i in &r.invariants {
        println!("{} {}", if i.passed { "ok  " } else { "FAIL" }, i.name);
    }
    for f in &r.findings {
        println!("finding: {f}");
    }
    println!("passed: {}", r.passed);
    Ok(())
}
