//! Recompute the calibration constants (sine graph, depth 5, seed 0) and
//! compare them with the frozen values. Takes about half a minute.
//!
//! cargo run --release --example calibrate

use urlab::config::Calibration;
use urlab::suite::calibrate;

fn main() -> urlab::Result<()> {
    let dir = tempfile::tempdir()?;
    let fresh = calibrate(Some(dir.path()))?;
    let frozen = Calibration::default();
    for (name, a, b) in [
        ("bilateral", fresh.bilat_fit, frozen.bilat_fit),
        ("square function", fresh.sf_fit, frozen.sf_fit),
        ("pointwise", fresh.main_fit, frozen.main_fit),
    ] {
        println!(
            "{name:16} fit {a:.15e}  frozen {b:.15e}  rel diff {:.1e}",
            (a - b).abs() / b
        );
    }
    println!(
        "asserted: C_bilat = {:.4}, C_SF = {:.4}",
        frozen.c_bilat(),
        frozen.c_sf()
    );
    Ok(())
}
