//! Kernel catalogue and the randomized Calderón–Zygmund audit.
//!
//! cargo run --release --example kernels

use urlab::kernels::{
    audit_kernel, broken_log_kernel, power_kernel, riesz_gradient, sphere_remark_kernel,
};

fn main() -> urlab::Result<()> {
    let kernels = [
        ("riesz(1,2), n=1", 1, riesz_gradient(1, 2, 1)?),
        ("riesz(1,3), n=2", 2, riesz_gradient(1, 3, 2)?),
        ("power(1), n=1", 1, power_kernel(1, 1.0)?),
        ("power(0.5), n=2", 2, power_kernel(2, 0.5)?),
        ("sphere remark", 1, sphere_remark_kernel()),
        ("broken log, n=1", 1, broken_log_kernel(1, 1.0)?),
    ];
    let x = [0.3, -0.2, 0.1];
    let y = [1.0, 0.5, -0.4];
    for (name, n, k) in &kernels {
        let a = audit_kernel(k, 10_000, 8)?;
        let v = k.eval(&x[..n + 1], &y[..n + 1]);
        println!(
            "{name:16} beta {:.1}  C {:6.1}  cancels on planes: {:5}  audit size {:.3} holder {:.3} -> {}  K(x,y) = {v:.4}",
            k.beta(),
            k.constant(),
            k.plane_cancellation,
            a.worst_size_ratio,
            a.worst_holder_ratio,
            if a.passed() { "pass" } else { "FAIL" }
        );
    }
    Ok(())
}
