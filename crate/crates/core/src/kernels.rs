//! Kernels of the class `K_{γ1,γ2}` and their sampled membership audit.
//!
//! A kernel is a plain evaluation rule plus the exponents and constants it
//! claims. Nothing here is proved; [`audit_kernel`] samples the two defining
//! inequalities and reports how close the claims come to failing.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Config-file form of a kernel (`{"kernel": "riesz", "i": 1, "j": 2}`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kernel", rename_all = "snake_case")]
pub enum KernelSpec {
    /// `∂_j` of `z_i/|z|^{n+1}`, axes 1-based.
    Riesz {
        i: usize,
        j: usize,
    },
    Power {
        beta: f64,
    },
    SphereRemark,
    /// Negative control: `|z|^{-(n+β)} log|z|`, declared as if it were a
    /// power kernel.
    BrokenLog {
        beta: f64,
    },
}

impl KernelSpec {
    /// Instantiate for intrinsic dimension `n`.
    pub fn build(&self, n: usize) -> Result<Kernel> {
        match *self {
            KernelSpec::Riesz { i, j } => riesz_gradient(i, j, n),
            KernelSpec::Power { beta } => power_kernel(n, beta),
            KernelSpec::SphereRemark => {
                if n != 1 {
                    return Err(invalid("sphere_remark kernel needs n = 1, d = 2"));
                }
                Ok(sphere_remark_kernel())
            }
            KernelSpec::BrokenLog { beta } => broken_log_kernel(n, beta),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
enum Rule {
    Riesz { i: usize, j: usize },
    Power,
    SphereRemark,
    BrokenLog,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Kernel {
    pub spec: KernelSpec,
    rule: Rule,
    /// Intrinsic dimension the exponents refer to.
    pub n: usize,
    /// Required ambient dimension, if the rule only makes sense in one.
    pub ambient: Option<usize>,
    pub gamma1: f64,
    pub gamma2: f64,
    pub size_constant: f64,
    pub holder_constant: f64,
    pub odd_homogeneous_convolution: bool,
    /// Asserts `T_{S,L}1 ≡ 0` off every n-plane `L`.
    pub plane_cancellation: bool,
    pub positive: bool,
}

impl Kernel {
    /// `S(x, y)` for `x != y`.
    pub fn eval(&self, x: &[f64], y: &[f64]) -> f64 {
        match self.rule {
            Rule::Riesz { i, j } => {
                let mut r2 = 0.0;
                for k in 0..x.len() {
                    let z = x[k] - y[k];
                    r2 += z * z;
                }
                let (zi, zj) = (x[i] - y[i], x[j] - y[j]);
                let delta = if i == j { r2 } else { 0.0 };
                let p = (self.n + 3) as f64;
                (delta - (self.n + 1) as f64 * zi * zj) / r2.powf(0.5 * p)
            }
            Rule::Power => dist2(x, y).powf(-0.5 * self.gamma1),
            Rule::SphereRemark => {
                let rx = (x[0] * x[0] + x[1] * x[1]).sqrt();
                if rx >= 1.0 {
                    return 0.0;
                }
                1.0 / (remark_h(1.0 - rx) + dist2(x, y))
            }
            Rule::BrokenLog => {
                let r2 = dist2(x, y);
                r2.powf(-0.5 * self.gamma1) * 0.5 * r2.ln()
            }
        }
    }

    /// Checked evaluation: errors on non-finite values.
    pub fn try_eval(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        let v = self.eval(x, y);
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::NonFinite {
                x: x.to_vec(),
                y: y.to_vec(),
            })
        }
    }

    /// `β = γ1 - n`.
    pub fn beta(&self) -> f64 {
        self.gamma1 - self.n as f64
    }

    /// Exponent `2β - (d - n)` of `d(x, E)` in the square-function weight.
    pub fn weight_exponent(&self, d: usize) -> f64 {
        2.0 * self.beta() - (d as f64 - self.n as f64)
    }

    /// Single constant `C` of the class definition.
    pub fn constant(&self) -> f64 {
        self.size_constant.max(self.holder_constant)
    }

    pub fn check_ambient(&self, d: usize) -> Result<()> {
        if let Some(a) = self.ambient {
            if a != d {
                return Err(invalid(format!(
                    "kernel {:?} needs ambient dimension {a}, got {d}",
                    self.spec
                )));
            }
        }
        if d <= self.n {
            return Err(invalid("ambient dimension must exceed n"));
        }
        Ok(())
    }
}

fn dist2(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum()
}

/// `h(t) = t² (1 + log⁺(1/t))`.
pub fn remark_h(t: f64) -> f64 {
    t * t * (1.0 + (1.0 / t).ln().max(0.0))
}

/// `S(x,y) = (∂_j K)(x - y)` with `K(z) = z_i / |z|^{n+1}`, axes 1-based,
/// ambient dimension `n + 1`.
pub fn riesz_gradient(i: usize, j: usize, n: usize) -> Result<Kernel> {
    let d = n + 1;
    if n == 0 || i == 0 || j == 0 || i > d || j > d {
        return Err(invalid(format!(
            "riesz_gradient axes must lie in 1..={d}, got ({i}, {j})"
        )));
    }
    // |δ_ij|z|² - (n+1) z_i z_j| <= n|z|² when i = j, (n+1)/2 |z|² otherwise
    let size = if i == j {
        n as f64
    } else {
        0.5 * (n + 1) as f64
    };
    Ok(Kernel {
        spec: KernelSpec::Riesz { i, j },
        rule: Rule::Riesz { i: i - 1, j: j - 1 },
        n,
        ambient: Some(d),
        gamma1: (n + 1) as f64,
        gamma2: 1.0,
        size_constant: size,
        holder_constant: 2f64.powi(n as i32 + 2) * n as f64,
        odd_homogeneous_convolution: true,
        plane_cancellation: true,
        positive: false,
    })
}

/// `S(x,y) = |x - y|^{-(n+β)}`.
pub fn power_kernel(n: usize, beta: f64) -> Result<Kernel> {
    if !(beta > 0.0 && beta.is_finite()) || n == 0 {
        return Err(invalid(format!("power kernel needs beta > 0, got {beta}")));
    }
    let g = n as f64 + beta;
    Ok(Kernel {
        spec: KernelSpec::Power { beta },
        rule: Rule::Power,
        n,
        ambient: None,
        gamma1: g,
        gamma2: 1.0,
        size_constant: 1.0,
        // sup of |1 - (1-t)^{-g}|/t over t <= 1/2, attained at t = 1/2
        holder_constant: 2.0 * (2f64.powf(g) - 1.0),
        odd_homogeneous_convolution: false,
        plane_cancellation: false,
        positive: true,
    })
}

/// `S(x,y) = 1_{B(0,1)}(x) / (h(d(x, ∂B(0,1))) + |x - y|²)` in the plane.
pub fn sphere_remark_kernel() -> Kernel {
    Kernel {
        spec: KernelSpec::SphereRemark,
        rule: Rule::SphereRemark,
        n: 1,
        ambient: Some(2),
        gamma1: 2.0,
        gamma2: 1.0,
        size_constant: 1.0,
        // |a² - b²| / (a² b²) with b >= a/2 is at most 6|a - b| / a³
        holder_constant: 6.0,
        odd_homogeneous_convolution: false,
        plane_cancellation: false,
        positive: true,
    }
}

/// The negative control: fails the size bound at both small and large
/// scales because of the logarithm.
pub fn broken_log_kernel(n: usize, beta: f64) -> Result<Kernel> {
    let mut k = power_kernel(n, beta)?;
    k.spec = KernelSpec::BrokenLog { beta };
    k.rule = Rule::BrokenLog;
    k.positive = false;
    Ok(k)
}

/// Relative slack for rounding in the ratio arithmetic; a tight constant
/// (power kernel size bound) otherwise reads as `1 + ulp`.
pub const AUDIT_ROUNDOFF: f64 = 1e-12;

/// Worst sampled ratios; both `<= 1` (up to [`AUDIT_ROUNDOFF`]) means the
/// audit passed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AuditReport {
    pub worst_size_ratio: f64,
    pub worst_holder_ratio: f64,
    pub samples: usize,
}

impl AuditReport {
    pub fn passed(&self) -> bool {
        self.worst_size_ratio <= 1.0 + AUDIT_ROUNDOFF
            && self.worst_holder_ratio <= 1.0 + AUDIT_ROUNDOFF
    }
}

/// Sample `samples` triples `(x, y, y')` with `|x - y|` log-uniform in
/// `[1e-3, 1e3]` and `|y - y'| <= |x - y|/2`, and return the worst size and
/// Hölder ratios against the declared constants.
pub fn audit_kernel(s: &Kernel, samples: usize, seed: u64) -> Result<AuditReport> {
    audit_scaled(s, samples, seed, 1.0)
}

/// [`audit_kernel`] with every sampled coordinate multiplied by `lambda`.
/// Homogeneous kernels give the same ratios for every `lambda`.
pub fn audit_scaled(s: &Kernel, samples: usize, seed: u64, lambda: f64) -> Result<AuditReport> {
    if samples < 1000 {
        return Err(invalid("audit_kernel needs at least 1000 samples"));
    }
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(invalid("scale factor must be positive"));
    }
    let d = s.ambient.unwrap_or(s.n + 1);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst_size: f64 = 0.0;
    let mut worst_holder: f64 = 0.0;
    let mut x = vec![0.0; d];
    let mut y = vec![0.0; d];
    let mut y2 = vec![0.0; d];
    for _ in 0..samples {
        // the remark kernel vanishes off the unit disc, so sample x inside it
        let spread = if s.rule == Rule::SphereRemark {
            1.0
        } else {
            10.0
        };
        loop {
            for v in x.iter_mut() {
                *v = rng.gen_range(-spread..spread);
            }
            if s.rule != Rule::SphereRemark || dist2(&x, &vec![0.0; d]) < 1.0 {
                break;
            }
        }
        let r = 10f64.powf(rng.gen_range(-3.0..3.0));
        let u = unit(&mut rng, d);
        // bias half the offsets to the admissible edge, where Hölder ratios peak
        let t = if rng.gen_bool(0.5) {
            0.5
        } else {
            0.5 * rng.gen::<f64>()
        };
        let v = unit(&mut rng, d);
        for k in 0..d {
            y[k] = x[k] - r * u[k];
            y2[k] = y[k] + t * r * v[k];
        }
        for w in [&mut x, &mut y, &mut y2] {
            w.iter_mut().for_each(|c| *c *= lambda);
        }
        let rxy = dist2(&x, &y).sqrt();
        let delta = dist2(&y, &y2).sqrt();
        let a = s.try_eval(&x, &y)?;
        let b = s.try_eval(&x, &y2)?;
        worst_size = worst_size.max(a.abs() * rxy.powf(s.gamma1) / s.size_constant);
        if delta > 0.0 {
            let h = (a - b).abs() * rxy.powf(s.gamma1 + s.gamma2)
                / (s.holder_constant * delta.powf(s.gamma2));
            worst_holder = worst_holder.max(h);
        }
    }
    Ok(AuditReport {
        worst_size_ratio: worst_size,
        worst_holder_ratio: worst_holder,
        samples,
    })
}

fn unit(rng: &mut ChaCha8Rng, d: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let n2: f64 = v.iter().map(|a| a * a).sum();
        if n2 > 1e-4 && n2 <= 1.0 {
            let n = n2.sqrt();
            return v.into_iter().map(|a| a / n).collect();
        }
    }
}
