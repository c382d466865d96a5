//! Operators `T_{S,μ}f`, `T_{S,L}1` and the Whitney-weighted functionals
//! built from them (T1 Carleson ratio, its plane-supremum variant and the
//! square-function ratio).
//!
//! All volume integrals are midpoint rules on subdivided Whitney cells with
//! weight `d(x, E)^{2β-(d-n)}`. Cell sums are computed in parallel and
//! reduced in cell order, so results do not depend on the thread count.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::alpha::AlphaTable;
use crate::error::{invalid, Error, Result};
use crate::kernels::Kernel;
use crate::lattice::{carleson_box, CubeTree, Whitney, WhitneyCell};
use crate::measures::{DiscreteMeasure, Plane};
use crate::sum;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct QuadratureSpec {
    /// Midpoint subdivisions per Whitney cell and axis.
    pub whitney_subdiv: usize,
    /// Plane integrals are truncated at this multiple of `d(x, L)`.
    pub plane_rmax_factor: f64,
    /// Gauss-Legendre nodes per radial panel.
    pub plane_radial_nodes: usize,
    /// Angular nodes for two-dimensional planes.
    pub plane_angular_nodes: usize,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        QuadratureSpec {
            whitney_subdiv: 2,
            plane_rmax_factor: 64.0,
            plane_radial_nodes: 16,
            plane_angular_nodes: 32,
        }
    }
}

impl QuadratureSpec {
    pub fn validate(&self) -> Result<()> {
        if self.whitney_subdiv < 1 || self.plane_radial_nodes < 1 || self.plane_angular_nodes < 1 {
            return Err(invalid("quadrature node counts must be at least 1"));
        }
        if !(self.plane_rmax_factor >= 8.0) {
            return Err(invalid("plane_rmax_factor must be at least 8"));
        }
        Ok(())
    }
}

/// How the plane supremum is sampled.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SupOptions {
    /// Admissible `d(x, L) / d(x, E)` range.
    pub band: [f64; 2],
    pub random_planes: usize,
    pub seed: u64,
}

impl Default for SupOptions {
    fn default() -> Self {
        SupOptions {
            band: [0.25, 4.0],
            random_planes: 32,
            seed: 0,
        }
    }
}

/// Nodes and weights of the `m`-point Gauss-Legendre rule on `[-1, 1]`.
pub fn gauss_legendre(m: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; m];
    let mut weights = vec![0.0; m];
    for k in 0..(m + 1) / 2 {
        // Tricomi initial guess, then Newton on P_m
        let mut x = (std::f64::consts::PI * (k as f64 + 0.75) / (m as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for j in 2..=m {
                let p2 = ((2 * j - 1) as f64 * x * p1 - (j - 1) as f64 * p0) / j as f64;
                p0 = p1;
                p1 = p2;
            }
            let p = if m == 1 { x } else { p1 };
            let pm1 = if m == 1 { 1.0 } else { p0 };
            dp = m as f64 * (x * p - pm1) / (x * x - 1.0);
            let dx = p / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        if m == 1 {
            x = 0.0;
            dp = 1.0;
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[k] = -x;
        nodes[m - 1 - k] = x;
        weights[k] = w;
        weights[m - 1 - k] = w;
    }
    (nodes, weights)
}

fn check_kernel(s: &Kernel, mu: &DiscreteMeasure) -> Result<()> {
    s.check_ambient(mu.d())?;
    if s.n != mu.n() {
        return Err(invalid(format!(
            "kernel built for n = {} but the measure has n = {}",
            s.n,
            mu.n()
        )));
    }
    Ok(())
}

/// `T_{S,μ}f(x) = Σ_i S(x, y_i) f_i w_i` (`f ≡ 1` when `None`).
pub fn t_mu(s: &Kernel, mu: &DiscreteMeasure, x: &[f64], f: Option<&[f64]>) -> Result<f64> {
    check_kernel(s, mu)?;
    if let Some(f) = f {
        if f.len() != mu.len() {
            return Err(invalid("f must have one value per atom"));
        }
    }
    let dx = mu.distance_to_support(x);
    let need = 4.0 * mu.resolution();
    if dx < need {
        return Err(Error::TooCloseToSupport {
            point: x.to_vec(),
            distance: dx,
            required: need,
        });
    }
    t_mu_raw(s, mu, x, f)
}

fn t_mu_raw(s: &Kernel, mu: &DiscreteMeasure, x: &[f64], f: Option<&[f64]>) -> Result<f64> {
    let v = match f {
        None => sum::pairwise(mu.len(), |i| s.eval(x, mu.point(i)) * mu.weight(i)),
        Some(f) => sum::pairwise(mu.len(), |i| s.eval(x, mu.point(i)) * f[i] * mu.weight(i)),
    };
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::NonFinite {
            x: x.to_vec(),
            y: Vec::new(),
        })
    }
}

/// Value of a truncated plane integral and the size-bound estimate of the
/// part beyond the truncation radius.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlaneIntegral {
    pub value: f64,
    pub tail_bound: f64,
}

/// Surface measure of the unit sphere in `R^n`.
fn sphere_area(n: usize) -> f64 {
    match n {
        1 => 2.0,
        2 => 2.0 * std::f64::consts::PI,
        _ => 4.0 * std::f64::consts::PI,
    }
}

/// `T_{S,L}1(x) = ∫_L S(x, y) dH^n(y)` by polar quadrature around the foot
/// of `x`, truncated at `rmax_factor · d(x, L)`.
pub fn t_plane(s: &Kernel, l: &Plane, x: &[f64], q: &QuadratureSpec) -> Result<PlaneIntegral> {
    q.validate()?;
    let t = l.distance(x);
    let scale = x.iter().fold(1.0f64, |m, v| m.max(v.abs()));
    if !(t > 1e-14 * scale) {
        return Err(Error::PointOnPlane(x.to_vec()));
    }
    if s.plane_cancellation {
        return Ok(PlaneIntegral {
            value: 0.0,
            tail_bound: 0.0,
        });
    }
    let n = l.dim();
    if n > 2 {
        return Err(invalid("plane quadrature supports n <= 2"));
    }
    let foot = l.project(x);
    let rmax = q.plane_rmax_factor * t;
    // radial panels refine geometrically towards the foot
    let mut edges = vec![0.0, 0.25 * t, 0.5 * t];
    let mut r = t;
    while r < rmax {
        edges.push(r);
        r *= 2.0;
    }
    edges.push(rmax);
    let (gx, gw) = gauss_legendre(q.plane_radial_nodes);
    let basis = l.basis();
    let mut y = vec![0.0; x.len()];
    let mut terms = Vec::new();
    let dirs: Vec<Vec<f64>> = if n == 1 {
        vec![basis[0].clone(), basis[0].iter().map(|v| -v).collect()]
    } else {
        let m = q.plane_angular_nodes;
        (0..m)
            .map(|a| {
                let th = 2.0 * std::f64::consts::PI * (a as f64 + 0.5) / m as f64;
                let (sn, cs) = th.sin_cos();
                basis[0]
                    .iter()
                    .zip(&basis[1])
                    .map(|(u, v)| cs * u + sn * v)
                    .collect()
            })
            .collect()
    };
    let dir_w = if n == 1 {
        1.0
    } else {
        2.0 * std::f64::consts::PI / dirs.len() as f64
    };
    for p in edges.windows(2) {
        let (a, b) = (p[0], p[1]);
        if b <= a {
            continue;
        }
        let (mid, half) = (0.5 * (a + b), 0.5 * (b - a));
        for (xi, wi) in gx.iter().zip(&gw) {
            let rr = mid + half * xi;
            let jac = half * wi * rr.powi(n as i32 - 1) * dir_w;
            for e in &dirs {
                for k in 0..y.len() {
                    y[k] = foot[k] + rr * e[k];
                }
                terms.push(jac * s.try_eval(x, &y)?);
            }
        }
    }
    let beta = s.beta();
    Ok(PlaneIntegral {
        value: sum::pairwise_slice(&terms),
        tail_bound: s.size_constant * sphere_area(n) * rmax.powf(-beta) / beta,
    })
}

/// Lower bound for `sup |T_{S,L}1(x)|` over planes with
/// `d(x, L) / d(x, E)` in the band: the admissible `candidates` plus
/// `random_planes` seeded planes whose distances run log-uniformly across
/// the band (endpoints included) with random orientations.
pub fn sup_t_plane(
    s: &Kernel,
    x: &[f64],
    dxe: f64,
    candidates: &[Plane],
    opts: &SupOptions,
    q: &QuadratureSpec,
) -> Result<f64> {
    let [a, b] = opts.band;
    if !(a > 0.0 && b >= a && dxe > 0.0) {
        return Err(invalid("band must satisfy 0 < a <= b and d(x, E) > 0"));
    }
    let admissible: Vec<&Plane> = candidates
        .iter()
        .filter(|l| {
            let r = l.distance(x) / dxe;
            r >= a && r <= b
        })
        .collect();
    if admissible.is_empty() && opts.random_planes == 0 {
        return Err(Error::NoAdmissiblePlane(x.to_vec()));
    }
    if s.plane_cancellation {
        return Ok(0.0);
    }
    let mut best: f64 = 0.0;
    for l in admissible {
        best = best.max(t_plane(s, l, x, q)?.value.abs());
    }
    let d = x.len();
    let n = s.n;
    let mut rng = ChaCha8Rng::seed_from_u64(point_seed(opts.seed, x));
    let k = opts.random_planes;
    for i in 0..k {
        let u = if k > 1 {
            i as f64 / (k - 1) as f64
        } else {
            0.0
        };
        let t = dxe * a * (b / a).powf(u);
        let frame = random_frame(&mut rng, d, n + 1)?;
        let normal = &frame[n];
        let base: Vec<f64> = x.iter().zip(normal).map(|(xi, v)| xi + t * v).collect();
        let l = Plane::new(base, frame[..n].to_vec())?;
        best = best.max(t_plane(s, &l, x, q)?.value.abs());
    }
    Ok(best)
}

fn point_seed(seed: u64, x: &[f64]) -> u64 {
    // splitmix-style fold of the coordinate bits
    let mut h = seed ^ 0x9e37_79b9_7f4a_7c15;
    for v in x {
        h ^= v.to_bits();
        h = h.wrapping_mul(0xbf58_476d_1ce4_e5b9);
        h ^= h >> 31;
    }
    h
}

fn random_frame(rng: &mut ChaCha8Rng, d: usize, k: usize) -> Result<Vec<Vec<f64>>> {
    let mut out: Vec<Vec<f64>> = Vec::with_capacity(k);
    while out.len() < k {
        let mut v: Vec<f64> = (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect();
        for _ in 0..2 {
            for u in &out {
                let c: f64 = v.iter().zip(u).map(|(a, b)| a * b).sum();
                v.iter_mut().zip(u).for_each(|(vi, ui)| *vi -= c * ui);
            }
        }
        let nv = v.iter().map(|a| a * a).sum::<f64>().sqrt();
        if nv > 1e-3 {
            out.push(v.into_iter().map(|a| a / nv).collect());
        }
    }
    Ok(out)
}

/// One functional value with its truncation estimate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FunctionalReport {
    pub level: i32,
    pub index: usize,
    pub ratio: f64,
    /// Estimated contribution of Whitney cells below `2^{-j_floor}`, in the
    /// same normalization as `ratio`.
    pub truncation_bound: f64,
    pub nodes: usize,
    pub quadrature: QuadratureSpec,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub warning: Option<String>,
}

fn warning_for(ratio: f64, bound: f64) -> Option<String> {
    (bound > 0.1 * ratio)
        .then(|| format!("truncation estimate {bound:.3e} exceeds 10% of the value {ratio:.3e}"))
}

/// Midpoint rule of `g(x, d(x,E), cell)² d(x,E)^w` over the listed cells.
fn integrate_cells<G>(
    cells: &[usize],
    whitney: &Whitney,
    mu: &DiscreteMeasure,
    w_exp: f64,
    subdiv: usize,
    g: G,
) -> Result<(f64, usize)>
where
    G: Fn(&[f64], f64, &WhitneyCell) -> Result<f64> + Sync,
{
    let d = mu.d();
    let need = 4.0 * mu.resolution();
    let per_cell: Vec<f64> = cells
        .par_iter()
        .map(|&c| {
            let cell = &whitney.cells[c];
            let h = cell.side() / subdiv as f64;
            let vol = h.powi(d as i32);
            let total = subdiv.pow(d as u32);
            let mut terms = Vec::with_capacity(total);
            let mut x = vec![0.0; d];
            for m in 0..total {
                let mut r = m;
                for k in 0..d {
                    x[k] = cell.corner[k] + ((r % subdiv) as f64 + 0.5) * h;
                    r /= subdiv;
                }
                let dxe = mu.distance_to_support(&x);
                if dxe < need {
                    return Err(Error::TooCloseToSupport {
                        point: x.clone(),
                        distance: dxe,
                        required: need,
                    });
                }
                let v = g(&x, dxe, cell)?;
                terms.push(v * v * dxe.powf(w_exp) * vol);
            }
            Ok(sum::pairwise_slice(&terms))
        })
        .collect::<Result<Vec<f64>>>()?;
    let nodes = cells.len() * subdiv.pow(d as u32);
    Ok((sum::pairwise_slice(&per_cell), nodes))
}

/// Size-bound estimate of `|T_{S,μ}f|` at scale `l(W)` near a truncated
/// cell: every atom is kept at distance at least `l(W)` from the centre.
fn truncated_estimate(
    s: &Kernel,
    mu: &DiscreteMeasure,
    f: Option<&[f64]>,
    cells: &[usize],
    whitney: &Whitney,
    w_exp: f64,
) -> f64 {
    let terms: Vec<f64> = cells
        .par_iter()
        .map(|&c| {
            let cell = &whitney.truncated[c];
            let l = cell.side();
            let ctr = cell.center();
            let bound = s.size_constant
                * sum::pairwise(mu.len(), |i| {
                    let r = crate::spatial::dist(&ctr, mu.point(i)).max(l);
                    let fi = f.map(|f| f[i].abs()).unwrap_or(1.0);
                    fi * mu.weight(i) * r.powf(-s.gamma1)
                });
            bound * bound * l.powf(w_exp) * cell.volume()
        })
        .collect();
    sum::pairwise_slice(&terms)
}

/// `(1/μ(R)) ∫_{R̂} |T_{S,μ}1(x)|² d(x,E)^{2β-(d-n)} dx`.
pub fn carleson_t1(
    r: usize,
    s: &Kernel,
    mu: &DiscreteMeasure,
    tree: &CubeTree,
    whitney: &Whitney,
    q: &QuadratureSpec,
) -> Result<FunctionalReport> {
    check_kernel(s, mu)?;
    q.validate()?;
    let root = tree.cube(r)?;
    let cells = carleson_box(r, tree, whitney)?;
    let w = s.weight_exponent(mu.d());
    let (total, nodes) = integrate_cells(&cells, whitney, mu, w, q.whitney_subdiv, |x, _, _| {
        t_mu_raw(s, mu, x, None)
    })?;
    let dropped = whitney.truncated_in_box(r, tree);
    let bound = truncated_estimate(s, mu, None, &dropped, whitney, w) / root.mass;
    let ratio = total / root.mass;
    Ok(FunctionalReport {
        level: root.level,
        index: root.generation_index,
        ratio,
        truncation_bound: bound,
        nodes,
        quadrature: q.clone(),
        warning: warning_for(ratio, bound),
    })
}

/// Minimizing planes of `Q` and its three nearest ancestors, where known.
pub fn cube_planes(q: Option<usize>, tree: &CubeTree, table: Option<&AlphaTable>) -> Vec<Plane> {
    let (Some(q), Some(table)) = (q, table) else {
        return Vec::new();
    };
    (0..4)
        .filter_map(|k| tree.ancestor(q, k))
        .filter_map(|p| table.get(p).map(|a| a.plane.clone()))
        .collect()
}

/// `(1/l(R)^n) ∫_{R̂} sup_L |T_{S,L}1(x)|² d(x,E)^{2β-(d-n)} dx` with the
/// supremum replaced by [`sup_t_plane`] (a lower bound).
#[allow(clippy::too_many_arguments)]
pub fn carleson_mod(
    r: usize,
    s: &Kernel,
    mu: &DiscreteMeasure,
    tree: &CubeTree,
    whitney: &Whitney,
    table: Option<&AlphaTable>,
    q: &QuadratureSpec,
    sup: &SupOptions,
) -> Result<FunctionalReport> {
    check_kernel(s, mu)?;
    q.validate()?;
    let root = tree.cube(r)?;
    let norm = root.side().powi(mu.n() as i32);
    let cells = carleson_box(r, tree, whitney)?;
    let w = s.weight_exponent(mu.d());
    let (total, nodes) = if s.plane_cancellation {
        (0.0, cells.len() * q.whitney_subdiv.pow(mu.d() as u32))
    } else {
        integrate_cells(&cells, whitney, mu, w, q.whitney_subdiv, |x, dxe, cell| {
            let cands = cube_planes(cell.associated, tree, table);
            sup_t_plane(s, x, dxe, &cands, sup, q)
        })?
    };
    let bound = if s.plane_cancellation {
        0.0
    } else {
        // |T_{S,L}1| <= C ω (1/n + 1/β) d(x,L)^{-β} and d(x,L) >= a l(W)
        let n = mu.n() as f64;
        let beta = s.beta();
        let k = s.size_constant * sphere_area(mu.n()) * (1.0 / n + 1.0 / beta);
        let dropped = whitney.truncated_in_box(r, tree);
        let terms: Vec<f64> = dropped
            .iter()
            .map(|&c| {
                let cell = &whitney.truncated[c];
                let l = cell.side();
                let v = k * (sup.band[0] * l).powf(-beta);
                v * v * l.powf(w) * cell.volume()
            })
            .collect();
        sum::pairwise_slice(&terms) / norm
    };
    let ratio = total / norm;
    Ok(FunctionalReport {
        level: root.level,
        index: root.generation_index,
        ratio,
        truncation_bound: bound,
        nodes,
        quadrature: q.clone(),
        warning: if s.plane_cancellation {
            None
        } else {
            warning_for(ratio, bound)
        },
    })
}

/// `∫ |T_{S,μ}f|² d(x,E)^{2β-(d-n)} dx / ∫ |f|² dμ` over every emitted
/// Whitney cell.
pub fn sqfn_norm(
    s: &Kernel,
    mu: &DiscreteMeasure,
    f: &[f64],
    whitney: &Whitney,
    q: &QuadratureSpec,
) -> Result<FunctionalReport> {
    check_kernel(s, mu)?;
    q.validate()?;
    if f.len() != mu.len() {
        return Err(invalid("f must have one value per atom"));
    }
    let norm = sum::pairwise(mu.len(), |i| f[i] * f[i] * mu.weight(i));
    if !(norm > 0.0) {
        return Err(invalid("f has zero L2(mu) norm"));
    }
    let w = s.weight_exponent(mu.d());
    let cells: Vec<usize> = (0..whitney.cells.len()).collect();
    let (total, nodes) = integrate_cells(&cells, whitney, mu, w, q.whitney_subdiv, |x, _, _| {
        t_mu_raw(s, mu, x, Some(f))
    })?;
    let dropped: Vec<usize> = (0..whitney.truncated.len()).collect();
    let bound = truncated_estimate(s, mu, Some(f), &dropped, whitney, w) / norm;
    let ratio = total / norm;
    Ok(FunctionalReport {
        level: 0,
        index: 0,
        ratio,
        truncation_bound: bound,
        nodes,
        quadrature: q.clone(),
        warning: warning_for(ratio, bound),
    })
}
