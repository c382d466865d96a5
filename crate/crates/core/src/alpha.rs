//! Bounded-Lipschitz distance in a ball, alpha-numbers and their packing.
//!
//! `d_B(σ, ν) = sup { ∫f dσ - ∫f dν : Lip f <= 1, spt f ⊂ B }` restricted to
//! the atoms is a finite LP. With a ground node standing for `∂B` it is the
//! dual of an uncapacitated transport problem on the metric
//! `D(x, y) = min(|x - y|, b(x) + b(y))`, `b(x) = d(x, ∂B)`, which the
//! network simplex in `transport` solves exactly.

use nalgebra::{DMatrix, SymmetricEigen};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::lattice::CubeTree;
use crate::measures::{dot, lattice_in_ball, lex_cmp, AtomicMeasure, DiscreteMeasure, Plane};
use crate::spatial::{dist, dist2, KdTree};
use crate::sum;
use crate::transport;

/// Optimal value of the ball LP with a dual certificate.
#[derive(Debug, Clone, PartialEq)]
pub struct BallDistance {
    /// Transport cost (primal optimum, an upper bound for the sup).
    pub value: f64,
    /// `∫f dσ - ∫f dν` for the certificate `f` (a lower bound).
    pub dual: f64,
    /// Certificate `f` at the atoms of `σ` (zero outside the ball).
    pub sigma_f: Vec<f64>,
    /// Certificate `f` at the atoms of `ν`.
    pub nu_f: Vec<f64>,
}

impl BallDistance {
    pub fn gap(&self) -> f64 {
        self.value - self.dual
    }
}

/// Exact `d_B(σ, ν)` for atomic measures and the open ball `B(center, radius)`.
///
/// Atoms on or outside the sphere are ignored: `f` vanishes there.
pub fn d_ball(
    sigma: &AtomicMeasure,
    nu: &AtomicMeasure,
    center: &[f64],
    radius: f64,
) -> Result<BallDistance> {
    let d = center.len();
    if sigma.dim() != d || nu.dim() != d {
        return Err(invalid("measure and ball dimensions differ"));
    }
    if !(radius > 0.0 && radius.is_finite()) {
        return Err(invalid("ball radius must be positive"));
    }
    // (measure, atom) pairs inside the ball
    let mut inside: Vec<(u8, usize)> = Vec::new();
    for (tag, m) in [(0u8, sigma), (1u8, nu)] {
        for i in 0..m.len() {
            if dist(m.point(i), center) < radius {
                inside.push((tag, i));
            }
        }
    }
    if inside.is_empty() {
        return Err(invalid("neither measure has an atom in the ball"));
    }
    let point = |t: (u8, usize)| {
        if t.0 == 0 {
            sigma.point(t.1)
        } else {
            nu.point(t.1)
        }
    };
    inside.sort_by(|&a, &b| lex_cmp(point(a), point(b)).then(a.cmp(&b)));

    // merge coincident atoms into nodes
    let mut coords: Vec<f64> = Vec::new();
    let mut g: Vec<f64> = Vec::new();
    let mut node_of: Vec<usize> = Vec::with_capacity(inside.len());
    for (k, &t) in inside.iter().enumerate() {
        let w = if t.0 == 0 {
            sigma.weight(t.1)
        } else {
            -nu.weight(t.1)
        };
        if k > 0 && point(inside[k - 1]) == point(t) {
            *g.last_mut().unwrap() += w;
        } else {
            coords.extend_from_slice(point(t));
            g.push(w);
        }
        node_of.push(g.len() - 1);
    }
    let b: Vec<f64> = coords
        .chunks(d)
        .map(|p| (radius - dist(p, center)).max(0.0))
        .collect();
    let (value, f) = solve_nodes(d, &coords, &g, &b)?;

    let mut sigma_f = vec![0.0; sigma.len()];
    let mut nu_f = vec![0.0; nu.len()];
    for (k, &t) in inside.iter().enumerate() {
        if t.0 == 0 {
            sigma_f[t.1] = f[node_of[k]];
        } else {
            nu_f[t.1] = f[node_of[k]];
        }
    }
    let dual = sum::pairwise(g.len(), |i| g[i] * f[i]);
    Ok(BallDistance {
        value,
        dual,
        sigma_f,
        nu_f,
    })
}

/// Solve the ball LP on merged nodes with signed masses `g` and boundary
/// distances `b`. Returns the transport cost and a feasible `f` per node.
fn solve_nodes(d: usize, coords: &[f64], g: &[f64], b: &[f64]) -> Result<(f64, Vec<f64>)> {
    let count = g.len();
    let total = sum::pairwise_slice(g);
    let sources: Vec<usize> = (0..count).filter(|&i| g[i] > 0.0).collect();
    let sinks: Vec<usize> = (0..count).filter(|&i| g[i] < 0.0).collect();
    // the ground (the sphere) absorbs the imbalance
    const GROUND: usize = usize::MAX;
    let mut src: Vec<usize> = sources.clone();
    let mut snk: Vec<usize> = sinks.clone();
    let mut supply: Vec<f64> = sources.iter().map(|&i| g[i]).collect();
    let mut demand: Vec<f64> = sinks.iter().map(|&i| -g[i]).collect();
    if total > 0.0 {
        snk.push(GROUND);
        demand.push(total);
    } else if total < 0.0 {
        src.push(GROUND);
        supply.push(-total);
    }
    if src.is_empty() || snk.is_empty() {
        return Ok((0.0, vec![0.0; count]));
    }
    let point = |i: usize| &coords[i * d..(i + 1) * d];
    let metric = |i: usize, j: usize| -> f64 {
        match (i == GROUND, j == GROUND) {
            (true, true) => 0.0,
            (true, false) => b[j],
            (false, true) => b[i],
            (false, false) => dist(point(i), point(j)).min(b[i] + b[j]),
        }
    };
    let nt = snk.len();
    let mut cost = vec![0.0; src.len() * nt];
    for (si, &s) in src.iter().enumerate() {
        for (ti, &t) in snk.iter().enumerate() {
            cost[si * nt + ti] = metric(s, t);
        }
    }
    let sol = transport::solve(&supply, &demand, &cost)?;
    // c-transform of the sink potentials: psi(p) = min_t f_t + D(p, t)
    let phi: Vec<f64> = (0..nt).map(|ti| -sol.potentials[src.len() + ti]).collect();
    let psi = |i: usize| -> f64 {
        snk.iter()
            .enumerate()
            .map(|(ti, &t)| phi[ti] + metric(i, t))
            .fold(f64::INFINITY, f64::min)
    };
    let ground = psi(GROUND);
    let f: Vec<f64> = (0..count)
        .map(|i| (psi(i) - ground).clamp(-b[i], b[i]))
        .collect();
    Ok((sol.cost, f))
}

/// Farthest-point aggregation of `ids` (atoms of `mu`) onto at most `cap`
/// of them. Returns `None` when no aggregation is needed.
fn aggregate(mu: &DiscreteMeasure, ids: &[usize], center: &[f64], cap: usize) -> Option<Aggregate> {
    let d = mu.d();
    if ids.len() <= cap {
        return None;
    }
    // near-ties are broken by position in `ids` so that rigid motions of the
    // data do not change the selection through rounding
    let tie = 1e-9;
    let first = ids
        .iter()
        .enumerate()
        .fold((0usize, f64::INFINITY), |best, (k, &i)| {
            let v = dist(mu.point(i), center);
            if v < best.1 * (1.0 - tie) - 1e-300 {
                (k, v)
            } else {
                best
            }
        })
        .0;
    let mut chosen = vec![first];
    let mut near: Vec<f64> = ids
        .iter()
        .map(|&i| dist(mu.point(i), mu.point(ids[first])))
        .collect();
    while chosen.len() < cap {
        let mut best = (usize::MAX, -1.0);
        for (k, &v) in near.iter().enumerate() {
            if v > best.1 * (1.0 + tie) {
                best = (k, v);
            }
        }
        let c = best.0;
        chosen.push(c);
        let pc = mu.point(ids[c]);
        for (k, &i) in ids.iter().enumerate() {
            near[k] = near[k].min(dist(mu.point(i), pc));
        }
    }
    let mut rep_coords = Vec::with_capacity(chosen.len() * d);
    for &c in &chosen {
        rep_coords.extend_from_slice(mu.point(ids[c]));
    }
    let kd = KdTree::new(&rep_coords, d);
    let rep = |r: usize| &rep_coords[r * d..(r + 1) * d];
    let mut w = vec![0.0; chosen.len()];
    let mut err_terms = vec![0.0; ids.len()];
    if mu.n() == 1 {
        // linear interpolation between the two representatives an atom
        // sits between: mass and first moment are kept, so a uniform
        // density stays uniform
        let reach = 2.5
            * (0..chosen.len())
                .map(|r| {
                    let mut nn = f64::INFINITY;
                    kd.for_each_within(rep(r), f64::INFINITY, |o, d2| {
                        if o != r {
                            nn = nn.min(d2.sqrt());
                        }
                    });
                    nn
                })
                .fold(0.0, f64::max);
        for (k, &i) in ids.iter().enumerate() {
            let p = mu.point(i);
            let wi = mu.weight(i);
            let (a, da) = kd.nearest(p).expect("representatives exist");
            let mut pick: Option<(f64, f64, usize, f64)> = None;
            if da > 0.0 {
                kd.for_each_within(p, reach, |b, _| {
                    if b == a {
                        return;
                    }
                    let (pa, pb) = (rep(a), rep(b));
                    let ab2 = dist2(pa, pb);
                    let lam = (0..d)
                        .map(|c| (p[c] - pa[c]) * (pb[c] - pa[c]))
                        .sum::<f64>()
                        / ab2;
                    if !(lam > 0.0 && lam <= 1.0) {
                        return;
                    }
                    let foot: Vec<f64> = (0..d).map(|c| pa[c] + lam * (pb[c] - pa[c])).collect();
                    let off = dist(p, &foot);
                    let better = match pick {
                        None => true,
                        Some((o, l, pb_, _)) => {
                            off < o || (off == o && (ab2 < l || (ab2 == l && b < pb_)))
                        }
                    };
                    if off <= da && better {
                        pick = Some((off, ab2, b, lam));
                    }
                });
            }
            match pick {
                Some((_, _, b, lam)) => {
                    w[a] += (1.0 - lam) * wi;
                    w[b] += lam * wi;
                    err_terms[k] = wi * ((1.0 - lam) * da + lam * dist(p, rep(b)));
                }
                None => {
                    w[a] += wi;
                    err_terms[k] = wi * da;
                }
            }
        }
    } else {
        // nearest representative, split evenly on ties
        let mut tied = Vec::new();
        for (k, &i) in ids.iter().enumerate() {
            let p = mu.point(i);
            let (_, dmin) = kd.nearest(p).expect("representatives exist");
            tied.clear();
            kd.for_each_within(p, dmin * (1.0 + tie), |r, _| tied.push(r));
            let share = mu.weight(i) / tied.len() as f64;
            for &r in &tied {
                w[r] += share;
            }
            err_terms[k] = mu.weight(i) * dmin * (1.0 + tie);
        }
    }
    let mut out = AtomicMeasure::empty(d);
    for (slot, &c) in chosen.iter().enumerate() {
        out.push(mu.point(ids[c]), w[slot]);
    }
    Some(Aggregate {
        sigma: out,
        err: sum::pairwise_slice(&err_terms),
        cover: near.iter().fold(0.0, |m: f64, &v| m.max(v)),
    })
}

struct Aggregate {
    sigma: AtomicMeasure,
    // sum of mass times distance moved
    err: f64,
    // largest distance from an atom to its nearest representative
    cover: f64,
}

/// Minimizer of `α` for one cube.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlphaResult {
    pub cube: usize,
    pub level: i32,
    pub index: usize,
    pub alpha: f64,
    /// Minimizing flat constant `c_Q`.
    pub constant: f64,
    /// Minimizing plane `L_Q`.
    pub plane: Plane,
    pub lp_gap: f64,
    pub plane_opt_residual: f64,
    /// Atoms of `mu` in `B_Q` before aggregation.
    pub atoms: usize,
}

/// Tuning for [`alpha_number`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AlphaOptions {
    /// Maximum atoms of `mu` per ball (farthest-point aggregation above).
    pub cap: usize,
    /// Stop the plane search once a full round improves less than this
    /// (relative).
    pub rel_tol: f64,
    /// Upper bound on plane-search rounds.
    pub max_rounds: usize,
}

impl Default for AlphaOptions {
    fn default() -> Self {
        AlphaOptions {
            cap: 64,
            rel_tol: 1e-3,
            max_rounds: 40,
        }
    }
}

#[derive(Debug, Clone)]
struct Eval {
    value: f64,
    constant: f64,
    gap: f64,
}

struct CubeProblem<'a> {
    // μ on the ball, aggregated when above the cap
    sigma: AtomicMeasure,
    center: &'a [f64],
    radius: f64,
    // resolution of μ and spacing of `sigma`
    step: f64,
    spacing: f64,
    // projected gaps wider than this are treated as missing data
    hole: f64,
    n: usize,
    c_max: f64,
    tol: f64,
}

impl CubeProblem<'_> {
    /// Unit-density discretization of `H^n|L` inside the ball.
    fn flat(&self, plane: &Plane) -> Result<AtomicMeasure> {
        let r = self.radius * (1.0 - 1e-9);
        let unit = if self.n == 1 {
            chord_nodes(
                plane,
                &self.sigma,
                self.center,
                r,
                self.step,
                self.spacing,
                self.hole,
            )
        } else {
            let mut unit = AtomicMeasure::empty(self.center.len());
            let w = self.spacing.powi(self.n as i32);
            lattice_in_ball(plane, self.center, r, self.spacing, |p| unit.push(p, w));
            unit
        };
        if unit.is_empty() {
            return Err(invalid("plane misses the ball"));
        }
        Ok(unit)
    }

    /// `(d_B(σ, c·unit), d/dc, duality gap)`.
    fn run(&self, unit: &AtomicMeasure, c: f64) -> Result<(f64, f64, f64)> {
        let r = d_ball(&self.sigma, &unit.scaled(c), self.center, self.radius)?;
        let slope = -sum::pairwise(unit.len(), |j| unit.weight(j) * r.nu_f[j]);
        Ok((r.value, slope, r.gap().max(0.0)))
    }

    fn value_at(&self, plane: &Plane, c: f64) -> Result<f64> {
        Ok(self.run(&self.flat(plane)?, c)?.0)
    }

    /// `min_c d_B(σ, c H^n|L)` by tangent intersection on the convex
    /// piecewise-linear function of `c`, starting near `hint` when given.
    fn evaluate(&self, plane: &Plane, hint: Option<f64>) -> Result<Eval> {
        let unit = self.flat(plane)?;
        let mut best = Eval {
            value: f64::INFINITY,
            constant: 0.0,
            gap: 0.0,
        };
        let probe = |c: f64, best: &mut Eval| -> Result<(f64, f64, f64)> {
            let (v, s, gap) = self.run(&unit, c)?;
            if v < best.value {
                *best = Eval {
                    value: v,
                    constant: c,
                    gap,
                };
            }
            Ok((c, v, s))
        };
        // bracket the minimum between a point of negative and one of
        // positive slope
        let (mut lo, mut hi);
        match hint.filter(|&c| c > 0.0 && c < self.c_max) {
            Some(c) => {
                let first = probe(c, &mut best)?;
                if first.2 == 0.0 {
                    return Ok(best);
                }
                if first.2 < 0.0 {
                    lo = first;
                    loop {
                        let next = (2.0 * lo.0).min(self.c_max);
                        let p = probe(next, &mut best)?;
                        if p.2 >= 0.0 {
                            hi = p;
                            break;
                        }
                        if next == self.c_max {
                            return Ok(best);
                        }
                        lo = p;
                    }
                } else {
                    hi = first;
                    let mut tries = 0;
                    loop {
                        tries += 1;
                        let next = if tries > 3 { 0.0 } else { 0.25 * hi.0 };
                        let p = probe(next, &mut best)?;
                        if p.2 <= 0.0 || next == 0.0 {
                            lo = p;
                            break;
                        }
                        hi = p;
                    }
                    if lo.2 >= 0.0 {
                        return Ok(best);
                    }
                }
            }
            None => {
                lo = probe(0.0, &mut best)?;
                if lo.2 >= 0.0 {
                    return Ok(best);
                }
                hi = probe(self.c_max, &mut best)?;
                if hi.2 <= 0.0 {
                    return Ok(best);
                }
            }
        }
        if hi.2 == 0.0 {
            return Ok(best);
        }
        for _ in 0..30 {
            let (a, va, sa) = lo;
            let (b, vb, sb) = hi;
            let c = ((vb - va + sa * a - sb * b) / (sa - sb)).clamp(a, b);
            let lower = va + sa * (c - a);
            if best.value - lower <= self.tol.max(1e-6 * best.value) || b - a <= 1e-15 * b {
                break;
            }
            let p = probe(c, &mut best)?;
            if p.2 < 0.0 {
                lo = p;
            } else if p.2 > 0.0 {
                hi = p;
            } else {
                break;
            }
        }
        Ok(best)
    }
}

/// Unit-density quadrature of `H^1` on the chord `L ∩ B(center, radius)`.
///
/// Nodes are the projections of the atoms of `sigma` that land on the chord;
/// gaps wider than `hole` are filled evenly at about `fill` and the chord
/// ends are continued at `fill`. A node carries half the distance to each neighbour;
/// an outermost node gets half a `step` (data) or half a `fill` (filler)
/// beyond itself, which is what an atom of resolution `step` stands for.
/// Sharing nodes with the data keeps the atomization of `μ` from showing up
/// as a spurious distance of order `step`.
fn chord_nodes(
    plane: &Plane,
    sigma: &AtomicMeasure,
    center: &[f64],
    radius: f64,
    step: f64,
    fill: f64,
    hole: f64,
) -> AtomicMeasure {
    let d = center.len();
    let mut out = AtomicMeasure::empty(d);
    let foot = plane.project(center);
    let h2 = dist2(&foot, center);
    if h2 >= radius * radius {
        return out;
    }
    let rho = (radius * radius - h2).sqrt();
    let e = &plane.basis()[0];
    let mut s: Vec<f64> = (0..sigma.len())
        .map(|i| {
            let p = sigma.point(i);
            (0..d).map(|k| (p[k] - foot[k]) * e[k]).sum::<f64>()
        })
        .filter(|v| v.abs() < rho)
        .collect();
    s.sort_by(f64::total_cmp);
    s.dedup_by(|a, b| (*a - *b).abs() <= 1e-12 * rho);

    // (position, half-width beyond it when outermost)
    let mut nodes: Vec<(f64, f64)> = Vec::with_capacity(s.len() + 8);
    if s.is_empty() {
        let k = ((rho / fill).ceil() as i64 - 1).max(0);
        for i in -k..=k {
            nodes.push((i as f64 * fill, 0.5 * fill));
        }
    } else {
        let first = s[0];
        let before = ((first + rho) / fill).ceil() as i64 - 1;
        for k in (1..=before).rev() {
            nodes.push((first - k as f64 * fill, 0.5 * fill));
        }
        for (i, &v) in s.iter().enumerate() {
            if i > 0 {
                let gap = v - s[i - 1];
                if gap > hole {
                    let pieces = (gap / fill).ceil() as usize;
                    for k in 1..pieces {
                        nodes.push((s[i - 1] + gap * k as f64 / pieces as f64, 0.5 * fill));
                    }
                }
            }
            nodes.push((v, 0.5 * step));
        }
        let last = s[s.len() - 1];
        let after = ((rho - last) / fill).ceil() as i64 - 1;
        for k in 1..=after {
            nodes.push((last + k as f64 * fill, 0.5 * fill));
        }
    }

    let m = nodes.len();
    let mut p = vec![0.0; d];
    for i in 0..m {
        let left = if i == 0 {
            nodes[0].1
        } else {
            0.5 * (nodes[i].0 - nodes[i - 1].0)
        };
        let right = if i == m - 1 {
            nodes[m - 1].1
        } else {
            0.5 * (nodes[i + 1].0 - nodes[i].0)
        };
        for k in 0..d {
            p[k] = foot[k] + nodes[i].0 * e[k];
        }
        out.push(&p, left + right);
    }
    out
}

/// Weighted principal plane of `sigma`.
fn principal_plane(sigma: &AtomicMeasure, n: usize) -> Result<Plane> {
    let d = sigma.dim();
    let mass = sigma.mass();
    let mut mean = vec![0.0; d];
    for k in 0..d {
        mean[k] = sum::pairwise(sigma.len(), |i| sigma.weight(i) * sigma.point(i)[k]) / mass;
    }
    let cov = DMatrix::from_fn(d, d, |r, c| {
        sum::pairwise(sigma.len(), |i| {
            let p = sigma.point(i);
            sigma.weight(i) * (p[r] - mean[r]) * (p[c] - mean[c])
        }) / mass
    });
    if cov.iter().all(|v| *v == 0.0) {
        return Err(Error::DegenerateSupport(
            "all atoms in the ball coincide; no principal directions".into(),
        ));
    }
    let eig = SymmetricEigen::new(cov);
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| {
        eig.eigenvalues[b]
            .total_cmp(&eig.eigenvalues[a])
            .then(a.cmp(&b))
    });
    let vecs: Vec<Vec<f64>> = order[..n]
        .iter()
        .map(|&k| eig.eigenvectors.column(k).iter().copied().collect())
        .collect();
    Plane::from_spanning(mean, &vecs)
}

/// Rotate direction `a` of the plane toward normal `k` by `theta`, keeping
/// the projection of `pivot` fixed.
fn rotated(
    plane: &Plane,
    normals: &[Vec<f64>],
    a: usize,
    k: usize,
    theta: f64,
    pivot: &[f64],
) -> Result<(Plane, Vec<Vec<f64>>)> {
    let (s, c) = theta.sin_cos();
    let mut basis = plane.basis().to_vec();
    let mut normals = normals.to_vec();
    let e = basis[a].clone();
    let nv = normals[k].clone();
    for i in 0..e.len() {
        basis[a][i] = c * e[i] + s * nv[i];
        normals[k][i] = -s * e[i] + c * nv[i];
    }
    let p = Plane::from_spanning(plane.project(pivot), &basis)?;
    Ok((p, normals))
}

fn translated(plane: &Plane, dir: &[f64], t: f64) -> Plane {
    let base: Vec<f64> = plane
        .base()
        .iter()
        .zip(dir)
        .map(|(b, v)| b + t * v)
        .collect();
    Plane::new(base, plane.basis().to_vec()).expect("basis unchanged")
}

/// α̂(Q): local minimum over planes meeting `½B_Q` and constants `c >= 0` of
/// `d_{B_Q}(μ, c H^n|L) / l(Q)^{n+1}`.
pub fn alpha_number(
    q: usize,
    mu: &DiscreteMeasure,
    tree: &CubeTree,
    opts: &AlphaOptions,
) -> Result<AlphaResult> {
    let cube = tree.cube(q)?;
    let n = mu.n();
    let l = cube.side();
    let (center, radius) = tree.ball(q);
    let ids = mu.atoms_in_ball(center, radius * (1.0 - 1e-9));
    if ids.len() < n + 1 {
        return Err(invalid(format!(
            "cube {q} (level {}, index {}): {} atoms in B_Q, need at least {}",
            cube.level,
            cube.generation_index,
            ids.len(),
            n + 1
        )));
    }
    let (sigma, agg_err, cover) = match aggregate(mu, &ids, center, opts.cap.max(n + 1)) {
        Some(agg) => (agg.sigma, agg.err, agg.cover),
        None => {
            let mut atoms = AtomicMeasure::empty(mu.d());
            for &i in &ids {
                atoms.push(mu.point(i), mu.weight(i));
            }
            (atoms, 0.0, 0.0)
        }
    };
    // keep the flat quadrature at about `cap` nodes even on sparse sets
    let cap = opts.cap.max(n + 1) as f64;
    let spacing = (mu.resolution() * (ids.len() as f64 / sigma.len() as f64).powf(1.0 / n as f64))
        .max(2.0 * radius / cap.powf(1.0 / n as f64));
    let scale = l.powi(n as i32 + 1);
    let problem = CubeProblem {
        c_max: 2.0 * sigma.mass() / l.powi(n as i32),
        sigma,
        center,
        radius,
        step: mu.resolution(),
        spacing,
        hole: 2.5 * spacing + 2.0 * cover,
        n,
        tol: 1e-10 * scale,
    };
    let half = tree.engulfing() * l;
    let admissible = |p: &Plane| p.distance(center) <= half;

    let mut plane = principal_plane(&problem.sigma, n)?;
    if !admissible(&plane) {
        // slide along the normal onto the boundary of ½B_Q
        let foot = plane.project(center);
        let off: Vec<f64> = center.iter().zip(&foot).map(|(c, f)| c - f).collect();
        let len = dot(&off, &off).sqrt();
        let dir: Vec<f64> = off.iter().map(|v| v / len).collect();
        plane = translated(&plane, &dir, len - 0.999 * half);
    }
    let mut normals = plane.normal_basis();
    let mut best = problem.evaluate(&plane, None)?;
    let mut step_t = 0.25 * l;
    let mut step_r = 0.1;
    let mut residual = 0.0;
    let mut fails = 0;
    for _ in 0..opts.max_rounds {
        if best.value <= 1e-12 * scale {
            break;
        }
        // compass moves screened at the current constant
        let mut cands: Vec<(Plane, Vec<Vec<f64>>)> = Vec::new();
        for k in 0..normals.len() {
            for sgn in [1.0, -1.0] {
                cands.push((
                    translated(&plane, &normals[k], sgn * step_t),
                    normals.clone(),
                ));
            }
        }
        for a in 0..n {
            for k in 0..normals.len() {
                for sgn in [1.0, -1.0] {
                    cands.push(rotated(&plane, &normals, a, k, sgn * step_r, center)?);
                }
            }
        }
        let mut pick: Option<(f64, usize)> = None;
        for (i, (cand, _)) in cands.iter().enumerate() {
            if !admissible(cand) {
                continue;
            }
            let v = problem.value_at(cand, best.constant)?;
            let cur = pick.map(|p| p.0).unwrap_or(best.value);
            if v < cur * (1.0 - 1e-9) {
                pick = Some((v, i));
            }
        }
        let mut improved = false;
        if let Some((_, i)) = pick {
            let (p, nr) = cands.swap_remove(i);
            let e = problem.evaluate(&p, Some(best.constant))?;
            let rel = (best.value - e.value) / best.value;
            residual = rel;
            best = e;
            plane = p;
            normals = nr;
            improved = rel >= opts.rel_tol;
        } else {
            residual = 0.0;
        }
        if improved {
            fails = 0;
        } else {
            step_t *= 0.5;
            step_r *= 0.5;
            fails += 1;
            if fails >= 3 {
                break;
            }
        }
    }
    Ok(AlphaResult {
        cube: q,
        level: cube.level,
        index: cube.generation_index,
        alpha: best.value / scale,
        constant: best.constant,
        plane: plane.rebased_at(center),
        lp_gap: (best.gap + agg_err) / scale,
        plane_opt_residual: residual,
        atoms: ids.len(),
    })
}

/// α̂ for the listed cubes in parallel; results follow the input order.
pub fn alpha_numbers(
    ids: &[usize],
    mu: &DiscreteMeasure,
    tree: &CubeTree,
    opts: &AlphaOptions,
) -> Result<Vec<AlphaResult>> {
    ids.par_iter()
        .map(|&q| alpha_number(q, mu, tree, opts))
        .collect()
}

/// Alpha results indexed by cube id.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct AlphaTable {
    entries: Vec<Option<AlphaResult>>,
}

impl AlphaTable {
    pub fn new(tree_len: usize) -> Self {
        AlphaTable {
            entries: vec![None; tree_len],
        }
    }

    pub fn insert(&mut self, r: AlphaResult) {
        let q = r.cube;
        if q >= self.entries.len() {
            self.entries.resize(q + 1, None);
        }
        self.entries[q] = Some(r);
    }

    pub fn get(&self, q: usize) -> Option<&AlphaResult> {
        self.entries.get(q).and_then(|e| e.as_ref())
    }

    pub fn iter(&self) -> impl Iterator<Item = &AlphaResult> {
        self.entries.iter().flatten()
    }

    pub fn len(&self) -> usize {
        self.iter().count()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// `level,index,alpha,c,plane_base...,plane_basis...,lp_gap` rows.
    pub fn write_csv(&self, path: &std::path::Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        let Some(first) = self.iter().next() else {
            w.write_record(["level", "index", "alpha", "c", "lp_gap"])?;
            w.flush()?;
            return Ok(());
        };
        let d = first.plane.ambient();
        let n = first.plane.dim();
        let mut header: Vec<String> = ["level", "index", "alpha", "c"].map(String::from).to_vec();
        header.extend((1..=d).map(|k| format!("plane_base{k}")));
        for a in 1..=n {
            header.extend((1..=d).map(|k| format!("plane_basis{a}_{k}")));
        }
        header.push("lp_gap".into());
        w.write_record(&header)?;
        for r in self.iter() {
            let mut row = vec![
                r.level.to_string(),
                r.index.to_string(),
                format!("{}", r.alpha),
                format!("{}", r.constant),
            ];
            row.extend(r.plane.base().iter().map(|v| format!("{v}")));
            for e in r.plane.basis() {
                row.extend(e.iter().map(|v| format!("{v}")));
            }
            row.push(format!("{}", r.lp_gap));
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// `Σ_{Q ⊆ R} α̂(Q)² μ(Q) / μ(R)`, over descendants at most `depth` levels
/// below `R` (all available levels when `None`).
pub fn alpha_packing(
    r: usize,
    table: &AlphaTable,
    tree: &CubeTree,
    depth: Option<i32>,
) -> Result<f64> {
    let root = tree.cube(r)?;
    let deepest = depth.map(|k| root.level + k).unwrap_or(tree.j_max());
    let mut terms = Vec::new();
    for q in tree.descendants(r) {
        let c = &tree.cubes()[q];
        if c.level > deepest {
            continue;
        }
        let a = table.get(q).ok_or(Error::MissingAlpha {
            level: c.level,
            index: c.generation_index,
        })?;
        terms.push(a.alpha * a.alpha * c.mass);
    }
    Ok(sum::pairwise_slice(&terms) / root.mass)
}

/// Hausdorff distance between `L1 ∩ B` and `L2 ∩ B` (closed ball).
///
/// Points of each cap are sampled on a lattice of step at most
/// `radius / 256` plus its rim; distances to the other cap are exact.
pub fn plane_hausdorff(l1: &Plane, l2: &Plane, center: &[f64], radius: f64) -> Result<f64> {
    for l in [l1, l2] {
        if l.distance(center) > radius {
            return Err(invalid("plane does not meet the ball"));
        }
    }
    let one_side = |a: &Plane, b: &Plane| -> f64 {
        let mut worst: f64 = 0.0;
        for_cap_samples(a, center, radius, |p| {
            worst = worst.max(distance_to_cap(b, center, radius, p));
        });
        worst
    };
    Ok(one_side(l1, l2).max(one_side(l2, l1)))
}

fn cap_disk(l: &Plane, center: &[f64], radius: f64) -> (Vec<f64>, f64) {
    let foot = l.project(center);
    let h2 = dist2(&foot, center);
    (foot, (radius * radius - h2).max(0.0).sqrt())
}

fn distance_to_cap(l: &Plane, center: &[f64], radius: f64, p: &[f64]) -> f64 {
    let (foot, rho) = cap_disk(l, center, radius);
    let q = l.project(p);
    let r = dist(&q, &foot);
    if r <= rho {
        dist(p, &q)
    } else {
        let t = rho / r;
        let edge: Vec<f64> = foot
            .iter()
            .zip(&q)
            .map(|(f, qi)| f + t * (qi - f))
            .collect();
        dist(p, &edge)
    }
}

fn for_cap_samples<F: FnMut(&[f64])>(l: &Plane, center: &[f64], radius: f64, mut visit: F) {
    let (foot, rho) = cap_disk(l, center, radius);
    if rho == 0.0 {
        visit(&foot);
        return;
    }
    let step = radius / 256.0;
    let anchored = Plane::new(foot.clone(), l.basis().to_vec()).expect("orthonormal");
    lattice_in_ball(&anchored, &foot, rho * (1.0 + 1e-12), step, &mut visit);
    // rim
    match l.dim() {
        1 => {
            for s in [-1.0, 1.0] {
                let p: Vec<f64> = foot
                    .iter()
                    .zip(&l.basis()[0])
                    .map(|(f, e)| f + s * rho * e)
                    .collect();
                visit(&p);
            }
        }
        _ => {
            let e = l.basis();
            let k = ((2.0 * std::f64::consts::PI * rho / step).ceil() as usize).max(8);
            let mut v = vec![0.0; foot.len()];
            // great circles in every coordinate pair of the plane
            for a in 0..e.len() {
                for b in a + 1..e.len() {
                    for m in 0..k {
                        let th = 2.0 * std::f64::consts::PI * m as f64 / k as f64;
                        for i in 0..v.len() {
                            v[i] = foot[i] + rho * (th.cos() * e[a][i] + th.sin() * e[b][i]);
                        }
                        visit(&v);
                    }
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::build_cubes;
    use crate::measures::{generate, DatasetSpec, GraphFunction};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn atoms(d: usize, pts: &[(Vec<f64>, f64)]) -> AtomicMeasure {
        let mut m = AtomicMeasure::empty(d);
        for (p, w) in pts {
            m.push(p, *w);
        }
        m
    }

    #[test]
    fn identical_measures_are_at_distance_zero() {
        let s = atoms(2, &[(vec![0.1, 0.0], 1.0), (vec![-0.3, 0.2], 0.5)]);
        let r = d_ball(&s, &s, &[0.0, 0.0], 1.0).unwrap();
        assert_eq!(r.value, 0.0);
    }

    #[test]
    fn two_atom_formula() {
        let s = atoms(2, &[(vec![-0.2, 0.0], 1.0)]);
        let v = atoms(2, &[(vec![0.2, 0.0], 1.0)]);
        let r = d_ball(&s, &v, &[0.0, 0.0], 1.0).unwrap();
        assert!((r.value - 0.4).abs() < 1e-12);
        assert!(r.gap().abs() < 1e-12);
        // far apart relative to the ball: the boundary route wins
        let s = atoms(2, &[(vec![-0.95, 0.0], 1.0)]);
        let v = atoms(2, &[(vec![0.95, 0.0], 1.0)]);
        let r = d_ball(&s, &v, &[0.0, 0.0], 1.0).unwrap();
        assert!((r.value - 0.1).abs() < 1e-12);
    }

    #[test]
    fn mass_excess_goes_to_the_boundary() {
        let s = atoms(2, &[(vec![0.0, 0.0], 1.0)]);
        let v = atoms(2, &[(vec![0.0, 0.0], 2.0)]);
        let r = d_ball(&s, &v, &[0.0, 0.0], 1.0).unwrap();
        assert!((r.value - 1.0).abs() < 1e-12);
        assert!((r.sigma_f[0] + 1.0).abs() < 1e-12);
    }

    #[test]
    fn empty_ball_is_rejected() {
        let s = atoms(2, &[(vec![5.0, 0.0], 1.0)]);
        assert!(d_ball(&s, &s, &[0.0, 0.0], 1.0).is_err());
    }

    fn random_measure(rng: &mut ChaCha8Rng, k: usize, d: usize) -> AtomicMeasure {
        let mut m = AtomicMeasure::empty(d);
        for _ in 0..k {
            let p: Vec<f64> = (0..d).map(|_| rng.gen_range(-0.8..0.8)).collect();
            m.push(&p, rng.gen_range(0.1..1.0));
        }
        m
    }

    #[test]
    fn certificate_is_feasible() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..30 {
            let s = random_measure(&mut rng, 20, 2);
            let v = random_measure(&mut rng, 15, 2);
            let r = d_ball(&s, &v, &[0.0, 0.0], 1.0).unwrap();
            let mut pts = Vec::new();
            for i in 0..s.len() {
                pts.push((s.point(i).to_vec(), r.sigma_f[i]));
            }
            for j in 0..v.len() {
                pts.push((v.point(j).to_vec(), r.nu_f[j]));
            }
            for (p, f) in &pts {
                let b = (1.0 - dist(p, &[0.0, 0.0])).max(0.0);
                assert!(f.abs() <= b + 1e-12);
                for (q, h) in &pts {
                    assert!(f - h <= dist(p, q) + 1e-12);
                }
            }
            assert!(r.gap().abs() < 1e-10 * (1.0 + r.value));
        }
    }

    #[test]
    fn symmetry_triangle_and_homogeneity() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let c = [0.0, 0.0];
        for _ in 0..30 {
            let a = random_measure(&mut rng, 6, 2);
            let b = random_measure(&mut rng, 6, 2);
            let e = random_measure(&mut rng, 6, 2);
            let ab = d_ball(&a, &b, &c, 1.0).unwrap().value;
            let ba = d_ball(&b, &a, &c, 1.0).unwrap().value;
            let ae = d_ball(&a, &e, &c, 1.0).unwrap().value;
            let eb = d_ball(&e, &b, &c, 1.0).unwrap().value;
            assert!((ab - ba).abs() < 1e-9);
            assert!(ab <= ae + eb + 1e-9);
            let scaled = d_ball(&a.scaled(3.5), &b.scaled(3.5), &c, 1.0)
                .unwrap()
                .value;
            assert!((scaled - 3.5 * ab).abs() < 1e-9 * (1.0 + ab));
            assert!(ab <= (a.mass() + b.mass()) * 1.0 + 1e-12);
        }
    }

    fn flat_segment(side: f64, step: f64) -> DiscreteMeasure {
        generate(&DatasetSpec::Plane {
            n: 1,
            d: 2,
            side,
            step,
        })
        .unwrap()
    }

    #[test]
    fn flat_data_has_zero_alpha() {
        let mu = flat_segment(4.0, 1.0 / 128.0);
        let tree = build_cubes(&mu, 0, 5).unwrap();
        let ids = crate::lattice::interior_cubes(&mu, &tree, 3);
        assert!(!ids.is_empty());
        for q in ids {
            let r = alpha_number(q, &mu, &tree, &AlphaOptions::default()).unwrap();
            assert!(r.alpha <= 1e-6, "{r:?}");
            assert!((r.constant - 1.0).abs() <= 1e-3, "{r:?}");
        }
    }

    #[test]
    fn flat_data_stays_flat_under_aggregation() {
        let mu = flat_segment(4.0, 1.0 / 128.0);
        let tree = build_cubes(&mu, 0, 5).unwrap();
        for cap in [16, 50, 100, 200] {
            let opts = AlphaOptions {
                cap,
                ..AlphaOptions::default()
            };
            for q in crate::lattice::interior_cubes(&mu, &tree, 3) {
                let r = alpha_number(q, &mu, &tree, &opts).unwrap();
                assert!(r.alpha <= 1e-6, "cap {cap}: {r:?}");
            }
        }
    }

    /// Upper bound for `α` of the unit circle at a cube of side `l`: move the
    /// arc in the ball vertically onto the line at depth `m` below the cube
    /// centre, then along the line onto the uniform measure of equal mass
    /// on the chord (a 1-D transport); minimize over `m`.
    fn circle_alpha_upper(l: f64, engulf: f64) -> f64 {
        let r = 2.0 * engulf * l;
        let psi_max = 2.0 * (r / 2.0).asin();
        let k = 4000;
        let dpsi = 2.0 * psi_max / k as f64;
        let mut best = f64::INFINITY;
        for mi in 0..=400 {
            let m = 0.5 * r * mi as f64 / 400.0;
            let vertical: f64 = (0..k)
                .map(|i| {
                    let psi = -psi_max + (i as f64 + 0.5) * dpsi;
                    (psi.cos() - (1.0 - m)).abs() * dpsi
                })
                .sum();
            let rho = (r * r - m * m).sqrt();
            let c = 2.0 * psi_max / (2.0 * rho);
            let xmax = rho.max(psi_max.sin());
            let nx = 4000;
            let dx = 2.0 * xmax / nx as f64;
            let along: f64 = (0..nx)
                .map(|i| {
                    let x = -xmax + (i as f64 + 0.5) * dx;
                    let fa = x.clamp(-psi_max.sin(), psi_max.sin()).asin() + psi_max;
                    let fb = c * (x.clamp(-rho, rho) + rho);
                    (fa - fb).abs() * dx
                })
                .sum();
            best = best.min(vertical + along);
        }
        best / (l * l)
    }

    #[test]
    fn circle_alpha_is_linear_in_side() {
        let mu = generate(&DatasetSpec::Sphere {
            n: 1,
            radius: 1.0,
            angular_step: 2.0 * std::f64::consts::PI / 4096.0,
        })
        .unwrap();
        let tree = build_cubes(&mu, 3, 7).unwrap();
        let opts = AlphaOptions::default();
        let mut q = tree.leaf_of_atom(0);
        let mut chain = Vec::new();
        while let Some(p) = tree.cubes()[q].parent {
            chain.push(q);
            q = p;
        }
        chain.push(q);
        chain.reverse();
        let alphas: Vec<f64> = chain
            .iter()
            .map(|&q| {
                let r = alpha_number(q, &mu, &tree, &opts).unwrap();
                let upper = circle_alpha_upper(tree.cubes()[q].side(), tree.engulfing());
                assert!(r.alpha <= upper * 1.01, "{} {upper}", r.alpha);
                assert!(r.alpha >= 0.1 * upper, "{} {upper}", r.alpha);
                r.alpha
            })
            .collect();
        assert_eq!(alphas.len(), 5);
        for w in alphas.windows(2) {
            let ratio = w[1] / w[0];
            assert!((ratio - 0.5).abs() <= 0.15, "{alphas:?}");
        }
    }

    #[test]
    fn alpha_scales_with_mass() {
        let spec = DatasetSpec::LipschitzGraph {
            function: GraphFunction::Sine {
                amplitude: 0.3,
                frequency: 1.0,
            },
            a: 0.0,
            b: 2.0 * std::f64::consts::PI,
            step: 2.0 * std::f64::consts::PI / 1024.0,
            lipschitz: 0.3,
        };
        let mu = generate(&spec).unwrap();
        let tree = build_cubes(&mu, 2, 5).unwrap();
        let q = tree.level(4)[3];
        let opts = AlphaOptions::default();
        let a = alpha_number(q, &mu, &tree, &opts).unwrap();
        let scaled = mu.scaled(2.5).unwrap();
        let b = alpha_number(q, &scaled, &tree, &opts).unwrap();
        assert!(a.alpha > 1e-4);
        assert!((b.alpha - 2.5 * a.alpha).abs() <= 1e-9 * a.alpha + 2.5 * a.lp_gap + b.lp_gap);
        assert!((b.constant - 2.5 * a.constant).abs() <= 1e-6 * b.constant);
    }

    #[test]
    fn alpha_is_invariant_under_rigid_motion() {
        let spec = DatasetSpec::LipschitzGraph {
            function: GraphFunction::Sine {
                amplitude: 0.3,
                frequency: 1.0,
            },
            a: 0.0,
            b: 2.0 * std::f64::consts::PI,
            step: 2.0 * std::f64::consts::PI / 1024.0,
            lipschitz: 0.3,
        };
        let mu = generate(&spec).unwrap();
        let (s, c) = 0.7f64.sin_cos();
        let moved = mu.rigid_motion(&[c, -s, s, c], &[3.0, -1.5]).unwrap();
        let tree = build_cubes(&mu, 2, 5).unwrap();
        let tree2 = build_cubes(&moved, 2, 5).unwrap();
        let opts = AlphaOptions::default();
        for j in [3, 5] {
            for (k, &q) in tree.level(j).iter().enumerate().step_by(3) {
                let a = alpha_number(q, &mu, &tree, &opts).unwrap();
                let b = alpha_number(tree2.level(j)[k], &moved, &tree2, &opts).unwrap();
                assert!(
                    (a.alpha - b.alpha).abs() <= 1e-8 * a.alpha.max(1.0),
                    "{} {}",
                    a.alpha,
                    b.alpha
                );
            }
        }
    }

    #[test]
    fn hausdorff_of_parallel_chords() {
        let l1 = Plane::coordinate(2, &[0]).unwrap();
        for t in [0.05, 0.2, 0.5] {
            let l2 = Plane::new(vec![0.0, t], vec![vec![1.0, 0.0]]).unwrap();
            let h = plane_hausdorff(&l1, &l2, &[0.0, 0.0], 1.0).unwrap();
            // the far end of the longer chord to the end of the shorter one
            let half = (1.0f64 - t * t).sqrt();
            let exact = ((1.0 - half).powi(2) + t * t).sqrt();
            assert!((h - exact).abs() < 1e-12, "{h} {exact}");
        }
        assert_eq!(plane_hausdorff(&l1, &l1, &[0.0, 0.0], 1.0).unwrap(), 0.0);
    }
}
