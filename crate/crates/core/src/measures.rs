//! Discretized measures, planes, flat measures and the test geometries.
//!
//! A measure is a finite list of weighted atoms. Integrals against
//! Lipschitz or bounded functions become weighted sums; the atomization
//! error is controlled by the `resolution` (maximum patch diameter).

use std::f64::consts::PI;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::spatial::{dist, dist2, KdTree};
use crate::sum;

/// Ambient and intrinsic dimensions plus the measured ADR constant.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AmbientParams {
    pub d: usize,
    pub n: usize,
    pub adr_constant: f64,
}

impl AmbientParams {
    pub fn new(d: usize, n: usize) -> Result<Self> {
        if d < 2 || d > 10 {
            return Err(invalid(format!("ambient dimension {d} outside 2..=10")));
        }
        if n == 0 || n >= d {
            return Err(invalid(format!("need 0 < n < d, got n={n}, d={d}")));
        }
        Ok(AmbientParams {
            d,
            n,
            adr_constant: 1.0,
        })
    }
}

/// Finite weighted point set in `R^dim`, with no regularity assumptions.
///
/// This is what the bounded-Lipschitz solver consumes; `DiscreteMeasure`
/// wraps one together with the sampling metadata.
#[derive(Debug, Clone, PartialEq)]
pub struct AtomicMeasure {
    dim: usize,
    coords: Vec<f64>,
    weights: Vec<f64>,
}

impl AtomicMeasure {
    pub fn new(dim: usize, coords: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        if dim == 0 || coords.len() != dim * weights.len() {
            return Err(invalid("coordinate buffer does not match weights"));
        }
        if let Some(w) = weights.iter().find(|w| !(w.is_finite() && **w >= 0.0)) {
            return Err(invalid(format!(
                "atom weight {w} is not a finite non-negative number"
            )));
        }
        if coords.iter().any(|c| !c.is_finite()) {
            return Err(invalid("non-finite coordinate"));
        }
        Ok(AtomicMeasure {
            dim,
            coords,
            weights,
        })
    }

    pub fn empty(dim: usize) -> Self {
        AtomicMeasure {
            dim,
            coords: Vec::new(),
            weights: Vec::new(),
        }
    }

    /// Single atom of mass `w` at `x`.
    pub fn dirac(x: &[f64], w: f64) -> Self {
        AtomicMeasure {
            dim: x.len(),
            coords: x.to_vec(),
            weights: vec![w],
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    pub fn weight(&self, i: usize) -> f64 {
        self.weights[i]
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn mass(&self) -> f64 {
        sum::pairwise_slice(&self.weights)
    }

    pub fn scaled(&self, a: f64) -> Self {
        AtomicMeasure {
            dim: self.dim,
            coords: self.coords.clone(),
            weights: self.weights.iter().map(|w| w * a).collect(),
        }
    }

    pub fn push(&mut self, x: &[f64], w: f64) {
        debug_assert_eq!(x.len(), self.dim);
        self.coords.extend_from_slice(x);
        self.weights.push(w);
    }
}

/// Weighted point cloud approximating an n-ADR measure `mu` with support `E`.
///
/// Immutable after construction. Carries a KD-tree over its atoms and, for
/// datasets with an edge (segments, graphs over an interval), a sample of
/// the edge so that downstream code can stay away from it.
#[derive(Debug, Clone)]
pub struct DiscreteMeasure {
    params: AmbientParams,
    atoms: AtomicMeasure,
    resolution: f64,
    boundary: Vec<f64>,
    diameter: f64,
    index: Arc<KdTree>,
}

impl DiscreteMeasure {
    pub fn new(
        params: AmbientParams,
        coords: Vec<f64>,
        weights: Vec<f64>,
        resolution: f64,
    ) -> Result<Self> {
        Self::with_boundary(params, coords, weights, resolution, Vec::new())
    }

    /// As [`DiscreteMeasure::new`], with sampled edge points (flattened).
    pub fn with_boundary(
        params: AmbientParams,
        coords: Vec<f64>,
        weights: Vec<f64>,
        resolution: f64,
        boundary: Vec<f64>,
    ) -> Result<Self> {
        let d = params.d;
        let atoms = AtomicMeasure::new(d, coords, weights)?;
        if atoms.is_empty() {
            return Err(invalid("measure has no atoms"));
        }
        if atoms.weights.iter().any(|&w| w <= 0.0) {
            return Err(invalid("atom weights must be strictly positive"));
        }
        if boundary.len() % d != 0 {
            return Err(invalid("boundary buffer is not a multiple of d"));
        }
        if !(resolution > 0.0 && resolution.is_finite()) {
            return Err(invalid(format!("resolution {resolution} must be positive")));
        }
        check_distinct(&atoms)?;
        let diameter = diameter_of(&atoms);
        if atoms.len() >= 2 && resolution > diameter * (1.0 + 1e-12) {
            return Err(invalid(format!(
                "resolution {resolution} exceeds the diameter {diameter}"
            )));
        }
        let index = Arc::new(KdTree::new(&atoms.coords, d));
        Ok(DiscreteMeasure {
            params,
            atoms,
            resolution,
            boundary,
            diameter,
            index,
        })
    }

    pub fn params(&self) -> &AmbientParams {
        &self.params
    }

    pub fn d(&self) -> usize {
        self.params.d
    }

    pub fn n(&self) -> usize {
        self.params.n
    }

    pub fn atoms(&self) -> &AtomicMeasure {
        &self.atoms
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        self.atoms.point(i)
    }

    pub fn weight(&self, i: usize) -> f64 {
        self.atoms.weight(i)
    }

    pub fn resolution(&self) -> f64 {
        self.resolution
    }

    pub fn diameter(&self) -> f64 {
        self.diameter
    }

    pub fn total_mass(&self) -> f64 {
        self.atoms.mass()
    }

    pub fn boundary(&self) -> &[f64] {
        &self.boundary
    }

    pub(crate) fn index(&self) -> &KdTree {
        &self.index
    }

    /// Distance to the dataset edge; infinite for closed sets.
    pub fn distance_to_boundary(&self, x: &[f64]) -> f64 {
        self.boundary
            .chunks(self.d())
            .map(|b| dist(b, x))
            .fold(f64::INFINITY, f64::min)
    }

    /// Distance from `x` to the atoms (the discrete stand-in for `d(x, E)`).
    pub fn distance_to_support(&self, x: &[f64]) -> f64 {
        self.index
            .nearest(x)
            .map(|(_, d)| d)
            .unwrap_or(f64::INFINITY)
    }

    pub fn nearest_atom(&self, x: &[f64]) -> (usize, f64) {
        self.index.nearest(x).expect("non-empty measure")
    }

    /// `mu(B(x, r))` for the closed ball, counted with a relative slack of
    /// 1e-9 on the radius so that rounding never decides membership.
    pub fn ball_mass(&self, x: &[f64], r: f64) -> f64 {
        let mut ids = Vec::new();
        self.index
            .for_each_within(x, r * (1.0 + 1e-9), |i, _| ids.push(i));
        ids.sort_unstable();
        sum::pairwise(ids.len(), |k| self.weight(ids[k]))
    }

    /// Atom indices in the open ball `B(x, r)`, ascending.
    pub fn atoms_in_ball(&self, x: &[f64], r: f64) -> Vec<usize> {
        let mut ids = Vec::new();
        let r2 = r * r;
        self.index.for_each_within(x, r, |i, d2| {
            if d2 < r2 {
                ids.push(i)
            }
        });
        ids.sort_unstable();
        ids
    }

    /// Same measure with all weights multiplied by `a > 0`.
    pub fn scaled(&self, a: f64) -> Result<Self> {
        if !(a > 0.0) {
            return Err(invalid("mass scaling must be positive"));
        }
        let mut out = self.clone();
        out.atoms = self.atoms.scaled(a);
        Ok(out)
    }

    /// Image under `x -> rotation * x + shift` (rotation given row-major).
    pub fn rigid_motion(&self, rotation: &[f64], shift: &[f64]) -> Result<Self> {
        let d = self.d();
        if rotation.len() != d * d || shift.len() != d {
            return Err(invalid("rigid motion has wrong dimensions"));
        }
        let apply = |buf: &[f64]| -> Vec<f64> {
            let mut out = Vec::with_capacity(buf.len());
            for p in buf.chunks(d) {
                for r in 0..d {
                    let mut v = shift[r];
                    for c in 0..d {
                        v += rotation[r * d + c] * p[c];
                    }
                    out.push(v);
                }
            }
            out
        };
        DiscreteMeasure::with_boundary(
            self.params,
            apply(&self.atoms.coords),
            self.atoms.weights.clone(),
            self.resolution,
            apply(&self.boundary),
        )
    }

    pub fn with_adr_constant(&self, bounds: &AdrBounds) -> Self {
        let mut out = self.clone();
        out.params.adr_constant = bounds.constant();
        out
    }

    /// Write the `x1,...,xd,w` point-cloud file.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        let mut header: Vec<String> = (1..=self.d()).map(|k| format!("x{k}")).collect();
        header.push("w".into());
        w.write_record(&header)?;
        for i in 0..self.len() {
            let mut row: Vec<String> = self.point(i).iter().map(|v| format!("{v}")).collect();
            row.push(format!("{}", self.weight(i)));
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }

    /// Read a `x1,...,xd,w` file. Without an explicit resolution the largest
    /// nearest-neighbour distance is used.
    pub fn read_csv(path: &Path, n: usize, resolution: Option<f64>) -> Result<Self> {
        let mut r = csv::Reader::from_path(path)?;
        let header = r.headers()?.clone();
        let d = header.len().saturating_sub(1);
        for (k, name) in header.iter().enumerate() {
            let expected = if k == d {
                "w".to_string()
            } else {
                format!("x{}", k + 1)
            };
            if name.trim() != expected {
                return Err(invalid(format!(
                    "bad point-cloud header field {name:?}, expected {expected:?}"
                )));
            }
        }
        let params = AmbientParams::new(d, n)?;
        let mut coords = Vec::new();
        let mut weights = Vec::new();
        for rec in r.records() {
            let rec = rec?;
            if rec.len() != d + 1 {
                return Err(invalid("ragged point-cloud row"));
            }
            for k in 0..d {
                coords.push(parse_f64(&rec[k])?);
            }
            weights.push(parse_f64(&rec[d])?);
        }
        let resolution = match resolution {
            Some(h) => h,
            None => {
                let tree = KdTree::new(&coords, d);
                let mut worst: f64 = 0.0;
                for p in coords.chunks(d) {
                    let mut best = f64::INFINITY;
                    tree.for_each_within(p, f64::INFINITY, |_, d2| {
                        if d2 > 0.0 && d2 < best {
                            best = d2;
                        }
                    });
                    if best.is_finite() {
                        worst = worst.max(best.sqrt());
                    }
                }
                if worst > 0.0 {
                    worst
                } else {
                    1.0
                }
            }
        };
        DiscreteMeasure::new(params, coords, weights, resolution)
    }
}

fn parse_f64(s: &str) -> Result<f64> {
    s.trim()
        .parse::<f64>()
        .map_err(|_| invalid(format!("not a number: {s:?}")))
}

fn check_distinct(atoms: &AtomicMeasure) -> Result<()> {
    let mut order: Vec<usize> = (0..atoms.len()).collect();
    order.sort_by(|&a, &b| lex_cmp(atoms.point(a), atoms.point(b)));
    for w in order.windows(2) {
        if atoms.point(w[0]) == atoms.point(w[1]) {
            return Err(invalid(format!(
                "atoms {} and {} coincide at {:?}",
                w[0],
                w[1],
                atoms.point(w[0])
            )));
        }
    }
    Ok(())
}

pub(crate) fn lex_cmp(a: &[f64], b: &[f64]) -> std::cmp::Ordering {
    for (x, y) in a.iter().zip(b) {
        match x.total_cmp(y) {
            std::cmp::Ordering::Equal => continue,
            o => return o,
        }
    }
    std::cmp::Ordering::Equal
}

/// Exact for up to 4096 atoms; above that a repeated farthest-point sweep,
/// which is exact on the curve-like datasets used here and never below
/// half the true diameter.
fn diameter_of(atoms: &AtomicMeasure) -> f64 {
    let n = atoms.len();
    if n < 2 {
        return 0.0;
    }
    if n <= 4096 {
        let mut best: f64 = 0.0;
        for i in 0..n {
            for j in i + 1..n {
                best = best.max(dist2(atoms.point(i), atoms.point(j)));
            }
        }
        return best.sqrt();
    }
    let farthest = |from: usize| -> (usize, f64) {
        let p = atoms.point(from);
        (0..n)
            .map(|j| (j, dist2(p, atoms.point(j))))
            .fold((from, 0.0), |acc, x| if x.1 > acc.1 { x } else { acc })
    };
    let mut a = 0;
    let mut best = 0.0;
    for _ in 0..4 {
        let (b, d2) = farthest(a);
        if d2 <= best {
            break;
        }
        best = d2;
        a = b;
    }
    best.sqrt()
}

/// Affine n-plane: a base point and an orthonormal basis of directions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Plane {
    base: Vec<f64>,
    basis: Vec<Vec<f64>>,
}

impl Plane {
    pub fn new(base: Vec<f64>, basis: Vec<Vec<f64>>) -> Result<Self> {
        let d = base.len();
        if basis.is_empty() || basis.len() >= d {
            return Err(invalid("plane needs 0 < n < d basis vectors"));
        }
        for (a, u) in basis.iter().enumerate() {
            if u.len() != d {
                return Err(invalid("basis vector has wrong dimension"));
            }
            for (b, v) in basis.iter().enumerate().skip(a) {
                let want = if a == b { 1.0 } else { 0.0 };
                if (dot(u, v) - want).abs() > 1e-12 {
                    return Err(invalid(format!(
                        "basis not orthonormal: <e{a}, e{b}> = {}",
                        dot(u, v)
                    )));
                }
            }
        }
        Ok(Plane { base, basis })
    }

    /// Plane through `base` spanned by `vectors` (orthonormalized by
    /// two passes of modified Gram-Schmidt).
    pub fn from_spanning(base: Vec<f64>, vectors: &[Vec<f64>]) -> Result<Self> {
        let basis = orthonormalize(vectors)?;
        Plane::new(base, basis)
    }

    /// Coordinate plane through the origin spanned by the given axes.
    pub fn coordinate(d: usize, axes: &[usize]) -> Result<Self> {
        let basis = axes
            .iter()
            .map(|&k| {
                let mut e = vec![0.0; d];
                if k < d {
                    e[k] = 1.0;
                }
                e
            })
            .collect();
        Plane::new(vec![0.0; d], basis)
    }

    pub fn base(&self) -> &[f64] {
        &self.base
    }

    pub fn basis(&self) -> &[Vec<f64>] {
        &self.basis
    }

    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    pub fn ambient(&self) -> usize {
        self.base.len()
    }

    pub fn project(&self, x: &[f64]) -> Vec<f64> {
        let rel: Vec<f64> = x.iter().zip(&self.base).map(|(a, b)| a - b).collect();
        let mut out = self.base.clone();
        for e in &self.basis {
            let c = dot(&rel, e);
            for (o, ek) in out.iter_mut().zip(e) {
                *o += c * ek;
            }
        }
        out
    }

    pub fn distance(&self, x: &[f64]) -> f64 {
        dist(x, &self.project(x))
    }

    /// Orthonormal basis of the orthogonal complement of the directions.
    pub fn normal_basis(&self) -> Vec<Vec<f64>> {
        let d = self.ambient();
        let mut all: Vec<Vec<f64>> = self.basis.clone();
        let mut normals = Vec::new();
        for k in 0..d {
            let mut v = vec![0.0; d];
            v[k] = 1.0;
            for _ in 0..2 {
                for u in &all {
                    let c = dot(&v, u);
                    for (vi, ui) in v.iter_mut().zip(u) {
                        *vi -= c * ui;
                    }
                }
            }
            let nv = norm(&v);
            if nv > 1e-6 {
                v.iter_mut().for_each(|x| *x /= nv);
                all.push(v.clone());
                normals.push(v);
            }
            if normals.len() == d - self.dim() {
                break;
            }
        }
        normals
    }

    /// Same plane with the base moved to the projection of `x`.
    pub fn rebased_at(&self, x: &[f64]) -> Plane {
        Plane {
            base: self.project(x),
            basis: self.basis.clone(),
        }
    }
}

/// Orthogonal projection of `x` onto `plane`.
pub fn project(x: &[f64], plane: &Plane) -> Vec<f64> {
    plane.project(x)
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub(crate) fn orthonormalize(vectors: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
    let mut out: Vec<Vec<f64>> = Vec::with_capacity(vectors.len());
    for v in vectors {
        let mut w = v.clone();
        for _ in 0..2 {
            for u in &out {
                let c = dot(&w, u);
                for (wi, ui) in w.iter_mut().zip(u) {
                    *wi -= c * ui;
                }
            }
        }
        let nw = norm(&w);
        if !(nw > 1e-12) {
            return Err(invalid("spanning vectors are linearly dependent"));
        }
        w.iter_mut().for_each(|x| *x /= nw);
        out.push(w);
    }
    Ok(out)
}

/// `c * H^n` restricted to a plane.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlatMeasure {
    pub plane: Plane,
    pub constant: f64,
}

impl FlatMeasure {
    pub fn new(plane: Plane, constant: f64) -> Result<Self> {
        if !(constant >= 0.0 && constant.is_finite()) {
            return Err(invalid("flat measure constant must be >= 0"));
        }
        Ok(FlatMeasure { plane, constant })
    }

    /// Lattice atoms of spacing `step` on `L ∩ B(center, radius)` (open
    /// ball), anchored at the projection of `center`, each carrying mass
    /// `constant * step^n`.
    pub fn discretize(&self, center: &[f64], radius: f64, step: f64) -> AtomicMeasure {
        let mut out = AtomicMeasure::empty(self.plane.ambient());
        let w = self.constant * step.powi(self.plane.dim() as i32);
        lattice_in_ball(&self.plane, center, radius, step, |p| out.push(p, w));
        out
    }
}

/// Visits the lattice points `anchor + step * k` (k integer in plane
/// coordinates) that lie strictly inside `B(center, radius)`.
pub(crate) fn lattice_in_ball<F: FnMut(&[f64])>(
    plane: &Plane,
    center: &[f64],
    radius: f64,
    step: f64,
    mut visit: F,
) {
    let anchor = plane.project(center);
    let h2 = dist2(&anchor, center);
    let r2 = radius * radius;
    if h2 >= r2 {
        return;
    }
    let rho = (r2 - h2).sqrt();
    let kmax = (rho / step).ceil() as i64;
    let n = plane.dim();
    let d = plane.ambient();
    let mut k = vec![-kmax; n];
    let mut p = vec![0.0; d];
    loop {
        for (c, pc) in p.iter_mut().enumerate() {
            *pc = anchor[c];
        }
        for (a, e) in plane.basis().iter().enumerate() {
            let t = k[a] as f64 * step;
            for c in 0..d {
                p[c] += t * e[c];
            }
        }
        if dist2(&p, center) < r2 {
            visit(&p);
        }
        let mut axis = 0;
        loop {
            if axis == n {
                return;
            }
            k[axis] += 1;
            if k[axis] <= kmax {
                break;
            }
            k[axis] = -kmax;
            axis += 1;
        }
    }
}

/// Named profile for graph datasets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case")]
pub enum GraphFunction {
    /// `amplitude * sin(frequency * t)`
    Sine { amplitude: f64, frequency: f64 },
    /// `slope * |t - center|`
    Tent { slope: f64, center: f64 },
}

impl GraphFunction {
    pub fn value(&self, t: f64) -> f64 {
        match *self {
            GraphFunction::Sine {
                amplitude,
                frequency,
            } => amplitude * (frequency * t).sin(),
            GraphFunction::Tent { slope, center } => slope * (t - center).abs(),
        }
    }

    pub fn derivative(&self, t: f64) -> f64 {
        match *self {
            GraphFunction::Sine {
                amplitude,
                frequency,
            } => amplitude * frequency * (frequency * t).cos(),
            GraphFunction::Tent { slope, center } => {
                if t >= center {
                    slope
                } else {
                    -slope
                }
            }
        }
    }

    pub fn lipschitz(&self) -> f64 {
        match *self {
            GraphFunction::Sine {
                amplitude,
                frequency,
            } => (amplitude * frequency).abs(),
            GraphFunction::Tent { slope, .. } => slope.abs(),
        }
    }
}

/// Test geometry description (`{"kind": ..., parameters...}`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DatasetSpec {
    /// Axis-aligned n-cube patch `[0, side]^n x {0}` in `R^d`, midpoint grid.
    Plane {
        n: usize,
        d: usize,
        side: f64,
        step: f64,
    },
    /// Graph `{(t, f(t)) : a <= t <= b}` in `R^2`, midpoint grid in `t`.
    LipschitzGraph {
        function: GraphFunction,
        a: f64,
        b: f64,
        step: f64,
        lipschitz: f64,
    },
    /// Round sphere of dimension `n` (`n = 1` circle, `n = 2` sphere) in
    /// `R^{n+1}` centred at the origin.
    Sphere {
        n: usize,
        radius: f64,
        angular_step: f64,
    },
    /// Four-corner Cantor set in `R^2` at generation `generations`.
    Cantor4 { generations: u32, side: f64 },
    /// Two horizontal segments `[0, length] x {0, gap}`.
    ParallelSegments { length: f64, gap: f64, step: f64 },
    /// Point-cloud file (`x1,...,xd,w`).
    Csv {
        path: PathBuf,
        n: usize,
        #[serde(default)]
        resolution: Option<f64>,
    },
}

fn grid_count(extent: f64, step: f64, what: &str) -> Result<usize> {
    if !(step > 0.0 && step.is_finite()) {
        return Err(invalid(format!(
            "{what}: step must be positive, got {step}"
        )));
    }
    if !(extent > 0.0 && extent.is_finite()) {
        return Err(invalid(format!("{what}: extent must be positive")));
    }
    let count = (extent / step).round();
    if count < 1.0 || ((count * step) - extent).abs() > 1e-6 * extent {
        return Err(invalid(format!(
            "{what}: extent {extent} is not a whole number of steps {step}"
        )));
    }
    if count > 5e6 {
        return Err(invalid(format!("{what}: {count} grid points is too many")));
    }
    Ok(count as usize)
}

/// Build the discrete measure described by `spec`.
pub fn generate(spec: &DatasetSpec) -> Result<DiscreteMeasure> {
    match spec {
        DatasetSpec::Plane { n, d, side, step } => {
            let params = AmbientParams::new(*d, *n)?;
            let k = grid_count(*side, *step, "plane patch")?;
            let h = side / k as f64;
            let total = (k as f64).powi(*n as i32);
            if total > 5e6 {
                return Err(invalid("plane patch has too many atoms"));
            }
            let mut coords = Vec::new();
            let mut idx = vec![0usize; *n];
            loop {
                for a in 0..*d {
                    coords.push(if a < *n {
                        (idx[a] as f64 + 0.5) * h
                    } else {
                        0.0
                    });
                }
                let mut a = 0;
                while a < *n {
                    idx[a] += 1;
                    if idx[a] < k {
                        break;
                    }
                    idx[a] = 0;
                    a += 1;
                }
                if a == *n {
                    break;
                }
            }
            let count = coords.len() / d;
            let weights = vec![h.powi(*n as i32); count];
            let boundary = cube_boundary(*n, *d, *side, h);
            DiscreteMeasure::with_boundary(params, coords, weights, h, boundary)
        }
        DatasetSpec::LipschitzGraph {
            function,
            a,
            b,
            step,
            lipschitz,
        } => {
            if !(*lipschitz > 0.0) {
                return Err(invalid("declared Lipschitz constant must be positive"));
            }
            if function.lipschitz() > lipschitz * (1.0 + 1e-12) {
                return Err(invalid(format!(
                    "declared Lipschitz constant {lipschitz} is below the function's {}",
                    function.lipschitz()
                )));
            }
            if !(b > a) {
                return Err(invalid("graph interval must satisfy a < b"));
            }
            let params = AmbientParams::new(2, 1)?;
            let k = grid_count(b - a, *step, "graph")?;
            let h = (b - a) / k as f64;
            let mut coords = Vec::with_capacity(2 * k);
            let mut weights = Vec::with_capacity(k);
            for i in 0..k {
                let t = a + (i as f64 + 0.5) * h;
                coords.push(t);
                coords.push(function.value(t));
                let s = function.derivative(t);
                weights.push(h * (1.0 + s * s).sqrt());
            }
            let boundary = vec![*a, function.value(*a), *b, function.value(*b)];
            DiscreteMeasure::with_boundary(params, coords, weights, h, boundary)
        }
        DatasetSpec::Sphere {
            n,
            radius,
            angular_step,
        } => {
            if !(*radius > 0.0) {
                return Err(invalid("sphere radius must be positive"));
            }
            if !(*angular_step > 0.0 && *angular_step < PI) {
                return Err(invalid("angular step must be in (0, pi)"));
            }
            let params = AmbientParams::new(n + 1, *n)?;
            match n {
                1 => {
                    let k = (2.0 * PI / angular_step).round().max(3.0) as usize;
                    let dt = 2.0 * PI / k as f64;
                    let mut coords = Vec::with_capacity(2 * k);
                    for i in 0..k {
                        let t = (i as f64 + 0.5) * dt;
                        coords.push(radius * t.cos());
                        coords.push(radius * t.sin());
                    }
                    let weights = vec![radius * dt; k];
                    DiscreteMeasure::new(params, coords, weights, radius * dt)
                }
                2 => {
                    let kp = (PI / angular_step).round().max(2.0) as usize;
                    let dp = PI / kp as f64;
                    let mut coords = Vec::new();
                    let mut weights = Vec::new();
                    for i in 0..kp {
                        let phi = (i as f64 + 0.5) * dp;
                        let kt = ((2.0 * PI * phi.sin()) / dp).round().max(3.0) as usize;
                        let dt = 2.0 * PI / kt as f64;
                        for j in 0..kt {
                            let t = (j as f64 + 0.5) * dt;
                            coords.push(radius * phi.sin() * t.cos());
                            coords.push(radius * phi.sin() * t.sin());
                            coords.push(radius * phi.cos());
                            weights.push(radius * radius * phi.sin() * dp * dt);
                        }
                    }
                    DiscreteMeasure::new(params, coords, weights, radius * dp)
                }
                _ => Err(invalid("sphere datasets support n = 1 or 2")),
            }
        }
        DatasetSpec::Cantor4 { generations, side } => {
            let g = *generations;
            if g == 0 || g > 12 {
                return Err(invalid(format!("cantor4 generations {g} outside 1..=12")));
            }
            if !(*side > 0.0) {
                return Err(invalid("cantor4 side must be positive"));
            }
            let params = AmbientParams::new(2, 1)?;
            let mut corners = vec![(0.0f64, 0.0f64)];
            let mut s = *side;
            for _ in 0..g {
                let child = s / 4.0;
                let mut next = Vec::with_capacity(corners.len() * 4);
                for &(x, y) in &corners {
                    for (ox, oy) in [(0.0, 0.0), (3.0, 0.0), (0.0, 3.0), (3.0, 3.0)] {
                        next.push((x + ox * child, y + oy * child));
                    }
                }
                corners = next;
                s = child;
            }
            let mut coords = Vec::with_capacity(corners.len() * 2);
            for (x, y) in &corners {
                coords.push(x + s / 2.0);
                coords.push(y + s / 2.0);
            }
            let w = side * 0.25f64.powi(g as i32);
            let weights = vec![w; corners.len()];
            DiscreteMeasure::new(params, coords, weights, s)
        }
        DatasetSpec::ParallelSegments { length, gap, step } => {
            if !(*gap > 0.0) {
                return Err(invalid("gap must be positive"));
            }
            let params = AmbientParams::new(2, 1)?;
            let k = grid_count(*length, *step, "parallel segments")?;
            let h = length / k as f64;
            let mut coords = Vec::with_capacity(4 * k);
            for y in [0.0, *gap] {
                for i in 0..k {
                    coords.push((i as f64 + 0.5) * h);
                    coords.push(y);
                }
            }
            let weights = vec![h; 2 * k];
            let boundary = vec![0.0, 0.0, *length, 0.0, 0.0, *gap, *length, *gap];
            DiscreteMeasure::with_boundary(params, coords, weights, h, boundary)
        }
        DatasetSpec::Csv {
            path,
            n,
            resolution,
        } => {
            if !path.exists() {
                return Err(Error::Config(format!(
                    "point-cloud file not found: {}",
                    path.display()
                )));
            }
            DiscreteMeasure::read_csv(path, *n, *resolution)
        }
    }
}

/// Points on the boundary of `[0, side]^n x {0}` at spacing `h`.
fn cube_boundary(n: usize, d: usize, side: f64, h: f64) -> Vec<f64> {
    let k = (side / h).round() as usize;
    let mut out = Vec::new();
    let mut idx = vec![0usize; n];
    loop {
        if idx.iter().any(|&i| i == 0 || i == k) {
            for a in 0..d {
                out.push(if a < n { idx[a] as f64 * h } else { 0.0 });
            }
        }
        let mut a = 0;
        while a < n {
            idx[a] += 1;
            if idx[a] <= k {
                break;
            }
            idx[a] = 0;
            a += 1;
        }
        if a == n {
            break;
        }
    }
    out
}

/// Measured ADR bounds `inf / sup of mu(B(x,r)) / r^n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdrBounds {
    pub lower: f64,
    pub upper: f64,
    pub samples: usize,
}

impl AdrBounds {
    /// Smallest `C >= 1` with `C^-1 r^n <= mu(B(x,r)) <= C r^n` on the samples.
    pub fn constant(&self) -> f64 {
        self.upper.max(1.0 / self.lower).max(1.0)
    }
}

/// Sampled lower/upper density ratios over atoms at distance `>= r` from
/// the dataset edge. Radii must lie in `[10 * resolution, diameter / 4]`,
/// where the diameter of the support is taken as the point-set diameter
/// plus one patch (`resolution`).
pub fn estimate_adr(mu: &DiscreteMeasure, scales: &[f64]) -> Result<AdrBounds> {
    if scales.is_empty() {
        return Err(invalid("estimate_adr needs at least one radius"));
    }
    if mu.len() < 2 || mu.diameter() <= 0.0 {
        return Err(Error::DegenerateSupport(
            "ADR estimation needs at least two distinct atoms".into(),
        ));
    }
    let lo = 10.0 * mu.resolution() * (1.0 - 1e-12);
    let support_diameter = mu.diameter() + mu.resolution();
    let hi = support_diameter / 4.0 * (1.0 + 1e-12);
    for &r in scales {
        if !(r >= lo && r <= hi) {
            return Err(invalid(format!(
                "radius {r} outside [{}, {}]",
                10.0 * mu.resolution(),
                support_diameter / 4.0
            )));
        }
    }
    let stride = (mu.len() / 2000).max(1);
    let n = mu.n() as i32;
    let mut lower = f64::INFINITY;
    let mut upper: f64 = 0.0;
    let mut samples = 0;
    for &r in scales {
        for i in (0..mu.len()).step_by(stride) {
            let x = mu.point(i);
            if mu.distance_to_boundary(x) < r {
                continue;
            }
            let ratio = mu.ball_mass(x, r) / r.powi(n);
            lower = lower.min(ratio);
            upper = upper.max(ratio);
            samples += 1;
        }
    }
    if samples == 0 {
        return Err(Error::DegenerateSupport(
            "no atom is at least one radius away from the dataset edge".into(),
        ));
    }
    Ok(AdrBounds {
        lower,
        upper,
        samples,
    })
}
