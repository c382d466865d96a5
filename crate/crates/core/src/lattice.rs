//! Dyadic cubes on the support and the Whitney decomposition of its
//! complement.
//!
//! Cubes come from nested greedy nets: the level-`j` net is a maximal
//! `2^{-j-1}`-separated set of atoms extending the level-`j-1` net, scanned in
//! lexicographic order. Atoms join the nearest finest-level centre and each
//! centre joins the nearest centre one level up, so member sets nest exactly.
//!
//! Cube ids follow a depth-first preorder, which makes the members of a cube
//! a contiguous slice of one permutation and its descendants a contiguous id
//! range.

use std::collections::BTreeMap;
use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::measures::{lex_cmp, DiscreteMeasure};
use crate::spatial::{dist, KdTree};
use crate::sum;

/// Engulfing constant assumed until a Whitney decomposition measures it.
pub const DEFAULT_ENGULFING: f64 = 4.0;

#[derive(Debug, Clone, PartialEq)]
pub struct Cube {
    pub level: i32,
    pub generation_index: usize,
    /// Atom index of the centre `c_Q` (a net point).
    pub center_atom: usize,
    pub center: Vec<f64>,
    pub parent: Option<usize>,
    pub children: Vec<usize>,
    pub mass: f64,
    /// `max |x - c_Q|` over members.
    pub radius: f64,
    members: Range<usize>,
    subtree_end: usize,
}

impl Cube {
    /// `l(Q) = 2^{-j}`.
    pub fn side(&self) -> f64 {
        side_of(self.level)
    }

    pub fn atom_count(&self) -> usize {
        self.members.len()
    }
}

pub fn side_of(level: i32) -> f64 {
    2f64.powi(-level)
}

#[derive(Debug, Clone)]
pub struct CubeTree {
    cubes: Vec<Cube>,
    perm: Vec<usize>,
    by_level: Vec<Vec<usize>>,
    leaf_of_atom: Vec<usize>,
    j_min: i32,
    j_max: i32,
    engulfing: f64,
}

#[derive(Serialize)]
struct CubeRecord<'a> {
    id: usize,
    level: i32,
    index: usize,
    center: &'a [f64],
    side: f64,
    parent: Option<usize>,
    atom_count: usize,
    mass: f64,
}

/// Build the nested cube tree on levels `j_min..=j_max`.
pub fn build_cubes(mu: &DiscreteMeasure, j_min: i32, j_max: i32) -> Result<CubeTree> {
    if j_max < j_min {
        return Err(invalid(format!("j_max {j_max} < j_min {j_min}")));
    }
    if side_of(j_max) < 4.0 * mu.resolution() * (1.0 - 1e-12) {
        return Err(Error::ResolutionTooCoarse(format!(
            "2^-{j_max} = {} is below 4 x resolution {}",
            side_of(j_max),
            mu.resolution()
        )));
    }
    let d = mu.d();
    let count = mu.len();
    let levels = (j_max - j_min + 1) as usize;

    let mut order: Vec<usize> = (0..count).collect();
    order.sort_by(|&a, &b| lex_cmp(mu.point(a), mu.point(b)).then(a.cmp(&b)));

    // nets[l] lists atom indices; nets[l] starts with nets[l - 1]
    let mut nets: Vec<Vec<usize>> = Vec::with_capacity(levels);
    let index = mu.index();
    for l in 0..levels {
        let sep = 0.5 * side_of(j_min + l as i32);
        let sep2 = sep * sep;
        let mut covered = vec![false; count];
        let mut net: Vec<usize> = Vec::new();
        let pick = |a: usize, covered: &mut Vec<bool>, net: &mut Vec<usize>| {
            net.push(a);
            index.for_each_within(mu.point(a), sep, |i, d2| {
                if d2 < sep2 {
                    covered[i] = true;
                }
            });
        };
        if l > 0 {
            for &a in &nets[l - 1] {
                pick(a, &mut covered, &mut net);
            }
        }
        for &a in &order {
            if !covered[a] {
                pick(a, &mut covered, &mut net);
            }
        }
        nets.push(net);
    }

    // parent_gen[l][g]: generation index at level l - 1 of the parent of
    // cube (l, g); atoms join finest-level centres
    let center_coords = |net: &[usize]| -> Vec<f64> {
        let mut c = Vec::with_capacity(net.len() * d);
        for &a in net {
            c.extend_from_slice(mu.point(a));
        }
        c
    };
    let finest = KdTree::new(&center_coords(&nets[levels - 1]), d);
    let atom_cell: Vec<usize> = (0..count)
        .map(|a| finest.nearest(mu.point(a)).expect("non-empty net").0)
        .collect();
    let mut parent_gen: Vec<Vec<usize>> = vec![Vec::new(); levels];
    for l in 1..levels {
        let coarse = KdTree::new(&center_coords(&nets[l - 1]), d);
        let inherited = nets[l - 1].len();
        parent_gen[l] = nets[l]
            .iter()
            .enumerate()
            .map(|(g, &a)| {
                if g < inherited {
                    g
                } else {
                    coarse.nearest(mu.point(a)).expect("non-empty net").0
                }
            })
            .collect();
    }

    // children lists per (level, gen), ascending generation index
    let mut kids: Vec<Vec<Vec<usize>>> = (0..levels)
        .map(|l| vec![Vec::new(); nets[l].len()])
        .collect();
    for l in 1..levels {
        for (g, &p) in parent_gen[l].iter().enumerate() {
            kids[l - 1][p].push(g);
        }
    }
    let mut leaf_atoms: Vec<Vec<usize>> = vec![Vec::new(); nets[levels - 1].len()];
    for (a, &g) in atom_cell.iter().enumerate() {
        leaf_atoms[g].push(a);
    }

    let mut cubes: Vec<Cube> = Vec::new();
    let mut perm: Vec<usize> = Vec::with_capacity(count);
    let mut by_level: Vec<Vec<usize>> = (0..levels)
        .map(|l| vec![usize::MAX; nets[l].len()])
        .collect();
    let mut leaf_of_atom = vec![usize::MAX; count];

    fn visit(l: usize, g: usize, parent: Option<usize>, ctx: &mut Builder<'_>) -> usize {
        let id = ctx.cubes.len();
        let level = ctx.j_min + l as i32;
        let center_atom = ctx.nets[l][g];
        ctx.cubes.push(Cube {
            level,
            generation_index: g,
            center_atom,
            center: ctx.mu.point(center_atom).to_vec(),
            parent,
            children: Vec::new(),
            mass: 0.0,
            radius: 0.0,
            members: ctx.perm.len()..ctx.perm.len(),
            subtree_end: id + 1,
        });
        ctx.by_level[l][g] = id;
        let start = ctx.perm.len();
        if l + 1 == ctx.nets.len() {
            for &a in &ctx.leaf_atoms[g] {
                ctx.perm.push(a);
                ctx.leaf_of_atom[a] = id;
            }
        } else {
            let kids = ctx.kids[l][g].clone();
            for k in kids {
                let child = visit(l + 1, k, Some(id), ctx);
                ctx.cubes[id].children.push(child);
            }
        }
        let end = ctx.perm.len();
        let members = &ctx.perm[start..end];
        let mu = ctx.mu;
        let center = ctx.mu.point(center_atom);
        let mass = sum::pairwise(members.len(), |k| mu.weight(members[k]));
        let radius = members
            .iter()
            .map(|&a| dist(mu.point(a), center))
            .fold(0.0, f64::max);
        let subtree_end = ctx.cubes.len();
        let c = &mut ctx.cubes[id];
        c.members = start..end;
        c.mass = mass;
        c.radius = radius;
        c.subtree_end = subtree_end;
        id
    }

    struct Builder<'a> {
        mu: &'a DiscreteMeasure,
        j_min: i32,
        nets: &'a [Vec<usize>],
        kids: &'a [Vec<Vec<usize>>],
        leaf_atoms: &'a [Vec<usize>],
        cubes: &'a mut Vec<Cube>,
        perm: &'a mut Vec<usize>,
        by_level: &'a mut Vec<Vec<usize>>,
        leaf_of_atom: &'a mut Vec<usize>,
    }

    {
        let mut ctx = Builder {
            mu,
            j_min,
            nets: &nets,
            kids: &kids,
            leaf_atoms: &leaf_atoms,
            cubes: &mut cubes,
            perm: &mut perm,
            by_level: &mut by_level,
            leaf_of_atom: &mut leaf_of_atom,
        };
        for g in 0..nets[0].len() {
            visit(0, g, None, &mut ctx);
        }
    }

    Ok(CubeTree {
        cubes,
        perm,
        by_level,
        leaf_of_atom,
        j_min,
        j_max,
        engulfing: DEFAULT_ENGULFING,
    })
}

/// Achieved shape constants of a cube tree.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CubeStats {
    /// `max diam(Q) / l(Q)` (diameter bounded by twice the radius).
    pub max_radius_ratio: f64,
    /// `min radius / l(Q)` over cubes with more than one atom.
    pub min_radius_ratio: f64,
    /// `min / max of mu(Q) / l(Q)^n` over cubes.
    pub min_mass_ratio: f64,
    pub max_mass_ratio: f64,
}

impl CubeTree {
    pub fn len(&self) -> usize {
        self.cubes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cubes.is_empty()
    }

    pub fn j_min(&self) -> i32 {
        self.j_min
    }

    pub fn j_max(&self) -> i32 {
        self.j_max
    }

    /// The constant `M` with `2W ⊂ B(c_Q, M l(Q))` whenever `Q(W) = Q`.
    pub fn engulfing(&self) -> f64 {
        self.engulfing
    }

    /// Copy with `M` replaced (as measured by a Whitney build).
    pub fn with_engulfing(&self, m: f64) -> CubeTree {
        let mut t = self.clone();
        t.engulfing = m;
        t
    }

    pub fn cube(&self, id: usize) -> Result<&Cube> {
        self.cubes.get(id).ok_or(Error::UnknownCube(id))
    }

    pub fn cubes(&self) -> &[Cube] {
        &self.cubes
    }

    pub fn members(&self, id: usize) -> &[usize] {
        &self.perm[self.cubes[id].members.clone()]
    }

    /// Ids of all cubes contained in `id` (inclusive).
    pub fn descendants(&self, id: usize) -> Range<usize> {
        id..self.cubes[id].subtree_end
    }

    pub fn is_ancestor(&self, anc: usize, id: usize) -> bool {
        self.descendants(anc).contains(&id)
    }

    /// Cube ids at level `j`, in generation order.
    pub fn level(&self, j: i32) -> &[usize] {
        if j < self.j_min || j > self.j_max {
            return &[];
        }
        &self.by_level[(j - self.j_min) as usize]
    }

    pub fn find(&self, level: i32, generation_index: usize) -> Option<usize> {
        self.level(level).get(generation_index).copied()
    }

    /// `R^{(k)}`: the ancestor `k` levels up.
    pub fn ancestor(&self, id: usize, k: u32) -> Option<usize> {
        let mut cur = id;
        for _ in 0..k {
            cur = self.cubes[cur].parent?;
        }
        Some(cur)
    }

    /// Finest-level cube containing atom `a`.
    pub fn leaf_of_atom(&self, a: usize) -> usize {
        self.leaf_of_atom[a]
    }

    /// `B_Q = B(c_Q, 2 M l(Q))` as (centre, radius).
    pub fn ball(&self, id: usize) -> (&[f64], f64) {
        let c = &self.cubes[id];
        (&c.center, 2.0 * self.engulfing * c.side())
    }

    pub fn stats(&self, n: usize) -> CubeStats {
        let mut s = CubeStats {
            max_radius_ratio: 0.0,
            min_radius_ratio: f64::INFINITY,
            min_mass_ratio: f64::INFINITY,
            max_mass_ratio: 0.0,
        };
        for c in &self.cubes {
            let l = c.side();
            s.max_radius_ratio = s.max_radius_ratio.max(c.radius / l);
            if c.atom_count() > 1 {
                s.min_radius_ratio = s.min_radius_ratio.min(c.radius / l);
            }
            let m = c.mass / l.powi(n as i32);
            s.min_mass_ratio = s.min_mass_ratio.min(m);
            s.max_mass_ratio = s.max_mass_ratio.max(m);
        }
        s
    }

    /// JSON export: one record per cube.
    pub fn to_json(&self) -> Result<String> {
        let recs: Vec<CubeRecord<'_>> = self
            .cubes
            .iter()
            .enumerate()
            .map(|(id, c)| CubeRecord {
                id,
                level: c.level,
                index: c.generation_index,
                center: &c.center,
                side: c.side(),
                parent: c.parent,
                atom_count: c.atom_count(),
                mass: c.mass,
            })
            .collect();
        let mut doc = BTreeMap::new();
        doc.insert("j_min", serde_json::json!(self.j_min));
        doc.insert("j_max", serde_json::json!(self.j_max));
        doc.insert("engulfing", serde_json::json!(self.engulfing));
        doc.insert("cubes", serde_json::to_value(recs)?);
        Ok(serde_json::to_string_pretty(&doc)?)
    }
}

/// Axis-aligned box.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundingBox {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl BoundingBox {
    pub fn of(mu: &DiscreteMeasure) -> BoundingBox {
        let d = mu.d();
        let mut lo = vec![f64::INFINITY; d];
        let mut hi = vec![f64::NEG_INFINITY; d];
        for i in 0..mu.len() {
            for (k, v) in mu.point(i).iter().enumerate() {
                lo[k] = lo[k].min(*v);
                hi[k] = hi[k].max(*v);
            }
        }
        BoundingBox { lo, hi }
    }

    /// Same centre, every half-width multiplied by `factor`, and at least
    /// `pad` added on every side.
    pub fn enlarged(&self, factor: f64, pad: f64) -> BoundingBox {
        let mut lo = self.lo.clone();
        let mut hi = self.hi.clone();
        for k in 0..lo.len() {
            let c = 0.5 * (self.lo[k] + self.hi[k]);
            let h = 0.5 * (self.hi[k] - self.lo[k]) * factor + pad;
            lo[k] = c - h;
            hi[k] = c + h;
        }
        BoundingBox { lo, hi }
    }

    pub fn contains_box(&self, other: &BoundingBox) -> bool {
        (0..self.lo.len()).all(|k| self.lo[k] <= other.lo[k] && self.hi[k] >= other.hi[k])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WhitneyCell {
    /// `l(W) = 2^{-level}`.
    pub level: i32,
    pub corner: Vec<f64>,
    /// Associated cube `Q(W)`; `None` for far-field cells with no cube at
    /// a comparable scale.
    pub associated: Option<usize>,
}

impl WhitneyCell {
    pub fn side(&self) -> f64 {
        side_of(self.level)
    }

    pub fn center(&self) -> Vec<f64> {
        let h = 0.5 * self.side();
        self.corner.iter().map(|c| c + h).collect()
    }

    pub fn volume(&self) -> f64 {
        self.side().powi(self.corner.len() as i32)
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        let s = self.side();
        x.iter()
            .zip(&self.corner)
            .all(|(xi, ci)| *xi >= *ci && *xi <= ci + s)
    }
}

/// Whitney decomposition with association to cubes.
#[derive(Debug, Clone)]
pub struct Whitney {
    pub cells: Vec<WhitneyCell>,
    /// Finest-level cells dropped because `3W` still meets the support.
    pub truncated: Vec<WhitneyCell>,
    pub j_floor: i32,
    pub bbox: BoundingBox,
    /// Measured `M`: smallest power of two with `2W ⊂ B(c_Q, M l(Q))`.
    pub engulfing: f64,
    /// `min / max of d(x, E) / l(W)` over sampled `x ∈ 2W`.
    pub comparability: (f64, f64),
    regions: Vec<Vec<usize>>,
    truncated_regions: Vec<Vec<usize>>,
}

impl Whitney {
    /// Cell indices of `W_Q`.
    pub fn region(&self, q: usize) -> &[usize] {
        &self.regions[q]
    }

    pub fn unassociated(&self) -> impl Iterator<Item = &WhitneyCell> {
        self.cells.iter().filter(|c| c.associated.is_none())
    }

    pub fn truncated_volume(&self) -> f64 {
        sum::pairwise(self.truncated.len(), |k| self.truncated[k].volume())
    }

    /// Truncated cells owned by the Carleson box of `r`.
    pub fn truncated_in_box(&self, r: usize, tree: &CubeTree) -> Vec<usize> {
        tree.descendants(r)
            .flat_map(|q| self.truncated_regions[q].iter().copied())
            .collect()
    }

    /// `level,corner...,side,assoc_level,assoc_index` rows.
    pub fn write_csv(&self, path: &std::path::Path, tree: &CubeTree) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        let d = self.bbox.lo.len();
        let mut header = vec!["level".to_string()];
        header.extend((1..=d).map(|k| format!("corner{k}")));
        header.extend(["side", "assoc_level", "assoc_index"].map(String::from));
        w.write_record(&header)?;
        for c in &self.cells {
            let mut row = vec![c.level.to_string()];
            row.extend(c.corner.iter().map(|v| format!("{v}")));
            row.push(format!("{}", c.side()));
            match c.associated {
                Some(q) => {
                    let cube = &tree.cubes[q];
                    row.push(cube.level.to_string());
                    row.push(cube.generation_index.to_string());
                }
                None => {
                    row.push(String::new());
                    row.push(String::new());
                }
            }
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Maximal dyadic cubes `W` with `3W ∩ E = ∅` covering `bbox`, down to side
/// `2^{-j_floor}`, each associated to the nearest cube centre at level
/// `level(W) - 1` (so `l(Q) = 2 l(W)`).
pub fn build_whitney(
    mu: &DiscreteMeasure,
    tree: &CubeTree,
    bbox: &BoundingBox,
    j_floor: i32,
) -> Result<Whitney> {
    let d = mu.d();
    if bbox.lo.len() != d || bbox.hi.len() != d {
        return Err(invalid("bounding box has the wrong dimension"));
    }
    if !bbox.contains_box(&BoundingBox::of(mu)) {
        return Err(invalid("bounding box does not contain the dataset"));
    }
    if side_of(j_floor) < mu.resolution() * (1.0 - 1e-12) {
        return Err(Error::ResolutionTooCoarse(format!(
            "Whitney floor 2^-{j_floor} is below the resolution {}",
            mu.resolution()
        )));
    }
    let extent = (0..d)
        .map(|k| bbox.hi[k] - bbox.lo[k])
        .fold(0.0, f64::max)
        .max(mu.resolution());
    let top = -(extent.log2().ceil() as i32);
    if top > j_floor {
        return Err(invalid("Whitney floor is coarser than the bounding box"));
    }
    let index = mu.index();

    // top tiles: dyadic cubes of side 2^-top meeting the box
    let s0 = side_of(top);
    let lo_idx: Vec<i64> = (0..d).map(|k| (bbox.lo[k] / s0).floor() as i64).collect();
    let hi_idx: Vec<i64> = (0..d).map(|k| (bbox.hi[k] / s0).ceil() as i64).collect();
    let mut stack: Vec<(i32, Vec<f64>)> = Vec::new();
    let mut idx = lo_idx.clone();
    loop {
        let corner: Vec<f64> = idx.iter().map(|&i| i as f64 * s0).collect();
        stack.push((top, corner));
        let mut k = 0;
        while k < d {
            idx[k] += 1;
            if idx[k] < hi_idx[k].max(lo_idx[k] + 1) {
                break;
            }
            idx[k] = lo_idx[k];
            k += 1;
        }
        if k == d {
            break;
        }
    }
    // depth-first in a fixed child order; reversed so that the first tile
    // is processed first
    stack.reverse();
    let mut cells = Vec::new();
    let mut truncated = Vec::new();
    let mut lo3 = vec![0.0; d];
    let mut hi3 = vec![0.0; d];
    while let Some((level, corner)) = stack.pop() {
        let s = side_of(level);
        for k in 0..d {
            lo3[k] = corner[k] - s;
            hi3[k] = corner[k] + 2.0 * s;
        }
        if !index.any_in_box(&lo3, &hi3) {
            cells.push(WhitneyCell {
                level,
                corner,
                associated: None,
            });
            continue;
        }
        if level >= j_floor {
            truncated.push(WhitneyCell {
                level,
                corner,
                associated: None,
            });
            continue;
        }
        let h = 0.5 * s;
        for child in (0..(1usize << d)).rev() {
            let c: Vec<f64> = (0..d)
                .map(|k| corner[k] + if child >> k & 1 == 1 { h } else { 0.0 })
                .collect();
            stack.push((level + 1, c));
        }
    }

    // association
    let mut centre_trees: BTreeMap<i32, KdTree> = BTreeMap::new();
    for j in tree.j_min()..=tree.j_max() {
        let mut c = Vec::new();
        for &id in tree.level(j) {
            c.extend_from_slice(&tree.cubes[id].center);
        }
        centre_trees.insert(j, KdTree::new(&c, d));
    }
    let associate = |cell: &WhitneyCell| -> Option<usize> {
        let jq = cell.level - 1;
        let t = centre_trees.get(&jq)?;
        let (g, _) = t.nearest(&cell.center())?;
        Some(tree.level(jq)[g])
    };
    let mut engulfing_ratio: f64 = 0.0;
    let mut regions = vec![Vec::new(); tree.len()];
    for (ci, cell) in cells.iter_mut().enumerate() {
        cell.associated = associate(cell);
        if let Some(q) = cell.associated {
            regions[q].push(ci);
            let cube = &tree.cubes[q];
            let wc = cell.center();
            let far2: f64 = (0..d)
                .map(|k| {
                    let v = (wc[k] - cube.center[k]).abs() + cell.side();
                    v * v
                })
                .sum();
            engulfing_ratio = engulfing_ratio.max(far2.sqrt() / cube.side());
        }
    }
    if !cells.is_empty() && regions.iter().all(|r| r.is_empty()) {
        return Err(invalid(
            "no Whitney cell has a cube at a comparable scale (levels do not match the dataset)",
        ));
    }
    let mut truncated_regions = vec![Vec::new(); tree.len()];
    for (ci, cell) in truncated.iter_mut().enumerate() {
        cell.associated = associate(cell);
        if let Some(q) = cell.associated {
            truncated_regions[q].push(ci);
        }
    }
    let mut m = 1.0;
    while m < engulfing_ratio * (1.0 - 1e-12) {
        m *= 2.0;
    }

    // comparability d(x, E) / l(W) on a 3^d sample of each 2W
    let mut cmin = f64::INFINITY;
    let mut cmax: f64 = 0.0;
    let samples = 3usize.pow(d as u32);
    let mut x = vec![0.0; d];
    for cell in &cells {
        let s = cell.side();
        let c = cell.center();
        for m in 0..samples {
            let mut r = m;
            for k in 0..d {
                let t = (r % 3) as f64 - 1.0;
                r /= 3;
                x[k] = c[k] + t * s;
            }
            let dx = mu.distance_to_support(&x) / s;
            cmin = cmin.min(dx);
            cmax = cmax.max(dx);
        }
    }

    Ok(Whitney {
        cells,
        truncated,
        j_floor,
        bbox: bbox.clone(),
        engulfing: m,
        comparability: (cmin, cmax),
        regions,
        truncated_regions,
    })
}

/// `R̂`: cell indices of all `W_Q` with `Q ⊆ R`.
pub fn carleson_box(r: usize, tree: &CubeTree, whitney: &Whitney) -> Result<Vec<usize>> {
    tree.cube(r)?;
    Ok(tree
        .descendants(r)
        .flat_map(|q| whitney.regions[q].iter().copied())
        .collect())
}

/// Cubes usable as "interior" Carleson roots: side at most `diam / 8` and
/// centre at least `2 M l(Q) + l(Q)` away from the dataset edge.
pub fn interior_cubes(mu: &DiscreteMeasure, tree: &CubeTree, level: i32) -> Vec<usize> {
    let m = tree.engulfing();
    tree.level(level)
        .iter()
        .copied()
        .filter(|&q| {
            let c = &tree.cubes[q];
            let l = c.side();
            l <= mu.diameter() / 8.0 * (1.0 + 1e-12)
                && mu.distance_to_boundary(&c.center) >= (2.0 * m + 1.0) * l
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measures::{generate, DatasetSpec};

    fn segment(side: f64, step: f64) -> DiscreteMeasure {
        generate(&DatasetSpec::Plane {
            n: 1,
            d: 2,
            side,
            step,
        })
        .unwrap()
    }

    #[test]
    fn segment_counts_and_nesting() {
        let mu = segment(1.0, 1.0 / 512.0);
        let t = build_cubes(&mu, 0, 5).unwrap();
        for j in 0..=5 {
            let count = t.level(j).len();
            assert!(
                count >= 1 << j && count <= 1 << (j + 1),
                "level {j}: {count}"
            );
            // partition
            let mut seen = vec![false; mu.len()];
            for &q in t.level(j) {
                for &a in t.members(q) {
                    assert!(!seen[a]);
                    seen[a] = true;
                }
            }
            assert!(seen.iter().all(|&s| s));
            let total: f64 = t.level(j).iter().map(|&q| t.cubes()[q].mass).sum();
            assert!((total - mu.total_mass()).abs() < 1e-12);
        }
        // brute-force containment of every child in its parent
        for (id, c) in t.cubes().iter().enumerate() {
            if let Some(p) = c.parent {
                let pm: std::collections::HashSet<usize> = t.members(p).iter().copied().collect();
                assert!(t.members(id).iter().all(|a| pm.contains(a)));
                assert_eq!(c.level, t.cubes()[p].level + 1);
            }
            assert!(c.radius < side_of(c.level));
        }
    }

    #[test]
    fn single_level_partitions() {
        let mu = generate(&DatasetSpec::Cantor4 {
            generations: 3,
            side: 1.0,
        })
        .unwrap();
        let t = build_cubes(&mu, 0, 0).unwrap();
        let n: usize = t.level(0).iter().map(|&q| t.members(q).len()).sum();
        assert_eq!(n, mu.len());
    }

    #[test]
    fn cantor_mass_spread() {
        let mu = generate(&DatasetSpec::Cantor4 {
            generations: 5,
            side: 1.0,
        })
        .unwrap();
        // 4^-4 = 2^-8
        let t = build_cubes(&mu, 0, 8).unwrap();
        let s = t.stats(1);
        assert!(s.max_mass_ratio / s.min_mass_ratio <= 16.0, "{s:?}");
    }

    #[test]
    fn cubes_guard_resolution() {
        let mu = segment(1.0, 1.0 / 64.0);
        assert!(matches!(
            build_cubes(&mu, 0, 5),
            Err(Error::ResolutionTooCoarse(_))
        ));
        assert!(build_cubes(&mu, 3, 2).is_err());
    }

    #[test]
    fn cube_build_is_deterministic() {
        let mu = segment(1.0, 1.0 / 256.0);
        let a = build_cubes(&mu, 0, 5).unwrap().to_json().unwrap();
        let b = build_cubes(&mu, 0, 5).unwrap().to_json().unwrap();
        assert_eq!(a, b);
    }

    fn whitney_for(
        mu: &DiscreteMeasure,
        j_min: i32,
        j_max: i32,
        j_floor: i32,
    ) -> (CubeTree, Whitney) {
        let t = build_cubes(mu, j_min, j_max).unwrap();
        let bbox = BoundingBox::of(mu).enlarged(2.0, 0.5);
        let w = build_whitney(mu, &t, &bbox, j_floor).unwrap();
        (t, w)
    }

    #[test]
    fn whitney_cells_near_axis() {
        let mu = segment(1.0, 1.0 / 512.0);
        let t = build_cubes(&mu, 0, 6).unwrap();
        let bbox = BoundingBox {
            lo: vec![0.0, -1.0],
            hi: vec![1.0, 1.0],
        };
        let w = build_whitney(&mu, &t, &bbox, 7).unwrap();
        assert!(!w.cells.is_empty());
        for c in &w.cells {
            // only cells over the segment's x-range see the axis as nearest
            let s = c.side();
            if c.corner[0] - s >= 0.0 && c.corner[0] + 2.0 * s <= 1.0 {
                let dist_axis = if c.corner[1] >= 0.0 {
                    c.corner[1]
                } else {
                    -(c.corner[1] + s)
                };
                assert!(dist_axis >= s && dist_axis <= 4.0 * s, "{c:?}");
            }
        }
    }

    #[test]
    fn whitney_cells_disjoint_and_clear() {
        let mu = generate(&DatasetSpec::Cantor4 {
            generations: 4,
            side: 1.0,
        })
        .unwrap();
        let (_, w) = whitney_for(&mu, 0, 6, 7);
        for c in &w.cells {
            let s = c.side();
            for i in 0..mu.len() {
                let p = mu.point(i);
                let inside =
                    (0..2).all(|k| p[k] >= c.corner[k] - s && p[k] <= c.corner[k] + 2.0 * s);
                assert!(!inside);
            }
        }
        // dyadic cells are disjoint iff no corner-containment between pairs
        // with one nested in the other
        for (i, a) in w.cells.iter().enumerate() {
            for b in &w.cells[i + 1..] {
                let (small, big) = if a.level >= b.level { (a, b) } else { (b, a) };
                let nested = (0..2).all(|k| {
                    small.corner[k] >= big.corner[k] && small.corner[k] < big.corner[k] + big.side()
                });
                assert!(!nested);
            }
        }
    }

    #[test]
    fn no_large_cell_between_parallel_segments() {
        let mu = generate(&DatasetSpec::ParallelSegments {
            length: 1.0,
            gap: 0.25,
            step: 1.0 / 256.0,
        })
        .unwrap();
        let (_, w) = whitney_for(&mu, 0, 5, 7);
        for c in &w.cells {
            let ctr = c.center();
            if ctr[1] > 0.0 && ctr[1] < 0.25 && ctr[0] > 0.0 && ctr[0] < 1.0 {
                assert!(c.side() <= 0.25, "{c:?}");
            }
        }
    }

    #[test]
    fn whitney_association_and_comparability() {
        let mu = generate(&DatasetSpec::Sphere {
            n: 1,
            radius: 1.0,
            angular_step: 2.0 * std::f64::consts::PI / 8192.0,
        })
        .unwrap();
        let (t, w) = whitney_for(&mu, 1, 8, 9);
        let (lo, hi) = w.comparability;
        assert!(lo >= 0.5 && hi <= 4.5 * 2f64.sqrt(), "{lo} {hi}");
        assert!(w.engulfing <= 8.0);
        for c in &w.cells {
            if let Some(q) = c.associated {
                assert_eq!(t.cubes()[q].side(), 2.0 * c.side());
            }
        }
        // regions partition the associated cells
        let total: usize = (0..t.len()).map(|q| w.region(q).len()).sum();
        assert_eq!(
            total,
            w.cells.iter().filter(|c| c.associated.is_some()).count()
        );
    }

    #[test]
    fn carleson_boxes_nest() {
        let mu = segment(1.0, 1.0 / 512.0);
        let (t, w) = whitney_for(&mu, 0, 6, 7);
        for (id, c) in t.cubes().iter().enumerate() {
            let b = carleson_box(id, &t, &w).unwrap();
            if c.children.is_empty() {
                assert_eq!(b, w.region(id));
            }
            if let Some(p) = c.parent {
                let pb: std::collections::HashSet<usize> =
                    carleson_box(p, &t, &w).unwrap().into_iter().collect();
                assert!(b.iter().all(|i| pb.contains(i)));
            }
        }
        assert!(carleson_box(t.len(), &t, &w).is_err());
    }

    #[test]
    fn root_box_volume_grows_with_floor() {
        let mu = segment(1.0, 1.0 / 1024.0);
        let t = build_cubes(&mu, 0, 7).unwrap();
        let bbox = BoundingBox::of(&mu).enlarged(2.0, 0.5);
        let mut last = 0.0;
        for jf in [5, 6, 7, 8] {
            let w = build_whitney(&mu, &t, &bbox, jf).unwrap();
            let vol: f64 = t
                .level(0)
                .iter()
                .flat_map(|&r| carleson_box(r, &t, &w).unwrap())
                .map(|i| w.cells[i].volume())
                .sum();
            assert!(vol >= last);
            last = vol;
        }
        assert!(last > 0.0);
    }
}
