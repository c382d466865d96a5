//! Static KD-tree over a flat coordinate buffer.
//!
//! Supports the three queries the lattice and quadrature code need: nearest
//! neighbour (ties broken by smaller index), "is any point inside this box",
//! and fixed-radius enumeration.

const LEAF_SIZE: usize = 16;

#[derive(Debug, Clone)]
struct Node {
    start: usize,
    end: usize,
    // children are only meaningful for internal nodes
    left: usize,
    right: usize,
    bbox_lo: Vec<f64>,
    bbox_hi: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct KdTree {
    dim: usize,
    // points stored in tree order
    coords: Vec<f64>,
    ids: Vec<usize>,
    nodes: Vec<Node>,
}

impl KdTree {
    /// Build from `coords` laid out as consecutive `dim`-tuples.
    pub fn new(coords: &[f64], dim: usize) -> Self {
        assert!(dim > 0 && coords.len() % dim == 0);
        let n = coords.len() / dim;
        let mut ids: Vec<usize> = (0..n).collect();
        let mut nodes = Vec::new();
        if n > 0 {
            build(coords, dim, &mut ids, 0, n, &mut nodes);
        }
        let mut ordered = Vec::with_capacity(coords.len());
        for &i in &ids {
            ordered.extend_from_slice(&coords[i * dim..(i + 1) * dim]);
        }
        KdTree {
            dim,
            coords: ordered,
            ids,
            nodes,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    fn point(&self, slot: usize) -> &[f64] {
        &self.coords[slot * self.dim..(slot + 1) * self.dim]
    }

    /// Nearest point to `q`: `(original index, euclidean distance)`.
    pub fn nearest(&self, q: &[f64]) -> Option<(usize, f64)> {
        if self.is_empty() {
            return None;
        }
        let mut best = (usize::MAX, f64::INFINITY);
        self.nearest_rec(0, q, &mut best);
        Some((best.0, best.1.sqrt()))
    }

    fn nearest_rec(&self, node: usize, q: &[f64], best: &mut (usize, f64)) {
        let nd = &self.nodes[node];
        if box_dist2(&nd.bbox_lo, &nd.bbox_hi, q) > best.1 {
            return;
        }
        if nd.end - nd.start <= LEAF_SIZE || nd.left == 0 {
            for slot in nd.start..nd.end {
                let d2 = dist2(self.point(slot), q);
                let id = self.ids[slot];
                if d2 < best.1 || (d2 == best.1 && id < best.0) {
                    *best = (id, d2);
                }
            }
            return;
        }
        let (l, r) = (nd.left, nd.right);
        let dl = box_dist2(&self.nodes[l].bbox_lo, &self.nodes[l].bbox_hi, q);
        let dr = box_dist2(&self.nodes[r].bbox_lo, &self.nodes[r].bbox_hi, q);
        if dl <= dr {
            self.nearest_rec(l, q, best);
            self.nearest_rec(r, q, best);
        } else {
            self.nearest_rec(r, q, best);
            self.nearest_rec(l, q, best);
        }
    }

    /// True when at least one point lies in the closed box `[lo, hi]`.
    pub fn any_in_box(&self, lo: &[f64], hi: &[f64]) -> bool {
        !self.is_empty() && self.any_in_box_rec(0, lo, hi)
    }

    fn any_in_box_rec(&self, node: usize, lo: &[f64], hi: &[f64]) -> bool {
        let nd = &self.nodes[node];
        for k in 0..self.dim {
            if nd.bbox_hi[k] < lo[k] || nd.bbox_lo[k] > hi[k] {
                return false;
            }
        }
        if nd.end - nd.start <= LEAF_SIZE || nd.left == 0 {
            return (nd.start..nd.end).any(|slot| {
                let p = self.point(slot);
                (0..self.dim).all(|k| p[k] >= lo[k] && p[k] <= hi[k])
            });
        }
        self.any_in_box_rec(nd.left, lo, hi) || self.any_in_box_rec(nd.right, lo, hi)
    }

    /// Calls `visit(index, squared distance)` for every point with
    /// `|p - q| <= radius`. Visit order is deterministic but unspecified.
    pub fn for_each_within<F: FnMut(usize, f64)>(&self, q: &[f64], radius: f64, mut visit: F) {
        if self.is_empty() {
            return;
        }
        let r2 = radius * radius;
        let mut stack = vec![0usize];
        while let Some(node) = stack.pop() {
            let nd = &self.nodes[node];
            if box_dist2(&nd.bbox_lo, &nd.bbox_hi, q) > r2 {
                continue;
            }
            if nd.end - nd.start <= LEAF_SIZE || nd.left == 0 {
                for slot in nd.start..nd.end {
                    let d2 = dist2(self.point(slot), q);
                    if d2 <= r2 {
                        visit(self.ids[slot], d2);
                    }
                }
            } else {
                stack.push(nd.right);
                stack.push(nd.left);
            }
        }
    }

    /// Indices within `radius` of `q`, sorted ascending.
    #[cfg(test)]
    pub fn within(&self, q: &[f64], radius: f64) -> Vec<usize> {
        let mut out = Vec::new();
        self.for_each_within(q, radius, |i, _| out.push(i));
        out.sort_unstable();
        out
    }
}

fn build(
    coords: &[f64],
    dim: usize,
    ids: &mut [usize],
    start: usize,
    end: usize,
    nodes: &mut Vec<Node>,
) -> usize {
    let mut lo = vec![f64::INFINITY; dim];
    let mut hi = vec![f64::NEG_INFINITY; dim];
    for &i in &ids[start..end] {
        for k in 0..dim {
            let v = coords[i * dim + k];
            lo[k] = lo[k].min(v);
            hi[k] = hi[k].max(v);
        }
    }
    let me = nodes.len();
    nodes.push(Node {
        start,
        end,
        left: 0,
        right: 0,
        bbox_lo: lo.clone(),
        bbox_hi: hi.clone(),
    });
    if end - start <= LEAF_SIZE {
        return me;
    }
    let axis = (0..dim)
        .max_by(|&a, &b| (hi[a] - lo[a]).total_cmp(&(hi[b] - lo[b])))
        .unwrap_or(0);
    if hi[axis] - lo[axis] <= 0.0 {
        return me;
    }
    let mid = start + (end - start) / 2;
    ids[start..end].select_nth_unstable_by(mid - start, |&a, &b| {
        coords[a * dim + axis]
            .total_cmp(&coords[b * dim + axis])
            .then(a.cmp(&b))
    });
    let left = build(coords, dim, ids, start, mid, nodes);
    let right = build(coords, dim, ids, mid, end, nodes);
    nodes[me].left = left;
    nodes[me].right = right;
    me
}

#[inline]
pub(crate) fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

#[inline]
pub(crate) fn dist(a: &[f64], b: &[f64]) -> f64 {
    dist2(a, b).sqrt()
}

fn box_dist2(lo: &[f64], hi: &[f64], q: &[f64]) -> f64 {
    let mut s = 0.0;
    for k in 0..q.len() {
        let v = q[k];
        let d = if v < lo[k] {
            lo[k] - v
        } else if v > hi[k] {
            v - hi[k]
        } else {
            0.0
        };
        s += d * d;
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn cloud(n: usize, dim: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n * dim).map(|_| rng.gen_range(-1.0..1.0)).collect()
    }

    #[test]
    fn nearest_matches_brute_force() {
        let pts = cloud(500, 3, 1);
        let tree = KdTree::new(&pts, 3);
        let queries = cloud(50, 3, 2);
        for q in queries.chunks(3) {
            let (bi, bd) = (0..500)
                .map(|i| (i, dist(&pts[i * 3..i * 3 + 3], q)))
                .min_by(|a, b| a.1.total_cmp(&b.1))
                .unwrap();
            let (i, d) = tree.nearest(q).unwrap();
            assert_eq!(i, bi);
            assert_eq!(d, bd);
        }
    }

    #[test]
    fn radius_and_box_queries_match_brute_force() {
        let pts = cloud(400, 2, 3);
        let tree = KdTree::new(&pts, 2);
        let q = [0.1, -0.2];
        let brute: Vec<usize> = (0..400)
            .filter(|&i| dist(&pts[i * 2..i * 2 + 2], &q) <= 0.3)
            .collect();
        assert_eq!(tree.within(&q, 0.3), brute);
        let lo = [0.2, 0.2];
        let hi = [0.25, 0.9];
        let any = (0..400).any(|i| {
            let p = &pts[i * 2..i * 2 + 2];
            p[0] >= lo[0] && p[0] <= hi[0] && p[1] >= lo[1] && p[1] <= hi[1]
        });
        assert_eq!(tree.any_in_box(&lo, &hi), any);
    }

    #[test]
    fn nearest_ties_prefer_smaller_index() {
        let pts = [1.0, 0.0, -1.0, 0.0, 0.0, 1.0];
        let tree = KdTree::new(&pts, 2);
        assert_eq!(tree.nearest(&[0.0, 0.0]).unwrap().0, 0);
    }
}
