//! Primal network simplex for the uncapacitated transportation problem.
//!
//! Sources `0..S` with supplies `a`, sinks `0..T` with demands `b`
//! (`sum a == sum b` up to rounding), dense cost matrix. A spanning tree
//! rooted at an artificial node is maintained explicitly (parent, arc to
//! parent, doubly linked child lists); the leaving arc is chosen by the
//! strongly feasible rule, which prevents cycling on degenerate pivots.

use crate::error::{Error, Result};

const UP: i8 = 1;
const DOWN: i8 = -1;
const NONE: usize = usize::MAX;

pub(crate) struct TransportSolution {
    pub cost: f64,
    /// Node potentials with `c(s,t) + pi_s - pi_t >= 0` on every arc:
    /// `pi[0..S]` for sources, `pi[S..S+T]` for sinks.
    pub potentials: Vec<f64>,
}

struct Simplex<'a> {
    ns: usize,
    nt: usize,
    cost: &'a [f64],
    art_cost: f64,
    root: usize,
    // arcs 0..ns*nt are real, then one artificial arc per node
    flow: Vec<f64>,
    in_tree: Vec<bool>,
    parent: Vec<usize>,
    pred: Vec<usize>,
    pred_dir: Vec<i8>,
    first_child: Vec<usize>,
    next_sib: Vec<usize>,
    prev_sib: Vec<usize>,
    depth: Vec<usize>,
    pi: Vec<f64>,
    // artificial arc of node v goes v -> root when art_up[v]
    art_up: Vec<bool>,
    stack: Vec<usize>,
}

impl<'a> Simplex<'a> {
    fn real_arcs(&self) -> usize {
        self.ns * self.nt
    }

    fn ends(&self, arc: usize) -> (usize, usize) {
        let m = self.real_arcs();
        if arc < m {
            (arc / self.nt, self.ns + arc % self.nt)
        } else {
            let v = arc - m;
            if self.art_up[v] {
                (v, self.root)
            } else {
                (self.root, v)
            }
        }
    }

    fn arc_cost(&self, arc: usize) -> f64 {
        if arc < self.real_arcs() {
            self.cost[arc]
        } else {
            self.art_cost
        }
    }

    fn detach(&mut self, v: usize) {
        let p = self.parent[v];
        if p == NONE {
            return;
        }
        let (prev, next) = (self.prev_sib[v], self.next_sib[v]);
        if prev == NONE {
            self.first_child[p] = next;
        } else {
            self.next_sib[prev] = next;
        }
        if next != NONE {
            self.prev_sib[next] = prev;
        }
        self.prev_sib[v] = NONE;
        self.next_sib[v] = NONE;
    }

    fn attach(&mut self, v: usize, p: usize) {
        let head = self.first_child[p];
        self.next_sib[v] = head;
        self.prev_sib[v] = NONE;
        if head != NONE {
            self.prev_sib[head] = v;
        }
        self.first_child[p] = v;
        self.parent[v] = p;
    }

    fn join(&self, mut u: usize, mut v: usize) -> usize {
        while self.depth[u] > self.depth[v] {
            u = self.parent[u];
        }
        while self.depth[v] > self.depth[u] {
            v = self.parent[v];
        }
        while u != v {
            u = self.parent[u];
            v = self.parent[v];
        }
        u
    }

    /// Shift potentials by `sigma` and recompute depths below `top`.
    fn refresh_subtree(&mut self, top: usize, sigma: f64) {
        let mut stack = std::mem::take(&mut self.stack);
        stack.clear();
        stack.push(top);
        while let Some(v) = stack.pop() {
            self.pi[v] += sigma;
            if v != top {
                self.depth[v] = self.depth[self.parent[v]] + 1;
            }
            let mut c = self.first_child[v];
            while c != NONE {
                stack.push(c);
                c = self.next_sib[c];
            }
        }
        self.stack = stack;
    }

    fn pivot(&mut self, in_arc: usize) -> Result<()> {
        let (first, second) = self.ends(in_arc);
        let join = self.join(first, second);
        let mut delta = f64::INFINITY;
        let mut u_out = NONE;
        let mut side = 0;
        let mut u = first;
        while u != join {
            if self.pred_dir[u] == UP {
                let d = self.flow[self.pred[u]];
                if d < delta {
                    delta = d;
                    u_out = u;
                    side = 1;
                }
            }
            u = self.parent[u];
        }
        u = second;
        while u != join {
            if self.pred_dir[u] == DOWN {
                let d = self.flow[self.pred[u]];
                if d <= delta {
                    delta = d;
                    u_out = u;
                    side = 2;
                }
            }
            u = self.parent[u];
        }
        if u_out == NONE {
            return Err(Error::Solver("transport problem is unbounded".into()));
        }
        if delta > 0.0 {
            self.flow[in_arc] += delta;
            let mut u = first;
            while u != join {
                let a = self.pred[u];
                self.flow[a] -= self.pred_dir[u] as f64 * delta;
                u = self.parent[u];
            }
            u = second;
            while u != join {
                let a = self.pred[u];
                self.flow[a] += self.pred_dir[u] as f64 * delta;
                u = self.parent[u];
            }
        }
        let (u_in, v_in) = if side == 1 {
            (first, second)
        } else {
            (second, first)
        };
        self.in_tree[self.pred[u_out]] = false;
        self.in_tree[in_arc] = true;

        // reverse the tree path u_in .. u_out and hang it below v_in
        let mut child = u_in;
        let mut new_parent = v_in;
        let mut arc = in_arc;
        let mut dir = if self.ends(in_arc).0 == u_in {
            UP
        } else {
            DOWN
        };
        loop {
            let old_parent = self.parent[child];
            let old_arc = self.pred[child];
            let old_dir = self.pred_dir[child];
            self.detach(child);
            self.attach(child, new_parent);
            self.pred[child] = arc;
            self.pred_dir[child] = dir;
            if child == u_out {
                break;
            }
            new_parent = child;
            arc = old_arc;
            dir = -old_dir;
            child = old_parent;
        }
        let target = if self.ends(in_arc).0 == u_in {
            self.pi[v_in] - self.arc_cost(in_arc)
        } else {
            self.pi[v_in] + self.arc_cost(in_arc)
        };
        let sigma = target - self.pi[u_in];
        self.depth[u_in] = self.depth[v_in] + 1;
        self.refresh_subtree(u_in, sigma);
        Ok(())
    }
}

/// Solve `min sum c(s,t) x(s,t)` over `x >= 0` with row sums `supply` and
/// column sums `demand`. `cost` is row-major `S x T`.
pub(crate) fn solve(supply: &[f64], demand: &[f64], cost: &[f64]) -> Result<TransportSolution> {
    let ns = supply.len();
    let nt = demand.len();
    debug_assert_eq!(cost.len(), ns * nt);
    let nodes = ns + nt;
    if ns == 0 || nt == 0 {
        return Ok(TransportSolution {
            cost: 0.0,
            potentials: vec![0.0; nodes],
        });
    }
    let max_cost = cost.iter().fold(0.0f64, |m, c| m.max(c.abs()));
    let art_cost = (max_cost + 1.0) * (nodes as f64 + 1.0);
    let m = ns * nt;
    let root = nodes;
    let mut sx = Simplex {
        ns,
        nt,
        cost,
        art_cost,
        root,
        flow: vec![0.0; m + nodes],
        in_tree: vec![false; m + nodes],
        parent: vec![NONE; nodes + 1],
        pred: vec![NONE; nodes + 1],
        pred_dir: vec![0; nodes + 1],
        first_child: vec![NONE; nodes + 1],
        next_sib: vec![NONE; nodes + 1],
        prev_sib: vec![NONE; nodes + 1],
        depth: vec![0; nodes + 1],
        pi: vec![0.0; nodes + 1],
        art_up: vec![true; nodes],
        stack: Vec::new(),
    };
    // initial tree: every node hangs off the root through its artificial arc
    for v in (0..nodes).rev() {
        let excess = if v < ns { supply[v] } else { -demand[v - ns] };
        let arc = m + v;
        sx.art_up[v] = excess >= 0.0;
        sx.flow[arc] = excess.abs();
        sx.in_tree[arc] = true;
        sx.attach(v, root);
        sx.pred[v] = arc;
        sx.depth[v] = 1;
        if sx.art_up[v] {
            sx.pred_dir[v] = UP;
            sx.pi[v] = -art_cost;
        } else {
            sx.pred_dir[v] = DOWN;
            sx.pi[v] = art_cost;
        }
    }

    let eps = 1e-12 * (max_cost + 1.0);
    let block = ((m as f64).sqrt() as usize).max(10);
    let mut next = 0usize;
    let mut pivots = 0usize;
    let limit = 50 * (m + nodes) + 10_000;
    loop {
        // block search for an entering arc among real arcs; (s, t) walks
        // the arcs row by row starting from `next`
        let mut best = NONE;
        let mut best_rc = -eps;
        let mut in_block = 0;
        let (mut s, mut t) = (next / nt, next % nt);
        for _ in 0..m {
            let (s0, t0) = (s, t);
            let a = s * nt + t;
            t += 1;
            if t == nt {
                t = 0;
                s += 1;
                if s == ns {
                    s = 0;
                }
            }
            if !sx.in_tree[a] {
                let rc = cost[a] + sx.pi[s0] - sx.pi[ns + t0];
                if rc < best_rc {
                    best_rc = rc;
                    best = a;
                }
            }
            in_block += 1;
            if in_block == block {
                if best != NONE {
                    break;
                }
                in_block = 0;
            }
        }
        next = s * nt + t;
        if best == NONE {
            break;
        }
        sx.pivot(best)?;
        pivots += 1;
        if pivots > limit {
            return Err(Error::Solver(format!(
                "network simplex exceeded {limit} pivots"
            )));
        }
    }

    let total = supply.iter().sum::<f64>().max(demand.iter().sum::<f64>());
    let residual: f64 = (m..m + nodes).map(|a| sx.flow[a]).sum();
    if residual > 1e-9 * total.max(1e-300) {
        return Err(Error::Solver(format!(
            "artificial flow {residual:e} remains (supplies and demands unbalanced?)"
        )));
    }
    let primal = crate::sum::pairwise(m, |a| sx.flow[a] * cost[a]);
    let mut potentials = sx.pi;
    potentials.truncate(nodes);
    Ok(TransportSolution {
        cost: primal,
        potentials,
    })
}
