//! Primal network simplex for uncapacitated min-cost flow with balanced
//! supplies.
//!
//! The spanning tree is kept strongly feasible (every zero-flow tree arc
//! points towards the root) and the leaving arc is the last blocking arc
//! of the cycle, which rules out cycling under degeneracy. Entering arcs
//! are picked with block search.

use crate::error::{Error, Result};

const NONE: usize = usize::MAX;

/// Arc list and node supplies. Positive supply = source, negative = sink.
#[derive(Debug, Clone, Default)]
pub(crate) struct FlowNetwork {
    pub supply: Vec<f64>,
    pub src: Vec<usize>,
    pub tgt: Vec<usize>,
    pub cost: Vec<f64>,
}

impl FlowNetwork {
    pub fn with_nodes(supply: Vec<f64>) -> Self {
        FlowNetwork {
            supply,
            ..Default::default()
        }
    }

    pub fn add_arc(&mut self, from: usize, to: usize, cost: f64) -> usize {
        self.src.push(from);
        self.tgt.push(to);
        self.cost.push(cost);
        self.src.len() - 1
    }

    pub fn num_arcs(&self) -> usize {
        self.src.len()
    }
}

#[derive(Debug, Clone)]
pub(crate) struct FlowSolution {
    /// Flow on every real arc.
    pub flow: Vec<f64>,
    /// Node potentials: `cost[e] + pi[src] - pi[tgt] >= 0` on every arc,
    /// with equality on arcs carrying flow.
    pub potential: Vec<f64>,
}

struct Tree {
    parent: Vec<usize>,
    pred: Vec<usize>,
    // true when pred arc is directed node -> parent
    up: Vec<bool>,
    depth: Vec<usize>,
    pi: Vec<f64>,
    children: Vec<Vec<usize>>,
    child_pos: Vec<usize>,
}

impl Tree {
    fn remove_child(&mut self, parent: usize, child: usize) {
        let pos = self.child_pos[child];
        let list = &mut self.children[parent];
        list.swap_remove(pos);
        if pos < list.len() {
            let moved = list[pos];
            self.child_pos[moved] = pos;
        }
    }

    fn add_child(&mut self, parent: usize, child: usize) {
        self.child_pos[child] = self.children[parent].len();
        self.children[parent].push(child);
    }
}

pub(crate) fn solve(net: &FlowNetwork) -> Result<FlowSolution> {
    let n = net.supply.len();
    let real = net.num_arcs();
    if n == 0 {
        return Ok(FlowSolution {
            flow: vec![0.0; real],
            potential: vec![],
        });
    }
    let root = n;
    let max_cost = net.cost.iter().fold(0.0f64, |m, c| m.max(c.abs()));
    if !max_cost.is_finite() {
        return Err(Error::NonFinite("arc costs"));
    }
    let art_cost = (max_cost + 1.0) * (n as f64 + 1.0);
    let eps = 1e-11 * max_cost.max(1e-300);
    let total_supply: f64 = net.supply.iter().map(|s| s.abs()).sum::<f64>() / 2.0;

    let all = real + n;
    let mut src = Vec::with_capacity(all);
    let mut tgt = Vec::with_capacity(all);
    let mut cost = Vec::with_capacity(all);
    src.extend_from_slice(&net.src);
    tgt.extend_from_slice(&net.tgt);
    cost.extend_from_slice(&net.cost);
    let mut flow = vec![0.0; all];
    let mut in_tree = vec![false; all];

    let mut tree = Tree {
        parent: vec![NONE; n + 1],
        pred: vec![NONE; n + 1],
        up: vec![false; n + 1],
        depth: vec![0; n + 1],
        pi: vec![0.0; n + 1],
        children: vec![Vec::new(); n + 1],
        child_pos: vec![0; n + 1],
    };
    tree.children[root].reserve(n);
    for u in 0..n {
        let e = real + u;
        let s = net.supply[u];
        if s >= 0.0 {
            src.push(u);
            tgt.push(root);
            cost.push(0.0);
            flow[e] = s;
            tree.up[u] = true;
            tree.pi[u] = 0.0;
        } else {
            src.push(root);
            tgt.push(u);
            cost.push(art_cost);
            flow[e] = -s;
            tree.up[u] = false;
            tree.pi[u] = art_cost;
        }
        in_tree[e] = true;
        tree.parent[u] = root;
        tree.pred[u] = e;
        tree.depth[u] = 1;
        tree.add_child(root, u);
    }

    let block = ((real as f64).sqrt().ceil() as usize).max(10).min(real.max(1));
    let mut next_arc = 0usize;
    let mut path: Vec<usize> = Vec::new();
    let mut stack: Vec<usize> = Vec::new();

    loop {
        // entering arc by block search
        let mut best = NONE;
        let mut best_rc = -eps;
        let mut count = 0usize;
        let mut e = next_arc;
        for _ in 0..real {
            if !in_tree[e] {
                let rc = cost[e] + tree.pi[src[e]] - tree.pi[tgt[e]];
                if rc < best_rc {
                    best_rc = rc;
                    best = e;
                }
            }
            e += 1;
            if e == real {
                e = 0;
            }
            count += 1;
            if count == block {
                if best != NONE {
                    break;
                }
                count = 0;
            }
        }
        if best == NONE {
            break;
        }
        next_arc = e;
        let e_in = best;
        let first = src[e_in];
        let second = tgt[e_in];

        // join node
        let (mut a, mut b) = (first, second);
        while a != b {
            if tree.depth[a] >= tree.depth[b] {
                a = tree.parent[a];
            } else {
                b = tree.parent[b];
            }
        }
        let join = a;

        // leaving arc: last blocking arc along the cycle orientation
        let mut delta = f64::INFINITY;
        let mut u_out = NONE;
        let mut out_first_side = true;
        let mut u = first;
        while u != join {
            let d = if tree.up[u] { flow[tree.pred[u]].max(0.0) } else { f64::INFINITY };
            if d < delta {
                delta = d;
                u_out = u;
                out_first_side = true;
            }
            u = tree.parent[u];
        }
        let mut u = second;
        while u != join {
            let d = if tree.up[u] { f64::INFINITY } else { flow[tree.pred[u]].max(0.0) };
            if d <= delta {
                delta = d;
                u_out = u;
                out_first_side = false;
            }
            u = tree.parent[u];
        }
        if u_out == NONE || !delta.is_finite() {
            return Err(Error::NetworkSimplex("unbounded cycle"));
        }

        if delta > 0.0 {
            flow[e_in] += delta;
            let mut u = first;
            while u != join {
                let pe = tree.pred[u];
                if tree.up[u] {
                    flow[pe] -= delta;
                } else {
                    flow[pe] += delta;
                }
                u = tree.parent[u];
            }
            let mut u = second;
            while u != join {
                let pe = tree.pred[u];
                if tree.up[u] {
                    flow[pe] += delta;
                } else {
                    flow[pe] -= delta;
                }
                u = tree.parent[u];
            }
            // the blocking arc leaves at exactly zero
            flow[tree.pred[u_out]] = 0.0;
        }

        let (u_in, v_in) = if out_first_side {
            (first, second)
        } else {
            (second, first)
        };
        in_tree[e_in] = true;
        in_tree[tree.pred[u_out]] = false;

        // re-hang the cut subtree below v_in, reversing the path u_in..u_out
        path.clear();
        let mut x = u_in;
        loop {
            path.push(x);
            if x == u_out {
                break;
            }
            x = tree.parent[x];
        }
        for &x in &path {
            let p = tree.parent[x];
            tree.remove_child(p, x);
        }
        let mut new_parent = v_in;
        let mut new_arc = e_in;
        for &x in &path {
            let old_arc = tree.pred[x];
            tree.parent[x] = new_parent;
            tree.pred[x] = new_arc;
            tree.up[x] = src[new_arc] == x;
            tree.add_child(new_parent, x);
            new_parent = x;
            new_arc = old_arc;
        }

        let target_pi = if tree.up[u_in] {
            tree.pi[v_in] - cost[e_in]
        } else {
            tree.pi[v_in] + cost[e_in]
        };
        let sigma = target_pi - tree.pi[u_in];
        stack.clear();
        stack.push(u_in);
        while let Some(v) = stack.pop() {
            tree.pi[v] += sigma;
            tree.depth[v] = tree.depth[tree.parent[v]] + 1;
            stack.extend_from_slice(&tree.children[v]);
        }
    }

    let leftover: f64 = flow[real..].iter().sum();
    if leftover > 1e-9 * total_supply.max(1.0) {
        return Err(Error::NetworkSimplex("infeasible supplies"));
    }
    flow.truncate(real);
    for f in &mut flow {
        if *f < 0.0 {
            *f = 0.0;
        }
    }
    tree.pi.truncate(n);
    Ok(FlowSolution {
        flow,
        potential: tree.pi,
    })
}
