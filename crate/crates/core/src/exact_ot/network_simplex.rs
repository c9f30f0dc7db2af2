//! Primal network simplex for the dense transportation problem.
//!
//! Follows the spanning-tree bookkeeping of LEMON's `NetworkSimplex`
//! (thread/rev-thread/successor lists, block-search pricing, strongly
//! feasible trees) specialized to a complete bipartite graph with
//! uncapacitated arcs. Real arcs are never materialized: arc `e` runs from
//! source `e / m` to sink `n + e % m`, and only tree arcs carry flow, which
//! is stored on the child endpoint of each tree arc.

use crate::error::{Result, SwdError};

const NONE: usize = usize::MAX;
const UP: f64 = 1.0;
const DOWN: f64 = -1.0;

#[derive(Debug, Clone)]
pub(crate) struct TransportFlow {
    /// `(source, sink, mass)` for every arc with positive flow.
    pub entries: Vec<(usize, usize, f64)>,
    pub cost: f64,
    pub pivots: usize,
}

struct Simplex<'a> {
    n: usize,
    m: usize,
    cost: &'a [f64],
    arc_num: usize,
    root: usize,
    art_cost: f64,
    art_up: Vec<bool>,

    parent: Vec<usize>,
    pred: Vec<usize>,
    pred_dir: Vec<f64>,
    pred_flow: Vec<f64>,
    thread: Vec<usize>,
    rev_thread: Vec<usize>,
    succ_num: Vec<usize>,
    last_succ: Vec<usize>,
    pi: Vec<f64>,
    dirty_revs: Vec<usize>,

    block_size: usize,
    next_arc: usize,
    price_tol: f64,

    in_arc: usize,
    join: usize,
    u_in: usize,
    v_in: usize,
    u_out: usize,
    delta: f64,
}

impl<'a> Simplex<'a> {
    fn new(supply: &[f64], demand: &[f64], cost: &'a [f64]) -> Self {
        let n = supply.len();
        let m = demand.len();
        let node_num = n + m;
        let root = node_num;
        let arc_num = n * m;
        let max_cost = cost.iter().fold(0.0f64, |a, &c| a.max(c));
        let art_cost = (max_cost + 1.0) * node_num as f64;

        let mut s = Simplex {
            n,
            m,
            cost,
            arc_num,
            root,
            art_cost,
            art_up: vec![false; node_num],
            parent: vec![NONE; node_num + 1],
            pred: vec![NONE; node_num + 1],
            pred_dir: vec![UP; node_num + 1],
            pred_flow: vec![0.0; node_num + 1],
            thread: vec![0; node_num + 1],
            rev_thread: vec![0; node_num + 1],
            succ_num: vec![0; node_num + 1],
            last_succ: vec![0; node_num + 1],
            pi: vec![0.0; node_num + 1],
            dirty_revs: Vec::new(),
            block_size: ((arc_num as f64).sqrt().ceil() as usize).max(10),
            next_arc: 0,
            price_tol: art_cost * 1e-14,
            in_arc: NONE,
            join: NONE,
            u_in: NONE,
            v_in: NONE,
            u_out: NONE,
            delta: 0.0,
        };

        s.thread[root] = 0;
        s.rev_thread[0] = root;
        s.succ_num[root] = node_num + 1;
        s.last_succ[root] = root - 1;
        for u in 0..node_num {
            let e = arc_num + u;
            let net = if u < n { supply[u] } else { -demand[u - n] };
            s.parent[u] = root;
            s.pred[u] = e;
            s.thread[u] = u + 1;
            s.rev_thread[u + 1] = u;
            s.succ_num[u] = 1;
            s.last_succ[u] = u;
            if net >= 0.0 {
                s.art_up[u] = true;
                s.pred_dir[u] = UP;
                s.pi[u] = 0.0;
                s.pred_flow[u] = net;
            } else {
                s.pred_dir[u] = DOWN;
                s.pi[u] = art_cost;
                s.pred_flow[u] = -net;
            }
        }
        s
    }

    fn source(&self, e: usize) -> usize {
        if e < self.arc_num {
            e / self.m
        } else {
            let u = e - self.arc_num;
            if self.art_up[u] {
                u
            } else {
                self.root
            }
        }
    }

    fn target(&self, e: usize) -> usize {
        if e < self.arc_num {
            self.n + e % self.m
        } else {
            let u = e - self.arc_num;
            if self.art_up[u] {
                self.root
            } else {
                u
            }
        }
    }

    fn arc_cost(&self, e: usize) -> f64 {
        if e < self.arc_num {
            self.cost[e]
        } else if self.art_up[e - self.arc_num] {
            0.0
        } else {
            self.art_cost
        }
    }

    /// Block-search pricing over the real arcs.
    fn find_entering_arc(&mut self) -> bool {
        let (n, m) = (self.n, self.m);
        let pi_src = &self.pi[..n];
        let pi_dst = &self.pi[n..n + m];
        let mut best = -self.price_tol;
        let mut found = NONE;
        let mut cnt = self.block_size;
        let mut e = self.next_arc;
        let mut i = e / m;
        let mut j = e % m;
        for _ in 0..self.arc_num {
            let c = self.cost[e] + pi_src[i] - pi_dst[j];
            if c < best {
                best = c;
                found = e;
            }
            e += 1;
            j += 1;
            if j == m {
                j = 0;
                i += 1;
                if i == n {
                    i = 0;
                    e = 0;
                }
            }
            cnt -= 1;
            if cnt == 0 {
                if found != NONE {
                    break;
                }
                cnt = self.block_size;
            }
        }
        if found == NONE {
            return false;
        }
        self.in_arc = found;
        self.next_arc = e;
        true
    }

    fn find_join_node(&mut self) {
        let mut u = self.source(self.in_arc);
        let mut v = self.target(self.in_arc);
        while u != v {
            if self.succ_num[u] < self.succ_num[v] {
                u = self.parent[u];
            } else {
                v = self.parent[v];
            }
        }
        self.join = u;
    }

    fn find_leaving_arc(&mut self) {
        let first = self.source(self.in_arc);
        let second = self.target(self.in_arc);
        let mut delta = f64::INFINITY;
        let mut result = 0;
        let mut u = first;
        while u != self.join {
            if self.pred_dir[u] == UP && self.pred_flow[u] < delta {
                delta = self.pred_flow[u];
                self.u_out = u;
                result = 1;
            }
            u = self.parent[u];
        }
        u = second;
        while u != self.join {
            if self.pred_dir[u] == DOWN && self.pred_flow[u] <= delta {
                delta = self.pred_flow[u];
                self.u_out = u;
                result = 2;
            }
            u = self.parent[u];
        }
        if result == 1 {
            self.u_in = first;
            self.v_in = second;
        } else {
            self.u_in = second;
            self.v_in = first;
        }
        self.delta = delta;
    }

    fn change_flow(&mut self) {
        let delta = self.delta;
        if delta > 0.0 {
            let mut u = self.source(self.in_arc);
            while u != self.join {
                self.pred_flow[u] -= self.pred_dir[u] * delta;
                u = self.parent[u];
            }
            u = self.target(self.in_arc);
            while u != self.join {
                self.pred_flow[u] += self.pred_dir[u] * delta;
                u = self.parent[u];
            }
        }
    }

    fn update_tree_structure(&mut self) {
        let (u_in, v_in, u_out, join, in_arc) =
            (self.u_in, self.v_in, self.u_out, self.join, self.in_arc);
        let in_dir = if u_in == self.source(in_arc) {
            UP
        } else {
            DOWN
        };
        let old_rev_thread = self.rev_thread[u_out];
        let old_succ_num = self.succ_num[u_out];
        let old_last_succ = self.last_succ[u_out];
        let v_out = self.parent[u_out];

        if u_in == u_out {
            self.parent[u_in] = v_in;
            self.pred[u_in] = in_arc;
            self.pred_dir[u_in] = in_dir;
            self.pred_flow[u_in] = self.delta;

            if self.thread[v_in] != u_out {
                let mut after = self.thread[old_last_succ];
                self.thread[old_rev_thread] = after;
                self.rev_thread[after] = old_rev_thread;
                after = self.thread[v_in];
                self.thread[v_in] = u_out;
                self.rev_thread[u_out] = v_in;
                self.thread[old_last_succ] = after;
                self.rev_thread[after] = old_last_succ;
            }
        } else {
            let thread_continue = if old_rev_thread == v_in {
                self.thread[old_last_succ]
            } else {
                self.thread[v_in]
            };

            // re-hang the stem nodes between u_in and u_out
            let mut stem = u_in;
            let mut par_stem = v_in;
            let mut last = self.last_succ[u_in];
            let mut after = self.thread[last];
            self.thread[v_in] = u_in;
            self.dirty_revs.clear();
            self.dirty_revs.push(v_in);
            while stem != u_out {
                let next_stem = self.parent[stem];
                self.thread[last] = next_stem;
                self.dirty_revs.push(last);

                let before = self.rev_thread[stem];
                self.thread[before] = after;
                self.rev_thread[after] = before;

                self.parent[stem] = par_stem;
                par_stem = stem;
                stem = next_stem;

                last = if self.last_succ[stem] == self.last_succ[par_stem] {
                    self.rev_thread[par_stem]
                } else {
                    self.last_succ[stem]
                };
                after = self.thread[last];
            }
            self.parent[u_out] = par_stem;
            self.thread[last] = thread_continue;
            self.rev_thread[thread_continue] = last;
            self.last_succ[u_out] = last;

            if old_rev_thread != v_in {
                self.thread[old_rev_thread] = after;
                self.rev_thread[after] = old_rev_thread;
            }

            for k in 0..self.dirty_revs.len() {
                let u = self.dirty_revs[k];
                let t = self.thread[u];
                self.rev_thread[t] = u;
            }

            // shift pred arcs (and their flows) down the reversed stem
            let mut tmp_sc = 0usize;
            let tmp_ls = self.last_succ[u_out];
            let mut u = u_out;
            let mut p = self.parent[u];
            while u != u_in {
                self.pred[u] = self.pred[p];
                self.pred_dir[u] = -self.pred_dir[p];
                self.pred_flow[u] = self.pred_flow[p];
                tmp_sc = tmp_sc + self.succ_num[u] - self.succ_num[p];
                self.succ_num[u] = tmp_sc;
                self.last_succ[p] = tmp_ls;
                u = p;
                p = self.parent[u];
            }
            self.pred[u_in] = in_arc;
            self.pred_dir[u_in] = in_dir;
            self.pred_flow[u_in] = self.delta;
            self.succ_num[u_in] = old_succ_num;
        }

        let up_limit_out = if self.last_succ[join] == v_in {
            join
        } else {
            NONE
        };
        let last_succ_out = self.last_succ[u_out];
        let mut u = v_in;
        while u != NONE && self.last_succ[u] == v_in {
            self.last_succ[u] = last_succ_out;
            u = self.parent[u];
        }

        if join != old_rev_thread && v_in != old_rev_thread {
            let mut u = v_out;
            while u != up_limit_out && self.last_succ[u] == old_last_succ {
                self.last_succ[u] = old_rev_thread;
                u = self.parent[u];
            }
        } else if last_succ_out != old_last_succ {
            let mut u = v_out;
            while u != up_limit_out && self.last_succ[u] == old_last_succ {
                self.last_succ[u] = last_succ_out;
                u = self.parent[u];
            }
        }

        let mut u = v_in;
        while u != join {
            self.succ_num[u] += old_succ_num;
            u = self.parent[u];
        }
        let mut u = v_out;
        while u != join {
            self.succ_num[u] -= old_succ_num;
            u = self.parent[u];
        }
    }

    fn update_potential(&mut self) {
        let u_in = self.u_in;
        let sigma =
            self.pi[self.v_in] - self.pi[u_in] - self.pred_dir[u_in] * self.arc_cost(self.in_arc);
        let end = self.thread[self.last_succ[u_in]];
        let mut u = u_in;
        while u != end {
            self.pi[u] += sigma;
            u = self.thread[u];
        }
    }

    fn run(&mut self) -> Result<usize> {
        let mut pivots = 0;
        while self.find_entering_arc() {
            self.find_join_node();
            self.find_leaving_arc();
            if !self.delta.is_finite() {
                return Err(SwdError::Solver("unbounded transportation problem".into()));
            }
            self.change_flow();
            self.update_tree_structure();
            self.update_potential();
            pivots += 1;
        }
        Ok(pivots)
    }
}

/// Solves `min sum c_ij x_ij` subject to row sums `supply` and column sums
/// `demand`. `cost` is row-major `supply.len() x demand.len()`. Supplies and
/// demands must be nonnegative with (numerically) equal totals.
pub(crate) fn solve_transport(
    supply: &[f64],
    demand: &[f64],
    cost: &[f64],
) -> Result<TransportFlow> {
    let (n, m) = (supply.len(), demand.len());
    if n == 0 || m == 0 {
        return Err(SwdError::invalid("transport problem with an empty side"));
    }
    debug_assert_eq!(cost.len(), n * m);
    let mut simplex = Simplex::new(supply, demand, cost);
    let pivots = simplex.run()?;

    let total: f64 = supply.iter().sum();
    let mut entries = Vec::new();
    let mut art_flow = 0.0;
    for u in 0..n + m {
        let e = simplex.pred[u];
        let f = simplex.pred_flow[u];
        if e < simplex.arc_num {
            if f > 0.0 {
                entries.push((e / m, e % m, f));
            }
        } else {
            art_flow += f.abs();
        }
    }
    if art_flow > 1e-9 * total.max(1.0) {
        return Err(SwdError::Solver(format!(
            "transport problem infeasible: {art_flow:e} units left on artificial arcs"
        )));
    }
    entries.sort_unstable_by_key(|&(i, j, _)| (i, j));
    let cost_total = entries.iter().map(|&(i, j, f)| f * cost[i * m + j]).sum();
    Ok(TransportFlow {
        entries,
        cost: cost_total,
        pivots,
    })
}
