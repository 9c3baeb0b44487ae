//! Primal network simplex for the transportation problem.
//!
//! Sources `0..n1` carry supplies, sinks `n1..n1+n2` carry demands, and every
//! source is joined to every sink by an uncapacitated arc. The spanning tree
//! is stored with parent / thread / reverse-thread / successor-count /
//! last-successor arrays, and entering arcs are chosen by block search. The
//! start basis is the strongly feasible artificial tree hanging every node
//! off an extra root, which prevents cycling under degeneracy.
//!
//! Non-tree arcs always carry zero flow (there are no upper bounds), so
//! flows are stored per tree node for the arc joining it to its parent.

use alloc::vec;
use alloc::vec::Vec;

use num_traits::Float;

use crate::{Error, Result};

const STATE_TREE: i8 = 0;
const STATE_LOWER: i8 = 1;

/// Reduced costs above `-COST_EPSILON * scale` count as nonnegative.
pub const COST_EPSILON: f64 = 1e-12;

/// Dense transportation problem `min <C, P>` with `P 1 = supply`,
/// `P^T 1 = demand`, `P >= 0`.
pub struct TransportProblem<'a> {
    pub supply: &'a [f64],
    pub demand: &'a [f64],
    /// Row-major `supply.len() x demand.len()`.
    pub cost: &'a [f64],
}

/// Optimal plan as a sparse list of positive entries.
#[derive(Clone, Debug, PartialEq)]
pub struct TransportPlan {
    pub entries: Vec<(usize, usize, f64)>,
    pub cost: f64,
    /// Node potentials: `u[i]` for sources, then `v[j]` for sinks, with
    /// `v[j] - u[i] <= C[i][j]` and equality on the plan's support.
    pub potentials: Vec<f64>,
}

struct Solver<'a> {
    n1: usize,
    n2: usize,
    node_num: usize,
    arc_num: usize,
    cost: &'a [f64],
    art_cost: f64,
    // Artificial arc of node u joins u and the root; `art_up[u]` when u is
    // its source.
    art_up: Vec<bool>,

    state: Vec<i8>,
    pi: Vec<f64>,
    parent: Vec<usize>,
    pred: Vec<usize>,
    /// Arc `pred[u]` points from `u` to its parent.
    pred_up: Vec<bool>,
    /// Flow on `pred[u]`.
    flow: Vec<f64>,
    thread: Vec<usize>,
    rev_thread: Vec<usize>,
    succ_num: Vec<usize>,
    last_succ: Vec<usize>,
    dirty_revs: Vec<usize>,

    block_size: usize,
    next_arc: usize,

    in_arc: usize,
    join: usize,
    u_in: usize,
    v_in: usize,
    u_out: usize,
    delta: f64,
}

const NONE: usize = usize::MAX;

impl<'a> Solver<'a> {
    #[inline]
    fn source(&self, e: usize) -> usize {
        if e < self.arc_num {
            e / self.n2
        } else {
            let u = e - self.arc_num;
            if self.art_up[u] {
                u
            } else {
                self.node_num
            }
        }
    }

    #[inline]
    fn target(&self, e: usize) -> usize {
        if e < self.arc_num {
            self.n1 + e % self.n2
        } else {
            let u = e - self.arc_num;
            if self.art_up[u] {
                self.node_num
            } else {
                u
            }
        }
    }

    #[inline]
    fn arc_cost(&self, e: usize) -> f64 {
        if e < self.arc_num {
            self.cost[e]
        } else {
            let u = e - self.arc_num;
            if self.art_up[u] {
                0.0
            } else {
                self.art_cost
            }
        }
    }

    fn new(problem: &TransportProblem<'a>) -> Self {
        let n1 = problem.supply.len();
        let n2 = problem.demand.len();
        let node_num = n1 + n2;
        let arc_num = n1 * n2;
        let root = node_num;
        let max_cost = problem.cost.iter().fold(0.0f64, |m, c| m.max(c.abs()));
        let art_cost = (max_cost + 1.0) * node_num as f64;

        let all = node_num + 1;
        let mut s = Self {
            n1,
            n2,
            node_num,
            arc_num,
            cost: problem.cost,
            art_cost,
            art_up: vec![false; node_num],
            state: vec![STATE_LOWER; arc_num],
            pi: vec![0.0; all],
            parent: vec![NONE; all],
            pred: vec![NONE; all],
            pred_up: vec![false; all],
            flow: vec![0.0; all],
            thread: vec![0; all],
            rev_thread: vec![0; all],
            succ_num: vec![1; all],
            last_succ: vec![0; all],
            dirty_revs: Vec::new(),
            block_size: ((arc_num as f64).sqrt().ceil() as usize).max(10),
            next_arc: 0,
            in_arc: 0,
            join: 0,
            u_in: 0,
            v_in: 0,
            u_out: 0,
            delta: 0.0,
        };

        s.thread[root] = 0;
        s.rev_thread[0] = root;
        s.succ_num[root] = all;
        s.last_succ[root] = root - 1;
        for u in 0..node_num {
            let e = arc_num + u;
            s.parent[u] = root;
            s.pred[u] = e;
            s.thread[u] = u + 1;
            s.rev_thread[u + 1] = u;
            s.succ_num[u] = 1;
            s.last_succ[u] = u;
            let supply = if u < n1 { problem.supply[u] } else { -problem.demand[u - n1] };
            if supply >= 0.0 {
                s.art_up[u] = true;
                s.pred_up[u] = true;
                s.pi[u] = 0.0;
                s.flow[u] = supply;
            } else {
                s.art_up[u] = false;
                s.pred_up[u] = false;
                s.pi[u] = art_cost;
                s.flow[u] = -supply;
            }
        }
        s
    }

    #[inline]
    fn reduced_cost(&self, i: usize, j: usize, e: usize) -> f64 {
        self.cost[e] + self.pi[i] - self.pi[self.n1 + j]
    }

    fn is_violating(&self, min: f64, e: usize, i: usize, j: usize) -> bool {
        let scale = self.cost[e].abs().max(self.pi[i].abs()).max(self.pi[self.n1 + j].abs()).max(1.0);
        min < -COST_EPSILON * scale
    }

    /// Block search over real arcs. Tree arcs have reduced cost zero and
    /// lower-bound arcs enter when their reduced cost is negative.
    fn find_entering_arc(&mut self) -> bool {
        let mut min = 0.0;
        let mut best = NONE;
        let mut best_ij = (0, 0);
        let mut cnt = self.block_size;
        let n2 = self.n2;
        let start = self.next_arc;
        let total = self.arc_num;
        let mut e = start;
        let mut i = e / n2;
        let mut j = e % n2;
        for _ in 0..total {
            if self.state[e] == STATE_LOWER {
                let c = self.reduced_cost(i, j, e);
                if c < min {
                    min = c;
                    best = e;
                    best_ij = (i, j);
                }
            }
            cnt -= 1;
            e += 1;
            j += 1;
            if j == n2 {
                j = 0;
                i += 1;
            }
            if e == total {
                e = 0;
                i = 0;
                j = 0;
            }
            if cnt == 0 {
                if best != NONE && self.is_violating(min, best, best_ij.0, best_ij.1) {
                    self.in_arc = best;
                    self.next_arc = e;
                    return true;
                }
                cnt = self.block_size;
            }
        }
        if best != NONE && self.is_violating(min, best, best_ij.0, best_ij.1) {
            self.in_arc = best;
            self.next_arc = e;
            return true;
        }
        false
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

    /// Ratio test along the cycle closed by the entering arc; ties on the
    /// second path keep the tree strongly feasible.
    fn find_leaving_arc(&mut self) -> bool {
        // Entering arcs are always at their lower bound.
        let first = self.source(self.in_arc);
        let second = self.target(self.in_arc);
        let mut delta = f64::INFINITY;
        let mut result = 0;
        let mut u = first;
        while u != self.join {
            if self.pred_up[u] {
                let d = self.flow[u];
                if d < delta {
                    delta = d;
                    self.u_out = u;
                    result = 1;
                }
            }
            u = self.parent[u];
        }
        let mut u = second;
        while u != self.join {
            if !self.pred_up[u] {
                let d = self.flow[u];
                if d <= delta {
                    delta = d;
                    self.u_out = u;
                    result = 2;
                }
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
        result != 0
    }

    fn change_flow(&mut self) {
        let delta = self.delta;
        if delta > 0.0 {
            let mut u = self.source(self.in_arc);
            while u != self.join {
                if self.pred_up[u] {
                    self.flow[u] -= delta;
                } else {
                    self.flow[u] += delta;
                }
                u = self.parent[u];
            }
            let mut u = self.target(self.in_arc);
            while u != self.join {
                if self.pred_up[u] {
                    self.flow[u] += delta;
                } else {
                    self.flow[u] -= delta;
                }
                u = self.parent[u];
            }
        }
        self.state[self.in_arc] = STATE_TREE;
        let leaving = self.pred[self.u_out];
        if leaving < self.arc_num {
            self.state[leaving] = STATE_LOWER;
        }
    }

    fn update_tree_structure(&mut self) {
        let u_in = self.u_in;
        let v_in = self.v_in;
        let u_out = self.u_out;
        let join = self.join;
        let in_arc = self.in_arc;
        let delta = self.delta;

        let old_rev_thread = self.rev_thread[u_out];
        let old_succ_num = self.succ_num[u_out];
        let old_last_succ = self.last_succ[u_out];
        let v_out = self.parent[u_out];

        if u_in == u_out {
            self.parent[u_in] = v_in;
            self.pred[u_in] = in_arc;
            self.pred_up[u_in] = u_in == self.source(in_arc);
            self.flow[u_in] = delta;

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

            // Re-hang the stem u_in -> ... -> u_out under v_in.
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

            for idx in 0..self.dirty_revs.len() {
                let u = self.dirty_revs[idx];
                let t = self.thread[u];
                self.rev_thread[t] = u;
            }

            // Walk the stem from u_out back to u_in, shifting pred arcs
            // (and their flows) one step down the stem.
            let mut tmp_sc = 0usize;
            let tmp_ls = self.last_succ[u_out];
            let mut u = u_out;
            let mut p = self.parent[u];
            while u != u_in {
                self.pred[u] = self.pred[p];
                self.pred_up[u] = !self.pred_up[p];
                self.flow[u] = self.flow[p];
                tmp_sc = tmp_sc + self.succ_num[u] - self.succ_num[p];
                self.succ_num[u] = tmp_sc;
                self.last_succ[p] = tmp_ls;
                u = p;
                p = self.parent[u];
            }
            self.pred[u_in] = in_arc;
            self.pred_up[u_in] = u_in == self.source(in_arc);
            self.flow[u_in] = delta;
            self.succ_num[u_in] = old_succ_num;
        }

        let up_limit_out = if self.last_succ[join] == v_in { join } else { NONE };
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
        let c = self.arc_cost(self.in_arc);
        let sigma = if self.pred_up[u_in] {
            self.pi[self.v_in] - self.pi[u_in] - c
        } else {
            self.pi[self.v_in] - self.pi[u_in] + c
        };
        let end = self.thread[self.last_succ[u_in]];
        let mut u = u_in;
        while u != end {
            self.pi[u] += sigma;
            u = self.thread[u];
        }
    }

    fn run(&mut self) -> Result<()> {
        while self.find_entering_arc() {
            self.find_join_node();
            if !self.find_leaving_arc() {
                // Unbounded; impossible with nonnegative transport costs.
                return Err(Error::Infeasible);
            }
            self.change_flow();
            self.update_tree_structure();
            self.update_potential();
        }
        Ok(())
    }
}

/// Solve a dense transportation problem exactly. Total supply and demand
/// must agree up to `balance_tol` (relative to the total); residual
/// imbalance stays on the artificial arcs and is ignored.
pub fn solve(problem: &TransportProblem<'_>, balance_tol: f64) -> Result<TransportPlan> {
    let n1 = problem.supply.len();
    let n2 = problem.demand.len();
    if n1 == 0 || n2 == 0 {
        return Err(Error::Empty("transport marginals"));
    }
    if problem.cost.len() != n1 * n2 {
        return Err(Error::Shape(alloc::format!(
            "cost has {} entries, expected {}x{}",
            problem.cost.len(),
            n1,
            n2
        )));
    }
    let total_supply: f64 = problem.supply.iter().sum();
    let total_demand: f64 = problem.demand.iter().sum();
    let scale = total_supply.abs().max(total_demand.abs()).max(f64::MIN_POSITIVE);
    if (total_supply - total_demand).abs() > balance_tol * scale {
        return Err(Error::InvalidWeights(alloc::format!(
            "supply {total_supply} and demand {total_demand} differ"
        )));
    }
    let mut solver = Solver::new(problem);
    solver.run()?;

    // Artificial arcs should carry at most rounding residue.
    let art_flow: f64 = (0..solver.node_num)
        .filter(|&u| solver.pred[u] >= solver.arc_num)
        .map(|u| solver.flow[u])
        .sum();
    if art_flow > balance_tol.max(1e-9) * scale {
        return Err(Error::Infeasible);
    }

    let mut entries = Vec::with_capacity(n1 + n2);
    for u in 0..solver.node_num {
        let e = solver.pred[u];
        if e < solver.arc_num && solver.flow[u] > 0.0 {
            entries.push((e / n2, e % n2, solver.flow[u]));
        }
    }
    entries.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
    let cost = entries.iter().map(|&(i, j, f)| f * problem.cost[i * n2 + j]).sum();
    // pi satisfies c + pi[i] - pi[n1 + j] >= 0; report u = pi[i], v = pi[n1+j]
    // so that v - u <= c.
    let potentials = solver.pi[..solver.node_num].to_vec();
    Ok(TransportPlan {
        entries,
        cost,
        potentials,
    })
}
