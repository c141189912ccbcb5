//! Primal network simplex for uncapacitated min-cost flow.
//!
//! The basis is a spanning tree rooted at an artificial node. Each real node
//! starts attached to the root by an artificial arc: sources through a
//! zero-cost arc towards the root, sinks through an arc from the root with a
//! big-M cost. Artificial arcs are never priced, so once one leaves the basis
//! it is gone for good; a positive flow on an artificial arc at termination
//! certifies infeasibility.
//!
//! The tree is stored with parent pointers, a preorder thread (with reverse
//! links), subtree sizes and last-successor links. Because arcs are
//! uncapacitated, every non-tree arc sits at zero flow, so the only flows the
//! solver tracks are those of the tree arcs, one per node.
//!
//! Leaving-arc ties are broken so the basis stays strongly feasible: on the
//! side of the entering arc's tail the first blocking arc wins, on the head
//! side the last one does. This rules out cycling without perturbation.

use std::time::{Duration, Instant};

use crate::graphbuild::FlowNetwork;

const NONE: u32 = u32::MAX;
const INF: i64 = i64::MAX;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Optimal,
    Infeasible,
}

#[derive(Debug, Clone, Default)]
pub struct SolverOptions {
    /// Arcs scanned per pricing block; defaults to `ceil(sqrt(|A|))`.
    pub block_size: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct SolveStats {
    pub pivots: u64,
    pub block_size: usize,
    pub elapsed: Duration,
}

#[derive(Debug, Clone)]
pub struct FlowSolution {
    pub status: Status,
    /// `sum_e cost(e) * flow(e)` over real arcs.
    pub objective: i64,
    pub flow: Vec<i64>,
    /// Node potentials with `potential(head) - potential(tail) <= cost` on
    /// every arc and equality on arcs carrying flow (when optimal).
    pub potential: Vec<i64>,
    pub stats: SolveStats,
}

impl FlowSolution {
    pub fn is_optimal(&self) -> bool {
        self.status == Status::Optimal
    }
}

/// Block-search pricing over arcs `0..arc_count`, starting at `start` and
/// wrapping around. Blocks of `block_size` consecutive arcs are scanned; the
/// most negative reduced cost seen so far is returned at the end of the first
/// block that contains one. Returns the chosen arc and the position where the
/// next search should start, or `None` when no arc has a negative reduced
/// cost.
pub fn block_search(
    arc_count: usize,
    start: usize,
    block_size: usize,
    mut reduced_cost: impl FnMut(usize) -> i64,
) -> Option<(usize, usize)> {
    if arc_count == 0 {
        return None;
    }
    let block_size = block_size.max(1);
    let start = start % arc_count;
    let mut best = 0i64;
    let mut best_arc = 0usize;
    let mut left = block_size;
    for e in (start..arc_count).chain(0..start) {
        let c = reduced_cost(e);
        if c < best {
            best = c;
            best_arc = e;
        }
        left -= 1;
        if left == 0 {
            if best < 0 {
                return Some((best_arc, (e + 1) % arc_count));
            }
            left = block_size;
        }
    }
    (best < 0).then_some((best_arc, start))
}

/// Default pricing block size, `ceil(sqrt(arc_count))`.
pub fn default_block_size(arc_count: usize) -> usize {
    let mut b = (arc_count as f64).sqrt().ceil() as usize;
    while b * b < arc_count {
        b += 1;
    }
    while b > 1 && (b - 1) * (b - 1) >= arc_count {
        b -= 1;
    }
    b.max(1)
}

pub fn solve(net: &FlowNetwork) -> FlowSolution {
    solve_with(net, &SolverOptions::default())
}

pub fn solve_with(net: &FlowNetwork, options: &SolverOptions) -> FlowSolution {
    let started = Instant::now();
    let block_size = options
        .block_size
        .unwrap_or_else(|| default_block_size(net.arc_count()))
        .max(1);
    let mut tree = SpanningTree::new(net);
    let pivots = tree.run(block_size);
    let mut solution = tree.into_solution(net);
    solution.stats = SolveStats {
        pivots,
        block_size,
        elapsed: started.elapsed(),
    };
    solution
}

struct SpanningTree<'a> {
    net: &'a FlowNetwork,
    root: u32,
    parent: Vec<u32>,
    /// Tree arc linking a node to its parent; ids `>= |A|` are artificial.
    pred: Vec<u32>,
    /// `true` when the tree arc points from the node up to its parent.
    pred_up: Vec<bool>,
    pred_flow: Vec<i64>,
    thread: Vec<u32>,
    rev_thread: Vec<u32>,
    succ_num: Vec<u32>,
    last_succ: Vec<u32>,
    potential: Vec<i64>,
    dirty_revs: Vec<u32>,
}

struct Pivot {
    arc: usize,
    tail: u32,
    head: u32,
    join: u32,
    u_in: u32,
    v_in: u32,
    u_out: u32,
    delta: i64,
}

impl<'a> SpanningTree<'a> {
    fn new(net: &'a FlowNetwork) -> Self {
        let n = net.node_count();
        let m = net.arc_count();
        let root = n as u32;
        let big_m = net
            .max_cost()
            .saturating_add(1)
            .saturating_mul((n as i64).max(1));

        let mut t = Self {
            net,
            root,
            parent: vec![root; n + 1],
            pred: vec![NONE; n + 1],
            pred_up: vec![true; n + 1],
            pred_flow: vec![0; n + 1],
            thread: vec![0; n + 1],
            rev_thread: vec![0; n + 1],
            succ_num: vec![1; n + 1],
            last_succ: (0..=n as u32).collect(),
            potential: vec![0; n + 1],
            dirty_revs: Vec::new(),
        };
        t.parent[n] = NONE;
        t.succ_num[n] = n as u32 + 1;
        t.last_succ[n] = if n > 0 { n as u32 - 1 } else { root };
        for u in 0..=n {
            t.thread[u] = ((u + 1) % (n + 1)) as u32;
            t.rev_thread[(u + 1) % (n + 1)] = u as u32;
        }
        for (u, &s) in net.supply().iter().enumerate() {
            t.pred[u] = (m + u) as u32;
            if s >= 0 {
                t.pred_up[u] = true;
                t.pred_flow[u] = s;
                t.potential[u] = 0;
            } else {
                t.pred_up[u] = false;
                t.pred_flow[u] = -s;
                t.potential[u] = big_m;
            }
        }
        t
    }

    fn run(&mut self, block_size: usize) -> u64 {
        let m = self.net.arc_count();
        let costs = self.net.costs();
        let tails = self.net.tails();
        let heads = self.net.heads();
        let mut next_start = 0usize;
        let mut pivots = 0u64;
        loop {
            let pot = &self.potential;
            let found = block_search(m, next_start, block_size, |e| {
                costs[e] + pot[tails[e] as usize] - pot[heads[e] as usize]
            });
            let Some((arc, next)) = found else { break };
            next_start = next;
            self.pivot(arc);
            pivots += 1;
        }
        pivots
    }

    fn pivot(&mut self, arc: usize) {
        let tail = self.net.tails()[arc];
        let head = self.net.heads()[arc];
        let join = self.find_join(tail, head);

        // flow travels join -> .. -> tail -> head -> .. -> join
        let mut delta = INF;
        let mut u_out = NONE;
        let mut head_side = false;
        let mut u = tail;
        while u != join {
            if self.pred_up[u as usize] && self.pred_flow[u as usize] < delta {
                delta = self.pred_flow[u as usize];
                u_out = u;
            }
            u = self.parent[u as usize];
        }
        let mut u = head;
        while u != join {
            if !self.pred_up[u as usize] && self.pred_flow[u as usize] <= delta {
                delta = self.pred_flow[u as usize];
                u_out = u;
                head_side = true;
            }
            u = self.parent[u as usize];
        }
        assert!(
            u_out != NONE,
            "unbounded cycle cannot occur with nonnegative arc costs"
        );
        let (u_in, v_in) = if head_side { (head, tail) } else { (tail, head) };

        if delta > 0 {
            let mut u = tail;
            while u != join {
                let f = &mut self.pred_flow[u as usize];
                if self.pred_up[u as usize] {
                    *f -= delta;
                } else {
                    *f += delta;
                }
                u = self.parent[u as usize];
            }
            let mut u = head;
            while u != join {
                let f = &mut self.pred_flow[u as usize];
                if self.pred_up[u as usize] {
                    *f += delta;
                } else {
                    *f -= delta;
                }
                u = self.parent[u as usize];
            }
        }

        let p = Pivot {
            arc,
            tail,
            head,
            join,
            u_in,
            v_in,
            u_out,
            delta,
        };
        self.update_tree(&p);
        self.update_potential(&p);
    }

    fn find_join(&self, mut u: u32, mut v: u32) -> u32 {
        while u != v {
            if self.succ_num[u as usize] < self.succ_num[v as usize] {
                u = self.parent[u as usize];
            } else {
                v = self.parent[v as usize];
            }
        }
        u
    }

    fn update_tree(&mut self, p: &Pivot) {
        let &Pivot {
            arc,
            tail,
            join,
            u_in,
            v_in,
            u_out,
            delta,
            ..
        } = p;
        let ix = |u: u32| u as usize;

        let old_rev_thread = self.rev_thread[ix(u_out)];
        let old_succ_num = self.succ_num[ix(u_out)];
        let old_last_succ = self.last_succ[ix(u_out)];
        let v_out = self.parent[ix(u_out)];

        if u_in == u_out {
            self.parent[ix(u_in)] = v_in;
            self.pred[ix(u_in)] = arc as u32;
            self.pred_up[ix(u_in)] = u_in == tail;
            self.pred_flow[ix(u_in)] = delta;

            if self.thread[ix(v_in)] != u_out {
                // move the subtree of u_out right after v_in in the thread
                let after = self.thread[ix(old_last_succ)];
                self.thread[ix(old_rev_thread)] = after;
                self.rev_thread[ix(after)] = old_rev_thread;
                let after = self.thread[ix(v_in)];
                self.thread[ix(v_in)] = u_out;
                self.rev_thread[ix(u_out)] = v_in;
                self.thread[ix(old_last_succ)] = after;
                self.rev_thread[ix(after)] = old_last_succ;
            }
        } else {
            let thread_continue = if old_rev_thread == v_in {
                self.thread[ix(old_last_succ)]
            } else {
                self.thread[ix(v_in)]
            };

            // re-hang the stem u_in .. u_out below v_in, reversing parents
            let mut stem = u_in;
            let mut par_stem = v_in;
            let mut last = self.last_succ[ix(u_in)];
            let mut after = self.thread[ix(last)];
            self.thread[ix(v_in)] = u_in;
            self.dirty_revs.clear();
            self.dirty_revs.push(v_in);
            while stem != u_out {
                let next_stem = self.parent[ix(stem)];
                self.thread[ix(last)] = next_stem;
                self.dirty_revs.push(last);

                let before = self.rev_thread[ix(stem)];
                self.thread[ix(before)] = after;
                self.rev_thread[ix(after)] = before;

                self.parent[ix(stem)] = par_stem;
                par_stem = stem;
                stem = next_stem;

                last = if self.last_succ[ix(stem)] == self.last_succ[ix(par_stem)] {
                    self.rev_thread[ix(par_stem)]
                } else {
                    self.last_succ[ix(stem)]
                };
                after = self.thread[ix(last)];
            }
            self.parent[ix(u_out)] = par_stem;
            self.thread[ix(last)] = thread_continue;
            self.rev_thread[ix(thread_continue)] = last;
            self.last_succ[ix(u_out)] = last;

            if old_rev_thread != v_in {
                self.thread[ix(old_rev_thread)] = after;
                self.rev_thread[ix(after)] = old_rev_thread;
            }
            for i in 0..self.dirty_revs.len() {
                let u = self.dirty_revs[i];
                let t = self.thread[ix(u)];
                self.rev_thread[ix(t)] = u;
            }

            // shift tree arcs, flows and subtree data down the reversed stem
            let mut tmp_sc = 0u32;
            let tmp_ls = self.last_succ[ix(u_out)];
            let mut u = u_out;
            let mut par = self.parent[ix(u)];
            while u != u_in {
                self.pred[ix(u)] = self.pred[ix(par)];
                self.pred_up[ix(u)] = !self.pred_up[ix(par)];
                self.pred_flow[ix(u)] = self.pred_flow[ix(par)];
                tmp_sc += self.succ_num[ix(u)] - self.succ_num[ix(par)];
                self.succ_num[ix(u)] = tmp_sc;
                self.last_succ[ix(par)] = tmp_ls;
                u = par;
                par = self.parent[ix(u)];
            }
            self.pred[ix(u_in)] = arc as u32;
            self.pred_up[ix(u_in)] = u_in == tail;
            self.pred_flow[ix(u_in)] = delta;
            self.succ_num[ix(u_in)] = old_succ_num;
        }

        let up_limit_out = if self.last_succ[ix(join)] == v_in { join } else { NONE };
        let last_succ_out = self.last_succ[ix(u_out)];
        let mut u = v_in;
        while u != NONE && self.last_succ[ix(u)] == v_in {
            self.last_succ[ix(u)] = last_succ_out;
            u = self.parent[ix(u)];
        }

        if join != old_rev_thread && v_in != old_rev_thread {
            let mut u = v_out;
            while u != up_limit_out && self.last_succ[ix(u)] == old_last_succ {
                self.last_succ[ix(u)] = old_rev_thread;
                u = self.parent[ix(u)];
            }
        } else if last_succ_out != old_last_succ {
            let mut u = v_out;
            while u != up_limit_out && self.last_succ[ix(u)] == old_last_succ {
                self.last_succ[ix(u)] = last_succ_out;
                u = self.parent[ix(u)];
            }
        }

        let mut u = v_in;
        while u != join {
            self.succ_num[ix(u)] += old_succ_num;
            u = self.parent[ix(u)];
        }
        let mut u = v_out;
        while u != join {
            self.succ_num[ix(u)] -= old_succ_num;
            u = self.parent[ix(u)];
        }
    }

    /// Restores zero reduced cost on the entering arc by shifting either the
    /// re-hung subtree or its complement, whichever is smaller.
    fn update_potential(&mut self, p: &Pivot) {
        let cost = self.net.costs()[p.arc];
        let (u_in, v_in) = (p.u_in as usize, p.v_in as usize);
        let target = if p.u_in == p.tail {
            self.potential[v_in] - cost
        } else {
            debug_assert_eq!(p.u_in, p.head);
            self.potential[v_in] + cost
        };
        let sigma = target - self.potential[u_in];
        if sigma == 0 {
            return;
        }
        let subtree = self.succ_num[u_in] as usize;
        let end = self.thread[self.last_succ[u_in] as usize];
        if 2 * subtree <= self.parent.len() {
            let mut u = p.u_in;
            while u != end {
                self.potential[u as usize] += sigma;
                u = self.thread[u as usize];
            }
        } else {
            let mut u = end;
            while u != p.u_in {
                self.potential[u as usize] -= sigma;
                u = self.thread[u as usize];
            }
            let drift = self.potential[self.root as usize];
            if drift.unsigned_abs() > (1u64 << 60) {
                for pot in &mut self.potential {
                    *pot -= drift;
                }
            }
        }
    }

    fn into_solution(self, net: &FlowNetwork) -> FlowSolution {
        let n = net.node_count();
        let m = net.arc_count();
        let mut flow = vec![0i64; m];
        let mut infeasible = false;
        for u in 0..n {
            let e = self.pred[u] as usize;
            if e < m {
                flow[e] = self.pred_flow[u];
            } else if self.pred_flow[u] > 0 {
                infeasible = true;
            }
        }
        let objective: i128 = flow
            .iter()
            .zip(net.costs())
            .filter(|(&f, _)| f != 0)
            .map(|(&f, &c)| f as i128 * c as i128)
            .sum();
        let root_pot = self.potential[self.root as usize];
        let potential = self.potential[..n].iter().map(|&p| p - root_pot).collect();
        FlowSolution {
            status: if infeasible { Status::Infeasible } else { Status::Optimal },
            objective: i64::try_from(objective).expect("objective fits in i64 by the builder guard"),
            flow,
            potential,
            stats: SolveStats::default(),
        }
    }
}

/// Ways an optimal-flow certificate can fail.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CertificateError {
    NegativeFlow { arc: usize },
    Conservation { node: usize, imbalance: i64 },
    NegativeReducedCost { arc: usize, reduced_cost: i64 },
    ComplementarySlackness { arc: usize, reduced_cost: i64 },
    ObjectiveMismatch { reported: i64, recomputed: i64 },
    NotOptimal,
}

/// Checks primal feasibility, dual feasibility and complementary slackness of
/// a solution, which together prove optimality.
pub fn verify_certificate(net: &FlowNetwork, sol: &FlowSolution) -> Result<(), CertificateError> {
    if sol.status != Status::Optimal {
        return Err(CertificateError::NotOptimal);
    }
    let mut balance: Vec<i64> = net.supply().to_vec();
    let mut objective: i128 = 0;
    for e in 0..net.arc_count() {
        let (t, h, c) = net.arc(e);
        let f = sol.flow[e];
        if f < 0 {
            return Err(CertificateError::NegativeFlow { arc: e });
        }
        balance[t] -= f;
        balance[h] += f;
        objective += f as i128 * c as i128;
        let rc = c + sol.potential[t] - sol.potential[h];
        if rc < 0 {
            return Err(CertificateError::NegativeReducedCost { arc: e, reduced_cost: rc });
        }
        if f > 0 && rc != 0 {
            return Err(CertificateError::ComplementarySlackness { arc: e, reduced_cost: rc });
        }
    }
    if let Some((node, &imbalance)) = balance.iter().enumerate().find(|(_, &b)| b != 0) {
        return Err(CertificateError::Conservation { node, imbalance });
    }
    if objective != sol.objective as i128 {
        return Err(CertificateError::ObjectiveMismatch {
            reported: sol.objective,
            recomputed: objective as i64,
        });
    }
    Ok(())
}
