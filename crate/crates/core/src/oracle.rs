//! Reference solvers used to cross-check the network simplex.
//!
//! None of these share code with [`crate::netsimplex`]. They are written for
//! clarity and are only practical on small to medium instances.

use std::cmp::Reverse;
use std::collections::BinaryHeap;

use thiserror::Error;

use crate::cost::SeparableCost;
use crate::graphbuild::FlowNetwork;
use crate::histogram::IntegerHistogram;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum OracleError {
    #[error("no feasible flow exists")]
    Infeasible,
    #[error("instance too large for exhaustive enumeration: {0}")]
    TooLarge(String),
    #[error("shape mismatch or unbalanced marginals")]
    InvalidInput,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OracleMethod {
    SuccessiveShortestPath,
    CouplingEnumeration,
    BasisEnumeration,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OracleSolution {
    pub objective: i64,
    pub method: OracleMethod,
}

struct ResidualArc {
    to: usize,
    rev: usize,
    cap: i64,
    cost: i64,
}

/// Min-cost flow by successive shortest augmenting paths. A super source
/// feeds every supply node and every demand node drains into a super sink;
/// Dijkstra runs on reduced costs, which node potentials keep nonnegative.
pub fn ssp_solve(net: &FlowNetwork) -> Result<OracleSolution, OracleError> {
    let n = net.node_count();
    let source = n;
    let sink = n + 1;
    let unbounded = i64::MAX / 4;
    let mut graph: Vec<Vec<ResidualArc>> = (0..n + 2).map(|_| Vec::new()).collect();
    let add = |graph: &mut Vec<Vec<ResidualArc>>, from: usize, to: usize, cap: i64, cost: i64| {
        let rf = graph[to].len();
        let rr = graph[from].len();
        graph[from].push(ResidualArc { to, rev: rf, cap, cost });
        graph[to].push(ResidualArc {
            to: from,
            rev: rr,
            cap: 0,
            cost: -cost,
        });
    };
    for e in 0..net.arc_count() {
        let (t, h, c) = net.arc(e);
        add(&mut graph, t, h, unbounded, c);
    }
    let mut required = 0i64;
    for (u, &s) in net.supply().iter().enumerate() {
        if s > 0 {
            add(&mut graph, source, u, s, 0);
            required += s;
        } else if s < 0 {
            add(&mut graph, u, sink, -s, 0);
        }
    }

    let mut potential = vec![0i64; n + 2];
    let mut sent = 0i64;
    let mut cost_total: i128 = 0;
    let mut dist = vec![i64::MAX; n + 2];
    let mut prev: Vec<(usize, usize)> = vec![(usize::MAX, usize::MAX); n + 2];
    while sent < required {
        dist.fill(i64::MAX);
        dist[source] = 0;
        let mut heap = BinaryHeap::new();
        heap.push(Reverse((0i64, source)));
        while let Some(Reverse((d, u))) = heap.pop() {
            if d > dist[u] {
                continue;
            }
            for (i, a) in graph[u].iter().enumerate() {
                if a.cap <= 0 {
                    continue;
                }
                let reduced = a.cost + potential[u] - potential[a.to];
                debug_assert!(reduced >= 0, "potentials must keep reduced costs nonnegative");
                let nd = d + reduced;
                if nd < dist[a.to] {
                    dist[a.to] = nd;
                    prev[a.to] = (u, i);
                    heap.push(Reverse((nd, a.to)));
                }
            }
        }
        if dist[sink] == i64::MAX {
            return Err(OracleError::Infeasible);
        }
        for v in 0..n + 2 {
            if dist[v] != i64::MAX {
                potential[v] += dist[v];
            }
        }
        let mut push = required - sent;
        let mut v = sink;
        while v != source {
            let (u, i) = prev[v];
            push = push.min(graph[u][i].cap);
            v = u;
        }
        let mut v = sink;
        while v != source {
            let (u, i) = prev[v];
            let rev = graph[u][i].rev;
            graph[u][i].cap -= push;
            graph[v][rev].cap += push;
            cost_total += push as i128 * graph[u][i].cost as i128;
            v = u;
        }
        sent += push;
    }
    Ok(OracleSolution {
        objective: i64::try_from(cost_total).expect("objective fits in i64"),
        method: OracleMethod::SuccessiveShortestPath,
    })
}

/// Exhaustive minimum over all integral couplings of two small histograms.
/// Limited to at most 4 bins and a total mass of at most 6.
pub fn enumerate_tiny(
    mu: &IntegerHistogram,
    nu: &IntegerHistogram,
    cost: &SeparableCost,
) -> Result<OracleSolution, OracleError> {
    let n = mu.shape().len();
    if mu.shape() != nu.shape() || !cost.matches(mu.shape()) || mu.total() != nu.total() {
        return Err(OracleError::InvalidInput);
    }
    if n > 4 || mu.total() > 6 {
        return Err(OracleError::TooLarge(format!("{n} bins, total {}", mu.total())));
    }
    let coords: Vec<Vec<usize>> = (0..n).map(|f| mu.shape().coords(f)).collect();
    let c: Vec<i64> = (0..n * n)
        .map(|k| {
            cost.ground_cost(&coords[k / n], &coords[k % n])
                .expect("coordinates come from the shape")
        })
        .collect();

    fn recurse(cell: usize, n: usize, rows: &mut [i64], cols: &mut [i64], c: &[i64], acc: i64, best: &mut i64) {
        if cell == n * n {
            if rows.iter().all(|&r| r == 0) && cols.iter().all(|&r| r == 0) {
                *best = (*best).min(acc);
            }
            return;
        }
        let (x, y) = (cell / n, cell % n);
        // the last cell of a row must take whatever the row has left
        let lo = if y == n - 1 { rows[x] } else { 0 };
        let hi = rows[x].min(cols[y]);
        for v in lo..=hi {
            rows[x] -= v;
            cols[y] -= v;
            recurse(cell + 1, n, rows, cols, c, acc + v * c[cell], best);
            rows[x] += v;
            cols[y] += v;
        }
    }

    let mut rows = mu.mass().to_vec();
    let mut cols = nu.mass().to_vec();
    let mut best = i64::MAX;
    recurse(0, n, &mut rows, &mut cols, &c, 0, &mut best);
    debug_assert!(best != i64::MAX, "balanced marginals always admit a coupling");
    Ok(OracleSolution {
        objective: best,
        method: OracleMethod::CouplingEnumeration,
    })
}

/// Minimum over every basic solution of a tiny network. Bases of an
/// uncapacitated flow problem are spanning forests with one tree per connected
/// component; each determines a unique flow, kept when it is nonnegative.
pub fn enumerate_bases(net: &FlowNetwork) -> Result<OracleSolution, OracleError> {
    let n = net.node_count();
    let m = net.arc_count();
    if n > 12 {
        return Err(OracleError::TooLarge(format!("{n} nodes")));
    }

    let mut comp: Vec<usize> = (0..n).collect();
    fn find(comp: &mut [usize], mut u: usize) -> usize {
        while comp[u] != u {
            comp[u] = comp[comp[u]];
            u = comp[u];
        }
        u
    }
    for e in 0..m {
        let (t, h, _) = net.arc(e);
        let (a, b) = (find(&mut comp, t), find(&mut comp, h));
        if a != b {
            comp[a] = b;
        }
    }
    let mut comp_supply = vec![0i64; n];
    let mut components = 0;
    for u in 0..n {
        let r = find(&mut comp, u);
        if r == u {
            components += 1;
        }
        comp_supply[r] += net.supply()[u];
    }
    if comp_supply.iter().any(|&s| s != 0) {
        return Err(OracleError::Infeasible);
    }
    let k = n - components;
    if binomial(m, k) > 5_000_000 {
        return Err(OracleError::TooLarge(format!("C({m}, {k}) bases")));
    }

    let mut best: Option<i64> = None;
    let mut chosen = Vec::with_capacity(k);
    for_each_subset(m, k, &mut chosen, &mut |subset| {
        if let Some(cost) = tree_solution_cost(net, subset) {
            best = Some(best.map_or(cost, |b| b.min(cost)));
        }
    });
    best.map(|objective| OracleSolution {
        objective,
        method: OracleMethod::BasisEnumeration,
    })
    .ok_or(OracleError::Infeasible)
}

fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    (0..k as u128).fold(1u128, |acc, i| acc * (n as u128 - i) / (i + 1))
}

fn for_each_subset(m: usize, k: usize, chosen: &mut Vec<usize>, f: &mut impl FnMut(&[usize])) {
    if chosen.len() == k {
        f(chosen);
        return;
    }
    let start = chosen.last().map_or(0, |&l| l + 1);
    let need = k - chosen.len();
    for e in start..=(m.saturating_sub(need)) {
        if e >= m {
            break;
        }
        chosen.push(e);
        for_each_subset(m, k, chosen, f);
        chosen.pop();
    }
}

/// Flow cost of the basis `arcs` if it is a forest and its flow is
/// nonnegative.
fn tree_solution_cost(net: &FlowNetwork, arcs: &[usize]) -> Option<i64> {
    let n = net.node_count();
    let mut degree = vec![0usize; n];
    let mut incident: Vec<Vec<usize>> = vec![Vec::new(); n];
    for &e in arcs {
        let (t, h, _) = net.arc(e);
        degree[t] += 1;
        degree[h] += 1;
        incident[t].push(e);
        incident[h].push(e);
    }
    let mut residual: Vec<i64> = net.supply().to_vec();
    let mut removed = vec![false; net.arc_count()];
    let mut stack: Vec<usize> = (0..n).filter(|&u| degree[u] == 1).collect();
    let mut processed = 0;
    let mut cost = 0i64;
    while let Some(u) = stack.pop() {
        if degree[u] != 1 {
            continue;
        }
        let e = *incident[u].iter().find(|&&e| !removed[e])?;
        let (t, h, c) = net.arc(e);
        let (other, flow) = if t == u { (h, residual[u]) } else { (t, -residual[u]) };
        if flow < 0 {
            return None;
        }
        cost += flow * c;
        residual[other] += residual[u];
        residual[u] = 0;
        removed[e] = true;
        processed += 1;
        degree[u] -= 1;
        degree[other] -= 1;
        if degree[other] == 1 {
            stack.push(other);
        }
    }
    // a cycle leaves arcs that never become leaves
    (processed == arcs.len() && residual.iter().all(|&r| r == 0)).then_some(cost)
}
