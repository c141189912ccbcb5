//! Acceptance checks. Each criterion prints one PASS/FAIL line; the process
//! exits non-zero if any fails.

use std::process::ExitCode;
use std::time::Instant;

use num_bigint::BigInt;
use num_rational::BigRational;

use kwd::campaign::{bench, random_pair, BenchConfig, BenchOutcome};
use kwd::cost::SeparableCost;
use kwd::graphbuild::{bipartite_size, build_bipartite, build_multipartite, multipartite_size, FlowNetwork};
use kwd::histogram::{GridShape, IntegerHistogram, DEFAULT_TARGET_TOTAL};
use kwd::netsimplex::{solve, verify_certificate, FlowSolution};
use kwd::oracle::ssp_solve;
use kwd::sinkhorn::{gap, improved_sinkhorn_2d, CostNormalization, SinkhornConfig, SinkhornSolver};
use kwd::transport::{flow_cost, flows_from_solution, flows_to_plan, plan_to_flows, Method};

/// Tolerances and sample sizes.
const EXACT_PAIRS_MIN: usize = 200;
const EXACT_SUITE_SECONDS: f64 = 60.0;
const GLUING_MIN: usize = 100;
const SINKHORN_PAIRS: usize = 30;
const SINKHORN_MONOTONE_MIN: usize = 28;
const SCALING_REL_TOL: f64 = 1e-9;
const PERF_PAIRS: usize = 10;
const PERF_TIME_RATIO: f64 = 0.5;
const PERF_MEMORY_RATIO: f64 = 1.0 / 8.0;
const ARC_BUDGET: u128 = 1 << 27;

struct Report {
    failures: usize,
    certificates: usize,
    certificate_failures: Vec<String>,
}

impl Report {
    fn line(&mut self, id: usize, name: &str, ok: bool, detail: String) {
        if !ok {
            self.failures += 1;
        }
        println!("[{}] criterion {id} {name}: {detail}", if ok { "PASS" } else { "FAIL" });
    }

    /// Solves and records the optimality certificate of the result.
    fn solve(&mut self, net: &FlowNetwork, label: &str) -> FlowSolution {
        let sol = solve(net);
        self.certificates += 1;
        if let Err(e) = verify_certificate(net, &sol) {
            self.certificate_failures.push(format!("{label}: {e:?}"));
        }
        sol
    }
}

fn r(v: i64) -> BigRational {
    BigRational::from_integer(BigInt::from(v))
}

fn exactness(rep: &mut Report) {
    let grids = [(2, 4), (2, 8), (2, 16), (3, 4), (3, 8), (4, 4)];
    let per_cell = 12;
    let started = Instant::now();
    let (mut checked, mut mismatches) = (0, Vec::new());
    for (gi, &(d, side)) in grids.iter().enumerate() {
        let shape = GridShape::cubic(side, d).unwrap();
        for p in 1..=3u32 {
            let cost = SeparableCost::power(&shape, p).unwrap();
            for i in 0..per_cell {
                let seed = 1_000 * gi as u64 + 100 * p as u64 + i as u64;
                let (mu, nu) = random_pair(&shape, 1000, seed).unwrap();
                let mnet = build_multipartite(&mu, &nu, &cost).unwrap();
                let bnet = build_bipartite(&mu, &nu, &cost).unwrap();
                let label = format!("d={d} N={side} p={p} seed={seed}");
                let m = rep.solve(&mnet, &label).objective;
                let b = rep.solve(&bnet, &label).objective;
                // the oracle runs on the smaller network once the bipartite one gets large
                let oracle_net = if shape.len() <= 64 { &bnet } else { &mnet };
                let o = ssp_solve(oracle_net).unwrap().objective;
                checked += 1;
                if !(m == b && b == o) {
                    mismatches.push(format!("{label}: multipartite {m}, bipartite {b}, ssp {o}"));
                }
            }
        }
    }
    let secs = started.elapsed().as_secs_f64();
    let ok = checked >= EXACT_PAIRS_MIN && mismatches.is_empty() && secs < EXACT_SUITE_SECONDS;
    rep.line(
        1,
        "multipartite = bipartite = ssp",
        ok,
        format!(
            "{checked} pairs, {} mismatches, {secs:.1}s (limit {EXACT_SUITE_SECONDS}s){}",
            mismatches.len(),
            mismatches.first().map(|m| format!("; first: {m}")).unwrap_or_default()
        ),
    );
}

fn graph_sizes(rep: &mut Report) {
    let uniform = |side: usize, d: usize| {
        let shape = GridShape::cubic(side, d).unwrap();
        IntegerHistogram::new(shape.clone(), vec![1; shape.len()]).unwrap()
    };
    let mut problems = Vec::new();
    let mut check = |what: &str, got: (u128, u128), want: (u128, u128)| {
        if got != want {
            problems.push(format!("{what}: got {got:?}, want {want:?}"));
        }
    };
    for (side, d, bip, multi) in [
        (16, 2, Some((512, 65_536)), (768, 8_192)),
        (16, 3, Some((8_192, 16_777_216)), (16_384, 196_608)),
        (16, 4, None, (327_680, 4_194_304)),
        // the bipartite node count 8193 printed for this size is 2 * 4096
        (64, 2, Some((8_192, 16_777_216)), (12_288, 524_288)),
    ] {
        let h = uniform(side, d);
        let cost = SeparableCost::power(h.shape(), 2).unwrap();
        let net = build_multipartite(&h, &h, &cost).unwrap();
        let label = format!("N={side} d={d}");
        check(&format!("{label} multipartite built"), (net.node_count() as u128, net.arc_count() as u128), multi);
        check(&format!("{label} multipartite formula"), multipartite_size(h.shape()), multi);
        drop(net);
        if let Some(bip) = bip {
            check(&format!("{label} bipartite formula"), bipartite_size(h.shape()), bip);
            if side == 16 {
                let net = build_bipartite(&h, &h, &cost).unwrap();
                check(&format!("{label} bipartite built"), (net.node_count() as u128, net.arc_count() as u128), bip);
            }
        }
    }
    rep.line(
        2,
        "graph sizes",
        problems.is_empty(),
        if problems.is_empty() {
            "all table sizes reproduced".into()
        } else {
            problems.join("; ")
        },
    );
}

fn gluing(rep: &mut Report) {
    let grids = [(1, 12), (2, 4), (2, 8), (3, 4), (4, 3)];
    let per_cell = 8;
    let (mut checked, mut problems) = (0, Vec::new());
    for (gi, &(d, side)) in grids.iter().enumerate() {
        let shape = GridShape::cubic(side, d).unwrap();
        for p in 1..=3u32 {
            let cost = SeparableCost::power(&shape, p).unwrap();
            for i in 0..per_cell {
                let seed = 50_000 + 1_000 * gi as u64 + 100 * p as u64 + i as u64;
                let (mu, nu) = random_pair(&shape, 997, seed).unwrap();
                let net = build_multipartite(&mu, &nu, &cost).unwrap();
                let label = format!("d={d} N={side} p={p} seed={seed}");
                let sol = rep.solve(&net, &label);
                let flows = flows_from_solution(&net, &sol).unwrap();
                let plan = flows_to_plan(&flows).unwrap();
                let objective = r(sol.objective);
                checked += 1;
                if let Err(e) = plan.check_marginals(&mu, &nu) {
                    problems.push(format!("{label}: {e}"));
                }
                if plan.cost(&cost).unwrap() != objective {
                    problems.push(format!("{label}: plan cost differs from objective"));
                }
                if flow_cost(&plan_to_flows(&plan), &cost).unwrap() != objective {
                    problems.push(format!("{label}: round trip changed flow cost"));
                }
            }
        }
    }
    rep.line(
        3,
        "gluing reconstruction",
        checked >= GLUING_MIN && problems.is_empty(),
        format!(
            "{checked} optimal solutions, {} problems{}",
            problems.len(),
            problems.first().map(|m| format!("; first: {m}")).unwrap_or_default()
        ),
    );
}

fn sinkhorn_gaps(rep: &mut Report) {
    let shape = GridShape::cubic(32, 2).unwrap();
    let cost = SeparableCost::power(&shape, 2).unwrap();
    let total = 1_000_000;
    let cfg = |lambda| SinkhornConfig {
        lambda,
        ..SinkhornConfig::default()
    };
    let raw = |lambda| SinkhornConfig {
        lambda,
        cost_normalization: CostNormalization::None,
        ..SinkhornConfig::default()
    };
    let (mut bound_violations, mut monotone, mut gaps, mut raw_gaps) = (Vec::new(), 0, Vec::new(), Vec::new());
    for i in 0..SINKHORN_PAIRS {
        let (mu, nu) = random_pair(&shape, total, 70_000 + i as u64).unwrap();
        let net = build_multipartite(&mu, &nu, &cost).unwrap();
        let sol = rep.solve(&net, &format!("sinkhorn pair {i}"));
        let opt = sol.objective as f64 / total as f64;
        let (hm, hn) = (mu.to_histogram(), nu.to_histogram());
        let ub1 = improved_sinkhorn_2d(&hm, &hn, &cost, &cfg(1.0)).unwrap().upper_bound;
        let ub15 = improved_sinkhorn_2d(&hm, &hn, &cost, &cfg(1.5)).unwrap().upper_bound;
        for (lambda, ub) in [(1.0, ub1), (1.5, ub15)] {
            if ub < opt {
                bound_violations.push(format!("pair {i} lambda {lambda}: {ub} < {opt}"));
            }
        }
        let (g1, g15) = (gap(opt, ub1).unwrap(), gap(opt, ub15).unwrap());
        if g15 <= g1 {
            monotone += 1;
        }
        gaps.push((g1, g15));
        let raw1 = improved_sinkhorn_2d(&hm, &hn, &cost, &raw(1.0)).unwrap().upper_bound;
        let raw15 = improved_sinkhorn_2d(&hm, &hn, &cost, &raw(1.5)).unwrap().upper_bound;
        raw_gaps.push((gap(opt, raw1).unwrap(), gap(opt, raw15).unwrap()));
    }
    let mean = |v: &[(f64, f64)], f: fn(&(f64, f64)) -> f64| v.iter().map(f).sum::<f64>() / v.len() as f64;
    rep.line(
        4,
        "(a) sinkhorn upper bound",
        bound_violations.is_empty(),
        format!(
            "{} of {SINKHORN_PAIRS} bounds below the optimum{}",
            bound_violations.len(),
            bound_violations.first().map(|m| format!("; first: {m}")).unwrap_or_default()
        ),
    );
    rep.line(
        4,
        "(b) gap shrinks with lambda",
        monotone >= SINKHORN_MONOTONE_MIN,
        format!(
            "{monotone}/{SINKHORN_PAIRS} with gap(1.5) <= gap(1) (need {SINKHORN_MONOTONE_MIN}); \
             mean gap {:.2}% at 1, {:.2}% at 1.5 (median-normalized cost), {:.2}% / {:.2}% unnormalized",
            mean(&gaps, |g| g.0),
            mean(&gaps, |g| g.1),
            mean(&raw_gaps, |g| g.0),
            mean(&raw_gaps, |g| g.1)
        ),
    );

    let shape = GridShape::cubic(16, 2).unwrap();
    let cost = SeparableCost::power(&shape, 2).unwrap();
    let (mut worst, mut steps) = (0.0f64, 0);
    for i in 0..10 {
        let (mu, nu) = random_pair(&shape, total, 80_000 + i).unwrap();
        let (hm, hn) = (mu.to_histogram(), nu.to_histogram());
        for lambda in [1.0, 1.5] {
            let c = cfg(lambda);
            let mut dense = SinkhornSolver::dense(&hm, &hn, &cost, &c).unwrap();
            let mut kron = SinkhornSolver::kronecker(&hm, &hn, &cost, &c).unwrap();
            for _ in 0..200 {
                let e = dense.step().unwrap();
                kron.step().unwrap();
                steps += 1;
                for (x, y) in dense.u().iter().chain(dense.v()).zip(kron.u().iter().chain(kron.v())) {
                    let scale = x.abs().max(y.abs());
                    if scale > 0.0 {
                        worst = worst.max((x - y).abs() / scale);
                    }
                }
                if e < c.marginal_tol {
                    break;
                }
            }
        }
    }
    rep.line(
        4,
        "(c) factored kernel matches dense",
        worst <= SCALING_REL_TOL,
        format!("{steps} lockstep iterations, worst relative difference {worst:.2e} (limit {SCALING_REL_TOL:e})"),
    );
}

fn performance(rep: &mut Report) {
    let shape = GridShape::cubic(64, 2).unwrap();
    let cost = SeparableCost::power(&shape, 2).unwrap();
    let (mut t_multi, mut t_bip, mut mismatches) = (0.0, 0.0, 0);
    let (mut arcs_multi, mut arcs_bip) = (0usize, 0usize);
    for i in 0..PERF_PAIRS {
        let (mu, nu) = random_pair(&shape, DEFAULT_TARGET_TOTAL, 90_000 + i as u64).unwrap();
        let label = format!("64x64 pair {i}");

        let start = Instant::now();
        let net = build_multipartite(&mu, &nu, &cost).unwrap();
        let m = rep.solve(&net, &label);
        t_multi += start.elapsed().as_secs_f64();
        arcs_multi = arcs_multi.max(net.arc_count());
        drop(net);

        let start = Instant::now();
        let net = build_bipartite(&mu, &nu, &cost).unwrap();
        let b = rep.solve(&net, &label);
        t_bip += start.elapsed().as_secs_f64();
        arcs_bip = arcs_bip.max(net.arc_count());

        if m.objective != b.objective {
            mismatches += 1;
        }
    }
    let time_ratio = t_multi / t_bip;
    let mem_ratio = arcs_multi as f64 / arcs_bip as f64;
    rep.line(
        5,
        "64x64 speed and memory",
        time_ratio <= PERF_TIME_RATIO && mem_ratio <= PERF_MEMORY_RATIO && mismatches == 0,
        format!(
            "multipartite {t_multi:.2}s vs bipartite {t_bip:.2}s over {PERF_PAIRS} pairs (ratio {time_ratio:.3}, limit {PERF_TIME_RATIO}); arc ratio {mem_ratio:.4} (limit {PERF_MEMORY_RATIO}); {mismatches} objective mismatches"
        ),
    );
}

fn oom_row(rep: &mut Report) {
    let rows = bench(&BenchConfig {
        sizes: vec![16],
        dims: vec![4],
        methods: vec![Method::Bipartite, Method::Multipartite],
        instances: 1,
        arc_budget: ARC_BUDGET,
        ..BenchConfig::default()
    })
    .unwrap();
    let status = |m: Method| {
        rows.iter()
            .find(|r| r.method == m)
            .map(|r| (r.status().to_string(), r.arcs, r.outcome.clone()))
            .unwrap()
    };
    let (bs, barcs, _) = status(Method::Bipartite);
    let (ms, marcs, mo) = status(Method::Multipartite);
    let secs = match mo {
        BenchOutcome::Timed { seconds, .. } => seconds[0],
        _ => f64::NAN,
    };
    rep.line(
        7,
        "memory guard",
        bs == "oom" && ms == "ok",
        format!("bipartite {barcs} arcs -> {bs}; 5-partite {marcs} arcs -> {ms} in {secs:.2}s"),
    );
}

fn main() -> ExitCode {
    let mut rep = Report {
        failures: 0,
        certificates: 0,
        certificate_failures: Vec::new(),
    };
    exactness(&mut rep);
    graph_sizes(&mut rep);
    gluing(&mut rep);
    sinkhorn_gaps(&mut rep);
    performance(&mut rep);
    let (count, failed) = (rep.certificates, rep.certificate_failures.clone());
    rep.line(
        6,
        "optimality certificates",
        failed.is_empty() && count > 0,
        format!(
            "{count} solves checked, {} failures{}",
            failed.len(),
            failed.first().map(|m| format!("; first: {m}")).unwrap_or_default()
        ),
    );
    oom_row(&mut rep);
    if rep.failures == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{} criteria failed", rep.failures);
        ExitCode::FAILURE
    }
}
