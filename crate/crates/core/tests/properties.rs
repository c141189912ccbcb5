use num_bigint::BigInt;
use num_rational::BigRational;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use kwd::campaign::random_pair;
use kwd::cost::SeparableCost;
use kwd::graphbuild::{build_bipartite, build_multipartite, FlowNetwork, NodeIndexer};
use kwd::histogram::{GridShape, Histogram, IntegerHistogram};
use kwd::netsimplex::{solve, verify_certificate, Status};
use kwd::oracle::{enumerate_bases, enumerate_tiny, ssp_solve, OracleError};
use kwd::transport::{
    emd_with_total, flow_cost, flows_to_plan, plan_to_flows, wasserstein, FlowChart, Method, TransportPlan,
};

fn r(v: i64) -> BigRational {
    BigRational::from_integer(BigInt::from(v))
}

fn dims_strategy() -> impl Strategy<Value = Vec<usize>> {
    prop::collection::vec(1usize..=4, 1..=3)
}

/// Random histogram pair with equal totals, zeros allowed.
fn pair_strategy(max_total: i64) -> impl Strategy<Value = (IntegerHistogram, IntegerHistogram)> {
    (dims_strategy(), any::<u64>(), 1..=max_total).prop_map(|(dims, seed, total)| {
        let shape = GridShape::new(dims).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut draw = || {
            let mut m = vec![0i64; shape.len()];
            for _ in 0..total {
                m[rng.gen_range(0..shape.len())] += 1;
            }
            IntegerHistogram::new(shape.clone(), m).unwrap()
        };
        (draw(), draw())
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn integerize_hits_target_and_keeps_zeros(
        values in prop::collection::vec(prop_oneof![Just(0.0), 0.0f64..1e6], 1..40),
        target in 1i64..100_000,
    ) {
        prop_assume!(values.iter().any(|&v| v > 0.0));
        let shape = GridShape::new(vec![values.len()]).unwrap();
        let h = Histogram::from_dense(shape, values.clone()).unwrap();
        let out = h.integerize(target).unwrap();
        prop_assert_eq!(out.mass().iter().sum::<i64>(), target);
        for (v, m) in values.iter().zip(out.mass()) {
            prop_assert!(*m >= 0);
            if *v == 0.0 {
                prop_assert_eq!(*m, 0);
            }
        }
    }

    #[test]
    fn integerize_is_exact_on_proportional_input(
        counts in prop::collection::vec(0i64..50, 1..30),
        scale in 1i64..20,
    ) {
        let total: i64 = counts.iter().sum();
        prop_assume!(total > 0);
        let shape = GridShape::new(vec![counts.len()]).unwrap();
        let h = Histogram::from_dense(shape, counts.iter().map(|&c| c as f64).collect()).unwrap();
        let out = h.integerize(total * scale).unwrap();
        let want: Vec<i64> = counts.iter().map(|c| c * scale).collect();
        prop_assert_eq!(out.mass(), &want[..]);
    }

    #[test]
    fn binning_conserves_points(
        pts in prop::collection::vec((-0.5f64..1.5, -0.5f64..1.5), 1..200),
        nx in 1usize..6,
        ny in 1usize..6,
    ) {
        let points: Vec<Vec<f64>> = pts.iter().map(|&(x, y)| vec![x, y]).collect();
        let shape = GridShape::new(vec![nx, ny]).unwrap();
        let h = Histogram::bin_points(&points, shape, &[(0.0, 1.0), (0.0, 1.0)]).unwrap();
        prop_assert_eq!(h.total(), points.len() as f64);
    }

    #[test]
    fn multipartite_layout_invariants((mu, nu) in pair_strategy(20), p in 1u32..=3) {
        let shape = mu.shape().clone();
        let cost = SeparableCost::power(&shape, p).unwrap();
        let net = build_multipartite(&mu, &nu, &cost).unwrap();
        let n = shape.len();
        let d = shape.ndim();
        prop_assert_eq!(net.node_count(), (d + 1) * n);
        prop_assert_eq!(net.arc_count(), n * shape.dims().iter().sum::<usize>());
        prop_assert_eq!(net.supply().iter().sum::<i64>(), 0);
        for e in 0..net.arc_count() {
            let (t, h, c) = net.arc(e);
            let (axis, _, b) = net.decode_multipartite_arc(e).unwrap();
            let from = NodeIndexer::new(&shape, axis).decode(t).unwrap();
            let to = NodeIndexer::new(&shape, axis + 1).decode(h).unwrap();
            for k in 0..d {
                if k != axis {
                    prop_assert_eq!(from[k], to[k]);
                }
            }
            prop_assert_eq!(to[axis], b);
            prop_assert_eq!(c, cost.axis(axis, from[axis], b));
        }
        let bnet = build_bipartite(&mu, &nu, &cost).unwrap();
        prop_assert_eq!((bnet.node_count(), bnet.arc_count()), (2 * n, n * n));
    }

    #[test]
    fn node_indexer_round_trips(dims in dims_strategy(), layer_pick in 0usize..4) {
        let shape = GridShape::new(dims).unwrap();
        let layer = layer_pick % (shape.ndim() + 1);
        let idx = NodeIndexer::new(&shape, layer);
        for flat in 0..shape.len() {
            let c = shape.coords(flat);
            let id = idx.encode(&c).unwrap();
            prop_assert_eq!(id, layer * shape.len() + flat);
            prop_assert_eq!(idx.decode(id).unwrap(), c);
        }
    }

    #[test]
    fn formulations_and_oracle_agree((mu, nu) in pair_strategy(30), p in 1u32..=3) {
        let cost = SeparableCost::power(mu.shape(), p).unwrap();
        let bnet = build_bipartite(&mu, &nu, &cost).unwrap();
        let mnet = build_multipartite(&mu, &nu, &cost).unwrap();
        let (bs, ms) = (solve(&bnet), solve(&mnet));
        prop_assert!(verify_certificate(&bnet, &bs).is_ok());
        prop_assert!(verify_certificate(&mnet, &ms).is_ok());
        prop_assert_eq!(bs.objective, ms.objective);
        prop_assert_eq!(ssp_solve(&bnet).unwrap().objective, bs.objective);
    }

    #[test]
    fn gluing_preserves_marginals_and_cost((mu, nu) in pair_strategy(25), p in 1u32..=3) {
        let cost = SeparableCost::power(mu.shape(), p).unwrap();
        let net = build_multipartite(&mu, &nu, &cost).unwrap();
        let sol = solve(&net);
        let flows = kwd::transport::flows_from_solution(&net, &sol).unwrap();
        flows.check(&mu, &nu).unwrap();
        let plan = flows_to_plan(&flows).unwrap();
        plan.check_marginals(&mu, &nu).unwrap();
        prop_assert_eq!(plan.cost(&cost).unwrap(), r(sol.objective));
        let again = plan_to_flows(&plan);
        prop_assert_eq!(flow_cost(&again, &cost).unwrap(), r(sol.objective));
        // marginalizing the glued plan gives back the solver's flows
        prop_assert_eq!(again, flows);
    }

    #[test]
    fn plan_cost_equals_flow_cost_for_any_plan(
        dims in dims_strategy(),
        entries in prop::collection::vec((any::<prop::sample::Index>(), any::<prop::sample::Index>(), 1i64..20), 1..30),
        p in 1u32..=3,
    ) {
        let shape = GridShape::new(dims).unwrap();
        let n = shape.len();
        let plan = TransportPlan::from_entries(
            shape.clone(),
            entries.iter().map(|(x, y, m)| (x.index(n), y.index(n), r(*m))),
        ).unwrap();
        let cost = SeparableCost::power(&shape, p).unwrap();
        let flows = plan_to_flows(&plan);
        prop_assert_eq!(flow_cost(&flows, &cost).unwrap(), plan.cost(&cost).unwrap());
        let back = flows_to_plan(&flows).unwrap();
        prop_assert_eq!(back.source_marginal(), plan.source_marginal());
        prop_assert_eq!(back.target_marginal(), plan.target_marginal());
        prop_assert_eq!(back.cost(&cost).unwrap(), plan.cost(&cost).unwrap());
    }
}

#[test]
fn binning_matches_nested_loop_count() {
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let points: Vec<Vec<f64>> = (0..1000).map(|_| vec![rng.gen::<f64>(), rng.gen::<f64>()]).collect();
    let shape = GridShape::new(vec![4, 4]).unwrap();
    let h = Histogram::bin_points(&points, shape, &[(0.0, 1.0), (0.0, 1.0)]).unwrap();
    assert_eq!(h.total(), 1000.0);
    for i in 0..4 {
        for j in 0..4 {
            let (x0, y0) = (i as f64 / 4.0, j as f64 / 4.0);
            let count = points
                .iter()
                .filter(|p| p[0] >= x0 && p[0] < x0 + 0.25 && p[1] >= y0 && p[1] < y0 + 0.25)
                .count();
            assert_eq!(h.mass()[i * 4 + j], count as f64, "bin ({i}, {j})");
        }
    }
}

fn random_network(rng: &mut ChaCha8Rng, n: usize, m: usize) -> Option<FlowNetwork> {
    let arcs: Vec<(usize, usize, i64)> = (0..m)
        .filter_map(|_| {
            let (t, h) = (rng.gen_range(0..n), rng.gen_range(0..n));
            (t != h).then(|| (t, h, rng.gen_range(0..20)))
        })
        .collect();
    let mut supply: Vec<i64> = (0..n).map(|_| rng.gen_range(-5..=5)).collect();
    let s: i64 = supply.iter().sum();
    supply[n - 1] -= s;
    FlowNetwork::new(n, &arcs, supply).ok()
}

#[test]
fn simplex_matches_oracles_on_random_networks() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let (mut optimal, mut infeasible) = (0, 0);
    while optimal + infeasible < 100 {
        let Some(net) = random_network(&mut rng, 8, 20) else { continue };
        let sol = solve(&net);
        match sol.status {
            Status::Optimal => {
                optimal += 1;
                verify_certificate(&net, &sol).unwrap();
                assert_eq!(ssp_solve(&net).unwrap().objective, sol.objective);
                assert_eq!(enumerate_bases(&net).unwrap().objective, sol.objective);
            }
            Status::Infeasible => {
                infeasible += 1;
                assert_eq!(ssp_solve(&net), Err(OracleError::Infeasible));
            }
        }
    }
    assert!(optimal > 20);

    // larger sparse graphs against the path-based oracle only
    for _ in 0..50 {
        let n = rng.gen_range(8..=30);
        let Some(net) = random_network(&mut rng, n, 4 * n) else { continue };
        let sol = solve(&net);
        match ssp_solve(&net) {
            Ok(o) => {
                verify_certificate(&net, &sol).unwrap();
                assert_eq!(o.objective, sol.objective);
            }
            Err(e) => {
                assert_eq!(e, OracleError::Infeasible);
                assert_eq!(sol.status, Status::Infeasible);
            }
        }
    }
}

#[test]
fn three_way_agreement_on_tiny_pairs() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for dims in [vec![4], vec![2, 2], vec![3]] {
        let shape = GridShape::new(dims).unwrap();
        let cost = SeparableCost::power(&shape, 2).unwrap();
        for _ in 0..40 {
            let total = 4;
            let mut draw = || {
                let mut m = vec![0i64; shape.len()];
                for _ in 0..total {
                    m[rng.gen_range(0..shape.len())] += 1;
                }
                IntegerHistogram::new(shape.clone(), m).unwrap()
            };
            let (mu, nu) = (draw(), draw());
            let net = build_bipartite(&mu, &nu, &cost).unwrap();
            let simplex = solve(&net).objective;
            assert_eq!(enumerate_tiny(&mu, &nu, &cost).unwrap().objective, simplex);
            assert_eq!(ssp_solve(&net).unwrap().objective, simplex);
            assert_eq!(enumerate_bases(&net).unwrap().objective, simplex);
            let mnet = build_multipartite(&mu, &nu, &cost).unwrap();
            assert_eq!(solve(&mnet).objective, simplex);
        }
    }
}

#[test]
fn random_pairs_match_across_formulations() {
    for (dims, count) in [(vec![8, 8], 50), (vec![4, 4, 4], 20)] {
        let shape = GridShape::new(dims).unwrap();
        for seed in 0..count {
            let (mu, nu) = random_pair(&shape, 1000, seed).unwrap();
            let (hm, hn) = (mu.to_histogram(), nu.to_histogram());
            let b = wasserstein(&hm, &hn, 2, Method::Bipartite, 1000).unwrap();
            let m = wasserstein(&hm, &hn, 2, Method::Multipartite, 1000).unwrap();
            assert_eq!(b.cost, m.cost, "{shape} seed {seed}");
        }
    }
}

#[test]
fn emd_equals_oracle_over_mass() {
    let shape = GridShape::new(vec![8, 8]).unwrap();
    let cost = SeparableCost::power(&shape, 2).unwrap();
    for seed in 0..5 {
        let (mu, nu) = random_pair(&shape, 1000, 300 + seed).unwrap();
        let net = build_multipartite(&mu, &nu, &cost).unwrap();
        let oracle = ssp_solve(&net).unwrap().objective as f64 / 1000.0;
        let e = emd_with_total(&mu.to_histogram(), &nu.to_histogram(), &cost, 1000).unwrap();
        assert_eq!(e, oracle);
    }
}

#[test]
fn w2_metric_sanity() {
    let shape = GridShape::new(vec![5, 5]).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let w = |a: &Histogram, b: &Histogram| wasserstein(a, b, 2, Method::Multipartite, 10_000).unwrap().distance;
    for _ in 0..15 {
        let hs: Vec<Histogram> = (0..3)
            .map(|_| {
                kwd::campaign::random_histogram(&shape, 10_000, &mut rng)
                    .unwrap()
                    .to_histogram()
            })
            .collect();
        let (a, b, c) = (&hs[0], &hs[1], &hs[2]);
        assert_eq!(w(a, a), 0.0);
        assert_eq!(w(a, b), w(b, a));
        assert!(w(a, c) <= w(a, b) + w(b, c) + 1e-12);
        assert!(w(a, b) > 0.0);
    }
}

#[test]
fn random_feasible_flows_glue_to_a_coupling() {
    let shape = GridShape::new(vec![3, 3]).unwrap();
    let cost = SeparableCost::power(&shape, 1).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for _ in 0..30 {
        // random (not optimal) plan, pushed through the flows and back
        let mut plan = TransportPlan::new(shape.clone());
        for _ in 0..12 {
            plan.add(rng.gen_range(0..9), rng.gen_range(0..9), r(rng.gen_range(1..5))).unwrap();
        }
        let flows: FlowChart = plan_to_flows(&plan);
        flows.check_connected().unwrap();
        let glued = flows_to_plan(&flows).unwrap();
        assert_eq!(glued.source_marginal(), plan.source_marginal());
        assert_eq!(glued.target_marginal(), plan.target_marginal());
        assert_eq!(glued.cost(&cost).unwrap(), flow_cost(&flows, &cost).unwrap());
    }
}
