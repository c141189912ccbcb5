//! `kwd verify`: agreement between the network simplex and the reference
//! solvers on random instances.

use anyhow::Result;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use kwd::campaign::random_pair;
use kwd::cost::SeparableCost;
use kwd::graphbuild::{build_bipartite, build_multipartite, FlowNetwork};
use kwd::histogram::{GridShape, IntegerHistogram};
use kwd::netsimplex::{solve, verify_certificate, Status};
use kwd::oracle::{enumerate_bases, enumerate_tiny, ssp_solve, OracleError};
use kwd::transport::{flow_cost, flows_from_solution, flows_to_plan, plan_to_flows, BigRational};

use crate::VerifyArgs;

struct Check {
    name: &'static str,
    cases: usize,
    failures: Vec<String>,
}

impl Check {
    fn new(name: &'static str) -> Self {
        Self {
            name,
            cases: 0,
            failures: Vec::new(),
        }
    }

    fn expect(&mut self, ok: bool, what: impl FnOnce() -> String) {
        self.cases += 1;
        if !ok {
            self.failures.push(what());
        }
    }

    fn report(&self) -> bool {
        let ok = self.failures.is_empty();
        print!("[{}] {}: {} cases", if ok { "PASS" } else { "FAIL" }, self.name, self.cases);
        match self.failures.first() {
            Some(f) => println!(", {} failed; first: {f}", self.failures.len()),
            None => println!(),
        }
        ok
    }
}

/// Small integer histogram with an exact total, zeros allowed.
fn tiny_histogram(shape: &GridShape, total: i64, rng: &mut ChaCha8Rng) -> IntegerHistogram {
    let mut mass = vec![0i64; shape.len()];
    for _ in 0..total {
        mass[rng.gen_range(0..shape.len())] += 1;
    }
    IntegerHistogram::new(shape.clone(), mass).expect("total is positive")
}

fn certified(net: &FlowNetwork) -> std::result::Result<i64, String> {
    let sol = solve(net);
    verify_certificate(net, &sol).map_err(|e| format!("{e:?}"))?;
    Ok(sol.objective)
}

fn tiny_pairs(args: &VerifyArgs, rng: &mut ChaCha8Rng) -> Check {
    let mut check = Check::new("tiny pairs: simplex (both networks), ssp, coupling and basis enumeration");
    for dims in [vec![4], vec![2, 2]] {
        let shape = GridShape::new(dims).expect("valid dims");
        for p in 1..=3 {
            let cost = SeparableCost::power(&shape, p).expect("small exponent");
            for _ in 0..args.instances {
                let total = rng.gen_range(1..=6);
                let mu = tiny_histogram(&shape, total, rng);
                let nu = tiny_histogram(&shape, total, rng);
                let bnet = build_bipartite(&mu, &nu, &cost).expect("balanced");
                let mnet = build_multipartite(&mu, &nu, &cost).expect("balanced");
                let values = [
                    certified(&bnet),
                    certified(&mnet),
                    ssp_solve(&bnet).map(|s| s.objective).map_err(|e| e.to_string()),
                    enumerate_tiny(&mu, &nu, &cost).map(|s| s.objective).map_err(|e| e.to_string()),
                    enumerate_bases(&bnet).map(|s| s.objective).map_err(|e| e.to_string()),
                ];
                let agree = values.iter().all(|v| v.is_ok() && v == &values[0]);
                check.expect(agree, || format!("{shape} p={p} mu={:?} nu={:?}: {values:?}", mu.mass(), nu.mass()));
            }
        }
    }
    check
}

fn random_networks(args: &VerifyArgs, rng: &mut ChaCha8Rng) -> Check {
    let mut check = Check::new("random sparse networks: simplex, ssp, basis enumeration");
    let mut done = 0;
    while done < 5 * args.instances {
        let n = 8;
        let arcs: Vec<(usize, usize, i64)> = (0..20)
            .filter_map(|_| {
                let (t, h) = (rng.gen_range(0..n), rng.gen_range(0..n));
                (t != h).then(|| (t, h, rng.gen_range(0..10)))
            })
            .collect();
        let mut supply: Vec<i64> = (0..n).map(|_| rng.gen_range(-4..=4)).collect();
        let imbalance: i64 = supply.iter().sum();
        supply[0] -= imbalance;
        let Ok(net) = FlowNetwork::new(n, &arcs, supply) else {
            continue;
        };
        done += 1;
        let sol = solve(&net);
        let ssp = ssp_solve(&net);
        let bases = enumerate_bases(&net);
        match sol.status {
            Status::Optimal => {
                let cert = verify_certificate(&net, &sol);
                let agree = cert.is_ok()
                    && ssp.as_ref().map(|s| s.objective) == Ok(sol.objective)
                    && bases.as_ref().map(|s| s.objective) == Ok(sol.objective);
                check.expect(agree, || format!("simplex {} ({cert:?}), ssp {ssp:?}, bases {bases:?}", sol.objective));
            }
            Status::Infeasible => check.expect(
                ssp == Err(OracleError::Infeasible) && bases == Err(OracleError::Infeasible),
                || format!("simplex infeasible, ssp {ssp:?}, bases {bases:?}"),
            ),
        }
    }
    check
}

fn grid_pairs(args: &VerifyArgs) -> (Check, Check) {
    let mut exact = Check::new("grid pairs: multipartite = bipartite = ssp");
    let mut glue = Check::new("grid pairs: plan rebuilt from flows has the right marginals and cost");
    for (gi, dims) in [vec![8, 8], vec![4, 4, 4], vec![3, 5]].into_iter().enumerate() {
        let shape = GridShape::new(dims).expect("valid dims");
        for p in 1..=3 {
            let cost = SeparableCost::power(&shape, p).expect("small exponent");
            for i in 0..args.instances {
                let seed = args.seed ^ ((gi as u64) << 48) ^ ((p as u64) << 40) ^ i as u64;
                let (mu, nu) = random_pair(&shape, 1000, seed).expect("valid pair");
                let bnet = build_bipartite(&mu, &nu, &cost).expect("balanced");
                let mnet = build_multipartite(&mu, &nu, &cost).expect("balanced");
                let (b, m) = (certified(&bnet), certified(&mnet));
                let o = ssp_solve(&mnet).map(|s| s.objective).map_err(|e| e.to_string());
                exact.expect(b.is_ok() && b == m && m == o, || {
                    format!("{shape} p={p} seed={seed}: bipartite {b:?}, multipartite {m:?}, ssp {o:?}")
                });

                let sol = solve(&mnet);
                let rebuilt = flows_from_solution(&mnet, &sol).and_then(|f| flows_to_plan(&f)).and_then(|plan| {
                    plan.check_marginals(&mu, &nu)?;
                    Ok((plan.cost(&cost)?, flow_cost(&plan_to_flows(&plan), &cost)?))
                });
                let want = BigRational::from_integer(sol.objective.into());
                glue.expect(
                    matches!(&rebuilt, Ok((c, r)) if *c == want && *r == want),
                    || format!("{shape} p={p} seed={seed}: {rebuilt:?}, objective {}", sol.objective),
                );
            }
        }
    }
    (exact, glue)
}

pub fn run(args: &VerifyArgs) -> Result<bool> {
    let mut rng = ChaCha8Rng::seed_from_u64(args.seed);
    let (exact, glue) = grid_pairs(args);
    let checks = [tiny_pairs(args, &mut rng), random_networks(args, &mut rng), exact, glue];
    let mut ok = true;
    for c in &checks {
        ok &= c.report();
    }
    println!("{}", if ok { "all checks passed" } else { "some checks failed" });
    Ok(ok)
}
