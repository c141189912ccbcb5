//! Seeded instance generation and the batch and benchmark runners behind the
//! command-line tool.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::cost::{CostError, SeparableCost};
use crate::graphbuild::{bipartite_size, multipartite_size};
use crate::histogram::{GridShape, Histogram, HistogramError, IntegerHistogram};
use crate::netsimplex::SolverOptions;
use crate::sinkhorn::{improved_sinkhorn, sinkhorn, SinkhornConfig};
use crate::transport::{solve_exact, wasserstein_with, Method, WassersteinOptions};

/// Default arc budget above which a network is not built.
pub const DEFAULT_ARC_BUDGET: u128 = 1 << 27;

#[derive(Debug, Error)]
pub enum CampaignError {
    #[error("batch needs at least two histograms, got {0}")]
    TooFewInputs(usize),
    #[error("no grid sizes or dimensions to benchmark")]
    EmptySweep,
    #[error("could not start worker pool: {0}")]
    ThreadPool(String),
    #[error(transparent)]
    Histogram(#[from] HistogramError),
    #[error(transparent)]
    Cost(#[from] CostError),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Masses drawn uniformly from the integers `0..=255`, scaled to
/// `total` by largest remainder. An all-zero draw is redrawn.
pub fn random_histogram(shape: &GridShape, total: i64, rng: &mut impl Rng) -> Result<IntegerHistogram, HistogramError> {
    loop {
        let values: Vec<f64> = (0..shape.len()).map(|_| rng.gen_range(0..=255u32) as f64).collect();
        if values.iter().any(|&v| v > 0.0) {
            return Histogram::from_dense(shape.clone(), values)?.integerize(total);
        }
    }
}

/// Two histograms with the same total, reproducible from `seed`.
pub fn random_pair(
    shape: &GridShape,
    total: i64,
    seed: u64,
) -> Result<(IntegerHistogram, IntegerHistogram), HistogramError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok((random_histogram(shape, total, &mut rng)?, random_histogram(shape, total, &mut rng)?))
}

/// Population mean and standard deviation.
pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

fn pool(jobs: usize) -> Result<rayon::ThreadPool, CampaignError> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| CampaignError::ThreadPool(e.to_string()))
}

#[derive(Debug, Clone)]
pub struct BenchConfig {
    pub sizes: Vec<usize>,
    pub dims: Vec<usize>,
    pub methods: Vec<Method>,
    pub p: u32,
    pub instances: usize,
    pub total: i64,
    pub seed: u64,
    pub arc_budget: u128,
    pub jobs: usize,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            sizes: vec![16],
            dims: vec![2],
            methods: vec![Method::Bipartite, Method::Multipartite],
            p: 2,
            instances: 3,
            total: crate::histogram::DEFAULT_TARGET_TOTAL,
            seed: 0,
            arc_budget: DEFAULT_ARC_BUDGET,
            jobs: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum BenchOutcome {
    /// Wall-clock seconds per instance (build and solve), plus the objectives.
    Timed { seconds: Vec<f64>, objectives: Vec<i64> },
    /// Arc count above the budget; nothing was built.
    OutOfMemory,
    Failed(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchRow {
    pub side: usize,
    pub d: usize,
    pub method: Method,
    pub nodes: u128,
    pub arcs: u128,
    pub outcome: BenchOutcome,
}

impl BenchRow {
    pub fn status(&self) -> &str {
        match &self.outcome {
            BenchOutcome::Timed { .. } => "ok",
            BenchOutcome::OutOfMemory => "oom",
            BenchOutcome::Failed(_) => "error",
        }
    }

    pub fn mean_std(&self) -> Option<(f64, f64)> {
        match &self.outcome {
            BenchOutcome::Timed { seconds, .. } => Some(mean_std(seconds)),
            _ => None,
        }
    }
}

/// Runs every method on `instances` random pairs for each `(N, d)` in the
/// sweep. Instance `i` of a given `(N, d)` is the same for all methods.
pub fn bench(cfg: &BenchConfig) -> Result<Vec<BenchRow>, CampaignError> {
    if cfg.sizes.is_empty() || cfg.dims.is_empty() {
        return Err(CampaignError::EmptySweep);
    }
    let pool = pool(cfg.jobs)?;
    let mut rows = Vec::new();
    for &d in &cfg.dims {
        for &side in &cfg.sizes {
            let shape = GridShape::cubic(side, d)?;
            let cost = SeparableCost::power(&shape, cfg.p)?;
            let mut pairs = None;
            for &method in &cfg.methods {
                let (nodes, arcs) = match method {
                    Method::Bipartite => bipartite_size(&shape),
                    Method::Multipartite => multipartite_size(&shape),
                };
                let outcome = if arcs > cfg.arc_budget {
                    BenchOutcome::OutOfMemory
                } else {
                    if pairs.is_none() {
                        let seeds: Vec<u64> = (0..cfg.instances)
                            .map(|i| instance_seed(cfg.seed, side, d, i))
                            .collect();
                        pairs = Some(
                            seeds
                                .iter()
                                .map(|&s| random_pair(&shape, cfg.total, s))
                                .collect::<Result<Vec<_>, _>>()?,
                        );
                    }
                    let pairs = pairs.as_ref().expect("generated above");
                    let results: Vec<Result<(f64, i64), String>> = pool.install(|| {
                        pairs
                            .par_iter()
                            .map(|(mu, nu)| {
                                let start = Instant::now();
                                solve_exact(mu, nu, &cost, method, false, &SolverOptions::default())
                                    .map(|s| (start.elapsed().as_secs_f64(), s.objective))
                                    .map_err(|e| e.to_string())
                            })
                            .collect()
                    });
                    match results.into_iter().collect::<Result<Vec<_>, _>>() {
                        Ok(v) => {
                            let (seconds, objectives) = v.into_iter().unzip();
                            BenchOutcome::Timed { seconds, objectives }
                        }
                        Err(e) => BenchOutcome::Failed(e),
                    }
                };
                rows.push(BenchRow {
                    side,
                    d,
                    method,
                    nodes,
                    arcs,
                    outcome,
                });
            }
        }
    }
    Ok(rows)
}

fn instance_seed(seed: u64, side: usize, d: usize, i: usize) -> u64 {
    // distinct, reproducible streams per sweep cell
    seed ^ ((side as u64) << 40) ^ ((d as u64) << 32) ^ i as u64
}

/// CSV with columns `N,d,method,nodes,arcs,instances,mean_s,stddev_s,status`.
/// Skipped rows leave the timing columns empty.
pub fn bench_csv(rows: &[BenchRow]) -> Result<String, CampaignError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["N", "d", "method", "nodes", "arcs", "instances", "mean_s", "stddev_s", "status"])?;
    for r in rows {
        let (count, mean, std) = match &r.outcome {
            BenchOutcome::Timed { seconds, .. } => {
                let (m, s) = mean_std(seconds);
                (seconds.len().to_string(), format!("{m:.6}"), format!("{s:.6}"))
            }
            _ => (String::new(), String::new(), String::new()),
        };
        w.write_record([
            r.side.to_string(),
            r.d.to_string(),
            r.method.name().to_string(),
            r.nodes.to_string(),
            r.arcs.to_string(),
            count,
            mean,
            std,
            r.status().to_string(),
        ])?;
    }
    Ok(String::from_utf8(w.into_inner().map_err(|e| e.into_error())?).expect("csv output is utf-8"))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Algorithm {
    Exact(Method),
    Sinkhorn,
    ImprovedSinkhorn,
}

impl Algorithm {
    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Exact(m) => m.name(),
            Algorithm::Sinkhorn => "sinkhorn",
            Algorithm::ImprovedSinkhorn => "improved-sinkhorn",
        }
    }
}

#[derive(Debug, Clone)]
pub struct BatchConfig {
    pub algorithm: Algorithm,
    pub p: u32,
    pub total: i64,
    pub sinkhorn: SinkhornConfig,
    pub jobs: usize,
}

impl Default for BatchConfig {
    fn default() -> Self {
        Self {
            algorithm: Algorithm::Exact(Method::Multipartite),
            p: 2,
            total: crate::histogram::DEFAULT_TARGET_TOTAL,
            sinkhorn: SinkhornConfig::default(),
            jobs: 1,
        }
    }
}

/// Result of one pair. `cost` is the transport cost per unit of mass.
#[derive(Debug, Clone, PartialEq)]
pub struct PairOutcome {
    pub objective: Option<i64>,
    pub cost: f64,
    pub distance: f64,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BatchRow {
    pub first: String,
    pub second: String,
    pub result: Result<PairOutcome, String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BatchReport {
    pub algorithm: Algorithm,
    pub rows: Vec<BatchRow>,
    pub mean_seconds: f64,
    pub std_seconds: f64,
}

/// Distance for one pair under `cfg`.
pub fn compare_pair(mu: &Histogram, nu: &Histogram, cfg: &BatchConfig) -> Result<PairOutcome, String> {
    let start = Instant::now();
    match cfg.algorithm {
        Algorithm::Exact(method) => {
            let opts = WassersteinOptions {
                method,
                target_total: cfg.total,
                ..WassersteinOptions::default()
            };
            let r = wasserstein_with(mu, nu, cfg.p, &opts).map_err(|e| e.to_string())?;
            Ok(PairOutcome {
                objective: Some(r.cost),
                cost: r.cost as f64 / r.total as f64,
                distance: r.distance,
                seconds: start.elapsed().as_secs_f64(),
            })
        }
        Algorithm::Sinkhorn | Algorithm::ImprovedSinkhorn => {
            if mu.shape() != nu.shape() {
                return Err(format!("shape mismatch: {} vs {}", mu.shape(), nu.shape()));
            }
            let cost = SeparableCost::power(mu.shape(), cfg.p).map_err(|e| e.to_string())?;
            let run = if cfg.algorithm == Algorithm::Sinkhorn {
                sinkhorn
            } else {
                improved_sinkhorn
            };
            let r = run(mu, nu, &cost, &cfg.sinkhorn).map_err(|e| e.to_string())?;
            Ok(PairOutcome {
                objective: None,
                cost: r.upper_bound,
                distance: r.upper_bound.max(0.0).powf(1.0 / cfg.p as f64),
                seconds: start.elapsed().as_secs_f64(),
            })
        }
    }
}

/// Compares every unordered pair of inputs once, the earlier input taking
/// the source role. Failures are recorded per row.
pub fn batch(inputs: &[(String, Histogram)], cfg: &BatchConfig) -> Result<BatchReport, CampaignError> {
    if inputs.len() < 2 {
        return Err(CampaignError::TooFewInputs(inputs.len()));
    }
    let pairs: Vec<(usize, usize)> = (0..inputs.len())
        .flat_map(|i| (i + 1..inputs.len()).map(move |j| (i, j)))
        .collect();
    let rows: Vec<BatchRow> = pool(cfg.jobs)?.install(|| {
        pairs
            .par_iter()
            .map(|&(i, j)| BatchRow {
                first: inputs[i].0.clone(),
                second: inputs[j].0.clone(),
                result: compare_pair(&inputs[i].1, &inputs[j].1, cfg),
            })
            .collect()
    });
    let times: Vec<f64> = rows
        .iter()
        .filter_map(|r| r.result.as_ref().ok().map(|o| o.seconds))
        .collect();
    let (mean_seconds, std_seconds) = mean_std(&times);
    Ok(BatchReport {
        algorithm: cfg.algorithm,
        rows,
        mean_seconds,
        std_seconds,
    })
}

/// CSV with columns
/// `kind,first,second,method,objective,cost,distance,runtime_s,runtime_std_s,error`.
/// Pair rows have kind `pair`; a final `summary` row carries the mean and
/// standard deviation of the successful runtimes.
pub fn batch_csv(report: &BatchReport) -> Result<String, CampaignError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "kind",
        "first",
        "second",
        "method",
        "objective",
        "cost",
        "distance",
        "runtime_s",
        "runtime_std_s",
        "error",
    ])?;
    let method = report.algorithm.name();
    for r in &report.rows {
        let record = match &r.result {
            Ok(o) => [
                "pair".into(),
                r.first.clone(),
                r.second.clone(),
                method.into(),
                o.objective.map(|v| v.to_string()).unwrap_or_default(),
                format!("{:.12}", o.cost),
                format!("{:.12}", o.distance),
                format!("{:.6}", o.seconds),
                String::new(),
                String::new(),
            ],
            Err(e) => [
                "pair".into(),
                r.first.clone(),
                r.second.clone(),
                method.into(),
                String::new(),
                String::new(),
                String::new(),
                String::new(),
                String::new(),
                e.clone(),
            ],
        };
        w.write_record(&record)?;
    }
    let fmt = |x: f64| if x.is_finite() { format!("{x:.6}") } else { String::new() };
    w.write_record([
        "summary",
        "",
        "",
        method,
        "",
        "",
        "",
        &fmt(report.mean_seconds),
        &fmt(report.std_seconds),
        "",
    ])?;
    Ok(String::from_utf8(w.into_inner().map_err(|e| e.into_error())?).expect("csv output is utf-8"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn random_pairs_are_reproducible_and_balanced() {
        let shape = GridShape::new(vec![4, 4]).unwrap();
        let (a, b) = random_pair(&shape, 1000, 7).unwrap();
        let (c, d) = random_pair(&shape, 1000, 7).unwrap();
        assert_eq!((&a, &b), (&c, &d));
        assert_eq!(a.total(), 1000);
        assert_eq!(b.total(), 1000);
        assert_ne!(random_pair(&shape, 1000, 8).unwrap().0, a);
    }

    #[test]
    fn mean_std_of_constants() {
        assert_eq!(mean_std(&[2.0, 2.0, 2.0]), (2.0, 0.0));
        let (m, s) = mean_std(&[1.0, 3.0]);
        assert_eq!((m, s), (2.0, 1.0));
        assert!(mean_std(&[]).0.is_nan());
    }

    #[test]
    fn bench_reports_sizes_and_budget() {
        let cfg = BenchConfig {
            sizes: vec![4],
            dims: vec![2, 3],
            instances: 2,
            total: 500,
            arc_budget: 1000,
            ..BenchConfig::default()
        };
        let rows = bench(&cfg).unwrap();
        assert_eq!(rows.len(), 4);
        let find = |d, m| rows.iter().find(|r| r.d == d && r.method == m).unwrap();
        let r = find(2, Method::Bipartite);
        assert_eq!((r.nodes, r.arcs, r.status()), (32, 256, "ok"));
        let m = find(2, Method::Multipartite);
        assert_eq!((m.nodes, m.arcs), (48, 128));
        match (&r.outcome, &m.outcome) {
            (BenchOutcome::Timed { objectives: a, .. }, BenchOutcome::Timed { objectives: b, .. }) => {
                assert_eq!(a, b)
            }
            other => panic!("{other:?}"),
        }
        assert_eq!(find(3, Method::Bipartite).status(), "oom");
        assert_eq!(find(3, Method::Multipartite).status(), "ok");
        let csv = bench_csv(&rows).unwrap();
        assert!(csv.starts_with("N,d,method,nodes,arcs,instances,mean_s,stddev_s,status\n"));
        assert!(csv.contains("4,3,bipartite,128,4096,,,,oom\n"));
    }

    #[test]
    fn batch_counts_pairs() {
        let shape = GridShape::new(vec![3, 3]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let inputs: Vec<(String, Histogram)> = (0..5)
            .map(|i| (format!("h{i}"), random_histogram(&shape, 100, &mut rng).unwrap().to_histogram()))
            .collect();
        let cfg = BatchConfig {
            total: 100,
            jobs: 2,
            ..BatchConfig::default()
        };
        let report = batch(&inputs, &cfg).unwrap();
        assert_eq!(report.rows.len(), 10);
        assert_eq!((report.rows[0].first.as_str(), report.rows[0].second.as_str()), ("h0", "h1"));
        let csv = batch_csv(&report).unwrap();
        assert_eq!(csv.lines().count(), 12);
        assert!(csv.lines().last().unwrap().starts_with("summary,,,multipartite"));

        let same = vec![(String::from("a"), inputs[0].1.clone()); 3];
        let report = batch(&same, &cfg).unwrap();
        assert_eq!(report.rows.len(), 3);
        assert!(report.rows.iter().all(|r| r.result.as_ref().unwrap().distance == 0.0));
        assert!(batch(&same[..1], &cfg).is_err());
    }

    #[test]
    fn batch_records_failures_and_continues() {
        let a = Histogram::from_dense(GridShape::new(vec![2, 2]).unwrap(), vec![1.0; 4]).unwrap();
        let b = Histogram::from_dense(GridShape::new(vec![4]).unwrap(), vec![1.0; 4]).unwrap();
        let inputs = vec![("a".into(), a.clone()), ("b".into(), b), ("c".into(), a)];
        for algorithm in [Algorithm::Exact(Method::Bipartite), Algorithm::Sinkhorn] {
            let cfg = BatchConfig {
                algorithm,
                total: 100,
                ..BatchConfig::default()
            };
            let report = batch(&inputs, &cfg).unwrap();
            assert_eq!(report.rows.iter().filter(|r| r.result.is_err()).count(), 2);
            assert!(report.rows[1].result.is_ok());
            assert!(batch_csv(&report).unwrap().contains("shape mismatch"));
        }
    }
}
