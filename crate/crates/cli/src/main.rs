use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use kwd::campaign::{self, Algorithm, BatchConfig, BenchConfig, DEFAULT_ARC_BUDGET};
use kwd::cost::{load_cost_tables, SeparableCost};
use kwd::graphbuild::{build_bipartite, build_multipartite};
use kwd::histogram::{load_histogram, load_points_csv, to_csv, GridShape, Histogram, DEFAULT_TARGET_TOTAL};
use kwd::netsimplex::SolverOptions;
use kwd::sinkhorn::{improved_sinkhorn, sinkhorn, CostNormalization, SinkhornConfig};
use kwd::transport::{solve_exact, Method};

mod verify;

#[derive(Parser)]
#[command(name = "kwd", version, about = "Exact Kantorovich-Wasserstein distances between histograms")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Distance between two histograms.
    Compute(ComputeArgs),
    /// Distances between every pair of histograms in a directory.
    Batch(BatchArgs),
    /// Network sizes and solve times on random instances.
    Bench(BenchArgs),
    /// Cross-check the solver against the reference solvers.
    Verify(VerifyArgs),
    /// Bin a point cloud into a histogram CSV.
    Bin(BinArgs),
    /// Write the flow network of a pair in DIMACS format.
    ExportDimacs(ExportArgs),
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum MethodArg {
    Bipartite,
    Multipartite,
    Sinkhorn,
    ImprovedSinkhorn,
}

impl MethodArg {
    fn algorithm(self) -> Algorithm {
        match self {
            MethodArg::Bipartite => Algorithm::Exact(Method::Bipartite),
            MethodArg::Multipartite => Algorithm::Exact(Method::Multipartite),
            MethodArg::Sinkhorn => Algorithm::Sinkhorn,
            MethodArg::ImprovedSinkhorn => Algorithm::ImprovedSinkhorn,
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ExactMethod {
    Bipartite,
    Multipartite,
}

impl From<ExactMethod> for Method {
    fn from(m: ExactMethod) -> Self {
        match m {
            ExactMethod::Bipartite => Method::Bipartite,
            ExactMethod::Multipartite => Method::Multipartite,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum NormalizationArg {
    None,
    Median,
    Max,
}

impl From<NormalizationArg> for CostNormalization {
    fn from(n: NormalizationArg) -> Self {
        match n {
            NormalizationArg::None => CostNormalization::None,
            NormalizationArg::Median => CostNormalization::Median,
            NormalizationArg::Max => CostNormalization::Max,
        }
    }
}

#[derive(Args)]
struct SolveFlags {
    /// Order of the distance; axis costs are |a - b|^p.
    #[arg(long, default_value_t = 2)]
    p: u32,
    #[arg(long, value_enum, default_value_t = MethodArg::Multipartite)]
    method: MethodArg,
    /// Integer total both histograms are scaled to before an exact solve.
    #[arg(long, default_value_t = DEFAULT_TARGET_TOTAL)]
    total: i64,
    /// Sinkhorn regularization; larger is sharper.
    #[arg(long, default_value_t = 1.0)]
    lambda: f64,
    #[arg(long, default_value_t = 10_000)]
    max_iters: usize,
    /// Sinkhorn stopping tolerance on the L1 marginal violation.
    #[arg(long, default_value_t = 1e-9)]
    tol: f64,
    #[arg(long, value_enum, default_value_t = NormalizationArg::Median)]
    normalization: NormalizationArg,
}

impl SolveFlags {
    fn sinkhorn(&self) -> SinkhornConfig {
        SinkhornConfig {
            lambda: self.lambda,
            max_iters: self.max_iters,
            marginal_tol: self.tol,
            cost_normalization: self.normalization.into(),
            ..SinkhornConfig::default()
        }
    }
}

#[derive(Args)]
struct ComputeArgs {
    /// Source histogram (.pgm or .csv).
    mu: PathBuf,
    /// Target histogram (.pgm or .csv).
    nu: PathBuf,
    #[command(flatten)]
    solve: SolveFlags,
    /// Custom per-axis cost tables replacing |a - b|^p.
    #[arg(long)]
    cost_tables: Option<PathBuf>,
    /// Uniform grid spacing applied to the reported distance.
    #[arg(long, default_value_t = 1.0)]
    spacing: f64,
    /// Write the optimal transport plan as CSV (exact methods only).
    #[arg(long)]
    plan_out: Option<PathBuf>,
}

#[derive(Args)]
struct BatchArgs {
    /// Directory of .pgm / .csv histograms.
    dir: PathBuf,
    #[command(flatten)]
    solve: SolveFlags,
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    /// Output CSV path; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct BenchArgs {
    /// Grid side lengths N.
    #[arg(long, value_delimiter = ',', default_values_t = vec![16usize])]
    sizes: Vec<usize>,
    /// Grid dimensions d.
    #[arg(long, value_delimiter = ',', default_values_t = vec![2usize])]
    dims: Vec<usize>,
    #[arg(long, value_enum, value_delimiter = ',', default_values_t = vec![ExactMethod::Bipartite, ExactMethod::Multipartite])]
    methods: Vec<ExactMethod>,
    #[arg(long, default_value_t = 2)]
    p: u32,
    /// Random instances per grid.
    #[arg(long, default_value_t = 3)]
    instances: usize,
    #[arg(long, default_value_t = DEFAULT_TARGET_TOTAL)]
    total: i64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Networks with more arcs are reported as `oom` instead of built.
    #[arg(long, default_value_t = DEFAULT_ARC_BUDGET)]
    arc_budget: u128,
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
pub(crate) struct VerifyArgs {
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Random instances per check.
    #[arg(long, default_value_t = 20)]
    pub instances: usize,
}

#[derive(Args)]
struct BinArgs {
    /// Point-cloud CSV, one point per line.
    points: PathBuf,
    /// Bins per axis, e.g. 32,32.
    #[arg(long, value_delimiter = ',', required = true)]
    shape: Vec<usize>,
    /// Per-axis bounds `min:max`, comma separated; the data range when omitted.
    #[arg(long, value_delimiter = ',')]
    bounds: Vec<String>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ExportArgs {
    mu: PathBuf,
    nu: PathBuf,
    #[arg(long, default_value_t = 2)]
    p: u32,
    #[arg(long, value_enum, default_value_t = ExactMethod::Multipartite)]
    method: ExactMethod,
    #[arg(long, default_value_t = DEFAULT_TARGET_TOTAL)]
    total: i64,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Compute(a) => compute(a),
        Command::Batch(a) => batch(a),
        Command::Bench(a) => bench(a),
        Command::Verify(a) => verify::run(&a),
        Command::Bin(a) => bin(a),
        Command::ExportDimacs(a) => export(a),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn load(path: &Path) -> Result<Histogram> {
    load_histogram(path).with_context(|| format!("reading {}", path.display()))
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(path) => fs::write(path, text).with_context(|| format!("writing {}", path.display())),
        None => io::stdout().write_all(text.as_bytes()).context("writing to stdout"),
    }
}

fn compute(a: ComputeArgs) -> Result<bool> {
    let mu = load(&a.mu)?;
    let nu = load(&a.nu)?;
    if mu.shape() != nu.shape() {
        bail!("histograms have different grids: {} vs {}", mu.shape(), nu.shape());
    }
    if !(a.spacing.is_finite() && a.spacing > 0.0) {
        bail!("--spacing must be positive");
    }
    let (cost, power) = match &a.cost_tables {
        Some(path) => (
            load_cost_tables(path).with_context(|| format!("reading {}", path.display()))?,
            false,
        ),
        None => (SeparableCost::power(mu.shape(), a.solve.p)?, true),
    };
    if !cost.matches(mu.shape()) {
        bail!("cost tables {:?} do not match grid {}", cost.dims(), mu.shape());
    }
    let p = a.solve.p as f64;
    let method = a.solve.method;
    println!("method: {}", method.algorithm().name());
    println!("grid: {}", mu.shape());
    if power {
        println!("p: {}", a.solve.p);
    }
    match method.algorithm() {
        Algorithm::Exact(m) => {
            let mu_i = mu.integerize(a.solve.total)?;
            let nu_i = nu.integerize(a.solve.total)?;
            let res = solve_exact(&mu_i, &nu_i, &cost, m, a.plan_out.is_some(), &SolverOptions::default())?;
            let per_unit = res.objective as f64 / res.total as f64;
            println!("total: {}", res.total);
            println!("objective: {}", res.objective);
            println!("cost: {per_unit:.12}");
            if power {
                println!("distance: {:.12}", a.spacing * per_unit.powf(1.0 / p));
            }
            println!("nodes: {}", res.nodes);
            println!("arcs: {}", res.arcs);
            println!("pivots: {}", res.stats.pivots);
            println!("runtime_s: {:.6}", res.stats.elapsed.as_secs_f64());
            if let (Some(path), Some(plan)) = (&a.plan_out, &res.plan) {
                plan.write_csv(path)
                    .with_context(|| format!("writing {}", path.display()))?;
                println!("plan_entries: {}", plan.len());
            }
        }
        alg => {
            if a.plan_out.is_some() {
                bail!("--plan-out needs an exact method");
            }
            let cfg = a.solve.sinkhorn();
            let start = std::time::Instant::now();
            let res = if alg == Algorithm::Sinkhorn {
                sinkhorn(&mu, &nu, &cost, &cfg)?
            } else {
                improved_sinkhorn(&mu, &nu, &cost, &cfg)?
            };
            println!("lambda: {}", cfg.lambda);
            println!("upper_bound: {:.12}", res.upper_bound);
            if power {
                println!("distance: {:.12}", a.spacing * res.upper_bound.max(0.0).powf(1.0 / p));
            }
            println!("iterations: {}", res.iterations);
            println!("converged: {}", res.converged);
            println!("marginal_error: {:.3e}", res.marginal_error);
            println!("kernel_entries: {}", res.kernel_entries);
            println!("runtime_s: {:.6}", start.elapsed().as_secs_f64());
        }
    }
    Ok(true)
}

fn batch(a: BatchArgs) -> Result<bool> {
    let mut files: Vec<PathBuf> = fs::read_dir(&a.dir)
        .with_context(|| format!("listing {}", a.dir.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.is_file()
                && matches!(
                    p.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase).as_deref(),
                    Some("pgm" | "csv")
                )
        })
        .collect();
    files.sort();
    let inputs = files
        .iter()
        .map(|p| {
            let name = p.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
            load(p).map(|h| (name, h))
        })
        .collect::<Result<Vec<_>>>()?;
    let cfg = BatchConfig {
        algorithm: a.solve.method.algorithm(),
        p: a.solve.p,
        total: a.solve.total,
        sinkhorn: a.solve.sinkhorn(),
        jobs: a.jobs,
    };
    let report = campaign::batch(&inputs, &cfg)?;
    emit(a.out.as_deref(), &campaign::batch_csv(&report)?)?;
    Ok(true)
}

fn bench(a: BenchArgs) -> Result<bool> {
    let cfg = BenchConfig {
        sizes: a.sizes,
        dims: a.dims,
        methods: a.methods.into_iter().map(Method::from).collect(),
        p: a.p,
        instances: a.instances,
        total: a.total,
        seed: a.seed,
        arc_budget: a.arc_budget,
        jobs: a.jobs,
    };
    let rows = campaign::bench(&cfg)?;
    emit(a.out.as_deref(), &campaign::bench_csv(&rows)?)?;
    Ok(true)
}

fn parse_bounds(specs: &[String]) -> Result<Vec<(f64, f64)>> {
    specs
        .iter()
        .map(|s| {
            let (lo, hi) = s
                .split_once(':')
                .with_context(|| format!("bound `{s}` is not of the form min:max"))?;
            Ok((lo.trim().parse()?, hi.trim().parse()?))
        })
        .collect()
}

fn bin(a: BinArgs) -> Result<bool> {
    let points = load_points_csv(&a.points).with_context(|| format!("reading {}", a.points.display()))?;
    let shape = GridShape::new(a.shape)?;
    let bounds = if a.bounds.is_empty() {
        let d = shape.ndim();
        (0..d)
            .map(|k| {
                let vals = points.iter().filter_map(|p| p.get(k).copied());
                let lo = vals.clone().fold(f64::INFINITY, f64::min);
                let hi = vals.fold(f64::NEG_INFINITY, f64::max);
                // a constant coordinate still needs a non-empty range
                if lo < hi {
                    (lo, hi)
                } else {
                    (lo, lo + 1.0)
                }
            })
            .collect()
    } else {
        parse_bounds(&a.bounds)?
    };
    let h = Histogram::bin_points(&points, shape, &bounds)?;
    emit(a.out.as_deref(), &to_csv(&h))?;
    Ok(true)
}

fn export(a: ExportArgs) -> Result<bool> {
    let mu = load(&a.mu)?.integerize(a.total)?;
    let nu = load(&a.nu)?.integerize(a.total)?;
    let cost = SeparableCost::power(mu.shape(), a.p)?;
    let net = match a.method {
        ExactMethod::Bipartite => build_bipartite(&mu, &nu, &cost)?,
        ExactMethod::Multipartite => build_multipartite(&mu, &nu, &cost)?,
    };
    let mut buf = Vec::new();
    net.write_dimacs(&mut buf)?;
    emit(a.out.as_deref(), std::str::from_utf8(&buf)?)?;
    Ok(true)
}
