//! Distances, transport plans and per-axis flow charts.
//!
//! A [`FlowChart`] holds one flow family per axis. Family `i` is keyed by a
//! node of layer `i` of the multipartite network (mixed coordinate
//! `(b_1..b_i, a_{i+1}..a_d)`, stored as a flat index) and the new value of
//! axis `i + 1`. [`plan_to_flows`] marginalizes a coupling onto these
//! families; [`flows_to_plan`] rebuilds a coupling from them by repeated
//! gluing along the shared layer marginals.
//!
//! Plans and flows carry exact rationals: the glued measure generally has
//! fractional entries even when every flow is integral.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::Path;
use std::time::Duration;

use num_bigint::BigInt;
pub use num_rational::BigRational;
use num_traits::{Signed, Zero};
use thiserror::Error;

use crate::cost::{CostError, SeparableCost};
use crate::graphbuild::{build_bipartite, build_multipartite, BuildError, FlowNetwork, Layout};
use crate::histogram::{GridShape, Histogram, HistogramError, IntegerHistogram, DEFAULT_TARGET_TOTAL};
use crate::netsimplex::{solve_with, FlowSolution, SolveStats, SolverOptions};

#[derive(Debug, Error)]
pub enum TransportError {
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("invalid transport plan: {0}")]
    InvalidPlan(String),
    #[error("inconsistent flow chart: {0}")]
    InconsistentFlows(String),
    #[error("solver reported an infeasible instance")]
    Infeasible,
    #[error("solution does not belong to a {0} network")]
    WrongLayout(&'static str),
    #[error("grid spacing must be positive and finite, got {0}")]
    InvalidSpacing(f64),
    #[error(transparent)]
    Histogram(#[from] HistogramError),
    #[error(transparent)]
    Cost(#[from] CostError),
    #[error(transparent)]
    Build(#[from] BuildError),
    #[error(transparent)]
    Io(#[from] io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Method {
    Bipartite,
    Multipartite,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Bipartite => "bipartite",
            Method::Multipartite => "multipartite",
        }
    }
}

fn rational(v: i64) -> BigRational {
    BigRational::from_integer(BigInt::from(v))
}

/// Sparse coupling between two histograms on the same grid, keyed by
/// `(flat source bin, flat target bin)`. Zero entries are never stored.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TransportPlan {
    shape: GridShape,
    entries: BTreeMap<(usize, usize), BigRational>,
}

impl TransportPlan {
    pub fn new(shape: GridShape) -> Self {
        Self {
            shape,
            entries: BTreeMap::new(),
        }
    }

    /// Builds a plan from `(x, y, mass)` triples; repeated pairs accumulate.
    pub fn from_entries(
        shape: GridShape,
        entries: impl IntoIterator<Item = (usize, usize, BigRational)>,
    ) -> Result<Self, TransportError> {
        let mut plan = Self::new(shape);
        for (x, y, m) in entries {
            plan.add(x, y, m)?;
        }
        Ok(plan)
    }

    pub fn add(&mut self, x: usize, y: usize, mass: BigRational) -> Result<(), TransportError> {
        let n = self.shape.len();
        if x >= n || y >= n {
            return Err(TransportError::InvalidPlan(format!("bin pair ({x}, {y}) outside a grid of {n} bins")));
        }
        if mass.is_negative() {
            return Err(TransportError::InvalidPlan(format!("negative mass {mass} at ({x}, {y})")));
        }
        add_entry(&mut self.entries, (x, y), mass);
        Ok(())
    }

    pub fn shape(&self) -> &GridShape {
        &self.shape
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, x: usize, y: usize) -> BigRational {
        self.entries.get(&(x, y)).cloned().unwrap_or_else(BigRational::zero)
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, &BigRational)> {
        self.entries.iter().map(|(&(x, y), m)| (x, y, m))
    }

    /// Row sums, one per source bin.
    pub fn source_marginal(&self) -> Vec<BigRational> {
        let mut out = vec![BigRational::zero(); self.shape.len()];
        for (&(x, _), m) in &self.entries {
            out[x] += m;
        }
        out
    }

    /// Column sums, one per target bin.
    pub fn target_marginal(&self) -> Vec<BigRational> {
        let mut out = vec![BigRational::zero(); self.shape.len()];
        for (&(_, y), m) in &self.entries {
            out[y] += m;
        }
        out
    }

    /// Checks that the marginals equal `mu` and `nu` exactly.
    pub fn check_marginals(&self, mu: &IntegerHistogram, nu: &IntegerHistogram) -> Result<(), TransportError> {
        if mu.shape() != &self.shape || nu.shape() != &self.shape {
            return Err(TransportError::ShapeMismatch(format!(
                "plan on {}, histograms on {} and {}",
                self.shape,
                mu.shape(),
                nu.shape()
            )));
        }
        for (side, marginal, hist) in [
            ("source", self.source_marginal(), mu),
            ("target", self.target_marginal(), nu),
        ] {
            for (i, (got, &want)) in marginal.iter().zip(hist.mass()).enumerate() {
                if *got != rational(want) {
                    return Err(TransportError::InvalidPlan(format!(
                        "{side} marginal at bin {i} is {got}, expected {want}"
                    )));
                }
            }
        }
        Ok(())
    }

    /// `sum c(x, y) * pi(x, y)`.
    pub fn cost(&self, cost: &SeparableCost) -> Result<BigRational, TransportError> {
        if !cost.matches(&self.shape) {
            return Err(TransportError::ShapeMismatch(format!(
                "cost tables {:?} do not match grid {}",
                cost.dims(),
                self.shape
            )));
        }
        let d = self.shape.ndim();
        let (mut cx, mut cy) = (vec![0; d], vec![0; d]);
        let mut total = BigRational::zero();
        for (&(x, y), m) in &self.entries {
            self.shape.coords_into(x, &mut cx);
            self.shape.coords_into(y, &mut cy);
            total += m * rational(cost.ground_cost_unchecked(&cx, &cy));
        }
        Ok(total)
    }

    /// CSV with columns `x0..x{d-1}, y0..y{d-1}, mass`. Masses print as
    /// integers or exact fractions `p/q`.
    pub fn to_csv(&self) -> String {
        let d = self.shape.ndim();
        let mut out = String::new();
        let header: Vec<String> = (0..d)
            .map(|k| format!("x{k}"))
            .chain((0..d).map(|k| format!("y{k}")))
            .chain(std::iter::once("mass".to_string()))
            .collect();
        out.push_str(&header.join(","));
        out.push('\n');
        let (mut cx, mut cy) = (vec![0; d], vec![0; d]);
        for (&(x, y), m) in &self.entries {
            self.shape.coords_into(x, &mut cx);
            self.shape.coords_into(y, &mut cy);
            for c in cx.iter().chain(&cy) {
                let _ = write!(out, "{c},");
            }
            let _ = writeln!(out, "{m}");
        }
        out
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<(), TransportError> {
        fs::write(path, self.to_csv())?;
        Ok(())
    }
}

fn add_entry<K: Ord>(map: &mut BTreeMap<K, BigRational>, key: K, mass: BigRational) {
    if mass.is_zero() {
        return;
    }
    let slot = map.entry(key).or_insert_with(BigRational::zero);
    *slot += mass;
}

/// Per-axis flow families. Entry `(m, b)` of family `i` is the mass leaving
/// layer-`i` node `m` along axis `i + 1` towards value `b`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FlowChart {
    shape: GridShape,
    families: Vec<BTreeMap<(usize, usize), BigRational>>,
}

impl FlowChart {
    pub fn new(shape: GridShape) -> Self {
        let d = shape.ndim();
        Self {
            shape,
            families: vec![BTreeMap::new(); d],
        }
    }

    pub fn shape(&self) -> &GridShape {
        &self.shape
    }

    pub fn add(&mut self, axis: usize, from: usize, b: usize, value: BigRational) -> Result<(), TransportError> {
        let d = self.shape.ndim();
        if axis >= d || from >= self.shape.len() || b >= self.shape.dims()[axis] {
            return Err(TransportError::InconsistentFlows(format!(
                "entry (axis {axis}, node {from}, value {b}) out of range"
            )));
        }
        if value.is_negative() {
            return Err(TransportError::InconsistentFlows(format!("negative flow {value}")));
        }
        add_entry(&mut self.families[axis], (from, b), value);
        Ok(())
    }

    pub fn family(&self, axis: usize) -> &BTreeMap<(usize, usize), BigRational> {
        &self.families[axis]
    }

    /// Layer-local index of the node reached from `from` by setting `axis`
    /// to `b`.
    fn target_of(&self, strides: &[usize], axis: usize, from: usize, b: usize) -> usize {
        let n_axis = self.shape.dims()[axis];
        let a = (from / strides[axis]) % n_axis;
        from - a * strides[axis] + b * strides[axis]
    }

    /// Mass leaving each layer-`axis` node through family `axis`.
    fn outflow(&self, axis: usize) -> Vec<BigRational> {
        let mut out = vec![BigRational::zero(); self.shape.len()];
        for (&(m, _), v) in &self.families[axis] {
            out[m] += v;
        }
        out
    }

    /// Mass entering each layer-`axis + 1` node through family `axis`.
    fn inflow(&self, axis: usize) -> Vec<BigRational> {
        let strides = self.shape.strides();
        let mut out = vec![BigRational::zero(); self.shape.len()];
        for (&(m, b), v) in &self.families[axis] {
            out[self.target_of(&strides, axis, m, b)] += v;
        }
        out
    }

    /// Source marginal (outflow of the first family).
    pub fn source_marginal(&self) -> Vec<BigRational> {
        self.outflow(0)
    }

    /// Target marginal (inflow of the last family).
    pub fn target_marginal(&self) -> Vec<BigRational> {
        self.inflow(self.shape.ndim() - 1)
    }

    /// Checks conservation at every intermediate layer.
    pub fn check_connected(&self) -> Result<(), TransportError> {
        for axis in 0..self.shape.ndim().saturating_sub(1) {
            let (inflow, outflow) = (self.inflow(axis), self.outflow(axis + 1));
            if let Some(m) = (0..inflow.len()).find(|&m| inflow[m] != outflow[m]) {
                return Err(TransportError::InconsistentFlows(format!(
                    "layer {} node {m}: inflow {} but outflow {}",
                    axis + 1,
                    inflow[m],
                    outflow[m]
                )));
            }
        }
        Ok(())
    }

    /// Checks that the chart is a feasible flow from `mu` to `nu`.
    pub fn check(&self, mu: &IntegerHistogram, nu: &IntegerHistogram) -> Result<(), TransportError> {
        self.check_connected()?;
        for (side, marginal, hist) in [
            ("source", self.source_marginal(), mu),
            ("target", self.target_marginal(), nu),
        ] {
            for (i, (got, &want)) in marginal.iter().zip(hist.mass()).enumerate() {
                if *got != rational(want) {
                    return Err(TransportError::InconsistentFlows(format!(
                        "{side} marginal at bin {i} is {got}, expected {want}"
                    )));
                }
            }
        }
        Ok(())
    }
}

/// `sum_i sum table_i(a_i, b_i) * f_i`.
pub fn flow_cost(flows: &FlowChart, cost: &SeparableCost) -> Result<BigRational, TransportError> {
    if !cost.matches(&flows.shape) {
        return Err(TransportError::ShapeMismatch(format!(
            "cost tables {:?} do not match grid {}",
            cost.dims(),
            flows.shape
        )));
    }
    let strides = flows.shape.strides();
    let mut total = BigRational::zero();
    for (axis, family) in flows.families.iter().enumerate() {
        let n_axis = flows.shape.dims()[axis];
        for (&(m, b), v) in family {
            let a = (m / strides[axis]) % n_axis;
            total += v * rational(cost.axis(axis, a, b));
        }
    }
    Ok(total)
}

/// Marginalizes a coupling onto per-axis flows: each unit sent from `x` to
/// `y` moves through `y` on axes already processed and `x` on the rest.
pub fn plan_to_flows(plan: &TransportPlan) -> FlowChart {
    let shape = plan.shape.clone();
    let strides = shape.strides();
    let d = shape.ndim();
    let mut chart = FlowChart::new(shape);
    let mut cy = vec![0usize; d];
    for (&(x, y), m) in &plan.entries {
        chart.shape.coords_into(y, &mut cy);
        let mut node = x;
        for axis in 0..d {
            let n_axis = chart.shape.dims()[axis];
            let a = (node / strides[axis]) % n_axis;
            add_entry(&mut chart.families[axis], (node, cy[axis]), m.clone());
            node = node - a * strides[axis] + cy[axis] * strides[axis];
        }
        debug_assert_eq!(node, y);
    }
    chart
}

/// Rebuilds a coupling from a flow chart by gluing. The running measure
/// couples source bins with the nodes of one layer; each step spreads the
/// mass sitting at a node over its outgoing flows in proportion to their
/// values.
pub fn flows_to_plan(flows: &FlowChart) -> Result<TransportPlan, TransportError> {
    flows.check_connected()?;
    let shape = flows.shape.clone();
    let strides = shape.strides();
    let d = shape.ndim();

    // current[node] = list of (source bin, mass) pairs reaching `node`
    let mut current: BTreeMap<usize, BTreeMap<usize, BigRational>> = BTreeMap::new();
    for (&(x, b), v) in &flows.families[0] {
        let node = flows.target_of(&strides, 0, x, b);
        add_entry(current.entry(node).or_default(), x, v.clone());
    }
    for axis in 1..d {
        let family = &flows.families[axis];
        let outflow = flows.outflow(axis);
        let mut next: BTreeMap<usize, BTreeMap<usize, BigRational>> = BTreeMap::new();
        for (node, sources) in &current {
            let total = &outflow[*node];
            if total.is_zero() {
                continue;
            }
            for (&(_, b), v) in family.range((*node, 0)..(*node + 1, 0)) {
                let share = v / total;
                let to = flows.target_of(&strides, axis, *node, b);
                let bucket = next.entry(to).or_default();
                for (&x, m) in sources {
                    add_entry(bucket, x, m * &share);
                }
            }
        }
        current = next;
    }

    let mut plan = TransportPlan::new(shape);
    for (y, sources) in current {
        for (x, m) in sources {
            add_entry(&mut plan.entries, (x, y), m);
        }
    }
    Ok(plan)
}

/// Reads the per-axis flow families off an optimal multipartite solution.
pub fn flows_from_solution(net: &FlowNetwork, sol: &FlowSolution) -> Result<FlowChart, TransportError> {
    let Layout::Multipartite { shape, .. } = net.layout() else {
        return Err(TransportError::WrongLayout("multipartite"));
    };
    let mut chart = FlowChart::new(shape.clone());
    for (e, &f) in sol.flow.iter().enumerate() {
        if f == 0 {
            continue;
        }
        let (axis, from, b) = net.decode_multipartite_arc(e).expect("arc id in range");
        add_entry(&mut chart.families[axis], (from, b), rational(f));
    }
    Ok(chart)
}

/// Reads the coupling off an optimal bipartite solution.
pub fn plan_from_bipartite(net: &FlowNetwork, sol: &FlowSolution) -> Result<TransportPlan, TransportError> {
    let Layout::Bipartite { shape } = net.layout() else {
        return Err(TransportError::WrongLayout("bipartite"));
    };
    let n = shape.len();
    let mut plan = TransportPlan::new(shape.clone());
    for (e, &f) in sol.flow.iter().enumerate() {
        if f != 0 {
            add_entry(&mut plan.entries, (e / n, e % n), rational(f));
        }
    }
    Ok(plan)
}

/// Outcome of one exact solve between two integer histograms.
#[derive(Debug, Clone)]
pub struct ExactSolve {
    pub method: Method,
    pub objective: i64,
    pub total: i64,
    pub nodes: usize,
    pub arcs: usize,
    pub stats: SolveStats,
    pub plan: Option<TransportPlan>,
}

/// Builds the chosen network for `mu`, `nu` and `cost` and solves it. The
/// plan is reconstructed only when `want_plan` is set.
pub fn solve_exact(
    mu: &IntegerHistogram,
    nu: &IntegerHistogram,
    cost: &SeparableCost,
    method: Method,
    want_plan: bool,
    options: &SolverOptions,
) -> Result<ExactSolve, TransportError> {
    let net = match method {
        Method::Bipartite => build_bipartite(mu, nu, cost)?,
        Method::Multipartite => build_multipartite(mu, nu, cost)?,
    };
    let sol = solve_with(&net, options);
    if !sol.is_optimal() {
        return Err(TransportError::Infeasible);
    }
    let plan = if want_plan {
        Some(match method {
            Method::Bipartite => plan_from_bipartite(&net, &sol)?,
            Method::Multipartite => flows_to_plan(&flows_from_solution(&net, &sol)?)?,
        })
    } else {
        None
    };
    Ok(ExactSolve {
        method,
        objective: sol.objective,
        total: mu.total(),
        nodes: net.node_count(),
        arcs: net.arc_count(),
        stats: sol.stats,
        plan,
    })
}

#[derive(Debug, Clone)]
pub struct WassersteinOptions {
    pub method: Method,
    pub target_total: i64,
    /// Uniform grid spacing; distances scale linearly with it.
    pub spacing: f64,
    pub want_plan: bool,
    pub solver: SolverOptions,
}

impl Default for WassersteinOptions {
    fn default() -> Self {
        Self {
            method: Method::Multipartite,
            target_total: DEFAULT_TARGET_TOTAL,
            spacing: 1.0,
            want_plan: false,
            solver: SolverOptions::default(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct DistanceResult {
    /// Exact optimal objective on the integerized inputs.
    pub cost: i64,
    /// Mass both inputs were scaled to.
    pub total: i64,
    pub p: u32,
    /// `spacing * (cost / total)^(1/p)`.
    pub distance: f64,
    pub nodes: usize,
    pub arcs: usize,
    pub elapsed: Duration,
    pub pivots: u64,
    pub plan: Option<TransportPlan>,
}

pub fn wasserstein(
    mu: &Histogram,
    nu: &Histogram,
    p: u32,
    method: Method,
    target_total: i64,
) -> Result<DistanceResult, TransportError> {
    wasserstein_with(
        mu,
        nu,
        p,
        &WassersteinOptions {
            method,
            target_total,
            ..WassersteinOptions::default()
        },
    )
}

/// Order-`p` Kantorovich-Wasserstein distance under the `|a - b|^p` cost on
/// every axis.
pub fn wasserstein_with(
    mu: &Histogram,
    nu: &Histogram,
    p: u32,
    options: &WassersteinOptions,
) -> Result<DistanceResult, TransportError> {
    if mu.shape() != nu.shape() {
        return Err(TransportError::ShapeMismatch(format!("{} vs {}", mu.shape(), nu.shape())));
    }
    if !(options.spacing.is_finite() && options.spacing > 0.0) {
        return Err(TransportError::InvalidSpacing(options.spacing));
    }
    let cost = SeparableCost::power(mu.shape(), p)?;
    let mu_i = mu.integerize(options.target_total)?;
    let nu_i = nu.integerize(options.target_total)?;
    let solved = solve_exact(&mu_i, &nu_i, &cost, options.method, options.want_plan, &options.solver)?;
    let distance = options.spacing * (solved.objective as f64 / solved.total as f64).powf(1.0 / p as f64);
    Ok(DistanceResult {
        cost: solved.objective,
        total: solved.total,
        p,
        distance,
        nodes: solved.nodes,
        arcs: solved.arcs,
        elapsed: solved.stats.elapsed,
        pivots: solved.stats.pivots,
        plan: solved.plan,
    })
}

/// Optimal transport cost divided by the transported mass, at the default
/// integerization target.
pub fn emd(mu: &Histogram, nu: &Histogram, cost: &SeparableCost) -> Result<f64, TransportError> {
    emd_with_total(mu, nu, cost, DEFAULT_TARGET_TOTAL)
}

pub fn emd_with_total(
    mu: &Histogram,
    nu: &Histogram,
    cost: &SeparableCost,
    target_total: i64,
) -> Result<f64, TransportError> {
    if mu.shape() != nu.shape() {
        return Err(TransportError::ShapeMismatch(format!("{} vs {}", mu.shape(), nu.shape())));
    }
    let mu_i = mu.integerize(target_total)?;
    let nu_i = nu.integerize(target_total)?;
    let solved = solve_exact(&mu_i, &nu_i, cost, Method::Multipartite, false, &SolverOptions::default())?;
    Ok(solved.objective as f64 / solved.total as f64)
}
