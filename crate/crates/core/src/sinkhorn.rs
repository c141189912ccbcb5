//! Entropic-regularization baselines.
//!
//! Both variants iterate `u = a / (K v)`, `v = b / (K^T u)` on the kernel
//! `K = exp(-lambda * C / s)`, where `C` is the separable ground cost and `s`
//! a normalization constant (the median entry of `C` by default). Larger
//! `lambda` means less smoothing.
//!
//! * [`DenseKernel`] materializes `K` restricted to the supports of the two
//!   histograms.
//! * [`KroneckerKernel`] stores one `N_k x N_k` factor per axis and applies
//!   `K` as a sequence of per-axis products; on a 2-D grid this is
//!   `K_1 V K_2^T` with `V` the scaling vector reshaped to the grid.
//!
//! Scaling vectors are kept on the full grid, zero outside the support, so
//! the two variants can be compared entry by entry.
//!
//! The final coupling is rounded onto the transport polytope before its
//! cost is evaluated, so the reported value is a genuine upper bound on the
//! optimum.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::cost::SeparableCost;
use crate::histogram::{GridShape, Histogram};

#[derive(Debug, Error, PartialEq)]
pub enum SinkhornError {
    #[error("lambda must be positive and finite, got {0}")]
    InvalidLambda(f64),
    #[error("marginal tolerance must be positive, got {0}")]
    InvalidTolerance(f64),
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("kernel underflow at iteration {iteration}; lower lambda")]
    NumericalUnderflow { iteration: usize },
    #[error("grid-structured kernel needs a {expected}-dimensional grid, got {found}")]
    Dimension { expected: usize, found: usize },
    #[error("the exact optimum is zero, relative gap undefined")]
    ZeroOptimum,
    #[error("unknown cost normalization `{0}` (expected none, median or max)")]
    UnknownNormalization(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CostNormalization {
    None,
    #[default]
    Median,
    Max,
}

impl FromStr for CostNormalization {
    type Err = SinkhornError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "none" => Ok(Self::None),
            "median" => Ok(Self::Median),
            "max" => Ok(Self::Max),
            other => Err(SinkhornError::UnknownNormalization(other.to_string())),
        }
    }
}

impl fmt::Display for CostNormalization {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::None => "none",
            Self::Median => "median",
            Self::Max => "max",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SinkhornConfig {
    pub lambda: f64,
    pub max_iters: usize,
    /// Stop once the L1 violation of the source marginal drops below this.
    pub marginal_tol: f64,
    /// Kernel products at or below this value count as underflow.
    pub underflow_floor: f64,
    pub cost_normalization: CostNormalization,
}

impl Default for SinkhornConfig {
    fn default() -> Self {
        Self {
            lambda: 1.0,
            max_iters: 10_000,
            marginal_tol: 1e-9,
            underflow_floor: 1e-300,
            cost_normalization: CostNormalization::Median,
        }
    }
}

impl SinkhornConfig {
    fn validate(&self) -> Result<(), SinkhornError> {
        if !(self.lambda.is_finite() && self.lambda > 0.0) {
            return Err(SinkhornError::InvalidLambda(self.lambda));
        }
        if !(self.marginal_tol > 0.0) {
            return Err(SinkhornError::InvalidTolerance(self.marginal_tol));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SinkhornResult {
    /// Cost of the rounded feasible coupling, in the units of the cost tables
    /// and for unit total mass.
    pub upper_bound: f64,
    pub iterations: usize,
    pub converged: bool,
    pub marginal_error: f64,
    /// Number of `f64` kernel entries held in memory.
    pub kernel_entries: usize,
}

/// Median over all `n^2` entries of the ground-cost matrix, computed exactly
/// from the per-axis value counts. For an even count the two middle entries
/// are averaged.
pub fn cost_median(cost: &SeparableCost) -> f64 {
    let mut dist: BTreeMap<i64, u128> = BTreeMap::from([(0, 1)]);
    for k in 0..cost.ndim() {
        let mut axis: BTreeMap<i64, u128> = BTreeMap::new();
        for &v in cost.table(k) {
            *axis.entry(v).or_default() += 1;
        }
        let mut next: BTreeMap<i64, u128> = BTreeMap::new();
        for (&s, &cs) in &dist {
            for (&v, &cv) in &axis {
                *next.entry(s + v).or_default() += cs * cv;
            }
        }
        dist = next;
    }
    let count: u128 = dist.values().sum();
    let kth = |k: u128| {
        let mut seen = 0;
        for (&v, &c) in &dist {
            seen += c;
            if seen > k {
                return v;
            }
        }
        unreachable!("k < count")
    };
    if count % 2 == 1 {
        kth(count / 2) as f64
    } else {
        (kth(count / 2 - 1) as f64 + kth(count / 2) as f64) / 2.0
    }
}

fn normalization(cost: &SeparableCost, mode: CostNormalization) -> f64 {
    let s = match mode {
        CostNormalization::None => 1.0,
        CostNormalization::Median => cost_median(cost),
        CostNormalization::Max => cost.max_ground_cost() as f64,
    };
    // an all-zero cost has nothing to normalize
    if s > 0.0 {
        s
    } else {
        1.0
    }
}

/// A Gibbs kernel acting on full-grid vectors.
pub trait Kernel {
    fn len(&self) -> usize;
    /// `out = K v`
    fn apply(&self, v: &[f64], out: &mut [f64]);
    /// `out = K^T u`
    fn apply_transpose(&self, u: &[f64], out: &mut [f64]);
    /// `sum_{x,y} u_x K(x,y) C(x,y) v_y`
    fn weighted_cost(&self, u: &[f64], v: &[f64]) -> f64;
    fn stored_entries(&self) -> usize;
}

/// `K` restricted to `support(a) x support(b)`, stored densely.
#[derive(Debug, Clone)]
pub struct DenseKernel {
    n: usize,
    rows: Vec<usize>,
    cols: Vec<usize>,
    k: Vec<f64>,
    c: Vec<f64>,
}

impl DenseKernel {
    pub fn new(cost: &SeparableCost, shape: &GridShape, a: &[f64], b: &[f64], lambda: f64, scale: f64) -> Self {
        let rows: Vec<usize> = (0..a.len()).filter(|&i| a[i] > 0.0).collect();
        let cols: Vec<usize> = (0..b.len()).filter(|&j| b[j] > 0.0).collect();
        let d = shape.ndim();
        let (mut cx, mut cy) = (vec![0; d], vec![0; d]);
        let mut k = Vec::with_capacity(rows.len() * cols.len());
        let mut c = Vec::with_capacity(rows.len() * cols.len());
        for &x in &rows {
            shape.coords_into(x, &mut cx);
            for &y in &cols {
                shape.coords_into(y, &mut cy);
                let cxy = cost.ground_cost_unchecked(&cx, &cy) as f64;
                c.push(cxy);
                k.push((-lambda * cxy / scale).exp());
            }
        }
        Self {
            n: shape.len(),
            rows,
            cols,
            k,
            c,
        }
    }
}

impl Kernel for DenseKernel {
    fn len(&self) -> usize {
        self.n
    }

    fn apply(&self, v: &[f64], out: &mut [f64]) {
        out.fill(0.0);
        let m = self.cols.len();
        for (i, &x) in self.rows.iter().enumerate() {
            let row = &self.k[i * m..(i + 1) * m];
            out[x] = row.iter().zip(&self.cols).map(|(k, &y)| k * v[y]).sum();
        }
    }

    fn apply_transpose(&self, u: &[f64], out: &mut [f64]) {
        out.fill(0.0);
        let m = self.cols.len();
        for (i, &x) in self.rows.iter().enumerate() {
            let ux = u[x];
            let row = &self.k[i * m..(i + 1) * m];
            for (k, &y) in row.iter().zip(&self.cols) {
                out[y] += k * ux;
            }
        }
    }

    fn weighted_cost(&self, u: &[f64], v: &[f64]) -> f64 {
        let m = self.cols.len();
        let mut total = 0.0;
        for (i, &x) in self.rows.iter().enumerate() {
            let base = i * m;
            let s: f64 = (0..m).map(|j| self.k[base + j] * self.c[base + j] * v[self.cols[j]]).sum();
            total += u[x] * s;
        }
        total
    }

    fn stored_entries(&self) -> usize {
        self.k.len()
    }
}

/// `K = K_1 (x) K_2 (x) ... (x) K_d`, one factor per axis.
#[derive(Debug, Clone)]
pub struct KroneckerKernel {
    dims: Vec<usize>,
    factors: Vec<Vec<f64>>,
    costs: Vec<Vec<f64>>,
}

impl KroneckerKernel {
    pub fn new(cost: &SeparableCost, lambda: f64, scale: f64) -> Self {
        let dims = cost.dims().to_vec();
        let costs: Vec<Vec<f64>> = (0..dims.len()).map(|k| cost.axis_matrix_f64(k)).collect();
        let factors = costs
            .iter()
            .map(|t| t.iter().map(|&c| (-lambda * c / scale).exp()).collect())
            .collect();
        Self { dims, factors, costs }
    }

    /// Multiplies every factor (or its transpose) into `v`; `hadamard_axis`
    /// swaps in `K_k * C_k` for that axis.
    fn apply_factors(&self, v: &[f64], out: &mut [f64], transpose: bool, hadamard_axis: Option<usize>) {
        let n = v.len();
        let mut cur = v.to_vec();
        let mut next = vec![0.0; n];
        let mut stride = n;
        for (k, &nk) in self.dims.iter().enumerate() {
            stride /= nk;
            let weighted: Vec<f64>;
            let m: &[f64] = if hadamard_axis == Some(k) {
                weighted = self.factors[k].iter().zip(&self.costs[k]).map(|(a, b)| a * b).collect();
                &weighted
            } else {
                &self.factors[k]
            };
            mode_product(m, nk, stride, transpose, &cur, &mut next);
            std::mem::swap(&mut cur, &mut next);
        }
        out.copy_from_slice(&cur);
    }
}

/// `out[o, i, r] = sum_j M[i, j] * x[o, j, r]` along one axis of a
/// row-major tensor, where `r` ranges over `stride` trailing entries.
fn mode_product(m: &[f64], nk: usize, stride: usize, transpose: bool, x: &[f64], out: &mut [f64]) {
    let block = nk * stride;
    for (xb, ob) in x.chunks_exact(block).zip(out.chunks_exact_mut(block)) {
        ob.fill(0.0);
        for i in 0..nk {
            let orow = &mut ob[i * stride..(i + 1) * stride];
            for j in 0..nk {
                let mij = if transpose { m[j * nk + i] } else { m[i * nk + j] };
                if mij == 0.0 {
                    continue;
                }
                for (o, &xv) in orow.iter_mut().zip(&xb[j * stride..(j + 1) * stride]) {
                    *o += mij * xv;
                }
            }
        }
    }
}

impl Kernel for KroneckerKernel {
    fn len(&self) -> usize {
        self.dims.iter().product()
    }

    fn apply(&self, v: &[f64], out: &mut [f64]) {
        self.apply_factors(v, out, false, None);
    }

    fn apply_transpose(&self, u: &[f64], out: &mut [f64]) {
        self.apply_factors(u, out, true, None);
    }

    fn weighted_cost(&self, u: &[f64], v: &[f64]) -> f64 {
        // K * C = sum_k (K_1 (x) .. (K_k * C_k) .. (x) K_d)
        let mut buf = vec![0.0; v.len()];
        let mut total = 0.0;
        for k in 0..self.dims.len() {
            self.apply_factors(v, &mut buf, false, Some(k));
            total += u.iter().zip(&buf).map(|(a, b)| a * b).sum::<f64>();
        }
        total
    }

    fn stored_entries(&self) -> usize {
        self.factors.iter().map(Vec::len).sum()
    }
}

/// Iteration state over a kernel, exposed so callers can step two variants
/// in lockstep.
pub struct SinkhornSolver<'c, K: Kernel> {
    kernel: K,
    cost: &'c SeparableCost,
    a: Vec<f64>,
    b: Vec<f64>,
    u: Vec<f64>,
    v: Vec<f64>,
    kv: Vec<f64>,
    ktu: Vec<f64>,
    floor: f64,
    iterations: usize,
    marginal_error: f64,
}

fn probability_inputs(mu: &Histogram, nu: &Histogram, cost: &SeparableCost) -> Result<(Vec<f64>, Vec<f64>), SinkhornError> {
    if mu.shape() != nu.shape() {
        return Err(SinkhornError::ShapeMismatch(format!("{} vs {}", mu.shape(), nu.shape())));
    }
    if !cost.matches(mu.shape()) {
        return Err(SinkhornError::ShapeMismatch(format!(
            "cost tables {:?} do not match grid {}",
            cost.dims(),
            mu.shape()
        )));
    }
    Ok((mu.normalized(), nu.normalized()))
}

impl<'c> SinkhornSolver<'c, DenseKernel> {
    pub fn dense(
        mu: &Histogram,
        nu: &Histogram,
        cost: &'c SeparableCost,
        cfg: &SinkhornConfig,
    ) -> Result<Self, SinkhornError> {
        cfg.validate()?;
        let (a, b) = probability_inputs(mu, nu, cost)?;
        let scale = normalization(cost, cfg.cost_normalization);
        let kernel = DenseKernel::new(cost, mu.shape(), &a, &b, cfg.lambda, scale);
        Ok(Self::with_kernel(kernel, cost, a, b, cfg))
    }
}

impl<'c> SinkhornSolver<'c, KroneckerKernel> {
    pub fn kronecker(
        mu: &Histogram,
        nu: &Histogram,
        cost: &'c SeparableCost,
        cfg: &SinkhornConfig,
    ) -> Result<Self, SinkhornError> {
        cfg.validate()?;
        let (a, b) = probability_inputs(mu, nu, cost)?;
        let scale = normalization(cost, cfg.cost_normalization);
        let kernel = KroneckerKernel::new(cost, cfg.lambda, scale);
        Ok(Self::with_kernel(kernel, cost, a, b, cfg))
    }
}

impl<'c, K: Kernel> SinkhornSolver<'c, K> {
    pub fn with_kernel(kernel: K, cost: &'c SeparableCost, a: Vec<f64>, b: Vec<f64>, cfg: &SinkhornConfig) -> Self {
        let n = a.len();
        let v: Vec<f64> = b.iter().map(|&m| if m > 0.0 { 1.0 } else { 0.0 }).collect();
        let mut kv = vec![0.0; n];
        kernel.apply(&v, &mut kv);
        Self {
            kernel,
            cost,
            a,
            b,
            u: vec![0.0; n],
            v,
            kv,
            ktu: vec![0.0; n],
            floor: cfg.underflow_floor,
            iterations: 0,
            marginal_error: f64::INFINITY,
        }
    }

    pub fn u(&self) -> &[f64] {
        &self.u
    }

    pub fn v(&self) -> &[f64] {
        &self.v
    }

    pub fn iterations(&self) -> usize {
        self.iterations
    }

    /// L1 violation of the source marginal after the last step; the target
    /// marginal is matched exactly by construction.
    pub fn marginal_error(&self) -> f64 {
        self.marginal_error
    }

    pub fn kernel(&self) -> &K {
        &self.kernel
    }

    /// One `u`, `v` update. Returns the new marginal error.
    pub fn step(&mut self) -> Result<f64, SinkhornError> {
        let iteration = self.iterations;
        let underflow = SinkhornError::NumericalUnderflow { iteration };
        for i in 0..self.a.len() {
            self.u[i] = if self.a[i] > 0.0 {
                let kv = self.kv[i];
                if !(kv > self.floor) || !kv.is_finite() {
                    return Err(underflow);
                }
                self.a[i] / kv
            } else {
                0.0
            };
        }
        self.kernel.apply_transpose(&self.u, &mut self.ktu);
        for j in 0..self.b.len() {
            self.v[j] = if self.b[j] > 0.0 {
                let ktu = self.ktu[j];
                if !(ktu > self.floor) || !ktu.is_finite() {
                    return Err(underflow);
                }
                self.b[j] / ktu
            } else {
                0.0
            };
        }
        self.kernel.apply(&self.v, &mut self.kv);
        self.iterations += 1;
        self.marginal_error = self
            .u
            .iter()
            .zip(&self.kv)
            .zip(&self.a)
            .map(|((u, kv), a)| (u * kv - a).abs())
            .sum();
        if !self.marginal_error.is_finite() {
            return Err(underflow);
        }
        Ok(self.marginal_error)
    }

    /// Iterates until the marginal tolerance or the iteration cap is hit.
    pub fn run(mut self, cfg: &SinkhornConfig) -> Result<SinkhornResult, SinkhornError> {
        let mut converged = false;
        while self.iterations < cfg.max_iters {
            if self.step()? < cfg.marginal_tol {
                converged = true;
                break;
            }
        }
        let upper_bound = self.rounded_cost();
        Ok(SinkhornResult {
            upper_bound,
            iterations: self.iterations,
            converged,
            marginal_error: self.marginal_error,
            kernel_entries: self.kernel.stored_entries(),
        })
    }

    /// Cost of `diag(u) K diag(v)` after rounding onto the polytope with
    /// marginals `a`, `b`: shrink rows that exceed `a`, then columns that
    /// exceed `b`, then add the rank-one residual `e_r e_c^T / |e_r|_1`.
    pub fn rounded_cost(&self) -> f64 {
        let n = self.a.len();
        let mut buf = vec![0.0; n];

        self.kernel.apply(&self.v, &mut buf);
        let u: Vec<f64> = (0..n)
            .map(|i| {
                let r = self.u[i] * buf[i];
                if r > self.a[i] {
                    self.u[i] * self.a[i] / r
                } else {
                    self.u[i]
                }
            })
            .collect();
        self.kernel.apply_transpose(&u, &mut buf);
        let v: Vec<f64> = (0..n)
            .map(|j| {
                let c = self.v[j] * buf[j];
                if c > self.b[j] {
                    self.v[j] * self.b[j] / c
                } else {
                    self.v[j]
                }
            })
            .collect();

        self.kernel.apply(&v, &mut buf);
        let err_r: Vec<f64> = (0..n).map(|i| (self.a[i] - u[i] * buf[i]).max(0.0)).collect();
        self.kernel.apply_transpose(&u, &mut buf);
        let err_c: Vec<f64> = (0..n).map(|j| (self.b[j] - v[j] * buf[j]).max(0.0)).collect();

        let mut total = self.kernel.weighted_cost(&u, &v);
        let mass: f64 = err_r.iter().sum();
        if mass > 0.0 {
            total += separable_bilinear(self.cost, &err_r, &err_c) / mass;
        }
        total
    }
}

/// `sum_{x,y} r_x C(x,y) c_y` for a separable `C`, through per-axis
/// marginals of `r` and `c`.
fn separable_bilinear(cost: &SeparableCost, r: &[f64], c: &[f64]) -> f64 {
    let dims = cost.dims();
    let n: usize = dims.iter().product();
    let mut total = 0.0;
    let mut stride = n;
    for (k, &nk) in dims.iter().enumerate() {
        stride /= nk;
        let marginal = |w: &[f64]| {
            let mut m = vec![0.0; nk];
            for (idx, &x) in w.iter().enumerate() {
                m[(idx / stride) % nk] += x;
            }
            m
        };
        let (mr, mc) = (marginal(r), marginal(c));
        let mut s = 0.0;
        for a in 0..nk {
            for b in 0..nk {
                s += mr[a] * cost.axis(k, a, b) as f64 * mc[b];
            }
        }
        total += s;
    }
    total
}

/// Sinkhorn with the dense support-restricted kernel.
pub fn sinkhorn(
    mu: &Histogram,
    nu: &Histogram,
    cost: &SeparableCost,
    cfg: &SinkhornConfig,
) -> Result<SinkhornResult, SinkhornError> {
    SinkhornSolver::dense(mu, nu, cost, cfg)?.run(cfg)
}

/// Sinkhorn with the per-axis factored kernel, on grids of any dimension.
pub fn improved_sinkhorn(
    mu: &Histogram,
    nu: &Histogram,
    cost: &SeparableCost,
    cfg: &SinkhornConfig,
) -> Result<SinkhornResult, SinkhornError> {
    SinkhornSolver::kronecker(mu, nu, cost, cfg)?.run(cfg)
}

/// [`improved_sinkhorn`] restricted to images.
pub fn improved_sinkhorn_2d(
    mu: &Histogram,
    nu: &Histogram,
    cost: &SeparableCost,
    cfg: &SinkhornConfig,
) -> Result<SinkhornResult, SinkhornError> {
    let d = mu.shape().ndim();
    if d != 2 {
        return Err(SinkhornError::Dimension { expected: 2, found: d });
    }
    improved_sinkhorn(mu, nu, cost, cfg)
}

/// Relative excess of an upper bound over the optimum, in percent.
pub fn gap(exact_cost: f64, ub: f64) -> Result<f64, SinkhornError> {
    if exact_cost == 0.0 {
        return Err(SinkhornError::ZeroOptimum);
    }
    Ok((ub - exact_cost) / exact_cost * 100.0)
}
