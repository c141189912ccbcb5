//! Min-cost-flow instances for transporting one histogram onto another.
//!
//! Two constructions are provided:
//!
//! * [`build_bipartite`]: one arc per (source bin, target bin) pair, `2n`
//!   nodes and `n^2` arcs.
//! * [`build_multipartite`]: `d + 1` copies of the grid. Layer `l` holds the
//!   mixed coordinate `(b_1..b_l, a_{l+1}..a_d)` in which the first `l` axes
//!   have already reached their target value. Arcs between layer `l - 1` and
//!   layer `l` change coordinate `l` only and cost `table_l(a_l, b_l)`, so a
//!   path from layer 0 to layer `d` moves one axis at a time and its cost is
//!   the full separable ground cost. The network has `(d + 1) n` nodes and
//!   `n * sum_k N_k` arcs.
//!
//! Arcs are stored as flat arrays (struct of arrays). Multipartite arcs are
//! laid out layer by layer, and within a layer by source node then target
//! value, so an arc id decodes arithmetically.

use std::io::{self, Write};

use thiserror::Error;

use crate::cost::SeparableCost;
use crate::histogram::{GridShape, IntegerHistogram};

#[derive(Debug, Error)]
pub enum BuildError {
    #[error("histogram totals differ: {mu} vs {nu}")]
    UnbalancedTotals { mu: i64, nu: i64 },
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("max ground cost {max_cost} times total mass {total} overflows 64-bit objective")]
    Overflow { max_cost: i64, total: i64 },
    #[error("network too large: {0}")]
    TooLarge(String),
    #[error("invalid network: {0}")]
    InvalidNetwork(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Layout {
    General,
    Bipartite { shape: GridShape },
    Multipartite { shape: GridShape, layer_offsets: Vec<usize> },
}

/// Uncapacitated min-cost-flow instance. Positive supply is a source,
/// negative supply a sink.
#[derive(Debug, Clone)]
pub struct FlowNetwork {
    node_count: usize,
    tails: Vec<u32>,
    heads: Vec<u32>,
    costs: Vec<i64>,
    supply: Vec<i64>,
    layout: Layout,
}

impl FlowNetwork {
    /// A general network. Supplies must sum to zero, costs must be
    /// nonnegative, and self-loops are rejected.
    pub fn new(node_count: usize, arcs: &[(usize, usize, i64)], supply: Vec<i64>) -> Result<Self, BuildError> {
        if node_count >= u32::MAX as usize {
            return Err(BuildError::TooLarge(format!("{node_count} nodes")));
        }
        if supply.len() != node_count {
            return Err(BuildError::InvalidNetwork(format!(
                "{} supplies for {node_count} nodes",
                supply.len()
            )));
        }
        let mut tails = Vec::with_capacity(arcs.len());
        let mut heads = Vec::with_capacity(arcs.len());
        let mut costs = Vec::with_capacity(arcs.len());
        for (i, &(t, h, c)) in arcs.iter().enumerate() {
            if t >= node_count || h >= node_count {
                return Err(BuildError::InvalidNetwork(format!("arc {i} has an endpoint out of range")));
            }
            if t == h {
                return Err(BuildError::InvalidNetwork(format!("arc {i} is a self-loop")));
            }
            if c < 0 {
                return Err(BuildError::InvalidNetwork(format!("arc {i} has negative cost {c}")));
            }
            tails.push(t as u32);
            heads.push(h as u32);
            costs.push(c);
        }
        let net = Self {
            node_count,
            tails,
            heads,
            costs,
            supply,
            layout: Layout::General,
        };
        net.check_balanced()?;
        Ok(net)
    }

    fn check_balanced(&self) -> Result<(), BuildError> {
        let sum = self.supply.iter().try_fold(0i64, |acc, &s| acc.checked_add(s));
        match sum {
            Some(0) => Ok(()),
            Some(s) => Err(BuildError::InvalidNetwork(format!("supplies sum to {s}, not 0"))),
            None => Err(BuildError::InvalidNetwork("supply sum overflows".into())),
        }
    }

    pub fn node_count(&self) -> usize {
        self.node_count
    }

    pub fn arc_count(&self) -> usize {
        self.costs.len()
    }

    pub fn tails(&self) -> &[u32] {
        &self.tails
    }

    pub fn heads(&self) -> &[u32] {
        &self.heads
    }

    pub fn costs(&self) -> &[i64] {
        &self.costs
    }

    pub fn supply(&self) -> &[i64] {
        &self.supply
    }

    pub fn layout(&self) -> &Layout {
        &self.layout
    }

    pub fn arc(&self, e: usize) -> (usize, usize, i64) {
        (self.tails[e] as usize, self.heads[e] as usize, self.costs[e])
    }

    pub fn total_supply(&self) -> i64 {
        self.supply.iter().filter(|&&s| s > 0).sum()
    }

    pub fn max_cost(&self) -> i64 {
        self.costs.iter().copied().max().unwrap_or(0)
    }

    /// For multipartite networks, maps an arc id to `(axis, source node index
    /// within its layer, new value of the axis)`.
    pub fn decode_multipartite_arc(&self, e: usize) -> Option<(usize, usize, usize)> {
        let Layout::Multipartite { shape, layer_offsets } = &self.layout else {
            return None;
        };
        if e >= self.arc_count() {
            return None;
        }
        let axis = layer_offsets.partition_point(|&off| off <= e) - 1;
        let rem = e - layer_offsets[axis];
        let n_axis = shape.dims()[axis];
        Some((axis, rem / n_axis, rem % n_axis))
    }

    /// Writes the network in DIMACS min-cost-flow format. Arc capacities are
    /// set to the total supply, which no optimal uncapacitated flow exceeds.
    pub fn write_dimacs<W: Write>(&self, mut w: W) -> io::Result<()> {
        let cap = self.total_supply();
        writeln!(w, "c uncapacitated min-cost flow instance")?;
        writeln!(w, "p min {} {}", self.node_count, self.arc_count())?;
        for (i, &s) in self.supply.iter().enumerate() {
            if s != 0 {
                writeln!(w, "n {} {}", i + 1, s)?;
            }
        }
        for e in 0..self.arc_count() {
            writeln!(w, "a {} {} 0 {} {}", self.tails[e] + 1, self.heads[e] + 1, cap, self.costs[e])?;
        }
        Ok(())
    }
}

/// Maps mixed coordinates of one layer of the multipartite network to global
/// node ids. Every layer holds `n` contiguous ids.
#[derive(Debug, Clone)]
pub struct NodeIndexer<'a> {
    shape: &'a GridShape,
    layer: usize,
}

impl<'a> NodeIndexer<'a> {
    pub fn new(shape: &'a GridShape, layer: usize) -> Self {
        assert!(layer <= shape.ndim(), "layer {layer} out of range");
        Self { shape, layer }
    }

    pub fn encode(&self, coords: &[usize]) -> Option<usize> {
        self.shape
            .flat_index(coords)
            .map(|flat| self.layer * self.shape.len() + flat)
    }

    pub fn decode(&self, id: usize) -> Option<Vec<usize>> {
        let n = self.shape.len();
        (id / n == self.layer).then(|| self.shape.coords(id % n))
    }
}

/// `(|V|, |A|)` of the bipartite network, without building it.
pub fn bipartite_size(shape: &GridShape) -> (u128, u128) {
    let n = shape.len() as u128;
    (2 * n, n * n)
}

/// `(|V|, |A|)` of the multipartite network, without building it.
pub fn multipartite_size(shape: &GridShape) -> (u128, u128) {
    let n = shape.len() as u128;
    let d = shape.ndim() as u128;
    let sum: u128 = shape.dims().iter().map(|&k| k as u128).sum();
    ((d + 1) * n, n * sum)
}

fn check_inputs(mu: &IntegerHistogram, nu: &IntegerHistogram, cost: &SeparableCost) -> Result<(), BuildError> {
    if mu.shape() != nu.shape() {
        return Err(BuildError::ShapeMismatch(format!("{} vs {}", mu.shape(), nu.shape())));
    }
    if !cost.matches(mu.shape()) {
        return Err(BuildError::ShapeMismatch(format!(
            "cost tables {:?} do not match grid {}",
            cost.dims(),
            mu.shape()
        )));
    }
    if mu.total() != nu.total() {
        return Err(BuildError::UnbalancedTotals {
            mu: mu.total(),
            nu: nu.total(),
        });
    }
    let max_cost = cost.max_ground_cost();
    if max_cost.checked_mul(mu.total()).is_none() {
        return Err(BuildError::Overflow {
            max_cost,
            total: mu.total(),
        });
    }
    Ok(())
}

/// Node ids are stored as `u32`; arc ids index memory.
fn checked_sizes(v: u128, a: u128) -> Result<(usize, usize), BuildError> {
    if v >= u32::MAX as u128 {
        return Err(BuildError::TooLarge(format!("{v} nodes")));
    }
    let a = usize::try_from(a).map_err(|_| BuildError::TooLarge(format!("{a} arcs")))?;
    Ok((v as usize, a))
}

/// Complete bipartite network: supplies `mu` on nodes `0..n`, demands `nu` on
/// nodes `n..2n`, arc `x * n + y` from `x` to `n + y` with the ground cost.
pub fn build_bipartite(
    mu: &IntegerHistogram,
    nu: &IntegerHistogram,
    cost: &SeparableCost,
) -> Result<FlowNetwork, BuildError> {
    check_inputs(mu, nu, cost)?;
    let shape = mu.shape();
    let (v, a) = bipartite_size(shape);
    let (node_count, arc_count) = checked_sizes(v, a)?;
    let n = shape.len();
    let d = shape.ndim();

    let coords: Vec<usize> = (0..n).flat_map(|f| shape.coords(f)).collect();
    let mut tails = Vec::with_capacity(arc_count);
    let mut heads = Vec::with_capacity(arc_count);
    let mut costs = Vec::with_capacity(arc_count);
    for x in 0..n {
        let cx = &coords[x * d..(x + 1) * d];
        for y in 0..n {
            let cy = &coords[y * d..(y + 1) * d];
            tails.push(x as u32);
            heads.push((n + y) as u32);
            costs.push(cost.ground_cost_unchecked(cx, cy));
        }
    }
    let mut supply = Vec::with_capacity(node_count);
    supply.extend_from_slice(mu.mass());
    supply.extend(nu.mass().iter().map(|&m| -m));

    let net = FlowNetwork {
        node_count,
        tails,
        heads,
        costs,
        supply,
        layout: Layout::Bipartite { shape: shape.clone() },
    };
    debug_assert_eq!(net.arc_count(), arc_count);
    net.check_balanced()?;
    Ok(net)
}

/// `(d + 1)`-partite network; see the module docs for the layout.
pub fn build_multipartite(
    mu: &IntegerHistogram,
    nu: &IntegerHistogram,
    cost: &SeparableCost,
) -> Result<FlowNetwork, BuildError> {
    check_inputs(mu, nu, cost)?;
    let shape = mu.shape();
    let (v, a) = multipartite_size(shape);
    let (node_count, arc_count) = checked_sizes(v, a)?;
    let n = shape.len();
    let d = shape.ndim();
    let strides = shape.strides();

    let mut tails = Vec::with_capacity(arc_count);
    let mut heads = Vec::with_capacity(arc_count);
    let mut costs = Vec::with_capacity(arc_count);
    let mut layer_offsets = Vec::with_capacity(d + 1);
    for axis in 0..d {
        layer_offsets.push(tails.len());
        let from_base = axis * n;
        let to_base = (axis + 1) * n;
        let n_axis = shape.dims()[axis];
        let stride = strides[axis];
        for idx in 0..n {
            let a_k = (idx / stride) % n_axis;
            let anchor = idx - a_k * stride;
            for b_k in 0..n_axis {
                tails.push((from_base + idx) as u32);
                heads.push((to_base + anchor + b_k * stride) as u32);
                costs.push(cost.axis(axis, a_k, b_k));
            }
        }
    }
    layer_offsets.push(tails.len());

    let mut supply = vec![0i64; node_count];
    supply[..n].copy_from_slice(mu.mass());
    for (s, &m) in supply[d * n..].iter_mut().zip(nu.mass()) {
        *s = -m;
    }

    let net = FlowNetwork {
        node_count,
        tails,
        heads,
        costs,
        supply,
        layout: Layout::Multipartite {
            shape: shape.clone(),
            layer_offsets,
        },
    };
    debug_assert_eq!(net.arc_count(), arc_count);
    net.check_balanced()?;
    Ok(net)
}
