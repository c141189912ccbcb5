//! Exact Kantorovich-Wasserstein distances between histograms on regular
//! grids.
//!
//! For separable ground costs `c(x, y) = sum_k table_k(x_k, y_k)`, transporting
//! one `d`-dimensional histogram onto another is an uncapacitated
//! min-cost-flow problem on a `(d + 1)`-partite network where each stage moves
//! mass along a single axis. That network has `(d + 1) n` nodes and
//! `n * sum_k N_k` arcs, against `2n` nodes and `n^2` arcs for the usual
//! complete bipartite formulation, and it has the same optimal value.
//!
//! * [`histogram`]: grids, histograms, loaders and integerization.
//! * [`cost`]: separable per-axis cost tables.
//! * [`graphbuild`]: bipartite and multipartite network construction.
//! * [`netsimplex`]: the exact network simplex solver.
//! * [`transport`]: distances, transport plans and per-axis flow charts.
//! * [`sinkhorn`]: entropic-regularization baselines.
//! * [`oracle`]: independent reference solvers for verification.
//! * [`campaign`]: batch and benchmark runners used by the CLI.

pub mod campaign;
pub mod cost;
pub mod graphbuild;
pub mod histogram;
pub mod netsimplex;
pub mod oracle;
pub mod sinkhorn;
pub mod transport;
