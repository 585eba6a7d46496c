//! Path algebra over the extended reals and the expected-minimum-cost solvers.
//!
//! Shortest path, logit and NGEV route choice all solve the same fixed point
//! `μ = W ⊗ μ ⊕ e^d`; they differ only in the node-specific `⊕_i` and in the
//! link weights `w_ij`. In every instance `⊗` is ordinary addition on
//! `ℝ ∪ {+∞}`, the zero element is `+∞` and the unit element is `0`.

use std::f64::consts::PI;
use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::network::{sp_distances_to, Graph, LinkId, Network, NodeId};

/// Node scales θ_i and link allocation weights α_ji for one destination
/// (or one OD pair, for origin-specific models).
#[derive(Debug, Clone, PartialEq)]
pub struct NgevParams {
    /// θ_i per node.
    pub theta: Vec<f64>,
    /// α_ji per link ij.
    pub alpha: Vec<f64>,
}

impl NgevParams {
    pub fn new(theta: Vec<f64>, alpha: Vec<f64>) -> Result<Self> {
        if let Some(i) = theta.iter().position(|&t| !(t > 0.0 && t.is_finite())) {
            return Err(Error::Validation(format!(
                "theta at node {i} must be positive, got {}",
                theta[i]
            )));
        }
        if let Some(l) = alpha.iter().position(|&a| !(a >= 0.0 && a.is_finite())) {
            return Err(Error::Validation(format!(
                "alpha on link {l} must be non-negative, got {}",
                alpha[l]
            )));
        }
        Ok(NgevParams { theta, alpha })
    }

    /// Logit parameters: θ_i = θ everywhere and α ≡ 1.
    pub fn logit(graph: &Graph, theta: f64) -> Result<Self> {
        NgevParams::new(vec![theta; graph.node_count()], vec![1.0; graph.link_count()])
    }

    /// Σ_{i∈B(j)} α_ji for every node j.
    pub fn allocation_sums(&self, graph: &Graph) -> Vec<f64> {
        (0..graph.node_count())
            .map(|j| graph.in_links(j).iter().map(|&l| self.alpha[l]).sum())
            .collect()
    }
}

/// Route choice model used to build [`NgevParams`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RouteModel {
    /// θ ≡ 1, α ≡ 1 (logit).
    Model1,
    /// θ_i = D(o)/D(i), α_ji = 1/|B(j)|; origin specific.
    Model2,
    /// θ_i = π/√(3 D(i)), α_ji = 1/|B(j)|.
    Model3,
    /// θ_i = π/√(6 D(i)), α_ji = 1/|B(j)|.
    Model4,
    /// Logit with a given θ.
    Logit(f64),
    /// Deterministic shortest path (all-or-nothing); has no NGEV parameters.
    ShortestPath,
}

impl RouteModel {
    /// True when parameters depend on the origin, so loading runs per OD pair.
    pub fn is_origin_specific(&self) -> bool {
        matches!(self, RouteModel::Model2)
    }

    pub fn name(&self) -> String {
        match self {
            RouteModel::Model1 => "model1".into(),
            RouteModel::Model2 => "model2".into(),
            RouteModel::Model3 => "model3".into(),
            RouteModel::Model4 => "model4".into(),
            RouteModel::Logit(t) => format!("logit({t})"),
            RouteModel::ShortestPath => "sp".into(),
        }
    }
}

/// Builds NGEV parameters for `destination` from its shortest-path distances `sp`.
///
/// θ at the destination (and at nodes that cannot reach it) is set to 1; no
/// choice is ever made there.
pub fn make_params(
    model: RouteModel,
    network: &Network,
    sp: &[f64],
    destination: NodeId,
    origin: Option<NodeId>,
) -> Result<NgevParams> {
    let graph = &network.graph;
    let n = graph.node_count();
    let inverse_indegree = || -> Vec<f64> {
        graph
            .links()
            .map(|(_, j)| 1.0 / graph.in_links(j).len() as f64)
            .collect()
    };
    let scaled = |f: &dyn Fn(f64) -> f64| -> Result<Vec<f64>> {
        (0..n)
            .map(|i| {
                if i == destination || sp[i].is_infinite() {
                    return Ok(1.0);
                }
                if !(sp[i] > 0.0) {
                    return Err(Error::Validation(format!(
                        "shortest-path distance at node {} is {}, expected positive",
                        graph.label(i),
                        sp[i]
                    )));
                }
                Ok(f(sp[i]))
            })
            .collect()
    };
    match model {
        RouteModel::Model1 => NgevParams::logit(graph, 1.0),
        RouteModel::Logit(theta) => NgevParams::logit(graph, theta),
        RouteModel::Model2 => {
            let o = origin.ok_or_else(|| {
                Error::Validation("Model 2 parameters require an origin".into())
            })?;
            let d_o = sp[o];
            if !d_o.is_finite() {
                return Err(Error::Unreachable {
                    origin: o,
                    destination,
                });
            }
            NgevParams::new(scaled(&|d| d_o / d)?, inverse_indegree())
        }
        RouteModel::Model3 => NgevParams::new(scaled(&|d| PI / (3.0 * d).sqrt())?, inverse_indegree()),
        RouteModel::Model4 => NgevParams::new(scaled(&|d| PI / (6.0 * d).sqrt())?, inverse_indegree()),
        RouteModel::ShortestPath => Err(Error::Validation(
            "the shortest-path model has no NGEV parameters".into(),
        )),
    }
}

/// One instance of the path algebra ℝ_path.
#[derive(Debug, Clone, Copy)]
pub enum AlgebraKind<'a> {
    ShortestPath,
    Logit { theta: f64 },
    Ngev(&'a NgevParams),
}

impl AlgebraKind<'_> {
    pub const ZERO: f64 = f64::INFINITY;
    pub const UNIT: f64 = 0.0;

    /// Scale used by `⊕_i`, or `None` for the (min, +) instance.
    #[inline]
    pub fn theta(&self, node: NodeId) -> Option<f64> {
        match self {
            AlgebraKind::ShortestPath => None,
            AlgebraKind::Logit { theta } => Some(*theta),
            AlgebraKind::Ngev(p) => Some(p.theta[node]),
        }
    }

    #[inline]
    pub fn oplus(&self, node: NodeId, x: f64, y: f64) -> f64 {
        self.oplus_all(node, [x, y])
    }

    #[inline]
    pub fn otimes(&self, _node: NodeId, x: f64, y: f64) -> f64 {
        if x == f64::INFINITY || y == f64::INFINITY {
            f64::INFINITY
        } else {
            x + y
        }
    }

    /// `⊕_i` folded over `values`, evaluated as a shifted log-sum-exp.
    #[inline]
    pub fn oplus_all(&self, node: NodeId, values: impl IntoIterator<Item = f64> + Clone) -> f64 {
        let min = values.clone().into_iter().fold(f64::INFINITY, f64::min);
        match self.theta(node) {
            None => min,
            Some(_) if min == f64::INFINITY => f64::INFINITY,
            Some(theta) => {
                let sum: f64 = values
                    .into_iter()
                    .map(|v| (-theta * (v - min)).exp())
                    .sum();
                min - sum.ln() / theta
            }
        }
    }

    /// Link weight w_ij for link `link` with cost `cost`.
    #[inline]
    pub fn weight(&self, graph: &Graph, link: LinkId, cost: f64) -> f64 {
        match self {
            AlgebraKind::Ngev(p) => {
                let a = p.alpha[link];
                if a > 0.0 {
                    cost - a.ln() / p.theta[graph.tail(link)]
                } else {
                    f64::INFINITY
                }
            }
            _ => cost,
        }
    }
}

/// Stopping rule for fixed-point sweeps.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ValueIteration {
    /// Sup-norm change below which iteration stops.
    pub tol: f64,
    pub max_sweeps: usize,
}

impl Default for ValueIteration {
    fn default() -> Self {
        ValueIteration {
            tol: 1e-10,
            max_sweeps: 10_000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Converged {
    pub sweeps: usize,
    pub last_change: f64,
}

/// Repeats `sweep` on `state` until it reports a sup-norm change ≤ `tol`.
///
/// `sweep` updates the state in place (Jacobi or Gauss–Seidel, the caller
/// decides) and returns the largest absolute change over finite entries.
pub fn value_iteration(
    state: &mut [f64],
    opts: ValueIteration,
    what: &'static str,
    mut sweep: impl FnMut(&mut [f64]) -> f64,
) -> Result<Converged> {
    if !(opts.tol > 0.0) {
        return Err(Error::Validation(format!(
            "value-iteration tolerance must be positive, got {}",
            opts.tol
        )));
    }
    let mut last_change = f64::INFINITY;
    for k in 1..=opts.max_sweeps {
        last_change = sweep(state);
        if last_change.is_nan() {
            break;
        }
        if last_change <= opts.tol {
            return Ok(Converged {
                sweeps: k,
                last_change,
            });
        }
    }
    Err(Error::Divergence {
        what,
        iterations: opts.max_sweeps,
        last_change,
    })
}

#[inline]
pub(crate) fn change(old: f64, new: f64) -> f64 {
    if old == new {
        0.0
    } else {
        (new - old).abs()
    }
}

/// Solves `μ = W ⊗ μ ⊕ e^d` for one destination.
///
/// Iteration starts from shortest-path distances (or from `warm_start`, when
/// given, at nodes that reach the destination) and sweeps nodes in increasing
/// distance order, updating in place. Links with `mask[l] == false` are absent.
pub fn expected_min_cost_with(
    graph: &Graph,
    costs: &[f64],
    algebra: AlgebraKind<'_>,
    destination: NodeId,
    mask: Option<&[bool]>,
    warm_start: Option<&[f64]>,
    opts: ValueIteration,
) -> Result<(Vec<f64>, Converged)> {
    let n = graph.node_count();
    let sp = sp_distances_to(graph, costs, destination, mask);
    let mut mu = match warm_start {
        Some(w) => sp
            .iter()
            .zip(w)
            .map(|(&d, &w)| if d.is_finite() && w.is_finite() { w } else { d })
            .collect(),
        None => sp.clone(),
    };
    mu[destination] = 0.0;
    if let AlgebraKind::ShortestPath = algebra {
        return Ok((
            sp,
            Converged {
                sweeps: 0,
                last_change: 0.0,
            },
        ));
    }

    let mut order: Vec<NodeId> = (0..n)
        .filter(|&i| i != destination && sp[i].is_finite())
        .collect();
    order.sort_by(|&a, &b| sp[a].total_cmp(&sp[b]).then(a.cmp(&b)));

    // flattened (weight, head) lists per node in sweep order
    let mut start = Vec::with_capacity(order.len() + 1);
    let mut arcs: Vec<(f64, NodeId)> = Vec::new();
    start.push(0);
    for &i in &order {
        for &l in graph.out_links(i) {
            if mask.is_some_and(|m| !m[l]) {
                continue;
            }
            let j = graph.head(l);
            if sp[j].is_infinite() {
                continue;
            }
            let w = algebra.weight(graph, l, costs[l]);
            if w.is_finite() {
                arcs.push((w, j));
            }
        }
        start.push(arcs.len());
    }

    let converged = value_iteration(&mut mu, opts, "expected minimum cost", |mu| {
        let mut max_change = 0.0f64;
        for (k, &i) in order.iter().enumerate() {
            let node_arcs = &arcs[start[k]..start[k + 1]];
            let new = algebra.oplus_all(i, node_arcs.iter().map(|&(w, j)| w + mu[j]));
            max_change = max_change.max(change(mu[i], new));
            mu[i] = new;
        }
        max_change
    })?;
    Ok((mu, converged))
}

/// Expected minimum costs μ^d under `algebra`, with default iteration settings.
pub fn expected_min_cost(
    network: &Network,
    costs: &[f64],
    algebra: AlgebraKind<'_>,
    destination: NodeId,
) -> Result<Vec<f64>> {
    validate_costs(network, costs)?;
    expected_min_cost_with(
        &network.graph,
        costs,
        algebra,
        destination,
        None,
        None,
        ValueIteration::default(),
    )
    .map(|(mu, _)| mu)
}

pub(crate) fn validate_costs(network: &Network, costs: &[f64]) -> Result<()> {
    if costs.len() != network.link_count() {
        return Err(Error::Validation(format!(
            "expected {} link costs, got {}",
            network.link_count(),
            costs.len()
        )));
    }
    if let Some(l) = costs.iter().position(|&c| !(c > 0.0 && c.is_finite())) {
        return Err(Error::Validation(format!(
            "link {} has non-positive cost {}",
            network.graph.link_name(l),
            costs[l]
        )));
    }
    Ok(())
}

/// Largest `|1 − Σ_j α_ji exp(−θ_i (c_ij + μ_j − μ_i))|` over nodes with finite μ.
pub fn fixed_point_residual(
    graph: &Graph,
    costs: &[f64],
    params: &NgevParams,
    mu: &[f64],
    destination: NodeId,
    mask: Option<&[bool]>,
) -> f64 {
    (0..graph.node_count())
        .filter(|&i| i != destination && mu[i].is_finite())
        .map(|i| {
            let theta = params.theta[i];
            let s: f64 = graph
                .out_links(i)
                .iter()
                .filter(|&&l| mask.map_or(true, |m| m[l]))
                .map(|&l| {
                    let j = graph.head(l);
                    params.alpha[l] * (-theta * (costs[l] + mu[j] - mu[i])).exp()
                })
                .sum();
            (1.0 - s).abs()
        })
        .fold(0.0, f64::max)
}

/// Expected minimum costs keyed by destination, for CSV export.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct MuTable {
    pub entries: Vec<(NodeId, Vec<f64>)>,
}

impl MuTable {
    pub fn get(&self, destination: NodeId) -> Option<&[f64]> {
        self.entries
            .iter()
            .find(|(d, _)| *d == destination)
            .map(|(_, mu)| mu.as_slice())
    }

    /// CSV with columns `node_id,destination_id,mu` (labels are external ids).
    pub fn to_csv(&self, graph: &Graph) -> String {
        let mut out = String::from("node_id,destination_id,mu\n");
        for (d, mu) in &self.entries {
            for (i, v) in mu.iter().enumerate() {
                let _ = writeln!(out, "{},{},{}", graph.label(i), graph.label(*d), v);
            }
        }
        out
    }
}
