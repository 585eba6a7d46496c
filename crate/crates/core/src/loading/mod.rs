//! Flow-independent network loading.
//!
//! For each commodity (a destination, or an OD pair for origin-specific
//! parameters) the expected minimum costs μ give Markov link-choice
//! probabilities `p_{ij|i}`; the node flows solve `z = Pᵀ z + q` and link
//! flows are `x_ij = p_{ij|i} z_i`.

mod enumerate;
mod probit;

use std::fmt::Write as _;

use rayon::prelude::*;

use crate::algebra::{
    change, expected_min_cost_with, make_params, validate_costs, value_iteration, AlgebraKind,
    NgevParams, RouteModel, ValueIteration,
};
use crate::error::{Error, Result};
use crate::network::{
    modified_demand, shortest_path_tree, sp_distances_to, DemandTable, Graph, Network, NodeId,
};

pub use enumerate::{enumerate_path_flows, enumerate_with_probabilities, PathEnumeration};
pub use probit::{probit_load, ProbitOptions, ProbitRun};

/// Probabilities below this are stored as structural zeros.
pub const PROBABILITY_FLOOR: f64 = 1e-303;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LoadMethod {
    /// Markovian assignment over all feasible (possibly cyclic) paths.
    Mta,
    /// Restrict choices to links that strictly approach the destination.
    Dial,
}

impl LoadMethod {
    pub fn name(&self) -> &'static str {
        match self {
            LoadMethod::Mta => "mta",
            LoadMethod::Dial => "dial",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LoadOptions {
    /// Sweeps for the expected-minimum-cost fixed point.
    pub mu: ValueIteration,
    /// Sweeps for the node-flow system; `tol` is relative to the largest demand.
    pub flow: ValueIteration,
    /// Load commodities on the rayon pool.
    pub parallel: bool,
}

impl Default for LoadOptions {
    fn default() -> Self {
        LoadOptions {
            mu: ValueIteration::default(),
            flow: ValueIteration {
                tol: 1e-13,
                max_sweeps: 100_000,
            },
            parallel: true,
        }
    }
}

/// Demand towards one destination sharing one parameter set.
#[derive(Debug, Clone, PartialEq)]
pub struct Commodity {
    pub destination: NodeId,
    /// Set when the parameters are origin specific.
    pub origin: Option<NodeId>,
    /// q per node; zero at the destination.
    pub demand: Vec<f64>,
    pub params: NgevParams,
}

impl Commodity {
    pub fn modified_demand(&self) -> Vec<f64> {
        modified_demand(&self.demand, self.destination)
    }

    pub fn total_demand(&self) -> f64 {
        self.demand.iter().sum()
    }
}

/// Splits `demand` into commodities with parameters built from shortest-path
/// distances under `reference_costs`.
pub fn build_commodities(
    network: &Network,
    demand: &DemandTable,
    model: RouteModel,
    reference_costs: &[f64],
) -> Result<Vec<Commodity>> {
    validate_costs(network, reference_costs)?;
    let mut out = Vec::new();
    for (d, q) in demand.iter() {
        let sp = sp_distances_to(&network.graph, reference_costs, d, None);
        if let Some(o) = (0..q.len()).find(|&o| q[o] > 0.0 && sp[o].is_infinite()) {
            return Err(Error::Unreachable {
                origin: o,
                destination: d,
            });
        }
        if model.is_origin_specific() {
            for (o, &flow) in q.iter().enumerate() {
                if flow > 0.0 {
                    let mut single = vec![0.0; q.len()];
                    single[o] = flow;
                    out.push(Commodity {
                        destination: d,
                        origin: Some(o),
                        demand: single,
                        params: make_params(model, network, &sp, d, Some(o))?,
                    });
                }
            }
        } else {
            out.push(Commodity {
                destination: d,
                origin: None,
                demand: q.to_vec(),
                params: make_params(model, network, &sp, d, None)?,
            });
        }
    }
    Ok(out)
}

/// Dial's efficient links towards `destination`: D(j) < D(i) strictly.
pub fn efficient_links(graph: &Graph, costs: &[f64], destination: NodeId) -> Vec<bool> {
    let sp = sp_distances_to(graph, costs, destination, None);
    graph
        .links()
        .map(|(i, j)| sp[i].is_finite() && sp[j] < sp[i])
        .collect()
}

/// Per-link conditional choice probabilities p_{ij|i} for one commodity.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbTable {
    pub destination: NodeId,
    pub prob: Vec<f64>,
}

/// p_{ij|i} = α_ji e^{−θ_i(c_ij+μ_j)} / Σ_{j'} α_j'i e^{−θ_i(c_ij'+μ_j')}.
///
/// Nodes with infinite μ and the destination emit no probabilities.
pub fn choice_probabilities(
    graph: &Graph,
    costs: &[f64],
    params: &NgevParams,
    mu: &[f64],
    destination: NodeId,
    mask: Option<&[bool]>,
) -> ProbTable {
    let mut prob = vec![0.0; graph.link_count()];
    let mut exponents = Vec::new();
    for i in 0..graph.node_count() {
        if i == destination || mu[i].is_infinite() {
            continue;
        }
        let theta = params.theta[i];
        exponents.clear();
        let mut best = f64::NEG_INFINITY;
        for &l in graph.out_links(i) {
            let j = graph.head(l);
            if mask.is_some_and(|m| !m[l]) || mu[j].is_infinite() || params.alpha[l] <= 0.0 {
                continue;
            }
            let e = params.alpha[l].ln() - theta * (costs[l] + mu[j]);
            best = best.max(e);
            exponents.push((l, e));
        }
        let total: f64 = exponents.iter().map(|&(_, e)| (e - best).exp()).sum();
        for &(l, e) in &exponents {
            let p = (e - best).exp() / total;
            prob[l] = if p < PROBABILITY_FLOOR { 0.0 } else { p };
        }
    }
    ProbTable { destination, prob }
}

/// Solves `z = Pᵀ z + q` by Gauss–Seidel sweeps in decreasing-μ order.
pub fn solve_node_flows(
    graph: &Graph,
    prob: &ProbTable,
    mu: &[f64],
    demand: &[f64],
    opts: ValueIteration,
) -> Result<Vec<f64>> {
    let n = graph.node_count();
    let d = prob.destination;
    for (i, &q) in demand.iter().enumerate() {
        if q > 0.0 && (i == d || mu[i].is_infinite()) {
            return Err(Error::Unreachable {
                origin: i,
                destination: d,
            });
        }
    }
    let mut order: Vec<NodeId> = (0..n).filter(|&i| mu[i].is_finite()).collect();
    order.sort_by(|&a, &b| mu[b].total_cmp(&mu[a]).then(a.cmp(&b)));

    let mut start = Vec::with_capacity(order.len() + 1);
    let mut arcs: Vec<(f64, NodeId)> = Vec::new();
    start.push(0);
    for &i in &order {
        for &l in graph.in_links(i) {
            let p = prob.prob[l];
            if p > 0.0 {
                arcs.push((p, graph.tail(l)));
            }
        }
        start.push(arcs.len());
    }

    let scale = demand.iter().fold(0.0f64, |m, &q| m.max(q));
    let mut z = vec![0.0; n];
    if scale == 0.0 {
        return Ok(z);
    }
    let opts = ValueIteration {
        tol: opts.tol * scale,
        ..opts
    };
    value_iteration(&mut z, opts, "node flows", |z| {
        let mut max_change = 0.0f64;
        for (k, &i) in order.iter().enumerate() {
            let inflow: f64 = arcs[start[k]..start[k + 1]]
                .iter()
                .map(|&(p, h)| p * z[h])
                .sum();
            let new = demand[i] + inflow;
            max_change = max_change.max(change(z[i], new));
            z[i] = new;
        }
        max_change
    })?;
    Ok(z)
}

/// Everything computed while loading one commodity.
#[derive(Debug, Clone, PartialEq)]
pub struct CommodityLoad {
    pub mu: Vec<f64>,
    pub prob: ProbTable,
    pub node_flow: Vec<f64>,
    pub link_flow: Vec<f64>,
    pub mu_sweeps: usize,
}

/// Loads one commodity on the links allowed by `mask` (all links when `None`).
pub fn load_commodity(
    graph: &Graph,
    costs: &[f64],
    commodity: &Commodity,
    mask: Option<&[bool]>,
    warm_start: Option<&[f64]>,
    opts: &LoadOptions,
) -> Result<CommodityLoad> {
    let d = commodity.destination;
    let (mu, conv) = expected_min_cost_with(
        graph,
        costs,
        AlgebraKind::Ngev(&commodity.params),
        d,
        mask,
        warm_start,
        opts.mu,
    )?;
    let prob = choice_probabilities(graph, costs, &commodity.params, &mu, d, mask);
    let node_flow = solve_node_flows(graph, &prob, &mu, &commodity.demand, opts.flow)?;
    let link_flow = prob
        .prob
        .iter()
        .enumerate()
        .map(|(l, &p)| p * node_flow[graph.tail(l)])
        .collect();
    Ok(CommodityLoad {
        mu,
        prob,
        node_flow,
        link_flow,
        mu_sweeps: conv.sweeps,
    })
}

/// Expected minimum costs only (no flows) for one commodity.
pub fn commodity_mu(
    graph: &Graph,
    costs: &[f64],
    commodity: &Commodity,
    mask: Option<&[bool]>,
    warm_start: Option<&[f64]>,
    opts: &LoadOptions,
) -> Result<Vec<f64>> {
    let (mu, _) = expected_min_cost_with(
        graph,
        costs,
        AlgebraKind::Ngev(&commodity.params),
        commodity.destination,
        mask,
        warm_start,
        opts.mu,
    )?;
    if let Some(o) = (0..mu.len()).find(|&o| commodity.demand[o] > 0.0 && mu[o].is_infinite()) {
        return Err(Error::Unreachable {
            origin: o,
            destination: commodity.destination,
        });
    }
    Ok(mu)
}

/// Link flows x^d for a single destination's demand `q`.
pub fn load(
    network: &Network,
    costs: &[f64],
    params: &NgevParams,
    destination: NodeId,
    demand: &[f64],
    method: LoadMethod,
) -> Result<Vec<f64>> {
    validate_costs(network, costs)?;
    let commodity = Commodity {
        destination,
        origin: None,
        demand: demand.to_vec(),
        params: params.clone(),
    };
    let mask = match method {
        LoadMethod::Mta => None,
        LoadMethod::Dial => Some(efficient_links(&network.graph, costs, destination)),
    };
    load_commodity(
        &network.graph,
        costs,
        &commodity,
        mask.as_deref(),
        None,
        &LoadOptions::default(),
    )
    .map(|r| r.link_flow)
}

/// Per-commodity and aggregate flows, plus the μ used to produce them.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowState {
    /// (destination, origin) per commodity, in loading order.
    pub keys: Vec<(NodeId, Option<NodeId>)>,
    pub link_flows: Vec<Vec<f64>>,
    pub node_flows: Vec<Vec<f64>>,
    pub mu: Vec<Vec<f64>>,
    /// X = Σ_k x^k, summed in commodity order.
    pub aggregate: Vec<f64>,
}

impl FlowState {
    pub fn empty(link_count: usize) -> Self {
        FlowState {
            keys: Vec::new(),
            link_flows: Vec::new(),
            node_flows: Vec::new(),
            mu: Vec::new(),
            aggregate: vec![0.0; link_count],
        }
    }

    fn from_loads(
        keys: Vec<(NodeId, Option<NodeId>)>,
        loads: Vec<CommodityLoad>,
        link_count: usize,
    ) -> Self {
        let mut aggregate = vec![0.0; link_count];
        for r in &loads {
            for (a, x) in aggregate.iter_mut().zip(&r.link_flow) {
                *a += x;
            }
        }
        let mut state = FlowState {
            keys,
            link_flows: Vec::with_capacity(loads.len()),
            node_flows: Vec::with_capacity(loads.len()),
            mu: Vec::with_capacity(loads.len()),
            aggregate,
        };
        for r in loads {
            state.link_flows.push(r.link_flow);
            state.node_flows.push(r.node_flow);
            state.mu.push(r.mu);
        }
        state
    }

    /// Largest |A x^k − q̃^k| over all commodities and nodes.
    pub fn conservation_residual(&self, graph: &Graph, commodities: &[Commodity]) -> f64 {
        self.link_flows
            .iter()
            .zip(commodities)
            .map(|(x, c)| conservation_residual(graph, x, &c.modified_demand()))
            .fold(0.0, f64::max)
    }

    /// CSV rows `link,destination,flow` (one per commodity and link; OD-specific
    /// commodities sharing a destination are summed).
    pub fn to_csv(&self, graph: &Graph) -> String {
        let mut out = String::from("link,tail_id,head_id,destination,flow\n");
        let mut dests: Vec<NodeId> = self.keys.iter().map(|k| k.0).collect();
        dests.dedup();
        for d in dests {
            let mut x = vec![0.0; graph.link_count()];
            for (k, flows) in self.keys.iter().zip(&self.link_flows) {
                if k.0 == d {
                    x.iter_mut().zip(flows).for_each(|(a, b)| *a += b);
                }
            }
            for (l, v) in x.iter().enumerate() {
                let _ = writeln!(
                    out,
                    "{},{},{},{},{}",
                    l,
                    graph.label(graph.tail(l)),
                    graph.label(graph.head(l)),
                    graph.label(d),
                    v
                );
            }
        }
        out
    }

    pub fn aggregate_csv(&self, graph: &Graph) -> String {
        aggregate_csv(graph, &self.aggregate)
    }
}

pub fn aggregate_csv(graph: &Graph, flows: &[f64]) -> String {
    let mut out = String::from("link,tail_id,head_id,flow\n");
    for (l, v) in flows.iter().enumerate() {
        let _ = writeln!(
            out,
            "{},{},{},{}",
            l,
            graph.label(graph.tail(l)),
            graph.label(graph.head(l)),
            v
        );
    }
    out
}

/// Sup-norm of `A x − q̃`.
pub fn conservation_residual(graph: &Graph, link_flow: &[f64], modified_demand: &[f64]) -> f64 {
    let mut balance: Vec<f64> = modified_demand.iter().map(|q| -q).collect();
    for (l, &x) in link_flow.iter().enumerate() {
        balance[graph.tail(l)] += x;
        balance[graph.head(l)] -= x;
    }
    balance.iter().fold(0.0, |m, b| m.max(b.abs()))
}

/// Loads every commodity and aggregates in commodity order.
///
/// `masks[k]`, when present, restricts commodity `k` to the marked links and
/// `warm_start[k]` seeds its value iteration.
pub fn assign_commodities(
    graph: &Graph,
    costs: &[f64],
    commodities: &[Commodity],
    masks: &[Option<Vec<bool>>],
    warm_start: Option<&[Vec<f64>]>,
    opts: &LoadOptions,
) -> Result<FlowState> {
    let run = |k: usize| {
        load_commodity(
            graph,
            costs,
            &commodities[k],
            masks.get(k).and_then(|m| m.as_deref()),
            warm_start.map(|w| w[k].as_slice()),
            opts,
        )
    };
    let loads: Vec<CommodityLoad> = if opts.parallel && commodities.len() > 1 {
        (0..commodities.len()).into_par_iter().map(run).collect::<Result<_>>()?
    } else {
        (0..commodities.len()).map(run).collect::<Result<_>>()?
    };
    let keys = commodities
        .iter()
        .map(|c| (c.destination, c.origin))
        .collect();
    Ok(FlowState::from_loads(keys, loads, graph.link_count()))
}

/// μ for every commodity, without computing flows.
pub fn commodities_mu(
    graph: &Graph,
    costs: &[f64],
    commodities: &[Commodity],
    masks: &[Option<Vec<bool>>],
    warm_start: Option<&[Vec<f64>]>,
    opts: &LoadOptions,
) -> Result<Vec<Vec<f64>>> {
    let run = |k: usize| {
        commodity_mu(
            graph,
            costs,
            &commodities[k],
            masks.get(k).and_then(|m| m.as_deref()),
            warm_start.map(|w| w[k].as_slice()),
            opts,
        )
    };
    if opts.parallel && commodities.len() > 1 {
        (0..commodities.len()).into_par_iter().map(run).collect()
    } else {
        (0..commodities.len()).map(run).collect()
    }
}

/// Stochastic (or all-or-nothing, for [`RouteModel::ShortestPath`]) assignment
/// of a whole demand table at fixed link costs.
///
/// Parameters are built from shortest-path distances under `costs`; Dial masks
/// are computed from the same costs.
pub fn assign_all(
    network: &Network,
    costs: &[f64],
    model: RouteModel,
    demand: &DemandTable,
    method: LoadMethod,
) -> Result<FlowState> {
    assign_all_with(network, costs, model, demand, method, &LoadOptions::default())
}

pub fn assign_all_with(
    network: &Network,
    costs: &[f64],
    model: RouteModel,
    demand: &DemandTable,
    method: LoadMethod,
    opts: &LoadOptions,
) -> Result<FlowState> {
    validate_costs(network, costs)?;
    if demand.is_empty() {
        return Ok(FlowState::empty(network.link_count()));
    }
    if model == RouteModel::ShortestPath {
        return sp_assign(&network.graph, costs, demand);
    }
    let commodities = build_commodities(network, demand, model, costs)?;
    let masks: Vec<Option<Vec<bool>>> = commodities
        .iter()
        .map(|c| match method {
            LoadMethod::Mta => None,
            LoadMethod::Dial => Some(efficient_links(&network.graph, costs, c.destination)),
        })
        .collect();
    assign_commodities(&network.graph, costs, &commodities, &masks, None, opts)
}

/// All-or-nothing assignment on one shortest-path tree per destination.
pub fn sp_assign(graph: &Graph, costs: &[f64], demand: &DemandTable) -> Result<FlowState> {
    let mut state = FlowState::empty(graph.link_count());
    for (d, q) in demand.iter() {
        let (dist, next) = shortest_path_tree(graph, costs, d, None);
        let (x, z) = push_along_tree(graph, &dist, &next, q, d)?;
        for (a, v) in state.aggregate.iter_mut().zip(&x) {
            *a += v;
        }
        state.keys.push((d, None));
        state.link_flows.push(x);
        state.node_flows.push(z);
        state.mu.push(dist);
    }
    Ok(state)
}

pub(crate) fn push_along_tree(
    graph: &Graph,
    dist: &[f64],
    next: &[Option<usize>],
    demand: &[f64],
    destination: NodeId,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let n = graph.node_count();
    let mut order: Vec<NodeId> = (0..n).filter(|&i| dist[i].is_finite()).collect();
    order.sort_by(|&a, &b| dist[b].total_cmp(&dist[a]).then(a.cmp(&b)));
    if let Some(o) = (0..n).find(|&o| demand[o] > 0.0 && dist[o].is_infinite()) {
        return Err(Error::Unreachable {
            origin: o,
            destination,
        });
    }
    let mut z = demand.to_vec();
    let mut x = vec![0.0; graph.link_count()];
    for &i in &order {
        if i == destination {
            continue;
        }
        if let Some(l) = next[i] {
            x[l] += z[i];
            let j = graph.head(l);
            z[j] += z[i];
        }
    }
    Ok((x, z))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_routes(c_top: f64, c_bottom: f64) -> Network {
        // 0 -> 1 -> 3 and 0 -> 2 -> 3
        Network::from_links(
            4,
            &[(0, 1, c_top), (0, 2, c_bottom), (1, 3, 1.0), (2, 3, 1.0)],
            1.0,
        )
        .unwrap()
    }

    #[test]
    fn symmetric_routes_split_evenly() {
        let net = two_routes(1.0, 1.0);
        let q = vec![1.0, 0.0, 0.0, 0.0];
        for method in [LoadMethod::Mta, LoadMethod::Dial] {
            let params = NgevParams::logit(&net.graph, 1.0).unwrap();
            let x = load(&net, &net.free_flow_cost, &params, 3, &q, method).unwrap();
            assert!((x[0] - 0.5).abs() < 1e-15 && (x[1] - 0.5).abs() < 1e-15);
        }
    }

    #[test]
    fn logit_two_thirds_split() {
        let theta = 0.7;
        let net = two_routes(1.0, 1.0 + 2f64.ln() / theta);
        let params = NgevParams::logit(&net.graph, theta).unwrap();
        let x = load(&net, &net.free_flow_cost, &params, 3, &[1.0, 0.0, 0.0, 0.0], LoadMethod::Mta)
            .unwrap();
        assert!((x[0] - 2.0 / 3.0).abs() < 1e-12);
        assert!((x[1] - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn single_path_node_flows() {
        let net = Network::from_links(3, &[(0, 1, 1.0), (1, 2, 1.0)], 1.0).unwrap();
        let params = NgevParams::logit(&net.graph, 1.0).unwrap();
        let c = Commodity {
            destination: 2,
            origin: None,
            demand: vec![1.0, 0.0, 0.0],
            params,
        };
        let r = load_commodity(&net.graph, &net.free_flow_cost, &c, None, None, &LoadOptions::default())
            .unwrap();
        assert_eq!(r.node_flow, vec![1.0, 1.0, 1.0]);
        assert_eq!(r.link_flow, vec![1.0, 1.0]);
    }

    #[test]
    fn demand_at_dangling_node_is_unreachable() {
        let net = Network::from_links(3, &[(0, 1, 1.0), (1, 2, 1.0)], 1.0).unwrap();
        let params = NgevParams::logit(&net.graph, 1.0).unwrap();
        let err = load(&net, &net.free_flow_cost, &params, 1, &[0.0, 0.0, 2.0], LoadMethod::Mta)
            .unwrap_err();
        assert!(matches!(err, Error::Unreachable { origin: 2, destination: 1 }));
    }

    #[test]
    fn empty_demand_gives_zero_state() {
        let net = two_routes(1.0, 2.0);
        let demand = DemandTable::new(4);
        let s = assign_all(&net, &net.free_flow_cost, RouteModel::Model3, &demand, LoadMethod::Mta)
            .unwrap();
        assert!(s.aggregate.iter().all(|&x| x == 0.0));
        assert!(s.keys.is_empty());
    }

    #[test]
    fn sp_assignment_is_all_or_nothing() {
        let net = two_routes(1.0, 2.0);
        let demand = DemandTable::from_pairs(4, [(0, 3, 5.0)]).unwrap();
        let s = assign_all(&net, &net.free_flow_cost, RouteModel::ShortestPath, &demand, LoadMethod::Mta)
            .unwrap();
        assert_eq!(s.aggregate, vec![5.0, 0.0, 5.0, 0.0]);
    }

    #[test]
    fn dial_mask_is_strict() {
        // equal-distance link 1 -> 2 is not efficient in either direction
        let net = Network::from_links(
            4,
            &[(0, 1, 1.0), (0, 2, 1.0), (1, 2, 1.0), (2, 1, 1.0), (1, 3, 1.0), (2, 3, 1.0)],
            1.0,
        )
        .unwrap();
        let mask = efficient_links(&net.graph, &net.free_flow_cost, 3);
        assert_eq!(mask, vec![true, true, false, false, true, true]);
    }
}
