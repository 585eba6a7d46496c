//! Explicit path enumeration: a test oracle for Markovian loading.

use super::{choice_probabilities, ProbTable};
use crate::algebra::{expected_min_cost_with, validate_costs, AlgebraKind, NgevParams, ValueIteration};
use crate::error::{Error, Result};
use crate::network::{Graph, Network, NodeId};

#[derive(Debug, Clone, PartialEq)]
pub struct PathEnumeration {
    /// Σ_r q·p(r)·(times link l occurs on r).
    pub link_flows: Vec<f64>,
    /// Σ_r p(r) over enumerated paths.
    pub probability_mass: f64,
    /// 1 − probability_mass.
    pub truncated_mass: f64,
    pub path_count: usize,
}

/// Enumerates all paths from `origin` to `destination` whose nodes are each
/// visited at most `max_loops + 1` times, weighting every path by the product
/// of the Markov choice probabilities.
///
/// Fails with [`Error::OracleInfeasible`] once more than `path_cap` paths
/// have been found.
#[allow(clippy::too_many_arguments)]
pub fn enumerate_path_flows(
    network: &Network,
    costs: &[f64],
    params: &NgevParams,
    origin: NodeId,
    destination: NodeId,
    flow: f64,
    max_loops: usize,
    path_cap: usize,
) -> Result<PathEnumeration> {
    validate_costs(network, costs)?;
    let graph = &network.graph;
    let (mu, _) = expected_min_cost_with(
        graph,
        costs,
        AlgebraKind::Ngev(params),
        destination,
        None,
        None,
        ValueIteration::default(),
    )?;
    if mu[origin].is_infinite() {
        return Err(Error::Unreachable {
            origin,
            destination,
        });
    }
    let prob = choice_probabilities(graph, costs, params, &mu, destination, None);
    enumerate_with_probabilities(graph, &prob, origin, flow, max_loops, path_cap)
}

/// As [`enumerate_path_flows`] with precomputed probabilities.
pub fn enumerate_with_probabilities(
    graph: &Graph,
    prob: &ProbTable,
    origin: NodeId,
    flow: f64,
    max_loops: usize,
    path_cap: usize,
) -> Result<PathEnumeration> {
    let mut walk = Walk {
        graph,
        prob: &prob.prob,
        destination: prob.destination,
        limit: max_loops + 1,
        cap: path_cap,
        visits: vec![0; graph.node_count()],
        stack: Vec::new(),
        out: PathEnumeration {
            link_flows: vec![0.0; graph.link_count()],
            probability_mass: 0.0,
            truncated_mass: 0.0,
            path_count: 0,
        },
        flow,
    };
    walk.visits[origin] = 1;
    walk.extend(origin, 1.0)?;
    let mut out = walk.out;
    out.truncated_mass = 1.0 - out.probability_mass;
    Ok(out)
}

struct Walk<'a> {
    graph: &'a Graph,
    prob: &'a [f64],
    destination: NodeId,
    limit: usize,
    cap: usize,
    visits: Vec<usize>,
    stack: Vec<usize>,
    out: PathEnumeration,
    flow: f64,
}

impl Walk<'_> {
    fn extend(&mut self, node: NodeId, p: f64) -> Result<()> {
        if node == self.destination {
            self.out.path_count += 1;
            if self.out.path_count > self.cap {
                return Err(Error::OracleInfeasible(format!(
                    "more than {} paths",
                    self.cap
                )));
            }
            self.out.probability_mass += p;
            for &l in &self.stack {
                self.out.link_flows[l] += self.flow * p;
            }
            return Ok(());
        }
        for &l in self.graph.out_links(node) {
            let pl = self.prob[l];
            let j = self.graph.head(l);
            if pl == 0.0 || self.visits[j] >= self.limit {
                continue;
            }
            self.visits[j] += 1;
            self.stack.push(l);
            let res = self.extend(j, p * pl);
            self.stack.pop();
            self.visits[j] -= 1;
            res?;
        }
        Ok(())
    }
}
