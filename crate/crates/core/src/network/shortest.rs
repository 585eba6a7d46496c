use std::cmp::Ordering;
use std::collections::BinaryHeap;

use super::{Graph, LinkId, Network, NodeId};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
struct Entry {
    dist: f64,
    node: NodeId,
}

impl Eq for Entry {}

impl Ord for Entry {
    fn cmp(&self, other: &Self) -> Ordering {
        // min-heap on distance, ties broken by node id for determinism
        other
            .dist
            .total_cmp(&self.dist)
            .then_with(|| other.node.cmp(&self.node))
    }
}

impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Shortest-path tree towards `destination`: distances D(i) and, for every
/// node that reaches the destination, the first link of one shortest path.
///
/// Links with `mask[l] == false` are ignored.
pub fn shortest_path_tree(
    graph: &Graph,
    costs: &[f64],
    destination: NodeId,
    mask: Option<&[bool]>,
) -> (Vec<f64>, Vec<Option<LinkId>>) {
    let n = graph.node_count();
    let mut dist = vec![f64::INFINITY; n];
    let mut next = vec![None; n];
    let mut done = vec![false; n];
    let mut heap = BinaryHeap::new();
    dist[destination] = 0.0;
    heap.push(Entry {
        dist: 0.0,
        node: destination,
    });
    while let Some(Entry { dist: d, node: j }) = heap.pop() {
        if done[j] {
            continue;
        }
        done[j] = true;
        for &l in graph.in_links(j) {
            if mask.is_some_and(|m| !m[l]) {
                continue;
            }
            let i = graph.tail(l);
            let candidate = d + costs[l];
            if candidate < dist[i] {
                dist[i] = candidate;
                next[i] = Some(l);
                heap.push(Entry {
                    dist: candidate,
                    node: i,
                });
            }
        }
    }
    (dist, next)
}

/// Shortest-path distances D(i) from every node to `destination` (+inf if unreachable).
pub fn sp_distances_to(
    graph: &Graph,
    costs: &[f64],
    destination: NodeId,
    mask: Option<&[bool]>,
) -> Vec<f64> {
    shortest_path_tree(graph, costs, destination, mask).0
}

/// Per-destination shortest-path distance vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct SpTable {
    destinations: Vec<NodeId>,
    distances: Vec<Vec<f64>>,
}

impl SpTable {
    pub fn get(&self, destination: NodeId) -> Option<&[f64]> {
        self.destinations
            .iter()
            .position(|&d| d == destination)
            .map(|k| self.distances[k].as_slice())
    }

    pub fn iter(&self) -> impl Iterator<Item = (NodeId, &[f64])> {
        self.destinations
            .iter()
            .copied()
            .zip(self.distances.iter().map(Vec::as_slice))
    }
}

/// Exact shortest-path costs to each of `destinations` under strictly positive `costs`.
pub fn sp_distance_table(
    network: &Network,
    costs: &[f64],
    destinations: &[NodeId],
) -> Result<SpTable> {
    if costs.len() != network.link_count() {
        return Err(Error::Validation(format!(
            "expected {} link costs, got {}",
            network.link_count(),
            costs.len()
        )));
    }
    if let Some(l) = costs.iter().position(|&c| !(c > 0.0)) {
        return Err(Error::Validation(format!(
            "link {} has non-positive cost {}",
            network.graph.link_name(l),
            costs[l]
        )));
    }
    if let Some(&d) = destinations.iter().find(|&&d| d >= network.node_count()) {
        return Err(Error::Structure(format!("unknown destination node {d}")));
    }
    let distances = destinations
        .iter()
        .map(|&d| sp_distances_to(&network.graph, costs, d, None))
        .collect();
    Ok(SpTable {
        destinations: destinations.to_vec(),
        distances,
    })
}
