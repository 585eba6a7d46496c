//! Network representation: directed graph, link attributes and OD demand.
//!
//! Nodes and links carry dense 0-based ids internally. Every node also has an
//! external label (1-based for TNTP and generated grids) which is what the CSV
//! exports report.

mod grid;
mod shortest;
mod tntp;

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;

use crate::error::{Error, Result};

pub use grid::{generate_grid, GridSpec};
pub use shortest::{shortest_path_tree, sp_distance_table, sp_distances_to, SpTable};
pub use tntp::{parse_tntp, write_tntp, TntpInstance};

pub type NodeId = usize;
pub type LinkId = usize;

#[derive(Debug, Clone, PartialEq)]
pub struct Graph {
    labels: Vec<u64>,
    tails: Vec<NodeId>,
    heads: Vec<NodeId>,
    out_links: Vec<Vec<LinkId>>,
    in_links: Vec<Vec<LinkId>>,
    index: HashMap<(NodeId, NodeId), LinkId>,
}

impl Graph {
    /// Builds a graph on `node_count` nodes labelled `1..=node_count`.
    pub fn new(node_count: usize, links: &[(NodeId, NodeId)]) -> Result<Self> {
        Self::with_labels((1..=node_count as u64).collect(), links)
    }

    pub fn with_labels(labels: Vec<u64>, links: &[(NodeId, NodeId)]) -> Result<Self> {
        let n = labels.len();
        let mut seen_labels = HashMap::with_capacity(n);
        for (i, &label) in labels.iter().enumerate() {
            if seen_labels.insert(label, i).is_some() {
                return Err(Error::Structure(format!("duplicate node label {label}")));
            }
        }
        let mut graph = Graph {
            labels,
            tails: Vec::with_capacity(links.len()),
            heads: Vec::with_capacity(links.len()),
            out_links: vec![Vec::new(); n],
            in_links: vec![Vec::new(); n],
            index: HashMap::with_capacity(links.len()),
        };
        for &(tail, head) in links {
            if tail >= n || head >= n {
                return Err(Error::Structure(format!(
                    "link ({tail}, {head}) references a node outside 0..{n}"
                )));
            }
            if tail == head {
                return Err(Error::Structure(format!(
                    "self-loop at node {}",
                    graph.labels[tail]
                )));
            }
            let id = graph.tails.len();
            if graph.index.insert((tail, head), id).is_some() {
                return Err(Error::Structure(format!(
                    "parallel link {} -> {}",
                    graph.labels[tail], graph.labels[head]
                )));
            }
            graph.tails.push(tail);
            graph.heads.push(head);
            graph.out_links[tail].push(id);
            graph.in_links[head].push(id);
        }
        Ok(graph)
    }

    pub fn node_count(&self) -> usize {
        self.labels.len()
    }

    pub fn link_count(&self) -> usize {
        self.tails.len()
    }

    #[inline]
    pub fn tail(&self, link: LinkId) -> NodeId {
        self.tails[link]
    }

    #[inline]
    pub fn head(&self, link: LinkId) -> NodeId {
        self.heads[link]
    }

    /// Links as `(tail, head)` pairs in id order.
    pub fn links(&self) -> impl ExactSizeIterator<Item = (NodeId, NodeId)> + '_ {
        self.tails.iter().copied().zip(self.heads.iter().copied())
    }

    /// Outgoing links of `node`, i.e. the links to F(node).
    #[inline]
    pub fn out_links(&self, node: NodeId) -> &[LinkId] {
        &self.out_links[node]
    }

    /// Incoming links of `node`, i.e. the links from B(node).
    #[inline]
    pub fn in_links(&self, node: NodeId) -> &[LinkId] {
        &self.in_links[node]
    }

    pub fn successors(&self, node: NodeId) -> impl Iterator<Item = NodeId> + '_ {
        self.out_links[node].iter().map(move |&l| self.heads[l])
    }

    pub fn predecessors(&self, node: NodeId) -> impl Iterator<Item = NodeId> + '_ {
        self.in_links[node].iter().map(move |&l| self.tails[l])
    }

    pub fn find_link(&self, tail: NodeId, head: NodeId) -> Option<LinkId> {
        self.index.get(&(tail, head)).copied()
    }

    pub fn label(&self, node: NodeId) -> u64 {
        self.labels[node]
    }

    pub fn labels(&self) -> &[u64] {
        &self.labels
    }

    pub fn node_by_label(&self, label: u64) -> Option<NodeId> {
        self.labels.iter().position(|&l| l == label)
    }

    /// Human-readable `tail-head` name of a link using external labels.
    pub fn link_name(&self, link: LinkId) -> String {
        format!(
            "{}-{}",
            self.labels[self.tails[link]], self.labels[self.heads[link]]
        )
    }
}

/// The physical instance: graph plus free-flow costs and capacities.
#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    pub graph: Graph,
    pub free_flow_cost: Vec<f64>,
    pub capacity: Vec<f64>,
}

impl Network {
    pub fn new(graph: Graph, free_flow_cost: Vec<f64>, capacity: Vec<f64>) -> Result<Self> {
        let m = graph.link_count();
        if free_flow_cost.len() != m || capacity.len() != m {
            return Err(Error::Validation(format!(
                "expected {m} link attributes, got {} costs and {} capacities",
                free_flow_cost.len(),
                capacity.len()
            )));
        }
        for l in 0..m {
            if !(free_flow_cost[l] > 0.0 && free_flow_cost[l].is_finite()) {
                return Err(Error::Validation(format!(
                    "link {} has non-positive free-flow cost {}",
                    graph.link_name(l),
                    free_flow_cost[l]
                )));
            }
            if !(capacity[l] > 0.0) {
                return Err(Error::Validation(format!(
                    "link {} has non-positive capacity {}",
                    graph.link_name(l),
                    capacity[l]
                )));
            }
        }
        Ok(Network {
            graph,
            free_flow_cost,
            capacity,
        })
    }

    /// Convenience constructor from `(tail, head, cost)` triples with a shared capacity.
    pub fn from_links(
        node_count: usize,
        links: &[(NodeId, NodeId, f64)],
        capacity: f64,
    ) -> Result<Self> {
        let pairs: Vec<_> = links.iter().map(|&(i, j, _)| (i, j)).collect();
        let graph = Graph::new(node_count, &pairs)?;
        let costs = links.iter().map(|l| l.2).collect();
        Network::new(graph, costs, vec![capacity; links.len()])
    }

    pub fn node_count(&self) -> usize {
        self.graph.node_count()
    }

    pub fn link_count(&self) -> usize {
        self.graph.link_count()
    }

    /// CSV link list: `tail_id,head_id,free_flow_cost,capacity`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("tail_id,head_id,free_flow_cost,capacity\n");
        for (l, (i, j)) in self.graph.links().enumerate() {
            let _ = writeln!(
                out,
                "{},{},{},{}",
                self.graph.label(i),
                self.graph.label(j),
                self.free_flow_cost[l],
                self.capacity[l]
            );
        }
        out
    }
}

/// Destination-indexed node demand vectors q^d.
#[derive(Debug, Clone, PartialEq)]
pub struct DemandTable {
    node_count: usize,
    by_destination: BTreeMap<NodeId, Vec<f64>>,
}

impl DemandTable {
    pub fn new(node_count: usize) -> Self {
        DemandTable {
            node_count,
            by_destination: BTreeMap::new(),
        }
    }

    /// Builds a table from `(origin, destination, flow)` triples; zero flows are dropped.
    pub fn from_pairs(
        node_count: usize,
        pairs: impl IntoIterator<Item = (NodeId, NodeId, f64)>,
    ) -> Result<Self> {
        let mut table = DemandTable::new(node_count);
        for (o, d, q) in pairs {
            table.add(o, d, q)?;
        }
        Ok(table)
    }

    /// Adds `flow` to the demand from `origin` to `destination`.
    pub fn add(&mut self, origin: NodeId, destination: NodeId, flow: f64) -> Result<()> {
        if origin >= self.node_count || destination >= self.node_count {
            return Err(Error::Structure(format!(
                "OD pair ({origin}, {destination}) outside 0..{}",
                self.node_count
            )));
        }
        if !(flow >= 0.0 && flow.is_finite()) {
            return Err(Error::Validation(format!(
                "demand {flow} from {origin} to {destination} must be finite and non-negative"
            )));
        }
        if origin == destination {
            if flow > 0.0 {
                return Err(Error::Validation(format!(
                    "positive intrazonal demand at node {origin}"
                )));
            }
            return Ok(());
        }
        if flow == 0.0 {
            return Ok(());
        }
        let n = self.node_count;
        self.by_destination
            .entry(destination)
            .or_insert_with(|| vec![0.0; n])[origin] += flow;
        Ok(())
    }

    pub fn node_count(&self) -> usize {
        self.node_count
    }

    pub fn is_empty(&self) -> bool {
        self.by_destination.is_empty()
    }

    /// Destinations in ascending id order.
    pub fn destinations(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.by_destination.keys().copied()
    }

    pub fn destination_count(&self) -> usize {
        self.by_destination.len()
    }

    /// q^d as a node vector, if `destination` has demand.
    pub fn demand(&self, destination: NodeId) -> Option<&[f64]> {
        self.by_destination.get(&destination).map(Vec::as_slice)
    }

    pub fn iter(&self) -> impl Iterator<Item = (NodeId, &[f64])> {
        self.by_destination.iter().map(|(&d, q)| (d, q.as_slice()))
    }

    /// Modified demand q̃^d: q^d with the destination entry set to minus the total.
    pub fn modified(&self, destination: NodeId) -> Option<Vec<f64>> {
        self.demand(destination)
            .map(|q| modified_demand(q, destination))
    }

    pub fn flow(&self, origin: NodeId, destination: NodeId) -> f64 {
        self.demand(destination).map_or(0.0, |q| q[origin])
    }

    pub fn total(&self) -> f64 {
        self.by_destination.values().flatten().sum()
    }

    /// Origins (nodes with positive demand to some destination), ascending.
    pub fn origins(&self) -> Vec<NodeId> {
        (0..self.node_count)
            .filter(|&o| self.by_destination.values().any(|q| q[o] > 0.0))
            .collect()
    }

    /// Number of OD pairs with positive demand.
    pub fn od_pair_count(&self) -> usize {
        self.by_destination
            .values()
            .map(|q| q.iter().filter(|&&v| v > 0.0).count())
            .sum()
    }

    pub fn scaled(&self, factor: f64) -> DemandTable {
        DemandTable {
            node_count: self.node_count,
            by_destination: self
                .by_destination
                .iter()
                .map(|(&d, q)| (d, q.iter().map(|v| v * factor).collect()))
                .collect(),
        }
    }
}

pub(crate) fn modified_demand(q: &[f64], destination: NodeId) -> Vec<f64> {
    let mut modified = q.to_vec();
    modified[destination] = -q
        .iter()
        .enumerate()
        .filter(|&(i, _)| i != destination)
        .map(|(_, v)| v)
        .sum::<f64>();
    modified
}
