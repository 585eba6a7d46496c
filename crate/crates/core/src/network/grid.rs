//! Bidirectional lattice networks with gravity-model demand.

use super::{sp_distances_to, DemandTable, Graph, Network, NodeId};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    /// Number of unit blocks per side; the lattice has 4k+1 nodes per side.
    pub k: usize,
    /// Reference generation flow per outgoing link of an origin.
    pub reference_flow: f64,
    /// Gravity decay ν applied to the free-flow OD cost.
    pub decay: f64,
    pub free_flow_cost: f64,
    pub capacity: f64,
}

impl GridSpec {
    pub fn new(k: usize, reference_flow: f64, decay: f64) -> Self {
        GridSpec {
            k,
            reference_flow,
            decay,
            free_flow_cost: 1.0,
            capacity: 10_000.0,
        }
    }

    pub fn side(&self) -> usize {
        4 * self.k + 1
    }

    /// Node id of lattice coordinate (row, col).
    pub fn node(&self, row: usize, col: usize) -> NodeId {
        row * self.side() + col
    }

    /// OD nodes: the spacing-2 sub-lattice points (2a, 2b) with a + b even.
    pub fn od_nodes(&self) -> Vec<NodeId> {
        let coarse = 2 * self.k;
        let mut nodes = Vec::new();
        for a in 0..=coarse {
            for b in 0..=coarse {
                if (a + b) % 2 == 0 {
                    nodes.push(self.node(2 * a, 2 * b));
                }
            }
        }
        nodes.sort_unstable();
        nodes
    }

    fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::Validation("grid size k must be at least 1".into()));
        }
        for (name, v) in [
            ("reference flow", self.reference_flow),
            ("decay", self.decay),
            ("free-flow cost", self.free_flow_cost),
            ("capacity", self.capacity),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Validation(format!("grid {name} must be positive, got {v}")));
            }
        }
        Ok(())
    }
}

/// Generates the (4k+1)×(4k+1) bidirectional grid and its gravity demand.
pub fn generate_grid(spec: &GridSpec) -> Result<(Network, DemandTable)> {
    spec.validate()?;
    let side = spec.side();
    let mut links = Vec::with_capacity(4 * side * (side - 1));
    for r in 0..side {
        for c in 0..side {
            let here = spec.node(r, c);
            if c + 1 < side {
                let right = spec.node(r, c + 1);
                links.push((here, right));
                links.push((right, here));
            }
            if r + 1 < side {
                let down = spec.node(r + 1, c);
                links.push((here, down));
                links.push((down, here));
            }
        }
    }
    let graph = Graph::new(side * side, &links)?;
    let m = graph.link_count();
    let network = Network::new(
        graph,
        vec![spec.free_flow_cost; m],
        vec![spec.capacity; m],
    )?;

    let od = spec.od_nodes();
    // free-flow OD costs, one SP tree per destination
    let dist: Vec<Vec<f64>> = od
        .iter()
        .map(|&d| sp_distances_to(&network.graph, &network.free_flow_cost, d, None))
        .collect();
    let mut demand = DemandTable::new(network.node_count());
    for &o in &od {
        let weights: Vec<(NodeId, f64)> = od
            .iter()
            .zip(&dist)
            .filter(|&(&d, _)| d != o)
            .map(|(&d, dd)| (d, (-spec.decay * dd[o]).exp()))
            .collect();
        let norm: f64 = weights.iter().map(|w| w.1).sum();
        let generated = network.graph.out_links(o).len() as f64 * spec.reference_flow;
        for (d, w) in weights {
            demand.add(o, d, generated * w / norm)?;
        }
    }
    Ok((network, demand))
}
