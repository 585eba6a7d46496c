//! An equilibrium instance: network, BPR costs and commodities with fixed
//! route-choice parameters.

use crate::algebra::RouteModel;
use crate::cost::BprModel;
use crate::error::{Error, Result};
use crate::loading::{
    assign_commodities, build_commodities, commodities_mu, efficient_links, Commodity,
    FlowState, LoadMethod, LoadOptions,
};
use crate::network::{DemandTable, Network};

#[derive(Debug, Clone)]
pub struct Problem {
    pub network: Network,
    pub bpr: BprModel,
    pub model: RouteModel,
    pub method: LoadMethod,
    pub commodities: Vec<Commodity>,
    /// Dial efficient-link masks per commodity; `None` for MTA.
    pub masks: Vec<Option<Vec<bool>>>,
    pub load_options: LoadOptions,
}

impl Problem {
    /// Builds commodities whose parameters (and Dial masks) come from
    /// free-flow shortest-path distances and stay fixed while costs change.
    pub fn new(
        network: Network,
        demand: &DemandTable,
        model: RouteModel,
        method: LoadMethod,
    ) -> Result<Self> {
        if model == RouteModel::ShortestPath {
            return Err(Error::Validation(
                "equilibrium needs a stochastic route choice model, not sp".into(),
            ));
        }
        if demand.node_count() != network.node_count() {
            return Err(Error::Validation(format!(
                "demand table has {} nodes, network has {}",
                demand.node_count(),
                network.node_count()
            )));
        }
        let free = network.free_flow_cost.clone();
        let commodities = build_commodities(&network, demand, model, &free)?;
        let masks = commodities
            .iter()
            .map(|c| match method {
                LoadMethod::Mta => None,
                LoadMethod::Dial => Some(efficient_links(&network.graph, &free, c.destination)),
            })
            .collect();
        Ok(Problem {
            bpr: BprModel::new(&network),
            network,
            model,
            method,
            commodities,
            masks,
            load_options: LoadOptions::default(),
        })
    }

    pub fn with_parallel(mut self, parallel: bool) -> Self {
        self.load_options.parallel = parallel;
        self
    }

    pub fn free_flow_cost(&self) -> &[f64] {
        &self.bpr.free_flow_cost
    }

    pub fn link_count(&self) -> usize {
        self.network.link_count()
    }

    pub fn total_demand(&self) -> f64 {
        self.commodities.iter().map(|c| c.total_demand()).sum()
    }

    /// Flow-independent NGEV loading at `costs`.
    pub fn load(&self, costs: &[f64], warm_start: Option<&[Vec<f64>]>) -> Result<FlowState> {
        assign_commodities(
            &self.network.graph,
            costs,
            &self.commodities,
            &self.masks,
            warm_start,
            &self.load_options,
        )
    }

    /// Expected minimum costs of every commodity at `costs`.
    pub fn mu(&self, costs: &[f64], warm_start: Option<&[Vec<f64>]>) -> Result<Vec<Vec<f64>>> {
        commodities_mu(
            &self.network.graph,
            costs,
            &self.commodities,
            &self.masks,
            warm_start,
            &self.load_options,
        )
    }

    /// Σ_k Σ_o μ^k_o q^k_o.
    pub fn demand_term(&self, mu: &[Vec<f64>]) -> f64 {
        self.commodities
            .iter()
            .zip(mu)
            .map(|(c, m)| {
                c.demand
                    .iter()
                    .zip(m)
                    .filter(|(&q, _)| q > 0.0)
                    .map(|(&q, &v)| q * v)
                    .sum::<f64>()
            })
            .sum()
    }

    /// Largest conservation residual over commodities.
    pub fn conservation_residual(&self, state: &FlowState) -> f64 {
        state.conservation_residual(&self.network.graph, &self.commodities)
    }
}
