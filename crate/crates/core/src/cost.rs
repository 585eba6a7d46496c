//! Separable BPR link costs `c(X) = c̄ (1 + (X/κ)^4)` with their integral,
//! inverse and conjugate.

use crate::error::{Error, Result};
use crate::network::Network;

#[derive(Debug, Clone, PartialEq)]
pub struct BprModel {
    pub free_flow_cost: Vec<f64>,
    pub capacity: Vec<f64>,
}

impl BprModel {
    pub fn new(network: &Network) -> Self {
        BprModel {
            free_flow_cost: network.free_flow_cost.clone(),
            capacity: network.capacity.clone(),
        }
    }

    pub fn link_count(&self) -> usize {
        self.free_flow_cost.len()
    }

    fn check_flows(&self, flows: &[f64]) -> Result<()> {
        if flows.len() != self.link_count() {
            return Err(Error::Validation(format!(
                "expected {} link flows, got {}",
                self.link_count(),
                flows.len()
            )));
        }
        match flows.iter().position(|&x| !(x >= 0.0)) {
            Some(l) => Err(Error::Validation(format!(
                "negative flow {} on link {l}",
                flows[l]
            ))),
            None => Ok(()),
        }
    }

    fn check_costs(&self, costs: &[f64]) -> Result<()> {
        if costs.len() != self.link_count() {
            return Err(Error::Validation(format!(
                "expected {} link costs, got {}",
                self.link_count(),
                costs.len()
            )));
        }
        match costs
            .iter()
            .zip(&self.free_flow_cost)
            .position(|(&c, &cbar)| !(c >= cbar))
        {
            Some(l) => Err(Error::Domain(format!(
                "cost {} on link {l} is below free flow {}",
                costs[l], self.free_flow_cost[l]
            ))),
            None => Ok(()),
        }
    }

    #[inline]
    fn link_cost(&self, l: usize, x: f64) -> f64 {
        let r = x / self.capacity[l];
        self.free_flow_cost[l] * (1.0 + r * r * r * r)
    }

    #[inline]
    fn link_inverse(&self, l: usize, c: f64) -> f64 {
        let cbar = self.free_flow_cost[l];
        self.capacity[l] * ((c - cbar) / cbar).sqrt().sqrt()
    }

    pub fn cost(&self, flows: &[f64]) -> Result<Vec<f64>> {
        self.check_flows(flows)?;
        Ok((0..flows.len()).map(|l| self.link_cost(l, flows[l])).collect())
    }

    /// c⁻¹(c) = κ ((c − c̄)/c̄)^{1/4}.
    pub fn inverse_cost(&self, costs: &[f64]) -> Result<Vec<f64>> {
        self.check_costs(costs)?;
        Ok((0..costs.len()).map(|l| self.link_inverse(l, costs[l])).collect())
    }

    /// C(X) = Σ c̄ (X + X⁵/(5κ⁴)).
    pub fn cost_integral(&self, flows: &[f64]) -> Result<f64> {
        self.check_flows(flows)?;
        Ok(self.cost_integral_unchecked(flows))
    }

    pub(crate) fn cost_integral_unchecked(&self, flows: &[f64]) -> f64 {
        flows
            .iter()
            .enumerate()
            .map(|(l, &x)| {
                let r = x / self.capacity[l];
                self.free_flow_cost[l] * x * (1.0 + r * r * r * r / 5.0)
            })
            .sum()
    }

    /// C*(c) = Σ (4/5) κ c̄ ((c − c̄)/c̄)^{5/4}, normalised so that C*(c̄) = 0.
    pub fn conjugate_integral(&self, costs: &[f64]) -> Result<f64> {
        self.check_costs(costs)?;
        Ok(costs
            .iter()
            .enumerate()
            .map(|(l, &c)| {
                let cbar = self.free_flow_cost[l];
                let r = (c - cbar) / cbar;
                0.8 * self.capacity[l] * cbar * r * r.sqrt().sqrt()
            })
            .sum())
    }
}
