//! Python bindings: networks, NGEV loading, probit loading and the
//! equilibrium solvers.

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use ngev_cli::config::{parse_method, parse_model, parse_solver};
use ngev_cli::experiments::{run_solver, SolverSettings};
use ngev_cli::CliError;
use ngev_core::loading::{assign_all, probit_load, ProbitOptions};
use ngev_core::network::{generate_grid, parse_tntp, GridSpec};

fn core_err(e: ngev_core::Error) -> PyErr {
    match e.category() {
        "parse" | "structure" | "validation" | "domain" => PyValueError::new_err(e.to_string()),
        _ => PyRuntimeError::new_err(e.to_string()),
    }
}

fn cli_err(e: CliError) -> PyErr {
    match e {
        CliError::Core(e) => core_err(e),
        other => PyValueError::new_err(other.to_string()),
    }
}

#[pyclass(module = "ngev", frozen)]
pub struct Network {
    inner: ngev_core::Network,
}

#[pymethods]
impl Network {
    /// Builds a network from `(tail, head, free_flow_cost, capacity)` tuples
    /// over nodes `0..node_count`.
    #[new]
    fn new(node_count: usize, links: Vec<(usize, usize, f64, f64)>) -> PyResult<Self> {
        let pairs: Vec<_> = links.iter().map(|&(t, h, _, _)| (t, h)).collect();
        let graph = ngev_core::Graph::new(node_count, &pairs).map_err(core_err)?;
        let inner = ngev_core::Network::new(
            graph,
            links.iter().map(|l| l.2).collect(),
            links.iter().map(|l| l.3).collect(),
        )
        .map_err(core_err)?;
        Ok(Network { inner })
    }

    #[getter]
    fn node_count(&self) -> usize {
        self.inner.node_count()
    }

    #[getter]
    fn link_count(&self) -> usize {
        self.inner.link_count()
    }

    #[getter]
    fn free_flow_cost(&self) -> Vec<f64> {
        self.inner.free_flow_cost.clone()
    }

    #[getter]
    fn capacity(&self) -> Vec<f64> {
        self.inner.capacity.clone()
    }

    /// `(tail_label, head_label)` per link.
    #[getter]
    fn links(&self) -> Vec<(u64, u64)> {
        let g = &self.inner.graph;
        g.links().map(|(t, h)| (g.label(t), g.label(h))).collect()
    }

    fn __repr__(&self) -> String {
        format!("Network(nodes={}, links={})", self.node_count(), self.link_count())
    }
}

#[pyclass(module = "ngev", frozen)]
pub struct Demand {
    inner: ngev_core::DemandTable,
}

#[pymethods]
impl Demand {
    /// Demand from `(origin, destination, flow)` node-index triples.
    #[new]
    fn new(node_count: usize, pairs: Vec<(usize, usize, f64)>) -> PyResult<Self> {
        let inner = ngev_core::DemandTable::from_pairs(node_count, pairs).map_err(core_err)?;
        Ok(Demand { inner })
    }

    #[getter]
    fn total(&self) -> f64 {
        self.inner.total()
    }

    #[getter]
    fn destination_count(&self) -> usize {
        self.inner.destination_count()
    }

    #[getter]
    fn od_pair_count(&self) -> usize {
        self.inner.od_pair_count()
    }

    fn scaled(&self, factor: f64) -> Demand {
        Demand {
            inner: self.inner.scaled(factor),
        }
    }

    fn __repr__(&self) -> String {
        format!("Demand(od_pairs={}, total={})", self.od_pair_count(), self.total())
    }
}

/// Reads a TNTP network and trips file pair.
#[pyfunction]
fn read_tntp(net_path: &str, trips_path: &str) -> PyResult<(Network, Demand)> {
    let read = |p: &str| {
        std::fs::read_to_string(p).map_err(|e| pyo3::exceptions::PyOSError::new_err(format!("{p}: {e}")))
    };
    let (network, demand) = parse_tntp(&read(net_path)?, &read(trips_path)?)
        .map_err(core_err)?
        .into_parts();
    Ok((Network { inner: network }, Demand { inner: demand }))
}

/// The synthetic k-grid instance.
#[pyfunction]
#[pyo3(signature = (k, reference_flow = 10000.0, decay = 0.1))]
fn grid(k: usize, reference_flow: f64, decay: f64) -> PyResult<(Network, Demand)> {
    let (network, demand) = generate_grid(&GridSpec::new(k, reference_flow, decay)).map_err(core_err)?;
    Ok((Network { inner: network }, Demand { inner: demand }))
}

/// NGEV link flows at `costs` (free-flow costs when omitted).
#[pyfunction]
#[pyo3(signature = (network, demand, model = "model3", method = "mta", costs = None))]
fn load(
    network: &Network,
    demand: &Demand,
    model: &str,
    method: &str,
    costs: Option<Vec<f64>>,
) -> PyResult<Vec<f64>> {
    let model = parse_model(model).map_err(cli_err)?;
    let method = parse_method(method).map_err(cli_err)?;
    let costs = costs.unwrap_or_else(|| network.inner.free_flow_cost.clone());
    let state = assign_all(&network.inner, &costs, model, &demand.inner, method).map_err(core_err)?;
    Ok(state.aggregate)
}

/// Mean probit link flows over `draws` sampled cost vectors.
#[pyfunction]
#[pyo3(signature = (network, demand, draws, variance_scale = 0.3, seed = 0, costs = None))]
fn probit(
    network: &Network,
    demand: &Demand,
    draws: usize,
    variance_scale: f64,
    seed: u64,
    costs: Option<Vec<f64>>,
) -> PyResult<Vec<f64>> {
    let costs = costs.unwrap_or_else(|| network.inner.free_flow_cost.clone());
    let run = probit_load(
        &network.inner,
        &costs,
        &demand.inner,
        &ProbitOptions::new(draws, variance_scale, seed),
    )
    .map_err(core_err)?;
    Ok(run.mean)
}

#[pyclass(module = "ngev", frozen, get_all)]
pub struct Solution {
    solver: String,
    objective: f64,
    iterations: usize,
    converged: bool,
    flows: Vec<f64>,
    costs: Vec<f64>,
    /// η after each iteration; NaN without a reference.
    eta: Vec<f64>,
    trace_csv: String,
}

#[pymethods]
impl Solution {
    fn __repr__(&self) -> String {
        format!(
            "Solution(solver={}, iterations={}, converged={}, objective={:e})",
            self.solver, self.iterations, self.converged, self.objective
        )
    }
}

/// An equilibrium instance with route-choice parameters fixed at free flow.
#[pyclass(module = "ngev", frozen)]
pub struct Problem {
    inner: ngev_core::Problem,
}

#[pymethods]
impl Problem {
    #[new]
    #[pyo3(signature = (network, demand, model = "model3", method = "mta"))]
    fn new(network: &Network, demand: &Demand, model: &str, method: &str) -> PyResult<Self> {
        let model = parse_model(model).map_err(cli_err)?;
        let method = parse_method(method).map_err(cli_err)?;
        let inner = ngev_core::Problem::new(network.inner.clone(), &demand.inner, model, method)
            .map_err(core_err)?;
        Ok(Problem { inner })
    }

    /// Runs msa, pl, gp or agp. `reference` is flows for primal solvers and
    /// costs for dual ones.
    #[pyo3(signature = (solver = "pl", max_iter = 100, tol = 1e-8, step = None, reference = None))]
    fn solve(
        &self,
        py: Python<'_>,
        solver: &str,
        max_iter: usize,
        tol: f64,
        step: Option<f64>,
        reference: Option<Vec<f64>>,
    ) -> PyResult<Solution> {
        let solver = parse_solver(solver).map_err(cli_err)?;
        let mut settings = SolverSettings {
            max_iter,
            tol,
            step,
            ..Default::default()
        };
        if let Some(s) = step {
            settings.agp.step = s;
        }
        let run = py
            .detach(|| run_solver(&self.inner, solver, &settings, reference, &[]))
            .map_err(cli_err)?;
        Ok(Solution {
            solver: run.solver.name().to_string(),
            objective: run.objective,
            iterations: run.iterations,
            converged: run.converged,
            eta: run.points.iter().map(|p| p.eta).collect(),
            flows: run.flows.aggregate,
            costs: run.costs,
            trace_csv: run.trace_csv,
        })
    }

    fn dual_objective(&self, costs: Vec<f64>) -> PyResult<f64> {
        ngev_core::dual::dual_objective(&self.inner, &costs).map_err(core_err)
    }
}

#[pymodule]
fn ngev(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Network>()?;
    m.add_class::<Demand>()?;
    m.add_class::<Problem>()?;
    m.add_class::<Solution>()?;
    m.add_function(wrap_pyfunction!(read_tntp, m)?)?;
    m.add_function(wrap_pyfunction!(grid, m)?)?;
    m.add_function(wrap_pyfunction!(load, m)?)?;
    m.add_function(wrap_pyfunction!(probit, m)?)?;
    Ok(())
}
