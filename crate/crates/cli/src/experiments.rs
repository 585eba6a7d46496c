//! Experiment runners shared by the subcommands and the acceptance suite.

use std::fmt::Write as _;
use std::path::Path;
use std::time::Instant;

use ngev_core::dual::{solve_agp, solve_gp, AgpOptions, DualOptions, DualState};
use ngev_core::loading::{
    assign_all_with, probit_load, LoadOptions, ProbitOptions,
};
use ngev_core::network::generate_grid;
use ngev_core::primal::{solve_msa, solve_pl, PrimalOptions, PrimalState};
use ngev_core::trace::{max_relative_deviation, TraceRow};
use ngev_core::{DemandTable, FlowState, LoadMethod, Network, Problem, RouteModel};

use crate::config::{RunConfig, Solver, AGP_DEFAULT_STEP, GP_DEFAULT_STEP};
use crate::error::{CliError, Result};

/// One trace row in solver-neutral form.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Point {
    pub iter: usize,
    pub elapsed_seconds: f64,
    pub objective: f64,
    /// η_x for primal solvers, η_c for dual ones; NaN without a reference.
    pub eta: f64,
}

#[derive(Debug, Clone)]
pub struct SolverRun {
    pub solver: Solver,
    pub objective: f64,
    pub iterations: usize,
    pub converged: bool,
    pub flows: FlowState,
    pub costs: Vec<f64>,
    pub points: Vec<Point>,
    pub trace_csv: String,
}

impl SolverRun {
    fn from_primal(solver: Solver, s: PrimalState, config: &[(String, String)]) -> Self {
        let mut trace = s.trace;
        for (k, v) in config {
            trace.push_meta(k.clone(), v);
        }
        SolverRun {
            solver,
            objective: s.objective,
            iterations: s.iterations,
            converged: s.converged,
            points: trace
                .rows
                .iter()
                .map(|r| Point {
                    iter: r.iter,
                    elapsed_seconds: r.elapsed_seconds(),
                    objective: r.objective,
                    eta: r.eta_x,
                })
                .collect(),
            trace_csv: trace.to_csv(),
            flows: s.flows,
            costs: s.costs,
        }
    }

    fn from_dual(solver: Solver, s: DualState, config: &[(String, String)]) -> Self {
        let mut trace = s.trace;
        for (k, v) in config {
            trace.push_meta(k.clone(), v);
        }
        SolverRun {
            solver,
            objective: s.objective,
            iterations: s.iterations,
            converged: s.converged,
            points: trace
                .rows
                .iter()
                .map(|r| Point {
                    iter: r.iter,
                    elapsed_seconds: r.elapsed_seconds(),
                    objective: r.dual_objective,
                    eta: r.eta_c,
                })
                .collect(),
            trace_csv: trace.to_csv(),
            flows: s.flows,
            costs: s.costs,
        }
    }

    /// First point whose objective is within `gap` of `optimum`, relatively.
    pub fn time_to_gap(&self, optimum: f64, gap: f64) -> Option<Point> {
        first_within_gap(&self.points, optimum, gap)
    }

    /// First point with η at or below `level`.
    pub fn first_eta_below(&self, level: f64) -> Option<Point> {
        self.points.iter().copied().find(|p| p.eta <= level)
    }

    /// CSV `link,tail_id,head_id,flow,cost` of the final state.
    pub fn final_csv(&self, network: &Network) -> String {
        let g = &network.graph;
        let mut out = String::from("link,tail_id,head_id,flow,cost\n");
        for l in 0..g.link_count() {
            let _ = writeln!(
                out,
                "{},{},{},{},{}",
                l,
                g.label(g.tail(l)),
                g.label(g.head(l)),
                self.flows.aggregate[l],
                self.costs[l]
            );
        }
        out
    }
}

pub fn relative_gap(value: f64, optimum: f64) -> f64 {
    (value - optimum).abs() / optimum.abs()
}

pub fn first_within_gap(points: &[Point], optimum: f64, gap: f64) -> Option<Point> {
    points
        .iter()
        .copied()
        .find(|p| relative_gap(p.objective, optimum) <= gap)
}

/// Solver settings independent of the instance.
#[derive(Debug, Clone, PartialEq)]
pub struct SolverSettings {
    pub max_iter: usize,
    pub tol: f64,
    pub line_search_tol: f64,
    pub step: Option<f64>,
    pub agp: AgpOptions,
}

impl SolverSettings {
    pub fn from_config(cfg: &RunConfig) -> Self {
        SolverSettings {
            max_iter: cfg.max_iter,
            tol: cfg.tol,
            line_search_tol: cfg.line_search_tol,
            step: cfg.step,
            agp: AgpOptions {
                step: cfg.step.unwrap_or(AGP_DEFAULT_STEP),
                k_min: cfg.k_min,
                xi: cfg.xi,
                backtracking: cfg.backtracking,
            },
        }
    }
}

impl Default for SolverSettings {
    fn default() -> Self {
        SolverSettings::from_config(&RunConfig::default())
    }
}

/// Runs `solver`; `reference` holds flows (primal) or costs (dual) for η.
pub fn run_solver(
    problem: &Problem,
    solver: Solver,
    settings: &SolverSettings,
    reference: Option<Vec<f64>>,
    config: &[(String, String)],
) -> Result<SolverRun> {
    let primal = PrimalOptions {
        max_iter: settings.max_iter,
        tol: settings.tol,
        line_search_tol: settings.line_search_tol,
        reference: reference.clone(),
    };
    let dual = DualOptions {
        max_iter: settings.max_iter,
        tol: settings.tol,
        reference,
    };
    Ok(match solver {
        Solver::Msa => SolverRun::from_primal(solver, solve_msa(problem, &primal)?, config),
        Solver::Pl => SolverRun::from_primal(solver, solve_pl(problem, &primal)?, config),
        Solver::Gp => SolverRun::from_dual(
            solver,
            solve_gp(problem, settings.step.unwrap_or(GP_DEFAULT_STEP), &dual)?,
            config,
        ),
        Solver::Agp => SolverRun::from_dual(solver, solve_agp(problem, &settings.agp, &dual)?, config),
    })
}

/// A long, tightly converged PL run used as the reference solution.
pub fn reference_run(problem: &Problem, max_iter: usize) -> Result<SolverRun> {
    let settings = SolverSettings {
        max_iter,
        tol: 1e-15,
        ..Default::default()
    };
    run_solver(problem, Solver::Pl, &settings, None, &[])
}

pub fn build_problem(cfg: &RunConfig) -> Result<Problem> {
    let (network, demand) = cfg.instance()?;
    Ok(Problem::new(network, &demand, cfg.model, cfg.method)?.with_parallel(cfg.parallel))
}

/// Reads column `column` from a CSV file with a header row.
pub fn read_column(path: &Path, column: &str) -> Result<Vec<f64>> {
    let csv_err = |message: String| CliError::Csv {
        path: path.to_path_buf(),
        message,
    };
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| csv_err(e.to_string()))?;
    let index = reader
        .headers()
        .map_err(|e| csv_err(e.to_string()))?
        .iter()
        .position(|h| h == column)
        .ok_or_else(|| csv_err(format!("no column named {column:?}")))?;
    reader
        .records()
        .map(|r| {
            let r = r.map_err(|e| csv_err(e.to_string()))?;
            r[index]
                .parse()
                .map_err(|_| csv_err(format!("bad number {:?} in column {column}", &r[index])))
        })
        .collect()
}

/// Largest conservation residual per destination, summing origin-specific commodities.
pub fn conservation_by_destination(network: &Network, demand: &DemandTable, state: &FlowState) -> f64 {
    let g = &network.graph;
    demand
        .destinations()
        .map(|d| {
            let mut x = vec![0.0; g.link_count()];
            for (key, flows) in state.keys.iter().zip(&state.link_flows) {
                if key.0 == d {
                    x.iter_mut().zip(flows).for_each(|(a, b)| *a += b);
                }
            }
            let q = demand.modified(d).unwrap_or_default();
            ngev_core::loading::conservation_residual(g, &x, &q)
        })
        .fold(0.0, f64::max)
}

/// True when the table holds exactly one OD pair with unit flow.
pub fn is_unit_od(demand: &DemandTable) -> bool {
    demand.od_pair_count() == 1 && (demand.total() - 1.0).abs() <= 1e-12
}

pub const TABLE_MODELS: [RouteModel; 4] = [
    RouteModel::Model1,
    RouteModel::Model2,
    RouteModel::Model3,
    RouteModel::Model4,
];

/// Flow rates per link for every model under MTA and Dial at free-flow costs.
pub fn flow_table(network: &Network, demand: &DemandTable) -> Result<Vec<(RouteModel, LoadMethod, Vec<f64>)>> {
    let mut rows = Vec::new();
    for model in TABLE_MODELS {
        for method in [LoadMethod::Mta, LoadMethod::Dial] {
            let state = assign_all_with(
                network,
                &network.free_flow_cost,
                model,
                demand,
                method,
                &LoadOptions::default(),
            )?;
            rows.push((model, method, state.aggregate));
        }
    }
    Ok(rows)
}

pub fn flow_table_csv(network: &Network, rows: &[(RouteModel, LoadMethod, Vec<f64>)]) -> String {
    let g = &network.graph;
    let mut out = String::from("model,method");
    for (i, j) in g.links() {
        let _ = write!(out, ",{}-{}", g.label(i), g.label(j));
    }
    out.push('\n');
    for (model, method, x) in rows {
        let _ = write!(out, "{},{}", model.name(), method.name());
        for v in x {
            let _ = write!(out, ",{v}");
        }
        out.push('\n');
    }
    out
}

/// Max relative error of X(R) against X(reference_draws) for each R, from one
/// draw stream.
pub fn probit_errors(
    network: &Network,
    demand: &DemandTable,
    draws: &[usize],
    reference_draws: usize,
    variance_scale: f64,
    seed: u64,
) -> Result<Vec<(usize, f64)>> {
    let mut opts = ProbitOptions::new(reference_draws, variance_scale, seed);
    opts.checkpoints = draws.to_vec();
    let run = probit_load(network, &network.free_flow_cost, demand, &opts)?;
    let mut out = Vec::new();
    for &r in draws {
        let x = if r >= reference_draws {
            &run.mean
        } else {
            &run.checkpoints
                .iter()
                .find(|c| c.0 == r)
                .expect("checkpoint recorded")
                .1
        };
        out.push((r, max_relative_deviation(x, &run.mean)));
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct TimingRow {
    pub k: usize,
    pub nodes: usize,
    pub links: usize,
    pub destinations: usize,
    pub task: String,
    pub seconds: f64,
    pub iterations: Option<usize>,
}

impl TimingRow {
    pub const HEADER: &'static str =
        "k,nodes,links,destinations,task,seconds,seconds_per_destination,iterations";

    pub fn csv_line(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{}",
            self.k,
            self.nodes,
            self.links,
            self.destinations,
            self.task,
            self.seconds,
            self.seconds / self.destinations.max(1) as f64,
            self.iterations.map_or(String::new(), |i| i.to_string())
        )
    }
}

/// Times logit/NGEV loading (Dial and MTA) and probit on one grid.
///
/// Logit needs θ > ln(max out-degree) on unit-cost grids for the route
/// choice series to converge.
pub fn bench_loading(cfg: &RunConfig, k: usize, probit_draws: usize, logit_theta: f64) -> Result<Vec<TimingRow>> {
    let (network, demand) = generate_grid(&cfg.grid_spec(k))?;
    let row = |task: &str, seconds: f64| TimingRow {
        k,
        nodes: network.node_count(),
        links: network.link_count(),
        destinations: demand.destination_count(),
        task: task.into(),
        seconds,
        iterations: None,
    };
    let opts = LoadOptions {
        parallel: cfg.parallel,
        ..Default::default()
    };
    let mut rows = Vec::new();
    for (name, model) in [("logit", RouteModel::Logit(logit_theta)), ("ngev", RouteModel::Model3)] {
        for method in [LoadMethod::Dial, LoadMethod::Mta] {
            let started = Instant::now();
            assign_all_with(&network, &network.free_flow_cost, model, &demand, method, &opts)?;
            rows.push(row(&format!("{name}-{}", method.name()), started.elapsed().as_secs_f64()));
        }
    }
    let mut popts = ProbitOptions::new(probit_draws, cfg.variance_scale, cfg.seed);
    popts.parallel = cfg.parallel;
    let started = Instant::now();
    probit_load(&network, &network.free_flow_cost, &demand, &popts)?;
    rows.push(row(&format!("probit-{probit_draws}"), started.elapsed().as_secs_f64()));
    Ok(rows)
}

/// Elapsed time for PL and AGP to reach `gap` on grid `k`, against a long PL
/// reference run.
pub fn equilibrium_scaling(cfg: &RunConfig, k: usize, gap: f64) -> Result<Vec<TimingRow>> {
    let (network, demand) = generate_grid(&cfg.grid_spec(k))?;
    let problem = Problem::new(network, &demand, cfg.model, cfg.method)?.with_parallel(cfg.parallel);
    let optimum = reference_run(&problem, 20 * cfg.max_iter.max(100))?.objective;
    let mut rows = Vec::new();
    for solver in [Solver::Pl, Solver::Agp] {
        let settings = SolverSettings {
            tol: 0.0,
            max_iter: 20 * cfg.max_iter.max(100),
            ..SolverSettings::from_config(cfg)
        };
        let run = run_until_gap(&problem, solver, &settings, optimum, gap)?;
        rows.push(TimingRow {
            k,
            nodes: problem.network.node_count(),
            links: problem.link_count(),
            destinations: demand.destination_count(),
            task: format!("{}-equilibrium", solver.name()),
            seconds: run.map_or(f64::NAN, |p| p.elapsed_seconds),
            iterations: run.map(|p| p.iter),
        });
    }
    Ok(rows)
}

/// Runs `solver` with a growing iteration budget until the trace reaches `gap`.
pub fn run_until_gap(
    problem: &Problem,
    solver: Solver,
    settings: &SolverSettings,
    optimum: f64,
    gap: f64,
) -> Result<Option<Point>> {
    let mut budget = 100.min(settings.max_iter);
    loop {
        let s = SolverSettings {
            max_iter: budget,
            ..settings.clone()
        };
        let run = run_solver(problem, solver, &s, None, &[])?;
        if let Some(p) = run.time_to_gap(optimum, gap) {
            return Ok(Some(p));
        }
        if run.converged || budget >= settings.max_iter {
            return Ok(None);
        }
        budget = (budget * 4).min(settings.max_iter);
    }
}

/// Ordinary least-squares slope of ln y on ln x.
pub fn log_log_slope(points: &[(f64, f64)]) -> f64 {
    let n = points.len() as f64;
    let (lx, ly): (Vec<f64>, Vec<f64>) = points.iter().map(|&(x, y)| (x.ln(), y.ln())).unzip();
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    sxy / sxx
}
