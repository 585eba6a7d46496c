//! Subcommands and their command-line surface.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use ngev_core::loading::assign_all;
use ngev_core::network::{generate_grid, write_tntp};
use ngev_core::RouteModel;

use crate::config::{RunConfig, Solver};
use crate::error::{CliError, Result};
use crate::experiments::{
    bench_loading, build_problem, conservation_by_destination, equilibrium_scaling, flow_table,
    flow_table_csv, is_unit_od, probit_errors, read_column, reference_run, relative_gap,
    run_solver, SolverSettings, TimingRow,
};

#[derive(Debug, Parser)]
#[command(name = "ngev", version, about = "NGEV network loading and equilibrium assignment")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// One loading at free-flow costs; writes link flows.
    Load(Common),
    /// Runs one equilibrium solver; writes its trace and final state.
    Equilibrium(Common),
    /// Runs MSA, PL, GP and AGP on one instance; writes a combined trace.
    Compare(Common),
    /// Times the loading procedures (and optionally the solvers) on grids.
    BenchLoading {
        #[command(flatten)]
        common: Common,
        /// Probit draws to time.
        #[arg(long, default_value_t = 100)]
        probit_draws: usize,
        /// Logit scale for the logit loaders.
        #[arg(long, default_value_t = 2.0)]
        logit_theta: f64,
        /// Also time PL and AGP to the target gap.
        #[arg(long)]
        equilibrium: bool,
    },
    /// Probit approximation error against a long reference run on grids.
    ProbitError(Common),
    /// Writes grid networks as TNTP files and a CSV link list.
    GridGen(Common),
}

/// Flags mirroring the configuration keys; they override `--config`.
#[derive(Debug, Args, Default)]
pub struct Common {
    /// `key = value` configuration file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Extra `key=value` settings, applied last.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub set: Vec<String>,
    #[arg(long)]
    pub net: Option<String>,
    #[arg(long)]
    pub trips: Option<String>,
    #[arg(long)]
    pub grid_k: Option<String>,
    #[arg(long)]
    pub grid_q: Option<String>,
    #[arg(long)]
    pub grid_nu: Option<String>,
    /// model1..model4, logit(θ) or sp.
    #[arg(long)]
    pub model: Option<String>,
    /// mta or dial.
    #[arg(long)]
    pub method: Option<String>,
    /// msa, pl, gp or agp.
    #[arg(long)]
    pub solver: Option<String>,
    #[arg(long)]
    pub step: Option<String>,
    #[arg(long)]
    pub k_min: Option<String>,
    #[arg(long)]
    pub xi: Option<String>,
    #[arg(long)]
    pub backtracking: Option<String>,
    #[arg(long)]
    pub tol: Option<String>,
    #[arg(long)]
    pub max_iter: Option<String>,
    #[arg(long)]
    pub line_search_tol: Option<String>,
    #[arg(long)]
    pub demand_multiplier: Option<String>,
    #[arg(long)]
    pub seed: Option<String>,
    #[arg(long)]
    pub out_dir: Option<String>,
    /// Final-state CSV used as the η reference.
    #[arg(long)]
    pub reference: Option<String>,
    /// Comma-separated draw counts.
    #[arg(long)]
    pub draws: Option<String>,
    #[arg(long)]
    pub reference_draws: Option<String>,
    #[arg(long)]
    pub variance_scale: Option<String>,
    /// Comma-separated grid sizes.
    #[arg(long)]
    pub grid_sizes: Option<String>,
    #[arg(long)]
    pub target_gap: Option<String>,
    #[arg(long)]
    pub parallel: Option<String>,
}

impl Common {
    fn overrides(&self) -> Vec<(&'static str, &String)> {
        let fields = [
            ("net", &self.net),
            ("trips", &self.trips),
            ("grid_k", &self.grid_k),
            ("grid_q", &self.grid_q),
            ("grid_nu", &self.grid_nu),
            ("model", &self.model),
            ("method", &self.method),
            ("solver", &self.solver),
            ("step", &self.step),
            ("k_min", &self.k_min),
            ("xi", &self.xi),
            ("backtracking", &self.backtracking),
            ("tol", &self.tol),
            ("max_iter", &self.max_iter),
            ("line_search_tol", &self.line_search_tol),
            ("demand_multiplier", &self.demand_multiplier),
            ("seed", &self.seed),
            ("out_dir", &self.out_dir),
            ("reference", &self.reference),
            ("draws", &self.draws),
            ("reference_draws", &self.reference_draws),
            ("variance_scale", &self.variance_scale),
            ("grid_sizes", &self.grid_sizes),
            ("target_gap", &self.target_gap),
            ("parallel", &self.parallel),
        ];
        fields
            .into_iter()
            .filter_map(|(k, v)| v.as_ref().map(|v| (k, v)))
            .collect()
    }

    /// Defaults, then the config file, then flags, then `--set` pairs.
    pub fn resolve(&self) -> Result<RunConfig> {
        let mut cfg = RunConfig::default();
        if let Some(path) = &self.config {
            cfg.apply_file(path)?;
        }
        for (k, v) in self.overrides() {
            cfg.set(k, v)?;
        }
        for pair in &self.set {
            let (k, v) = pair
                .split_once('=')
                .ok_or_else(|| CliError::Config(format!("--set expects KEY=VALUE, got {pair:?}")))?;
            cfg.set(k, v)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn write_output(dir: &Path, name: &str, contents: &str) -> Result<PathBuf> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    let path = dir.join(name);
    std::fs::write(&path, contents).map_err(|e| CliError::io(&path, e))?;
    Ok(path)
}

/// Runs a parsed command; human-readable progress goes to stdout.
pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Load(c) => cmd_load(&c.resolve()?),
        Command::Equilibrium(c) => cmd_equilibrium(&c.resolve()?),
        Command::Compare(c) => cmd_compare(&c.resolve()?),
        Command::BenchLoading {
            common,
            probit_draws,
            logit_theta,
            equilibrium,
        } => cmd_bench_loading(&common.resolve()?, probit_draws, logit_theta, equilibrium),
        Command::ProbitError(c) => cmd_probit_error(&c.resolve()?),
        Command::GridGen(c) => cmd_grid_gen(&c.resolve()?),
    }
}

pub fn cmd_load(cfg: &RunConfig) -> Result<()> {
    let (network, demand) = cfg.instance()?;
    let state = assign_all(&network, &network.free_flow_cost, cfg.model, &demand, cfg.method)?;
    let residual = conservation_by_destination(&network, &demand, &state);
    write_output(&cfg.out_dir, "flows.csv", &state.aggregate_csv(&network.graph))?;
    write_output(&cfg.out_dir, "flows_by_destination.csv", &state.to_csv(&network.graph))?;
    let scale = demand.total().max(1.0);
    println!("model = {}", cfg.model.name());
    println!("method = {}", cfg.method.name());
    println!("links = {}", network.link_count());
    println!("destinations = {}", demand.destination_count());
    println!("total_demand = {}", demand.total());
    println!("total_link_flow = {}", state.aggregate.iter().sum::<f64>());
    println!("max_conservation_residual = {residual:e}");
    println!(
        "conservation = {}",
        if residual <= 1e-8 * scale { "pass" } else { "fail" }
    );
    if is_unit_od(&demand) {
        let rows = flow_table(&network, &demand)?;
        write_output(&cfg.out_dir, "flow_table.csv", &flow_table_csv(&network, &rows))?;
        let g = &network.graph;
        let mut table = format!("{:<16}", "");
        for (i, j) in g.links() {
            let _ = write!(table, "{:>6}", format!("{}-{}", g.label(i), g.label(j)));
        }
        for (model, method, x) in &rows {
            let _ = write!(table, "\n{:<16}", format!("{} {}", model.name(), method.name()));
            for v in x {
                let _ = write!(table, "{:>6}", format!("{v:.2}"));
            }
        }
        println!("{table}");
    }
    Ok(())
}

pub fn cmd_equilibrium(cfg: &RunConfig) -> Result<()> {
    if cfg.model == RouteModel::ShortestPath {
        return Err(CliError::Config("equilibrium needs a stochastic model, not sp".into()));
    }
    let problem = build_problem(cfg)?;
    let reference = match &cfg.reference {
        Some(path) => Some(read_column(path, if cfg.solver.is_dual() { "cost" } else { "flow" })?),
        None => None,
    };
    if let Some(r) = &reference {
        if r.len() != problem.link_count() {
            return Err(CliError::Config(format!(
                "reference has {} links, network has {}",
                r.len(),
                problem.link_count()
            )));
        }
    }
    let run = run_solver(&problem, cfg.solver, &SolverSettings::from_config(cfg), reference, &cfg.echo())?;
    write_output(&cfg.out_dir, "trace.csv", &run.trace_csv)?;
    write_output(&cfg.out_dir, "final.csv", &run.final_csv(&problem.network))?;
    println!("solver = {}", run.solver);
    println!("iterations = {}", run.iterations);
    println!("converged = {}", run.converged);
    println!("objective = {:.15e}", run.objective);
    if let Some(p) = run.points.last().filter(|p| !p.eta.is_nan()) {
        println!("{} = {:e}", if cfg.solver.is_dual() { "eta_c" } else { "eta_x" }, p.eta);
    }
    println!("max_conservation_residual = {:e}", problem.conservation_residual(&run.flows));
    Ok(())
}

pub fn cmd_compare(cfg: &RunConfig) -> Result<()> {
    let problem = build_problem(cfg)?;
    let optimum = reference_run(&problem, 20 * cfg.max_iter.max(100))?.objective;
    let settings = SolverSettings::from_config(cfg);
    let mut combined = String::new();
    let _ = writeln!(combined, "# reference_objective = {optimum:.17e}");
    for (k, v) in cfg.echo() {
        let _ = writeln!(combined, "# {k} = {v}");
    }
    combined.push_str("solver,iter,elapsed_seconds,objective,relative_gap\n");
    println!("reference_objective = {optimum:.15e}");
    for solver in Solver::ALL {
        let run = run_solver(&problem, solver, &settings, None, &[])?;
        for p in &run.points {
            let _ = writeln!(
                combined,
                "{},{},{},{},{}",
                solver,
                p.iter,
                p.elapsed_seconds,
                p.objective,
                relative_gap(p.objective, optimum)
            );
        }
        let reached = run.time_to_gap(optimum, cfg.target_gap);
        println!(
            "{solver}: iterations = {}, objective = {:.12e}, time_to_gap({:e}) = {}",
            run.iterations,
            run.objective,
            cfg.target_gap,
            reached.map_or("not reached".into(), |p| format!("{:.4}s (iter {})", p.elapsed_seconds, p.iter))
        );
    }
    write_output(&cfg.out_dir, "compare.csv", &combined)?;
    Ok(())
}

pub fn cmd_bench_loading(cfg: &RunConfig, probit_draws: usize, logit_theta: f64, equilibrium: bool) -> Result<()> {
    if probit_draws == 0 {
        return Err(CliError::Config("probit_draws must be at least 1".into()));
    }
    if !(logit_theta > 0.0 && logit_theta.is_finite()) {
        return Err(CliError::Config(format!("logit_theta must be positive, got {logit_theta}")));
    }
    let mut csv = format!("{}\n", TimingRow::HEADER);
    for &k in &cfg.grid_sizes {
        let mut rows = bench_loading(cfg, k, probit_draws, logit_theta)?;
        if equilibrium {
            rows.extend(equilibrium_scaling(cfg, k, cfg.target_gap)?);
        }
        for r in rows {
            println!("k = {}, {} = {:.4}s", r.k, r.task, r.seconds);
            csv.push_str(&r.csv_line());
            csv.push('\n');
        }
    }
    write_output(&cfg.out_dir, "bench_loading.csv", &csv)?;
    Ok(())
}

pub fn cmd_probit_error(cfg: &RunConfig) -> Result<()> {
    let mut csv = String::from("k,draws,max_relative_error\n");
    for &k in &cfg.grid_sizes {
        let (network, demand) = generate_grid(&cfg.grid_spec(k))?;
        for (r, err) in probit_errors(&network, &demand, &cfg.draws, cfg.reference_draws, cfg.variance_scale, cfg.seed)? {
            println!("k = {k}, draws = {r}, max_relative_error = {err:.6}");
            let _ = writeln!(csv, "{k},{r},{err}");
        }
    }
    write_output(&cfg.out_dir, "probit_error.csv", &csv)?;
    Ok(())
}

pub fn cmd_grid_gen(cfg: &RunConfig) -> Result<()> {
    let sizes = cfg.grid_k.map_or_else(|| cfg.grid_sizes.clone(), |k| vec![k]);
    for k in sizes {
        let (network, demand) = generate_grid(&cfg.grid_spec(k))?;
        let (net, trips) = write_tntp(&network, &demand);
        write_output(&cfg.out_dir, &format!("grid{k}_net.tntp"), &net)?;
        write_output(&cfg.out_dir, &format!("grid{k}_trips.tntp"), &trips)?;
        write_output(&cfg.out_dir, &format!("grid{k}_links.csv"), &network.to_csv())?;
        println!(
            "k = {k}: nodes = {}, links = {}, destinations = {}, od_pairs = {}, total_demand = {}",
            network.node_count(),
            network.link_count(),
            demand.destination_count(),
            demand.od_pair_count(),
            demand.total()
        );
    }
    Ok(())
}
