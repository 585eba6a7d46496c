//! Primal objective (cost integral minus scaled entropy) and the MSA and
//! partial-linearization solvers.

use crate::algebra::NgevParams;
use crate::error::{Error, Result};
use crate::loading::FlowState;
use crate::network::Graph;
use crate::problem::Problem;
use crate::trace::{
    max_relative_deviation, relative_change_below, ConvergenceTrace, PrimalRow, Stopwatch,
};

/// Node entropies H_i = −Σ_j x_ij ln(x_ij / (α_ji z_i)) with z_i the outflow of i.
///
/// Zero link flows and zero-outflow nodes contribute nothing.
pub fn entropy(graph: &Graph, link_flow: &[f64], params: &NgevParams) -> Vec<f64> {
    (0..graph.node_count())
        .map(|i| -node_entropy_sum(graph, i, |l| link_flow[l], params))
        .collect()
}

/// Σ_j x_ij ln(x_ij / (α_ji z_i)) at node `i`.
#[inline]
fn node_entropy_sum(
    graph: &Graph,
    i: usize,
    flow: impl Fn(usize) -> f64,
    params: &NgevParams,
) -> f64 {
    let out = graph.out_links(i);
    let z: f64 = out.iter().map(|&l| flow(l).max(0.0)).sum();
    if z <= 0.0 {
        return 0.0;
    }
    let mut s = 0.0;
    for &l in out {
        let x = flow(l);
        if x > 0.0 {
            s += x * (x / (params.alpha[l] * z)).ln();
        }
    }
    s
}

/// Σ_i (1/θ_i) Σ_j x_ij ln(x_ij / (α_ji z_i)) for one commodity.
fn scaled_entropy_term(graph: &Graph, flow: impl Fn(usize) -> f64 + Copy, params: &NgevParams) -> f64 {
    (0..graph.node_count())
        .map(|i| node_entropy_sum(graph, i, flow, params) / params.theta[i])
        .sum()
}

/// Z_P = C(X) + Σ_k Σ_i (1/θ^k_i) Σ_j x^k_ij ln(x^k_ij / (α^k_ji z^k_i)).
pub fn primal_objective(problem: &Problem, state: &FlowState) -> Result<f64> {
    if state.link_flows.len() != problem.commodities.len() {
        return Err(Error::Validation(format!(
            "flow state has {} commodities, problem has {}",
            state.link_flows.len(),
            problem.commodities.len()
        )));
    }
    let integral = problem.bpr.cost_integral(&state.aggregate)?;
    let graph = &problem.network.graph;
    let entropy: f64 = problem
        .commodities
        .iter()
        .zip(&state.link_flows)
        .map(|(c, x)| scaled_entropy_term(graph, |l| x[l], &c.params))
        .sum();
    Ok(integral + entropy)
}

/// Z_P along the segment x + γ(y − x).
struct Segment<'a> {
    problem: &'a Problem,
    x: &'a FlowState,
    y: &'a FlowState,
    aggregate: Vec<f64>,
}

impl<'a> Segment<'a> {
    fn new(problem: &'a Problem, x: &'a FlowState, y: &'a FlowState) -> Self {
        Segment {
            problem,
            x,
            y,
            aggregate: vec![0.0; x.aggregate.len()],
        }
    }

    fn objective(&mut self, gamma: f64) -> f64 {
        let lerp = |a: f64, b: f64| (a + gamma * (b - a)).max(0.0);
        for (a, (xa, ya)) in self
            .aggregate
            .iter_mut()
            .zip(self.x.aggregate.iter().zip(&self.y.aggregate))
        {
            *a = lerp(*xa, *ya);
        }
        let graph = &self.problem.network.graph;
        let entropy: f64 = self
            .problem
            .commodities
            .iter()
            .enumerate()
            .map(|(k, c)| {
                let (xk, yk) = (&self.x.link_flows[k], &self.y.link_flows[k]);
                scaled_entropy_term(graph, |l| lerp(xk[l], yk[l]), &c.params)
            })
            .sum();
        self.problem.bpr.cost_integral_unchecked(&self.aggregate) + entropy
    }
}

/// Golden-section search for the minimizer of `f` on [0, 1], stopping when
/// the bracket is narrower than `tol`. Returns (γ, f(γ)).
pub fn golden_section(mut f: impl FnMut(f64) -> f64, tol: f64) -> (f64, f64) {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (0.0f64, 1.0f64);
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    while b - a > tol {
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
    }
    if fc <= fd {
        (c, fc)
    } else {
        (d, fd)
    }
}

/// Narrowest bracket tried when no step in [0, 1] improves on γ = 0.
const MIN_BRACKET: f64 = 1e-12;

/// Minimizes `f` over [0, 1] given f(0) = `f0`.
///
/// Candidates are the golden-section point and γ = 1. If neither improves on
/// γ = 0 the search is repeated on [0, tol·w] for the previous width w, which
/// is reported as a refinement. Returns `None` on non-finite values.
fn line_search(mut f: impl FnMut(f64) -> f64, f0: f64, tol: f64) -> Option<(f64, f64, bool)> {
    let f1 = f(1.0);
    let mut width = 1.0;
    let mut refined = false;
    loop {
        let (g, fg) = golden_section(|g| f(g * width), tol);
        if !(fg.is_finite() && f1.is_finite()) {
            return None;
        }
        let mut best = (0.0, f0);
        for cand in [(g * width, fg), (1.0, f1)] {
            if cand.1 < best.1 {
                best = cand;
            }
        }
        if best.0 > 0.0 || width * tol < MIN_BRACKET {
            return Some((best.0, best.1, refined));
        }
        width *= tol;
        refined = true;
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PrimalOptions {
    pub max_iter: usize,
    /// Stop when the relative objective change falls to this level.
    pub tol: f64,
    /// Golden-section bracket width.
    pub line_search_tol: f64,
    /// Aggregate flows used for the η_x column.
    pub reference: Option<Vec<f64>>,
}

impl Default for PrimalOptions {
    fn default() -> Self {
        PrimalOptions {
            max_iter: 100,
            tol: 1e-8,
            line_search_tol: 1e-3,
            reference: None,
        }
    }
}

impl PrimalOptions {
    fn validate(&self) -> Result<()> {
        if !(self.tol >= 0.0) {
            return Err(Error::Validation(format!("tolerance must be non-negative, got {}", self.tol)));
        }
        if !(self.line_search_tol > 0.0 && self.line_search_tol < 1.0) {
            return Err(Error::Validation(format!(
                "line-search tolerance must lie in (0, 1), got {}",
                self.line_search_tol
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct PrimalState {
    pub flows: FlowState,
    /// c(X) at the final flows.
    pub costs: Vec<f64>,
    pub objective: f64,
    pub iterations: usize,
    pub converged: bool,
    pub trace: ConvergenceTrace<PrimalRow>,
}

#[derive(Clone, Copy, PartialEq)]
enum Step {
    Averaging,
    LineSearch(f64),
}

/// Method of successive averages: γ_m = 1/m for iterations m = 1, 2, ….
pub fn solve_msa(problem: &Problem, opts: &PrimalOptions) -> Result<PrimalState> {
    run(problem, opts, None, Step::Averaging)
}

/// Partial linearization: one NGEV loading per iteration plus an exact
/// line search on the primal objective.
pub fn solve_pl(problem: &Problem, opts: &PrimalOptions) -> Result<PrimalState> {
    run(problem, opts, None, Step::LineSearch(opts.line_search_tol))
}

/// [`solve_pl`] started from given feasible flows instead of the free-flow loading.
pub fn solve_pl_from(problem: &Problem, opts: &PrimalOptions, initial: FlowState) -> Result<PrimalState> {
    run(problem, opts, Some(initial), Step::LineSearch(opts.line_search_tol))
}

fn run(
    problem: &Problem,
    opts: &PrimalOptions,
    initial: Option<FlowState>,
    step: Step,
) -> Result<PrimalState> {
    opts.validate()?;
    let clock = Stopwatch::start();
    let mut trace = ConvergenceTrace::new();
    trace.push_meta(
        "solver",
        if step == Step::Averaging { "msa" } else { "pl" },
    );
    trace.push_meta("model", problem.model.name());
    trace.push_meta("method", problem.method.name());
    trace.push_meta("max_iter", opts.max_iter);
    trace.push_meta("tol", opts.tol);
    if let Step::LineSearch(t) = step {
        trace.push_meta("line_search_tol", t);
    }

    let mut x = match initial {
        Some(x) => x,
        None => problem.load(problem.free_flow_cost(), None)?,
    };
    let mut objective = primal_objective(problem, &x)?;
    let mut warm = x.mu.clone();
    let mut costs = problem.bpr.cost(&x.aggregate)?;
    let mut converged = false;
    let mut iterations = 0;
    for m in 1..=opts.max_iter {
        let y = problem.load(&costs, (!warm.is_empty()).then_some(warm.as_slice()))?;
        let mut fallback = false;
        let (gamma, new_objective) = match step {
            Step::Averaging => {
                let gamma = 1.0 / m as f64;
                (gamma, None)
            }
            Step::LineSearch(tol) => {
                let mut seg = Segment::new(problem, &x, &y);
                match line_search(|g| seg.objective(g), objective, tol) {
                    Some((g, fg, refined)) => {
                        fallback = refined;
                        (g, Some(fg))
                    }
                    None => {
                        fallback = true;
                        (1.0 / m as f64, None)
                    }
                }
            }
        };
        if gamma > 0.0 {
            combine(&mut x, &y, gamma);
        }
        warm = y.mu;
        let new_objective = match new_objective {
            Some(v) => v,
            None => primal_objective(problem, &x)?,
        };
        costs = problem.bpr.cost(&x.aggregate)?;
        iterations = m;
        trace.rows.push(PrimalRow {
            iter: m,
            elapsed_seconds: clock.seconds(),
            objective: new_objective,
            eta_x: opts
                .reference
                .as_ref()
                .map_or(f64::NAN, |r| max_relative_deviation(&x.aggregate, r)),
            gamma,
            fallback,
        });
        let done = relative_change_below(objective, new_objective, opts.tol);
        objective = new_objective;
        if done {
            converged = true;
            break;
        }
    }
    // report the objective at the returned flows exactly
    if iterations > 0 {
        objective = primal_objective(problem, &x)?;
    }
    Ok(PrimalState {
        flows: x,
        costs,
        objective,
        iterations,
        converged,
        trace,
    })
}

/// x ← x + γ(y − x) per commodity; the aggregate is re-summed in commodity order.
fn combine(x: &mut FlowState, y: &FlowState, gamma: f64) {
    let lerp = |a: &mut f64, b: f64| *a = (*a + gamma * (b - *a)).max(0.0);
    for (xk, yk) in x.link_flows.iter_mut().zip(&y.link_flows) {
        xk.iter_mut().zip(yk).for_each(|(a, &b)| lerp(a, b));
    }
    for (xk, yk) in x.node_flows.iter_mut().zip(&y.node_flows) {
        xk.iter_mut().zip(yk).for_each(|(a, &b)| lerp(a, b));
    }
    x.aggregate.iter_mut().for_each(|a| *a = 0.0);
    for xk in &x.link_flows {
        x.aggregate.iter_mut().zip(xk).for_each(|(a, &b)| *a += b);
    }
    x.mu.clone_from(&y.mu);
}
