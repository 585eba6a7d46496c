//! Dual objective over link costs, its gradient, and the GP and AGP solvers.

use crate::error::{Error, Result};
use crate::loading::FlowState;
use crate::problem::Problem;
use crate::trace::{
    max_relative_deviation, relative_change_below, ConvergenceTrace, DualRow, Stopwatch,
};

/// Backtracking gives up once the step falls below this.
pub const MIN_STEP: f64 = 1e-15;

/// Z_D(c) = −C*(c) + Σ_k Σ_o μ^k_o(c) q^k_o.
pub fn dual_objective(problem: &Problem, costs: &[f64]) -> Result<f64> {
    DualEvaluator::new(problem).value(costs)
}

/// ∇Z_D(c) = X(c) − c⁻¹(c), with X(c) the NGEV loading at `costs`.
pub fn dual_gradient(problem: &Problem, costs: &[f64]) -> Result<Vec<f64>> {
    DualEvaluator::new(problem).full(costs).map(|e| e.gradient)
}

/// Elementwise max with the free-flow costs.
pub fn project(candidate: &[f64], free_flow_cost: &[f64]) -> Vec<f64> {
    candidate
        .iter()
        .zip(free_flow_cost)
        .map(|(&a, &cbar)| a.max(cbar))
        .collect()
}

/// Next momentum scalar t_{j+1} = (1 + √(1 + 4 t_j²)) / 2.
pub fn next_momentum(t: f64) -> f64 {
    (1.0 + (1.0 + 4.0 * t * t).sqrt()) / 2.0
}

pub(crate) struct Evaluation {
    pub value: f64,
    pub gradient: Vec<f64>,
    pub flows: FlowState,
}

/// Evaluates the dual, warm-starting each μ solve from the previous one.
pub(crate) struct DualEvaluator<'a> {
    problem: &'a Problem,
    warm: Option<Vec<Vec<f64>>>,
}

impl<'a> DualEvaluator<'a> {
    pub(crate) fn new(problem: &'a Problem) -> Self {
        DualEvaluator {
            problem,
            warm: None,
        }
    }

    pub(crate) fn value(&mut self, costs: &[f64]) -> Result<f64> {
        let conj = self.problem.bpr.conjugate_integral(costs)?;
        let mu = self.problem.mu(costs, self.warm.as_deref())?;
        let v = self.problem.demand_term(&mu) - conj;
        self.warm = Some(mu);
        Ok(v)
    }

    pub(crate) fn full(&mut self, costs: &[f64]) -> Result<Evaluation> {
        let conj = self.problem.bpr.conjugate_integral(costs)?;
        let inverse = self.problem.bpr.inverse_cost(costs)?;
        let flows = self.problem.load(costs, self.warm.as_deref())?;
        let value = self.problem.demand_term(&flows.mu) - conj;
        let gradient = flows
            .aggregate
            .iter()
            .zip(&inverse)
            .map(|(x, y)| x - y)
            .collect();
        self.warm = Some(flows.mu.clone());
        Ok(Evaluation {
            value,
            gradient,
            flows,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DualOptions {
    pub max_iter: usize,
    /// Stop when the relative dual-objective change falls to this level.
    pub tol: f64,
    /// Costs used for the η_c column.
    pub reference: Option<Vec<f64>>,
}

impl Default for DualOptions {
    fn default() -> Self {
        DualOptions {
            max_iter: 100,
            tol: 1e-8,
            reference: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AgpOptions {
    /// Fixed step, or the initial step when backtracking.
    pub step: f64,
    /// Minimum momentum run length before a restart is allowed.
    pub k_min: usize,
    /// Backtracking shrink factor.
    pub xi: f64,
    pub backtracking: bool,
}

impl Default for AgpOptions {
    fn default() -> Self {
        AgpOptions {
            step: 1e-4,
            k_min: 50,
            xi: 0.25,
            backtracking: true,
        }
    }
}

#[derive(Debug, Clone)]
pub struct DualState {
    pub costs: Vec<f64>,
    /// NGEV loading at the final costs.
    pub flows: FlowState,
    pub objective: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Last step size used.
    pub step_size: f64,
    pub trace: ConvergenceTrace<DualRow>,
}

fn validate(step: f64, opts: &DualOptions) -> Result<()> {
    if !(step > 0.0 && step.is_finite()) {
        return Err(Error::Validation(format!("step size must be positive, got {step}")));
    }
    if !(opts.tol >= 0.0) {
        return Err(Error::Validation(format!("tolerance must be non-negative, got {}", opts.tol)));
    }
    Ok(())
}

fn eta(opts: &DualOptions, costs: &[f64]) -> f64 {
    opts.reference
        .as_ref()
        .map_or(f64::NAN, |r| max_relative_deviation(costs, r))
}

/// Gradient projection: c ← max(c + s ∇Z_D(c), c̄) with a fixed step.
pub fn solve_gp(problem: &Problem, step: f64, opts: &DualOptions) -> Result<DualState> {
    validate(step, opts)?;
    let clock = Stopwatch::start();
    let mut trace = ConvergenceTrace::new();
    trace.push_meta("solver", "gp");
    trace.push_meta("model", problem.model.name());
    trace.push_meta("method", problem.method.name());
    trace.push_meta("step", step);
    trace.push_meta("max_iter", opts.max_iter);
    trace.push_meta("tol", opts.tol);

    let cbar = problem.free_flow_cost().to_vec();
    let mut eval = DualEvaluator::new(problem);
    let mut c = cbar.clone();
    let mut here = eval.full(&c)?;
    let mut converged = false;
    let mut iterations = 0;
    for m in 1..=opts.max_iter {
        let candidate: Vec<f64> = c.iter().zip(&here.gradient).map(|(c, g)| c + step * g).collect();
        let next_c = project(&candidate, &cbar);
        let next = eval.full(&next_c)?;
        trace.rows.push(DualRow {
            iter: m,
            elapsed_seconds: clock.seconds(),
            dual_objective: next.value,
            eta_c: eta(opts, &next_c),
            step_size: step,
            restarted: false,
            backtrack_count: 0,
        });
        let done = relative_change_below(here.value, next.value, opts.tol);
        c = next_c;
        here = next;
        iterations = m;
        if done {
            converged = true;
            break;
        }
    }
    Ok(DualState {
        costs: c,
        objective: here.value,
        flows: here.flows,
        iterations,
        converged,
        step_size: step,
        trace,
    })
}

/// Accelerated gradient projection with function-scheme adaptive restart and
/// optional backtracking on the step size.
pub fn solve_agp(problem: &Problem, agp: &AgpOptions, opts: &DualOptions) -> Result<DualState> {
    validate(agp.step, opts)?;
    if !(agp.xi > 0.0 && agp.xi < 1.0) {
        return Err(Error::Validation(format!("xi must lie in (0, 1), got {}", agp.xi)));
    }
    let clock = Stopwatch::start();
    let mut trace = ConvergenceTrace::new();
    trace.push_meta("solver", "agp");
    trace.push_meta("model", problem.model.name());
    trace.push_meta("method", problem.method.name());
    trace.push_meta("step", agp.step);
    trace.push_meta("k_min", agp.k_min);
    trace.push_meta("xi", agp.xi);
    trace.push_meta("backtracking", agp.backtracking);
    trace.push_meta("max_iter", opts.max_iter);
    trace.push_meta("tol", opts.tol);

    let cbar = problem.free_flow_cost().to_vec();
    let mut eval = DualEvaluator::new(problem);
    let mut c = cbar.clone();
    let mut b = cbar.clone();
    let mut t = 1.0f64;
    let mut j = 0usize;
    let mut s = agp.step;
    let mut value_c = f64::NAN;
    let mut converged = false;
    let mut iterations = 0;
    for m in 1..=opts.max_iter {
        let at_b = eval.full(&b)?;
        if m == 1 {
            value_c = at_b.value;
        }
        let mut backtracks = 0;
        let (p, value_p) = loop {
            let candidate: Vec<f64> =
                b.iter().zip(&at_b.gradient).map(|(b, g)| b + s * g).collect();
            let p = project(&candidate, &cbar);
            let value_p = eval.value(&p)?;
            if !agp.backtracking || sufficient_increase(&p, &b, &at_b, value_p, s) {
                break (p, value_p);
            }
            s *= agp.xi;
            backtracks += 1;
            if s < MIN_STEP {
                return Err(Error::Stall { iteration: m, step: s });
            }
        };
        let t_next = next_momentum(t);
        let momentum = (t - 1.0) / t_next;
        let extrapolated: Vec<f64> = p
            .iter()
            .zip(&c)
            .map(|(&pn, &co)| pn + momentum * (pn - co))
            .collect();
        b = project(&extrapolated, &cbar);
        let restarted = j >= agp.k_min && value_p < value_c;
        if restarted {
            j = 0;
            t = 1.0;
        } else {
            j += 1;
            t = t_next;
        }
        trace.rows.push(DualRow {
            iter: m,
            elapsed_seconds: clock.seconds(),
            dual_objective: value_p,
            eta_c: eta(opts, &p),
            step_size: s,
            restarted,
            backtrack_count: backtracks,
        });
        let done = relative_change_below(value_c, value_p, opts.tol);
        c = p;
        value_c = value_p;
        iterations = m;
        if done {
            converged = true;
            break;
        }
    }
    let last = eval.full(&c)?;
    Ok(DualState {
        costs: c,
        objective: last.value,
        flows: last.flows,
        iterations,
        converged,
        step_size: s,
        trace,
    })
}

/// Z_D(p) ≥ Z_D(b) + ∇Z_D(b)·(p − b) − ‖p − b‖²/(2s), up to rounding in the
/// objective values.
pub(crate) fn sufficient_increase(p: &[f64], b: &[f64], at_b: &Evaluation, value_p: f64, s: f64) -> bool {
    let mut linear = 0.0;
    let mut square = 0.0;
    for ((&pl, &bl), &g) in p.iter().zip(b).zip(&at_b.gradient) {
        let d = pl - bl;
        linear += g * d;
        square += d * d;
    }
    let slack = 64.0 * f64::EPSILON * (at_b.value.abs() + value_p.abs());
    value_p - at_b.value - linear + square / (2.0 * s) >= -slack
}
