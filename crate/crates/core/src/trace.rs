//! Per-iteration convergence traces and reference-based error metrics.

use std::fmt::Write as _;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

/// Links whose reference value is below this are left out of η.
pub const ETA_FLOOR: f64 = 1e-9;

/// max_l |current_l − reference_l| / reference_l over links with
/// reference_l ≥ [`ETA_FLOOR`]; 0 when no link qualifies.
pub fn max_relative_deviation(current: &[f64], reference: &[f64]) -> f64 {
    current
        .iter()
        .zip(reference)
        .filter(|&(_, &r)| r >= ETA_FLOOR)
        .map(|(&c, &r)| (c - r).abs() / r)
        .fold(0.0, f64::max)
}

pub trait TraceRow {
    const HEADER: &'static str;
    fn iter(&self) -> usize;
    fn elapsed_seconds(&self) -> f64;
    fn write_csv(&self, out: &mut String);
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PrimalRow {
    pub iter: usize,
    pub elapsed_seconds: f64,
    pub objective: f64,
    /// NaN when no reference flows were given.
    pub eta_x: f64,
    pub gamma: f64,
    /// The line search found no improvement on [0, 1] and was refined on a
    /// narrower bracket, or failed outright and γ = 1/(m+1) was used.
    pub fallback: bool,
}

impl TraceRow for PrimalRow {
    const HEADER: &'static str = "iter,elapsed_seconds,objective,eta_x,gamma,line_search_fallback";

    fn iter(&self) -> usize {
        self.iter
    }

    fn elapsed_seconds(&self) -> f64 {
        self.elapsed_seconds
    }

    fn write_csv(&self, out: &mut String) {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            self.iter,
            self.elapsed_seconds,
            self.objective,
            self.eta_x,
            self.gamma,
            u8::from(self.fallback)
        );
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DualRow {
    pub iter: usize,
    pub elapsed_seconds: f64,
    pub dual_objective: f64,
    /// NaN when no reference costs were given.
    pub eta_c: f64,
    pub step_size: f64,
    pub restarted: bool,
    pub backtrack_count: usize,
}

impl TraceRow for DualRow {
    const HEADER: &'static str =
        "iter,elapsed_seconds,dual_objective,eta_c,step_size,restarted,backtrack_count";

    fn iter(&self) -> usize {
        self.iter
    }

    fn elapsed_seconds(&self) -> f64 {
        self.elapsed_seconds
    }

    fn write_csv(&self, out: &mut String) {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{}",
            self.iter,
            self.elapsed_seconds,
            self.dual_objective,
            self.eta_c,
            self.step_size,
            u8::from(self.restarted),
            self.backtrack_count
        );
    }
}

/// Ordered trace rows plus `key = value` metadata.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceTrace<R> {
    pub metadata: Vec<(String, String)>,
    pub rows: Vec<R>,
    /// Seconds since the Unix epoch when the run started.
    pub started_at: f64,
}

impl<R: TraceRow> ConvergenceTrace<R> {
    pub fn new() -> Self {
        ConvergenceTrace {
            metadata: Vec::new(),
            rows: Vec::new(),
            started_at: SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map(|d| d.as_secs_f64())
                .unwrap_or(0.0),
        }
    }

    pub fn push_meta(&mut self, key: impl Into<String>, value: impl ToString) {
        self.metadata.push((key.into(), value.to_string()));
    }

    /// Metadata as `# key = value` lines, then the header and rows.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "# started_at = {}", self.started_at);
        let _ = writeln!(out, "# iterations = {}", self.rows.len());
        for (k, v) in &self.metadata {
            let _ = writeln!(out, "# {k} = {v}");
        }
        out.push_str(R::HEADER);
        out.push('\n');
        for r in &self.rows {
            r.write_csv(&mut out);
        }
        out
    }

    /// Rows strictly increasing in iter with non-decreasing elapsed time.
    pub fn is_well_ordered(&self) -> bool {
        self.rows.windows(2).all(|w| {
            w[0].iter() < w[1].iter() && w[0].elapsed_seconds() <= w[1].elapsed_seconds()
        })
    }
}

impl<R: TraceRow> Default for ConvergenceTrace<R> {
    fn default() -> Self {
        Self::new()
    }
}

/// Monotonic stopwatch shared by the solvers.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Stopwatch(Instant);

impl Stopwatch {
    pub(crate) fn start() -> Self {
        Stopwatch(Instant::now())
    }

    pub(crate) fn seconds(&self) -> f64 {
        self.0.elapsed().as_secs_f64()
    }
}

/// |new − old| ≤ tol·|old| (with exact equality always counting as converged).
pub(crate) fn relative_change_below(old: f64, new: f64, tol: f64) -> bool {
    old == new || (new - old).abs() <= tol * old.abs()
}
