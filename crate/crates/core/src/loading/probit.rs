//! Monte-Carlo probit loading: all-or-nothing assignment on sampled costs.

use std::fmt::Write as _;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;

use super::sp_assign;
use crate::algebra::validate_costs;
use crate::error::{Error, Result};
use crate::network::{DemandTable, Graph, Network};

#[derive(Debug, Clone, PartialEq)]
pub struct ProbitOptions {
    pub draws: usize,
    /// Per-link cost variance is `variance_scale · c̄`.
    pub variance_scale: f64,
    pub seed: u64,
    /// Sampled costs are floored here to keep them positive.
    pub cost_floor: f64,
    /// Draw counts at which the running mean is recorded.
    pub checkpoints: Vec<usize>,
    /// Keep every draw's flows.
    pub record_draws: bool,
    pub parallel: bool,
}

impl ProbitOptions {
    pub fn new(draws: usize, variance_scale: f64, seed: u64) -> Self {
        ProbitOptions {
            draws,
            variance_scale,
            seed,
            cost_floor: 1e-6,
            checkpoints: Vec::new(),
            record_draws: false,
            parallel: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProbitRun {
    /// X(R), the mean over all draws.
    pub mean: Vec<f64>,
    /// (R, X(R)) at each requested checkpoint ≤ draws, in ascending R.
    pub checkpoints: Vec<(usize, Vec<f64>)>,
    /// Per-draw aggregate flows, when recorded.
    pub draws: Vec<Vec<f64>>,
}

impl ProbitRun {
    /// CSV rows `draw,link,flow` (draws numbered from 1).
    pub fn draws_csv(&self, graph: &Graph) -> String {
        let mut out = String::from("draw,link,tail_id,head_id,flow\n");
        for (r, x) in self.draws.iter().enumerate() {
            for (l, v) in x.iter().enumerate() {
                let _ = writeln!(
                    out,
                    "{},{},{},{},{}",
                    r + 1,
                    l,
                    graph.label(graph.tail(l)),
                    graph.label(graph.head(l)),
                    v
                );
            }
        }
        out
    }
}

const BATCH: usize = 64;

/// Averages all-or-nothing assignments over `opts.draws` cost samples
/// `ĉ = max(floor, Normal(c, variance_scale · c̄))`, independent per link.
pub fn probit_load(
    network: &Network,
    costs: &[f64],
    demand: &DemandTable,
    opts: &ProbitOptions,
) -> Result<ProbitRun> {
    validate_costs(network, costs)?;
    if opts.draws == 0 {
        return Err(Error::Validation("probit needs at least one draw".into()));
    }
    if !(opts.variance_scale > 0.0 && opts.variance_scale.is_finite()) {
        return Err(Error::Validation(format!(
            "probit variance scale must be positive, got {}",
            opts.variance_scale
        )));
    }
    if !(opts.cost_floor > 0.0) {
        return Err(Error::Validation("probit cost floor must be positive".into()));
    }
    let normals: Vec<Normal<f64>> = costs
        .iter()
        .zip(&network.free_flow_cost)
        .map(|(&c, &cbar)| {
            Normal::new(c, (opts.variance_scale * cbar).sqrt())
                .map_err(|e| Error::Validation(e.to_string()))
        })
        .collect::<Result<_>>()?;
    let mut checkpoints: Vec<usize> = opts
        .checkpoints
        .iter()
        .copied()
        .filter(|&r| r >= 1 && r <= opts.draws)
        .collect();
    checkpoints.sort_unstable();
    checkpoints.dedup();

    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let m = network.link_count();
    let mut sum = vec![0.0; m];
    let mut run = ProbitRun {
        mean: Vec::new(),
        checkpoints: Vec::with_capacity(checkpoints.len()),
        draws: Vec::new(),
    };
    let mut next_checkpoint = checkpoints.iter().peekable();
    let mut done = 0;
    while done < opts.draws {
        let batch = BATCH.min(opts.draws - done);
        let samples: Vec<Vec<f64>> = (0..batch)
            .map(|_| {
                normals
                    .iter()
                    .map(|n| n.sample(&mut rng).max(opts.cost_floor))
                    .collect()
            })
            .collect();
        let assign = |c: &Vec<f64>| sp_assign(&network.graph, c, demand).map(|s| s.aggregate);
        let flows: Vec<Vec<f64>> = if opts.parallel {
            samples.par_iter().map(assign).collect::<Result<_>>()?
        } else {
            samples.iter().map(assign).collect::<Result<_>>()?
        };
        for x in flows {
            done += 1;
            sum.iter_mut().zip(&x).for_each(|(s, v)| *s += v);
            if next_checkpoint.peek() == Some(&&done) {
                next_checkpoint.next();
                run.checkpoints
                    .push((done, sum.iter().map(|s| s / done as f64).collect()));
            }
            if opts.record_draws {
                run.draws.push(x);
            }
        }
    }
    run.mean = sum.iter().map(|s| s / opts.draws as f64).collect();
    Ok(run)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tiny_variance_reproduces_shortest_path() {
        let net = Network::from_links(
            4,
            &[(0, 1, 1.0), (0, 2, 2.0), (1, 3, 1.0), (2, 3, 1.0)],
            1.0,
        )
        .unwrap();
        let demand = DemandTable::from_pairs(4, [(0, 3, 3.0)]).unwrap();
        let run = probit_load(
            &net,
            &net.free_flow_cost,
            &demand,
            &ProbitOptions::new(50, 1e-12, 7),
        )
        .unwrap();
        assert_eq!(run.mean, vec![3.0, 0.0, 3.0, 0.0]);
    }

    #[test]
    fn rejects_bad_options() {
        let net = Network::from_links(2, &[(0, 1, 1.0)], 1.0).unwrap();
        let demand = DemandTable::from_pairs(2, [(0, 1, 1.0)]).unwrap();
        let c = net.free_flow_cost.clone();
        assert!(probit_load(&net, &c, &demand, &ProbitOptions::new(0, 0.3, 1)).is_err());
        assert!(probit_load(&net, &c, &demand, &ProbitOptions::new(5, 0.0, 1)).is_err());
    }
}
