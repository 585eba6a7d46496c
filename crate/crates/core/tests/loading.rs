mod common;

use common::*;
use ngev_core::algebra::{expected_min_cost, fixed_point_residual, make_params, AlgebraKind};
use ngev_core::loading::{
    assign_all, build_commodities, choice_probabilities, conservation_residual,
    efficient_links, enumerate_path_flows, load, probit_load, ProbitOptions,
};
use ngev_core::network::sp_distances_to;
use ngev_core::{LoadMethod, NgevParams, Network, RouteModel};
use proptest::prelude::*;

const MODELS: [RouteModel; 4] = [
    RouteModel::Model1,
    RouteModel::Model2,
    RouteModel::Model3,
    RouteModel::Model4,
];

/// μ on a DAG whose links all go from lower to higher node ids, by direct
/// backward recursion.
fn dag_mu(net: &Network, costs: &[f64], params: &NgevParams, d: usize) -> Vec<f64> {
    let g = &net.graph;
    let mut mu = vec![f64::INFINITY; g.node_count()];
    mu[d] = 0.0;
    for i in (0..d).rev() {
        let theta = params.theta[i];
        let s: f64 = g
            .out_links(i)
            .iter()
            .filter(|&&l| mu[g.head(l)].is_finite())
            .map(|&l| params.alpha[l] * (-theta * (costs[l] + mu[g.head(l)])).exp())
            .sum();
        if s > 0.0 {
            mu[i] = -s.ln() / theta;
        }
    }
    mu
}

/// Link flows from explicitly walking every path from `o` to `d`.
fn dag_path_flows(
    net: &Network,
    costs: &[f64],
    params: &NgevParams,
    o: usize,
    d: usize,
    q: f64,
    out: &mut [f64],
) {
    let g = &net.graph;
    let mu = dag_mu(net, costs, params, d);
    fn walk(
        g: &ngev_core::Graph,
        costs: &[f64],
        params: &NgevParams,
        mu: &[f64],
        i: usize,
        d: usize,
        mass: f64,
        path: &mut Vec<usize>,
        out: &mut [f64],
    ) {
        if i == d {
            for &l in path.iter() {
                out[l] += mass;
            }
            return;
        }
        for &l in g.out_links(i) {
            let j = g.head(l);
            if mu[j].is_infinite() {
                continue;
            }
            let p = params.alpha[l] * (-params.theta[i] * (costs[l] + mu[j] - mu[i])).exp();
            path.push(l);
            walk(g, costs, params, mu, j, d, mass * p, path, out);
            path.pop();
        }
    }
    walk(g, costs, params, &mu, o, d, q, &mut Vec::new(), out);
}

/// Logit path flows: p(r) ∝ exp(−θ c(r)) over all paths of a DAG.
fn dag_logit_path_flows(net: &Network, costs: &[f64], theta: f64, o: usize, d: usize, q: f64) -> Vec<f64> {
    let g = &net.graph;
    let mut paths: Vec<(Vec<usize>, f64)> = Vec::new();
    let mut stack = vec![(o, Vec::new(), 0.0)];
    while let Some((i, path, cost)) = stack.pop() {
        if i == d {
            paths.push((path, cost));
            continue;
        }
        for &l in g.out_links(i) {
            let mut p = path.clone();
            p.push(l);
            stack.push((g.head(l), p, cost + costs[l]));
        }
    }
    let best = paths.iter().map(|p| p.1).fold(f64::INFINITY, f64::min);
    let total: f64 = paths.iter().map(|p| (-theta * (p.1 - best)).exp()).sum();
    let mut x = vec![0.0; g.link_count()];
    for (path, cost) in &paths {
        let share = q * (-theta * (cost - best)).exp() / total;
        for &l in path {
            x[l] += share;
        }
    }
    x
}

fn dag_oracle(net: &Network, model: RouteModel, demand: &ngev_core::DemandTable) -> Vec<f64> {
    let costs = &net.free_flow_cost;
    let mut x = vec![0.0; net.link_count()];
    for c in build_commodities(net, demand, model, costs).unwrap() {
        for (o, &q) in c.demand.iter().enumerate() {
            if q > 0.0 {
                dag_path_flows(net, costs, &c.params, o, c.destination, q, &mut x);
            }
        }
    }
    x
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn mta_matches_path_enumeration_on_random_dags(seed in any::<u64>(), n in 3usize..=10, density in 0.2f64..0.7) {
        let net = random_dag(seed, n, density);
        let demand = random_demand(seed, n);
        for model in MODELS {
            let mta = assign_all(&net, &net.free_flow_cost, model, &demand, LoadMethod::Mta).unwrap();
            let oracle = dag_oracle(&net, model, &demand);
            prop_assert!(max_abs_diff(&mta.aggregate, &oracle) <= 1e-10, "{model:?}");
        }
    }

    #[test]
    fn logit_matches_path_logit_on_random_dags(seed in any::<u64>(), n in 3usize..=8, theta in 0.2f64..3.0) {
        let net = random_dag(seed, n, 0.5);
        let demand = ngev_core::DemandTable::from_pairs(n, [(0, n - 1, 2.0)]).unwrap();
        let mta = assign_all(&net, &net.free_flow_cost, RouteModel::Logit(theta), &demand, LoadMethod::Mta).unwrap();
        let oracle = dag_logit_path_flows(&net, &net.free_flow_cost, theta, 0, n - 1, 2.0);
        prop_assert!(max_abs_diff(&mta.aggregate, &oracle) <= 1e-10);
    }

    #[test]
    fn model1_is_unit_logit(seed in any::<u64>(), n in 3usize..=9) {
        for net in [random_dag(seed, n, 0.4), random_cyclic(seed, n, n)] {
            let demand = random_demand(seed, n);
            let a = assign_all(&net, &net.free_flow_cost, RouteModel::Model1, &demand, LoadMethod::Mta).unwrap();
            let b = assign_all(&net, &net.free_flow_cost, RouteModel::Logit(1.0), &demand, LoadMethod::Mta).unwrap();
            prop_assert!(max_abs_diff(&a.aggregate, &b.aggregate) <= 1e-12);
            let params = NgevParams::logit(&net.graph, 1.0).unwrap();
            let mu_ngev = expected_min_cost(&net, &net.free_flow_cost, AlgebraKind::Ngev(&params), n - 1).unwrap();
            let mu_logit = expected_min_cost(&net, &net.free_flow_cost, AlgebraKind::Logit { theta: 1.0 }, n - 1).unwrap();
            prop_assert!(max_abs_diff(&mu_ngev, &mu_logit) <= 1e-12);
        }
    }

    #[test]
    fn flows_conserve_and_probabilities_normalise(seed in any::<u64>(), n in 3usize..=9, extra in 0usize..8) {
        let net = random_cyclic(seed, n, extra);
        let demand = random_demand(seed, n);
        let costs = &net.free_flow_cost;
        for model in MODELS {
            for method in [LoadMethod::Mta, LoadMethod::Dial] {
                let state = assign_all(&net, costs, model, &demand, method).unwrap();
                let commodities = build_commodities(&net, &demand, model, costs).unwrap();
                for (c, x) in commodities.iter().zip(&state.link_flows) {
                    prop_assert!(conservation_residual(&net.graph, x, &c.modified_demand()) <= 1e-9);
                    prop_assert!(x.iter().all(|&v| v >= 0.0));
                }
                for (k, c) in commodities.iter().enumerate() {
                    let mask = (method == LoadMethod::Dial).then(|| efficient_links(&net.graph, costs, c.destination));
                    let prob = choice_probabilities(&net.graph, costs, &c.params, &state.mu[k], c.destination, mask.as_deref());
                    for i in 0..n {
                        if i == c.destination || state.mu[k][i].is_infinite() {
                            continue;
                        }
                        let s: f64 = net.graph.out_links(i).iter().map(|&l| prob.prob[l]).sum();
                        prop_assert!((s - 1.0).abs() <= 1e-12, "node {i} sums to {s}");
                    }
                }
            }
        }
    }

    #[test]
    fn dial_uses_only_efficient_links(seed in any::<u64>(), n in 3usize..=9, extra in 0usize..8) {
        let net = random_cyclic(seed, n, extra);
        let demand = random_demand(seed, n);
        for model in MODELS {
            let state = assign_all(&net, &net.free_flow_cost, model, &demand, LoadMethod::Dial).unwrap();
            let eff = efficient_links(&net.graph, &net.free_flow_cost, n - 1);
            for (l, &x) in state.aggregate.iter().enumerate() {
                prop_assert!(eff[l] || x == 0.0);
            }
        }
    }

    #[test]
    fn softmax_and_fixed_point_forms_agree(seed in any::<u64>(), n in 3usize..=9, extra in 0usize..8) {
        let net = random_cyclic(seed, n, extra);
        let costs = &net.free_flow_cost;
        let d = n - 1;
        let sp = sp_distances_to(&net.graph, costs, d, None);
        for model in [RouteModel::Model1, RouteModel::Model3, RouteModel::Model4] {
            let params = make_params(model, &net, &sp, d, None).unwrap();
            let mu = expected_min_cost(&net, costs, AlgebraKind::Ngev(&params), d).unwrap();
            prop_assert!(fixed_point_residual(&net.graph, costs, &params, &mu, d, None) <= 1e-9);
            let prob = choice_probabilities(&net.graph, costs, &params, &mu, d, None);
            for (l, (i, j)) in net.graph.links().enumerate() {
                if i == d {
                    continue;
                }
                let direct = params.alpha[l] * (-params.theta[i] * (costs[l] + mu[j] - mu[i])).exp();
                prop_assert!((direct - prob.prob[l]).abs() <= 1e-9, "link {l}: {direct} vs {}", prob.prob[l]);
            }
        }
    }
}

#[test]
fn probability_forms_agree_tightly_at_a_converged_fixed_point() {
    let (net, _) = cyclic_example();
    let costs = &net.free_flow_cost;
    let d = 8;
    let params = NgevParams::logit(&net.graph, 1.0).unwrap();
    let (mu, _) = ngev_core::algebra::expected_min_cost_with(
        &net.graph,
        costs,
        AlgebraKind::Ngev(&params),
        d,
        None,
        None,
        ngev_core::algebra::ValueIteration { tol: 1e-15, max_sweeps: 100_000 },
    )
    .unwrap();
    let prob = choice_probabilities(&net.graph, costs, &params, &mu, d, None);
    for (l, (i, j)) in net.graph.links().enumerate() {
        let direct = (-(costs[l] + mu[j] - mu[i])).exp();
        assert!((direct - prob.prob[l]).abs() <= 1e-12);
    }
}

/// Logit μ and flows on a cyclic network from the power series Σ_k A^k of
/// the link weight matrix A_ij = Σ_l exp(−θ c_l).
fn power_series_logit(net: &Network, theta: f64, o: usize, d: usize) -> (Vec<f64>, Vec<f64>) {
    let n = net.node_count();
    let mut a = vec![vec![0.0; n]; n];
    for (l, (i, j)) in net.graph.links().enumerate() {
        if i != d {
            a[i][j] += (-theta * net.free_flow_cost[l]).exp();
        }
    }
    let mut sum = vec![vec![0.0; n]; n];
    let mut term: Vec<Vec<f64>> = (0..n).map(|i| (0..n).map(|j| f64::from(u8::from(i == j))).collect()).collect();
    for _ in 0..10_000 {
        let mut largest: f64 = 0.0;
        for i in 0..n {
            for j in 0..n {
                sum[i][j] += term[i][j];
                largest = largest.max(term[i][j]);
            }
        }
        if largest < 1e-300 {
            break;
        }
        let mut next = vec![vec![0.0; n]; n];
        for i in 0..n {
            for k in 0..n {
                if term[i][k] != 0.0 {
                    for j in 0..n {
                        next[i][j] += term[i][k] * a[k][j];
                    }
                }
            }
        }
        term = next;
    }
    let mu = (0..n).map(|i| -sum[i][d].ln() / theta).collect();
    let flows = net
        .graph
        .links()
        .enumerate()
        .map(|(l, (i, j))| {
            if i == d {
                return 0.0;
            }
            sum[o][i] * (-theta * net.free_flow_cost[l]).exp() * sum[j][d] / sum[o][d]
        })
        .collect();
    (mu, flows)
}

#[test]
fn cyclic_logit_matches_power_series() {
    for seed in 0..10 {
        let n = 6;
        let net = random_cyclic(seed, n, 3);
        let theta = 3.0;
        let (mu_ps, x_ps) = power_series_logit(&net, theta, 0, n - 1);
        let mu = expected_min_cost(&net, &net.free_flow_cost, AlgebraKind::Logit { theta }, n - 1).unwrap();
        assert!(max_abs_diff(&mu, &mu_ps) <= 1e-9, "seed {seed}");
        let params = NgevParams::logit(&net.graph, theta).unwrap();
        let mut q = vec![0.0; n];
        q[0] = 1.0;
        let x = load(&net, &net.free_flow_cost, &params, n - 1, &q, LoadMethod::Mta).unwrap();
        assert!(max_abs_diff(&x, &x_ps) <= 1e-9, "seed {seed}");
    }
}

fn link(net: &Network, tail: u64, head: u64) -> usize {
    let g = &net.graph;
    g.find_link(g.node_by_label(tail).unwrap(), g.node_by_label(head).unwrap()).unwrap()
}

#[test]
fn cyclic_example_agrees_with_truncated_enumeration() {
    let (net, demand) = cyclic_example();
    let costs = &net.free_flow_cost;
    let o = net.graph.node_by_label(1).unwrap();
    let d = net.graph.node_by_label(9).unwrap();
    let into_d: Vec<usize> = net.graph.in_links(d).to_vec();
    for model in MODELS {
        let mta = assign_all(&net, costs, model, &demand, LoadMethod::Mta).unwrap();
        let commodity = &build_commodities(&net, &demand, model, costs).unwrap()[0];
        for loops in [0, 2, 4] {
            let e = enumerate_path_flows(&net, costs, &commodity.params, o, d, 1.0, loops, 1_000_000).unwrap();
            let deficit: Vec<f64> = mta.aggregate.iter().zip(&e.link_flows).map(|(a, b)| a - b).collect();
            let at_d: f64 = into_d.iter().map(|&l| deficit[l]).sum();
            assert!((at_d - e.truncated_mass).abs() <= 1e-12);
            let bound = (loops as f64 + 2.0) * e.truncated_mass + 1e-12;
            for &v in &deficit {
                assert!(v >= -1e-12 && v <= bound, "{model:?} loops {loops}: {v} > {bound}");
            }
        }
    }
}

#[test]
fn logit_on_cyclic_example_reproduces_published_flows() {
    let (net, demand) = cyclic_example();
    let expected_mta = [0.29, 0.71, 0.06, 0.23, 0.06, 0.63, 0.83, 0.08, 0.41, 0.71, 0.08, 0.29, 0.20, 0.18];
    let expected_dial = [0.33, 0.67, 0.09, 0.24, 0.09, 0.67, 0.91, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0];
    for (method, expected) in [(LoadMethod::Mta, expected_mta), (LoadMethod::Dial, expected_dial)] {
        let x = assign_all(&net, &net.free_flow_cost, RouteModel::Model1, &demand, method).unwrap().aggregate;
        for (l, (&got, &want)) in x.iter().zip(&expected).enumerate() {
            assert!((got - want).abs() <= 0.005 + 1e-12, "{method:?} link {l}: {got:.4} vs {want}");
        }
    }
}

#[test]
fn cyclic_example_structure() {
    let (net, demand) = cyclic_example();
    let costs = &net.free_flow_cost;
    let logit = assign_all(&net, costs, RouteModel::Model1, &demand, LoadMethod::Mta).unwrap().aggregate;
    for model in MODELS {
        let dial = assign_all(&net, costs, model, &demand, LoadMethod::Dial).unwrap().aggregate;
        for (t, h) in [(4, 7), (7, 8), (5, 8), (8, 9), (8, 5), (6, 5)] {
            assert_eq!(dial[link(&net, t, h)], 0.0, "{model:?} {t}-{h}");
        }
        assert!((dial[link(&net, 6, 9)] - 1.0).abs() <= 1e-12);
        if model != RouteModel::Model1 {
            let mta = assign_all(&net, costs, model, &demand, LoadMethod::Mta).unwrap().aggregate;
            for (t, h) in [(8, 5), (6, 5)] {
                let l = link(&net, t, h);
                assert!(mta[l] < logit[l], "{model:?} {t}-{h}: {} vs {}", mta[l], logit[l]);
            }
        }
    }
}

#[test]
fn larger_scale_concentrates_flow_on_the_cheaper_route() {
    let net = diamond(1.0, 1.3, 1.0);
    let mut last = 0.0;
    for theta in [0.1, 0.5, 1.0, 2.0, 5.0, 20.0] {
        let params = NgevParams::logit(&net.graph, theta).unwrap();
        let x = load(&net, &net.free_flow_cost, &params, 3, &[1.0, 0.0, 0.0, 0.0], LoadMethod::Mta).unwrap();
        assert!(x[0] > last);
        last = x[0];
    }
    assert!(last > 0.99);
}

#[test]
fn equal_routes_split_evenly() {
    let net = diamond(1.0, 1.0, 1.0);
    for model in MODELS {
        let demand = ngev_core::DemandTable::from_pairs(4, [(0, 3, 10.0)]).unwrap();
        let x = assign_all(&net, &net.free_flow_cost, model, &demand, LoadMethod::Mta).unwrap().aggregate;
        assert!(max_abs_diff(&x, &[5.0; 4]) <= 1e-12);
    }
}

#[test]
fn probit_is_reproducible_and_tends_to_shortest_path() {
    let (net, demand) = cyclic_example();
    let costs = &net.free_flow_cost;
    let mut opts = ProbitOptions::new(300, 0.3, 42);
    opts.checkpoints = vec![10, 100, 300];
    let a = probit_load(&net, costs, &demand, &opts).unwrap();
    opts.parallel = false;
    let b = probit_load(&net, costs, &demand, &opts).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.checkpoints.last().unwrap().1, a.mean);
    let c = probit_load(&net, costs, &demand, &ProbitOptions::new(300, 0.3, 43)).unwrap();
    assert_ne!(a.mean, c.mean);

    let sp = assign_all(&net, costs, RouteModel::ShortestPath, &demand, LoadMethod::Mta).unwrap();
    let tiny = probit_load(&net, costs, &demand, &ProbitOptions::new(50, 1e-10, 1)).unwrap();
    assert!(max_abs_diff(&tiny.mean, &sp.aggregate) <= 1e-12);
}

#[test]
fn unreachable_demand_is_reported() {
    let net = Network::from_links(3, &[(0, 1, 1.0)], 1.0).unwrap();
    let demand = ngev_core::DemandTable::from_pairs(3, [(0, 2, 1.0)]).unwrap();
    let err = assign_all(&net, &net.free_flow_cost, RouteModel::Model1, &demand, LoadMethod::Mta).unwrap_err();
    assert_eq!(err.category(), "unreachable");
}
