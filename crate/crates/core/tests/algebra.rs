mod common;

use common::*;
use ngev_core::algebra::expected_min_cost;
use ngev_core::network::sp_distances_to;
use ngev_core::{AlgebraKind, NgevParams};
use proptest::prelude::*;

fn kinds(params: &NgevParams) -> [AlgebraKind<'_>; 3] {
    [
        AlgebraKind::ShortestPath,
        AlgebraKind::Logit { theta: 0.7 },
        AlgebraKind::Ngev(params),
    ]
}

fn close(a: f64, b: f64) -> bool {
    a == b || (a - b).abs() <= 1e-9 * (1.0 + a.abs().max(b.abs()))
}

fn value() -> impl Strategy<Value = f64> {
    prop_oneof![9 => -50.0f64..50.0, 1 => Just(f64::INFINITY)]
}

proptest! {
    #[test]
    fn semiring_laws(x in value(), y in value(), z in value(), theta in 0.1f64..5.0) {
        let params = NgevParams::new(vec![theta], vec![]).unwrap();
        for k in kinds(&params) {
            let zero = AlgebraKind::ZERO;
            let one = AlgebraKind::UNIT;
            prop_assert!(close(k.oplus(0, x, y), k.oplus(0, y, x)));
            prop_assert!(close(k.oplus(0, k.oplus(0, x, y), z), k.oplus(0, x, k.oplus(0, y, z))));
            prop_assert_eq!(k.oplus(0, x, zero), x);
            prop_assert!(close(k.otimes(0, x, y), k.otimes(0, y, x)));
            prop_assert!(close(k.otimes(0, k.otimes(0, x, y), z), k.otimes(0, x, k.otimes(0, y, z))));
            prop_assert_eq!(k.otimes(0, x, one), x);
            prop_assert_eq!(k.otimes(0, x, zero), zero);
            prop_assert!(close(
                k.otimes(0, x, k.oplus(0, y, z)),
                k.oplus(0, k.otimes(0, x, y), k.otimes(0, x, z))
            ));
            // ⊕ never exceeds the smaller argument
            prop_assert!(k.oplus(0, x, y) <= x.min(y) + 1e-12);
        }
    }

    #[test]
    fn shortest_path_instance_matches_bellman_ford(seed in any::<u64>(), n in 3usize..=12, extra in 0usize..15) {
        let net = random_cyclic(seed, n, extra);
        let costs = &net.free_flow_cost;
        let d = n - 1;
        let mut dist = vec![f64::INFINITY; n];
        dist[d] = 0.0;
        for _ in 0..n {
            for (l, (i, j)) in net.graph.links().enumerate() {
                dist[i] = dist[i].min(costs[l] + dist[j]);
            }
        }
        let mu = expected_min_cost(&net, costs, AlgebraKind::ShortestPath, d).unwrap();
        prop_assert!(max_abs_diff(&mu, &dist) <= 1e-12);
        prop_assert!(max_abs_diff(&sp_distances_to(&net.graph, costs, d, None), &dist) <= 1e-12);
    }

    #[test]
    fn logit_value_is_below_shortest_path(seed in any::<u64>(), n in 3usize..=10, theta in 0.5f64..5.0) {
        let net = random_dag(seed, n, 0.5);
        let costs = &net.free_flow_cost;
        let sp = expected_min_cost(&net, costs, AlgebraKind::ShortestPath, n - 1).unwrap();
        let lo = expected_min_cost(&net, costs, AlgebraKind::Logit { theta }, n - 1).unwrap();
        let hi = expected_min_cost(&net, costs, AlgebraKind::Logit { theta: theta * 2.0 }, n - 1).unwrap();
        for i in 0..n {
            prop_assert!(lo[i] <= hi[i] + 1e-12 && hi[i] <= sp[i] + 1e-12);
        }
    }
}

#[test]
fn large_scale_logit_approaches_shortest_path() {
    let (net, _) = cyclic_example();
    let costs = &net.free_flow_cost;
    let sp = expected_min_cost(&net, costs, AlgebraKind::ShortestPath, 8).unwrap();
    let mu = expected_min_cost(&net, costs, AlgebraKind::Logit { theta: 200.0 }, 8).unwrap();
    assert!(max_abs_diff(&sp, &mu) <= 0.01);
}

#[test]
fn unreachable_nodes_keep_the_zero_element() {
    let net = ngev_core::Network::from_links(3, &[(0, 1, 1.0), (2, 0, 1.0)], 1.0).unwrap();
    let mu = expected_min_cost(&net, &net.free_flow_cost, AlgebraKind::Logit { theta: 1.0 }, 1).unwrap();
    assert_eq!(mu[1], 0.0);
    assert!(mu[0].is_finite() && mu[2].is_finite());
    let mu = expected_min_cost(&net, &net.free_flow_cost, AlgebraKind::ShortestPath, 2).unwrap();
    assert_eq!(mu[0], f64::INFINITY);
}
