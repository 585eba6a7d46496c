#![allow(dead_code)]

use std::path::PathBuf;

use ngev_core::network::parse_tntp;
use ngev_core::{DemandTable, Network};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn data_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data")
}

fn read_instance(dir: &str, net: &str, trips: &str) -> (Network, DemandTable) {
    let base = data_dir().join(dir);
    let net = std::fs::read_to_string(base.join(net)).unwrap();
    let trips = std::fs::read_to_string(base.join(trips)).unwrap();
    parse_tntp(&net, &trips).unwrap().into_parts()
}

/// The nine-node cyclic example with unit demand from node 1 to node 9.
pub fn cyclic_example() -> (Network, DemandTable) {
    read_instance("fig2_cyclic", "net.tntp", "trips.tntp")
}

pub fn sioux_falls() -> (Network, DemandTable) {
    read_instance("sioux_falls", "SiouxFalls_net.tntp", "SiouxFalls_trips.tntp")
}

/// Two parallel routes 0→1→3 and 0→2→3.
pub fn diamond(upper: f64, lower: f64, capacity: f64) -> Network {
    Network::from_links(
        4,
        &[(0, 1, upper), (1, 3, upper), (0, 2, lower), (2, 3, lower)],
        capacity,
    )
    .unwrap()
}

/// A random DAG on `n` nodes ordered 0..n with node n−1 reachable from all.
pub fn random_dag(seed: u64, n: usize, density: f64) -> Network {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut links = Vec::new();
    for i in 0..n - 1 {
        links.push((i, i + 1, rng.random_range(0.5..3.0)));
        for j in i + 2..n {
            if rng.random_bool(density) {
                links.push((i, j, rng.random_range(0.5..3.0)));
            }
        }
    }
    Network::from_links(n, &links, 1.0).unwrap()
}

/// Random demand from a few origins towards the last node.
pub fn random_demand(seed: u64, n: usize) -> DemandTable {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    let mut pairs = vec![(0, n - 1, rng.random_range(0.5..2.0))];
    for o in 1..n - 1 {
        if rng.random_bool(0.4) {
            pairs.push((o, n - 1, rng.random_range(0.1..2.0)));
        }
    }
    DemandTable::from_pairs(n, pairs).unwrap()
}

/// A small strongly connected network with cycles.
pub fn random_cyclic(seed: u64, n: usize, extra: usize) -> Network {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut links = Vec::new();
    for i in 0..n {
        links.push((i, (i + 1) % n, rng.random_range(0.5..3.0)));
        links.push(((i + 1) % n, i, rng.random_range(0.5..3.0)));
    }
    for _ in 0..extra {
        let i = rng.random_range(0..n);
        let j = rng.random_range(0..n);
        if i != j && !links.iter().any(|&(a, b, _)| a == i && b == j) {
            links.push((i, j, rng.random_range(0.5..3.0)));
        }
    }
    Network::from_links(n, &links, 1.0).unwrap()
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}
