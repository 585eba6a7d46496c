"""Smoke test for the ngev Python extension.

Build and install first:  pip install maturin && maturin develop -m crates/python/Cargo.toml
"""

import math
import pathlib
import sys

import ngev

DATA = pathlib.Path(__file__).resolve().parent.parent / "data"


def check(condition, message):
    if not condition:
        print(f"FAIL: {message}")
        sys.exit(1)
    print(f"ok: {message}")


def main():
    net, demand = ngev.read_tntp(str(DATA / "fig2_cyclic/net.tntp"), str(DATA / "fig2_cyclic/trips.tntp"))
    check(net.link_count == 14, "cyclic example has 14 links")

    flows = ngev.load(net, demand, model="model1")
    out_of_origin = sum(x for (t, _), x in zip(net.links, flows) if t == 1)
    check(abs(out_of_origin - demand.total) < 1e-9, "origin outflow equals demand")

    diamond = ngev.Network(4, [(0, 1, 1.0, 1.0), (1, 3, 1.0, 1.0), (0, 2, 1.0, 1.0), (2, 3, 1.0, 1.0)])
    split = ngev.load(diamond, ngev.Demand(4, [(0, 3, 2.0)]), model="logit(1)")
    check(all(abs(x - 1.0) < 1e-12 for x in split), "symmetric diamond splits evenly")

    grid_net, grid_demand = ngev.grid(1)
    check((grid_net.node_count, grid_net.link_count) == (25, 80), "grid k=1 has 25 nodes and 80 links")
    a = ngev.probit(grid_net, grid_demand, draws=20, seed=3)
    b = ngev.probit(grid_net, grid_demand, draws=20, seed=3)
    check(a == b, "probit loading is reproducible for a seed")

    sf_net, sf_demand = ngev.read_tntp(
        str(DATA / "sioux_falls/SiouxFalls_net.tntp"), str(DATA / "sioux_falls/SiouxFalls_trips.tntp")
    )
    problem = ngev.Problem(sf_net, sf_demand, model="model3", method="mta")
    pl = problem.solve("pl", max_iter=300, tol=1e-12)
    agp = problem.solve("agp", max_iter=300, tol=1e-12)
    gap = abs(pl.objective - agp.objective) / abs(agp.objective)
    check(gap < 1e-4, f"PL and AGP objectives agree on Sioux Falls (relative gap {gap:.1e})")
    check(abs(problem.dual_objective(agp.costs) - agp.objective) < 1e-6 * abs(agp.objective),
          "dual objective matches the AGP solution")

    msa = problem.solve("msa", max_iter=5, tol=0.0, reference=pl.flows)
    check(len(msa.eta) == 5 and all(math.isfinite(e) for e in msa.eta), "MSA reports eta per iteration")

    try:
        ngev.Problem(sf_net, sf_demand, model="nonsense")
    except ValueError:
        check(True, "bad model name raises ValueError")
    else:
        check(False, "bad model name raises ValueError")
    print("smoke test passed")


if __name__ == "__main__":
    main()
