"""Shared builders for the test suite."""
from __future__ import annotations

import numpy as np

from supplynet.demand import DemandModel, DemandPmf
from supplynet.network import build_network
from supplynet.solver import SolverInstance

COSTS = {"production": 4.0, "shortage": 10.0, "holding": 2.0}


def firm(name, bom=None, lower=0, upper=100, costs=None, input_upper=None):
    bounds = {"lower": lower, "upper": upper}
    if input_upper is not None:
        bounds["input_upper"] = input_upper
    return {"name": name, "bom": bom or {}, "costs": dict(costs or COSTS), "bounds": bounds}


def three_firm_network(**kw):
    """Two raw suppliers v1, v2 feeding distributor v3 with bill of materials [2, 1, 0]."""
    return build_network({"firms": [firm("v1", **kw), firm("v2", **kw), firm("v3", {"v1": 2, "v2": 1}, **kw)]})


def random_pmf(rng: np.random.Generator, max_size: int = 12, max_start: int = 6) -> DemandPmf:
    size = int(rng.integers(1, max_size + 1))
    w = rng.random(size)
    # occasional interior zeros exercise flat stretches of the CDF
    w[rng.random(size) < 0.15] = 0.0
    w[0] += 0.05
    w[-1] += 0.05
    return DemandPmf.from_weights(int(rng.integers(0, max_start + 1)), w)


def random_instance(rng: np.random.Generator, lower_range=(-30, 10), max_grid: int = 150) -> SolverInstance:
    """Small solver instance: horizon <= 6, support size <= 12, stage grid <= max_grid points."""
    while True:
        T = int(rng.integers(1, 7))
        if rng.random() < 0.3:
            demand = DemandModel.per_stage([random_pmf(rng) for _ in range(T)])
        else:
            demand = DemandModel.constant(random_pmf(rng))
        lower = int(rng.integers(lower_range[0], lower_range[1] + 1))
        dmax = demand.max_support(T)
        grid_start = lower - (T - 1) * dmax
        top = grid_start + max_grid - 1
        if top < lower + dmax:
            continue
        # bias some instances toward a tight band so the upper clamp shows up
        if rng.random() < 0.25:
            upper = int(rng.integers(lower + dmax, min(top, lower + dmax + 3) + 1))
        else:
            upper = int(rng.integers(lower + dmax, top + 1))
        c = round(float(rng.uniform(0.5, 10.0)), 3)
        s = round(float(rng.uniform(0.5, 25.0)), 3)
        h = round(float(rng.uniform(0.05, 5.0)), 3)
        return SolverInstance(c, s, h, lower, upper, demand, T)


def random_instances(n: int, seed: int, **kw) -> list[SolverInstance]:
    rng = np.random.default_rng(seed)
    return [random_instance(rng, **kw) for _ in range(n)]
