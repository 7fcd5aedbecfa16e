"""Acceptance checks: each test carries a ``criterion`` mark and prints PASS/FAIL in the summary."""
from __future__ import annotations

import time

import numpy as np
import pytest

from helpers import random_instances
from supplynet.demand import DemandModel, uniform
from supplynet.scenario import parse_scenario, preset_path, run_propagation, run_scenario, simulate
from supplynet.solver import SolverInstance, brute_force_dp, compute_policy

SEEDS = range(20)
TOL = 1e-9


@pytest.fixture(scope="module")
def oracle_runs():
    """200 random small instances with solver tables, oracle tables and the time spent."""
    t0 = time.perf_counter()
    runs = []
    for inst in random_instances(200, seed=2024):
        runs.append((inst, compute_policy(inst), brute_force_dp(inst)))
    return runs, time.perf_counter() - t0


@pytest.mark.criterion(1, "threshold policy equals brute-force DP on 200 random instances")
def test_oracle_equivalence(oracle_runs):
    runs, elapsed = oracle_runs
    assert len(runs) == 200
    for inst, table, dp in runs:
        assert inst.horizon <= 6
        assert all(inst.demand.at(k).probs.size <= 12 for k in range(inst.horizon))
        assert -30 <= inst.lower <= 10
        for k in range(inst.horizon):
            grid = table.grid(k)
            assert grid.size <= 150
            for x in grid:
                assert table.optimal_request(k, int(x)) == dp.action(k, int(x)), (inst, k, x)
                assert abs(table.cost_to_go(k, int(x)) - dp.value(k, int(x))) <= TOL, (inst, k, x)
    cases = {c for _, t, _ in runs for c in t.cases}
    assert cases == {"lower", "interior", "upper"}
    assert elapsed < 30.0


@pytest.mark.criterion(2, "single-stage newsvendor threshold is 4")
def test_newsvendor_fractile():
    inst = SolverInstance(4.0, 10.0, 2.0, -20, 50, DemandModel.constant(uniform(0, 9)), 1)
    table = compute_policy(inst)
    assert table.thresholds == (4,)
    cdf = [uniform(0, 9).cdf(y) for y in range(10)]
    assert 4 == min(y for y in range(10) if cdf[y] >= (10 - 4) / (10 + 2))
    dp = brute_force_dp(inst)
    assert dp.action(0, -20) == 4 - (-20)


@pytest.mark.criterion(3, "structural properties of F, G and the cost-to-go")
def test_structural_invariants(oracle_runs):
    runs, _ = oracle_runs
    for inst, table, _ in runs:
        T = inst.horizon
        for k in range(T):
            F, G = table.F[k], table.G[k]
            assert np.all(np.diff(F) >= -TOL)
            assert np.all(np.diff(G, 2) >= -TOL)
            assert np.allclose(np.diff(G), F[:-1], rtol=0, atol=TOL)
            J = table.cost_to_go_table(k)
            assert np.all(np.diff(J, 2) >= -TOL)
            lo, hi = inst.band(k)
            assert lo <= table.thresholds[k] <= hi
        assert all(table.cost_to_go(T, int(x)) == 0.0 for x in range(inst.lower, inst.upper + 1))
        last = inst.demand.at(T - 1)
        s, h = inst.shortage_penalty, inst.holding_cost
        closed = np.array([-s + (s + h) * last.cdf(int(y)) for y in table.grid(T - 1)])
        assert np.allclose(table.F[T - 1], closed, rtol=0, atol=TOL)


@pytest.mark.criterion(4, "nonnegative lower bound makes the threshold bind at lower + D")
def test_boundary_binding(oracle_runs):
    runs, _ = oracle_runs
    extra = random_instances(60, seed=77, lower_range=(0, 10))
    pool = [(i, t, d) for i, t, d in runs if i.lower >= 0]
    pool += [(i, compute_policy(i), brute_force_dp(i)) for i in extra]
    assert len(pool) >= 50
    for inst, table, dp in pool:
        for k in range(inst.horizon):
            floor = inst.lower + inst.demand.at(k).support_max
            assert table.thresholds[k] == floor
            for x in range(table.grid_start[k], floor + 1):
                assert dp.action(k, x) == floor - x


# -- preset scenarios ----------------------------------------------------------

def _load(name):
    return parse_scenario(preset_path(name))


@pytest.fixture(scope="module")
def presets():
    t0 = time.perf_counter()
    ideal = _load("ideal")
    prop = run_propagation(ideal)
    runs = {name: [] for name in ("ideal", "outage", "demand_shock")}
    scen = {name: _load(name) for name in runs}
    for seed in SEEDS:
        runs["ideal"].append(simulate(scen["ideal"].with_seed(seed), prop.policies, prop.raised_upper))
    ideal_time = time.perf_counter() - t0
    for name in ("outage", "demand_shock"):
        for seed in SEEDS:
            runs[name].append(simulate(scen[name].with_seed(seed), prop.policies, prop.raised_upper))
    return {"scen": scen, "prop": prop, "runs": runs, "ideal_time": ideal_time}


@pytest.mark.criterion(5, "ideal scenario: distributors stay above x^L and no shortages after warmup")
def test_ideal_scenario(presets):
    s = presets["scen"]["ideal"]
    net = s.network
    warm = 4 * net.depth
    assert net.n == 15 and s.steps == 250 and not s.shocks
    for trace in presets["runs"]["ideal"]:
        for d in net.distributors:
            assert np.all(trace.inv_out[warm + 1 :, d] >= net.firms[d].params.inv_lower)
        assert np.all(trace.shortage[warm + 1 :] == 0)
    assert presets["ideal_time"] < 60.0


def _first_shortage(trace, firm, start):
    hits = np.flatnonzero(trace.shortage[start:, firm] > 0)
    return start + int(hits[0]) if hits.size else np.inf


def _restore_step(trace, firm, lower, after):
    for k in range(after + 1, trace.steps):
        if trace.shortage[k, firm] == 0 and trace.inv_out[k, firm] >= lower:
            return k
    return np.inf


@pytest.mark.criterion(6, "outage: shortages travel downstream with delay, distributors recover first")
def test_outage_scenario(presets):
    s = presets["scen"]["outage"]
    net = s.network
    (shock,) = s.shocks
    assert (shock.kind, net.firms[shock.firm].name, shock.start, shock.end) == ("full_outage", "v1", 100, 150)
    affected = [shock.firm] + net.downstream_of(shock.firm)
    delays = []
    for trace in presets["runs"]["outage"]:
        first = {i: _first_shortage(trace, i, shock.start) for i in affected}
        for i in affected[1:]:
            upstream = min(first[j] for j in net.suppliers(i) if j in affected)
            delays.append(first[i] - upstream)
        restore = {i: _restore_step(trace, i, net.firms[i].params.inv_lower, shock.end) for i in affected}
        dist = max(restore[i] for i in affected if net.is_distributor(i))
        assert dist <= shock.end + 3
        assert all(restore[i] >= dist for i in affected)
    delays = np.array(delays, dtype=float)
    assert np.all(delays >= 0)
    assert np.mean(delays > 0) >= 0.8


def _longest_run(mask):
    best, start = (0, 0), None
    for k, v in enumerate(list(mask) + [False]):
        if v and start is None:
            start = k
        elif not v and start is not None:
            if k - start > best[1] - best[0]:
                best = (start, k)
            start = None
    return best


@pytest.mark.criterion(7, "demand shock: distributor fulfilment saturates, far suppliers stay within support")
def test_demand_shock_scenario(presets):
    s = presets["scen"]["demand_shock"]
    net = s.network
    prop = presets["prop"]
    warm = s.propagation.warmup_for(net)
    for trace in presets["runs"]["demand_shock"]:
        for d in net.distributors:
            m = prop.policies[d].thresholds[0]
            a, b = _longest_run(trace.omega[:, d] > m)
            shipped = trace.shipped[a + 1 : b, d].astype(float)
            assert shipped.size >= 10
            assert shipped.std() / shipped.mean() < 0.05
            assert abs(shipped.mean() - m) <= 0.05 * m
        for i in range(net.n):
            if net.echelons[i] >= 3:
                assert np.all(trace.omega[warm:, i] <= prop.pmfs[i].support_max), net.firms[i].name


@pytest.mark.criterion(8, "matched seeds: shocked runs cost at least the ideal run, gap opens at onset")
def test_cost_ordering(presets):
    runs = presets["runs"]
    for name in ("outage", "demand_shock"):
        onset = min(sh.start for sh in presets["scen"][name].shocks)
        for ideal, shocked in zip(runs["ideal"], runs[name]):
            assert ideal.ledger.network[-1] <= shocked.ledger.network[-1]
            assert np.array_equal(ideal.ledger.network[:onset], shocked.ledger.network[:onset])
            diff = np.flatnonzero(ideal.ledger.network != shocked.ledger.network)
            assert diff.size and diff[0] >= onset


@pytest.mark.criterion(9, "preset bundles are byte-identical across runs and thread counts")
def test_determinism(tmp_path):
    for name in ("ideal", "outage", "demand_shock"):
        s = _load(name)
        bundles = [
            run_scenario(s, tmp_path / f"{name}_a", workers=1),
            run_scenario(s, tmp_path / f"{name}_b", workers=1),
            run_scenario(s, tmp_path / f"{name}_c", workers=4),
        ]
        files = sorted(p.name for p in bundles[0].iterdir())
        assert {"network.json", "pmfs.csv", "thresholds.csv", "trace.csv", "ledger.csv", "summary.json"} <= set(files)
        for other in bundles[1:]:
            assert sorted(p.name for p in other.iterdir()) == files
            for f in files:
                assert (bundles[0] / f).read_bytes() == (other / f).read_bytes(), (name, f)


@pytest.mark.xfail(strict=True, reason=(
    "in the first shock steps distributors ship the extra demand from stock, "
    "so holding cost drops before any shortage is charged"))
def test_demand_shock_cost_gap_never_negative(presets):
    for ideal, shocked in zip(presets["runs"]["ideal"], presets["runs"]["demand_shock"]):
        assert np.all(shocked.ledger.network >= ideal.ledger.network)


@pytest.mark.xfail(strict=True, reason=(
    "in the first outage steps firms downstream of v1 build from stocked inputs "
    "without ordering replacements, so the outage run is briefly cheaper"))
def test_outage_cost_gap_never_negative_after_onset(presets):
    onset = presets["scen"]["outage"].shocks[0].start
    for ideal, shocked in zip(presets["runs"]["ideal"], presets["runs"]["outage"]):
        assert np.all(shocked.ledger.network[onset:] >= ideal.ledger.network[onset:])
