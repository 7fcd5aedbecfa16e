"""Monte Carlo estimate of each supplier's demand pmf, echelon by echelon.

Supply is idealized while estimating: every order is delivered in full and
production equals the request. A firm's order stream then depends only on
its own demand stream, so lower echelons never need upstream policies and
each firm is simulated once, vectorized over replicates.
"""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Any, Iterable, Mapping

import numpy as np

from .demand import DemandModel, DemandPmf, pmf_from_samples
from .errors import MissingDistributorPmf
from .network import Network, echelon_order
from .solver import PolicyTable, SolverInstance, compute_policy


@dataclass(frozen=True)
class PropagationConfig:
    replicates: int = 200
    horizon: int = 250
    warmup: int | None = None  # None means 4 * network depth
    base_seed: int = 0

    def __post_init__(self):
        if self.replicates < 1 or self.horizon < 1:
            raise ValueError("replicates and horizon must be positive")
        if self.warmup is not None and not 0 <= self.warmup < self.horizon:
            raise ValueError("need 0 <= warmup < horizon")

    def warmup_for(self, net: Network) -> int:
        w = 4 * net.depth if self.warmup is None else self.warmup
        if w >= self.horizon:
            raise ValueError(f"warmup {w} leaves no samples in a horizon of {self.horizon}")
        return w


@dataclass(frozen=True)
class PropagationResult:
    pmfs: dict[int, DemandPmf]
    policies: dict[int, PolicyTable]
    diagnostics: dict[int, dict[str, Any]] = field(default_factory=dict)
    raised_upper: dict[int, int] = field(default_factory=dict)

    def demand_models(self) -> dict[int, DemandModel]:
        return {i: DemandModel.constant(p) for i, p in self.pmfs.items()}


def collect_orders(fragments: Iterable[Mapping[int, np.ndarray]]) -> dict[int, np.ndarray]:
    """Pool order samples per firm across fragments, sorted so the result is order-free."""
    pooled: dict[int, list[np.ndarray]] = {}
    for frag in fragments:
        for i, arr in frag.items():
            pooled.setdefault(i, []).append(np.asarray(arr, dtype=np.int64).ravel())
    return {i: np.sort(np.concatenate(parts)) for i, parts in sorted(pooled.items())}


def simulate_orders(threshold: int, demand: np.ndarray, start: np.ndarray) -> np.ndarray:
    """Order stream of an order-up-to firm with full supply.

    ``demand`` is (R, H), ``start`` is (R,) initial stock. Each step orders
    ``max(M - x, 0)``, produces it, ships ``min(demand, x + order)``.
    """
    x = start.astype(np.int64).copy()
    orders = np.empty_like(demand)
    for k in range(demand.shape[1]):
        n = np.maximum(threshold - x, 0)
        orders[:, k] = n
        x = np.maximum(x + n - demand[:, k], 0)
    return orders


def support_bound(net: Network, pmfs: Mapping[int, DemandPmf], i: int) -> int:
    """Largest demand firm ``i`` can see, summing each customer's widest order times BOM."""
    total = 0
    for j in net.customers(i):
        p = net.firms[j].params
        total += (p.inv_upper - p.inv_lower + pmfs[j].support_max) * net.firms[j].bom[i]
    return total


def _drift(samples: np.ndarray) -> float:
    """Relative change of the per-step mean between halves of the sample window."""
    per_step = samples.mean(axis=0)
    half = per_step.size // 2
    if half == 0:
        return 0.0
    a, b = per_step[:half].mean(), per_step[half:].mean()
    return float(abs(b - a) / max(abs(a), 1e-12)) if a or b else 0.0


def propagate(
    net: Network,
    distributor_pmfs: Mapping[int, DemandPmf],
    solver_horizon: int,
    cfg: PropagationConfig = PropagationConfig(),
    workers: int = 1,
    raise_upper: bool = False,
) -> PropagationResult:
    """Solve every firm's policy and estimate every supplier's demand pmf.

    With ``raise_upper`` a firm whose upper bound is below ``lower + D`` has
    it lifted to exactly that level instead of failing; the lifted bounds are
    reported in ``PropagationResult.raised_upper``.
    """
    missing = [net.firms[i].name for i in net.distributors if i not in distributor_pmfs]
    if missing:
        raise MissingDistributorPmf(f"no demand pmf for distributor(s) {', '.join(missing)}")
    warm = cfg.warmup_for(net)
    R, H = cfg.replicates, cfg.horizon
    dists = net.distributors

    # Same draw layout as the simulator: initial output stocks, then per-step uniforms.
    start = np.zeros((R, net.n), dtype=np.int64)
    uniforms = np.zeros((R, H, len(dists)))
    for r in range(R):
        rng = np.random.default_rng(cfg.base_seed + r)
        for f in net.firms:
            start[r, f.id] = rng.integers(0, f.params.inv_upper + 1)
        uniforms[r] = rng.random((H, len(dists)))

    demand: dict[int, np.ndarray] = {}
    for col, i in enumerate(dists):
        demand[i] = np.asarray(distributor_pmfs[i].quantile(uniforms[:, :, col]), dtype=np.int64)

    pmfs: dict[int, DemandPmf] = {i: distributor_pmfs[i] for i in dists}
    policies: dict[int, PolicyTable] = {}
    diagnostics: dict[int, dict[str, Any]] = {}
    orders: dict[int, np.ndarray] = {}

    raised: dict[int, int] = {}

    def work(i: int) -> tuple[PolicyTable, np.ndarray]:
        params = net.firms[i].params
        need = params.inv_lower + pmfs[i].support_max
        if raise_upper and params.inv_upper < need:
            params = replace(params, inv_upper=need)
            raised[i] = need
        inst = SolverInstance.from_params(params, pmfs[i], solver_horizon)
        table = compute_policy(inst)
        return table, simulate_orders(table.thresholds[0], demand[i], start[:, i])

    pool = ThreadPoolExecutor(max_workers=workers) if workers > 1 else None
    try:
        for group in echelon_order(net):
            for i in group:
                if i in demand:
                    continue
                stream = np.zeros((R, H), dtype=np.int64)
                for j in net.customers(i):
                    stream += orders[j] * net.firms[j].bom[i]
                demand[i] = stream
                window = stream[:, warm:]
                pmfs[i] = pmf_from_samples(window)
                diagnostics[i] = {
                    "samples": int(window.size),
                    "mean": float(window.mean()),
                    "support_max": pmfs[i].support_max,
                    "support_bound": support_bound(net, pmfs, i),
                    "drift": _drift(window),
                }
            results = list(pool.map(work, group)) if pool else [work(i) for i in group]
            for i, (table, stream) in zip(group, results):
                policies[i] = table
                orders[i] = stream
    finally:
        if pool:
            pool.shutdown()
    return PropagationResult(pmfs, policies, diagnostics, dict(sorted(raised.items())))
